//! Joint amplitudes and densities sampled on rectangular signal × idler grids.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::source::SourceParams;

/// Tolerance on the discrete normalization of constructed objects.
pub const NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Momentum,
    Position,
}

impl Basis {
    pub fn conjugate(self) -> Self {
        match self {
            Basis::Momentum => Basis::Position,
            Basis::Position => Basis::Momentum,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Basis::Momentum => "momentum",
            Basis::Position => "position",
        }
    }
}

/// One photon of the pair. Alice holds the signal photon, Bob the idler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    Signal,
    Idler,
}

impl Party {
    pub fn other(self) -> Self {
        match self {
            Party::Signal => Party::Idler,
            Party::Idler => Party::Signal,
        }
    }
}

/// Complex amplitude on an `N_s × N_i` grid, row-major in the signal index.
#[derive(Debug, Clone)]
pub struct JointAmplitude {
    basis: Basis,
    signal: Grid1D,
    idler: Grid1D,
    values: Vec<Complex64>,
    norm_constant: f64,
}

impl JointAmplitude {
    /// Samples `f` on the grid and normalizes so that `Σ|f|²Δ_sΔ_i = 1`.
    pub fn from_fn(basis: Basis, signal: Grid1D, idler: Grid1D, f: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let mut values = Vec::with_capacity(signal.count() * idler.count());
        for xs in signal.coords() {
            values.extend(idler.coords().map(|xi| f(xs, xi)));
        }
        Self::from_values(basis, signal, idler, values)
    }

    pub fn from_values(basis: Basis, signal: Grid1D, idler: Grid1D, mut values: Vec<Complex64>) -> Result<Self> {
        if values.len() != signal.count() * idler.count() {
            return Err(Error::Shape(format!(
                "{} values for a {}×{} grid",
                values.len(),
                signal.count(),
                idler.count()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Numerical("non-finite amplitude sample".into()));
        }
        let cell = signal.step() * idler.step();
        let mass: f64 = values.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell;
        if !(mass > 0.0) {
            return Err(Error::Numerical("amplitude vanishes on the grid".into()));
        }
        let c = 1.0 / mass.sqrt();
        values.iter_mut().for_each(|v| *v *= c);
        Ok(Self {
            basis,
            signal,
            idler,
            values,
            norm_constant: c,
        })
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn signal_grid(&self) -> &Grid1D {
        &self.signal
    }

    pub fn idler_grid(&self) -> &Grid1D {
        &self.idler
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Normalization constant `C` applied to the raw samples.
    pub fn norm_constant(&self) -> f64 {
        self.norm_constant
    }

    pub fn get(&self, i_s: usize, i_i: usize) -> Complex64 {
        self.values[i_s * self.idler.count() + i_i]
    }

    pub fn total_probability(&self) -> f64 {
        let cell = self.signal.step() * self.idler.step();
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell
    }
}

/// Samples the source amplitude on `grid × grid`.
///
/// Rejects grids that place fewer than 8 samples across the narrower of the
/// pump-envelope width `1/w0` and the phase-matching width `√(8πK/L)`.
pub fn build_amplitude(params: &SourceParams, grid: &Grid1D) -> Result<JointAmplitude> {
    params.validate()?;
    let width = params.sum_width().min(params.difference_width());
    let samples = width / grid.step();
    if samples < 8.0 {
        return Err(Error::GridTooCoarse {
            samples,
            width,
            step: grid.step(),
        });
    }
    JointAmplitude::from_fn(Basis::Momentum, *grid, *grid, |ks, ki| params.amplitude(ks, ki))
}

/// Applies `U ⊗ U` where `U` is the unitary DFT approximating
/// `ψ(x) = (2π)^{-1/2} ∫ ψ(k) e^{ikx} dk` on the reciprocal grid.
pub fn to_position_basis(amp: &JointAmplitude) -> Result<JointAmplitude> {
    if amp.basis != Basis::Momentum {
        return Err(Error::Shape("to_position_basis expects a momentum amplitude".into()));
    }
    let (ns, ni) = (amp.signal.count(), amp.idler.count());
    let rs = amp.signal.reciprocal();
    let ri = amp.idler.reciprocal();
    let mut planner = FftPlanner::<f64>::new();

    let mut data = amp.values.clone();
    // idler axis: rows are contiguous
    let row_tf = AxisTransform::new(&amp.idler, &ri, &mut planner);
    for row in data.chunks_exact_mut(ni) {
        row_tf.apply(row);
    }
    // signal axis: gather columns
    let col_tf = AxisTransform::new(&amp.signal, &rs, &mut planner);
    let mut col = vec![Complex64::new(0.0, 0.0); ns];
    for j in 0..ni {
        for (i, c) in col.iter_mut().enumerate() {
            *c = data[i * ni + j];
        }
        col_tf.apply(&mut col);
        for (i, c) in col.iter().enumerate() {
            data[i * ni + j] = *c;
        }
    }
    JointAmplitude::from_values(Basis::Position, rs, ri, data)
}

/// One-axis continuous-FT approximation `ψ̃(r_m) = Δk/√(2π) Σ_j ψ(k_j) e^{i k_j r_m}`.
pub(crate) struct AxisTransform {
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    pre: Vec<Complex64>,
    post: Vec<Complex64>,
    scratch_len: usize,
}

impl AxisTransform {
    pub(crate) fn new(from: &Grid1D, to: &Grid1D, planner: &mut FftPlanner<f64>) -> Self {
        let n = from.count();
        let (k0, dk) = (from.min(), from.step());
        let (r0, dr) = (to.min(), to.step());
        let scale = dk / (2.0 * PI).sqrt();
        // k_j r_m = k0 r0 + k0 m dr + j dk r0 + 2π jm/N
        let pre = (0..n).map(|j| Complex64::from_polar(1.0, j as f64 * dk * r0)).collect();
        let post = (0..n)
            .map(|m| Complex64::from_polar(scale, k0 * (r0 + m as f64 * dr)))
            .collect();
        let fft = planner.plan_fft(n, FftDirection::Inverse);
        let scratch_len = fft.get_inplace_scratch_len();
        Self {
            fft,
            pre,
            post,
            scratch_len,
        }
    }

    pub(crate) fn apply(&self, data: &mut [Complex64]) {
        for (d, p) in data.iter_mut().zip(&self.pre) {
            *d *= p;
        }
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.scratch_len];
        self.fft.process_with_scratch(data, &mut scratch);
        for (d, p) in data.iter_mut().zip(&self.post) {
            *d *= p;
        }
    }
}

/// Probability density on a signal × idler grid.
#[derive(Debug, Clone)]
pub struct JointDistribution {
    basis: Basis,
    signal: Grid1D,
    idler: Grid1D,
    values: Vec<f64>,
}

impl JointDistribution {
    /// Normalizes `values` so that `Σ p Δ_sΔ_i = 1`.
    pub fn from_values(basis: Basis, signal: Grid1D, idler: Grid1D, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != signal.count() * idler.count() {
            return Err(Error::Shape(format!(
                "{} values for a {}×{} grid",
                values.len(),
                signal.count(),
                idler.count()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Numerical("density must be finite and >= 0".into()));
        }
        let cell = signal.step() * idler.step();
        let mass: f64 = values.iter().sum::<f64>() * cell;
        if !(mass > 0.0) {
            return Err(Error::Numerical("density vanishes on the grid".into()));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Ok(Self {
            basis,
            signal,
            idler,
            values,
        })
    }

    pub fn from_fn(basis: Basis, signal: Grid1D, idler: Grid1D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(signal.count() * idler.count());
        for xs in signal.coords() {
            values.extend(idler.coords().map(|xi| f(xs, xi)));
        }
        Self::from_values(basis, signal, idler, values)
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn signal_grid(&self) -> &Grid1D {
        &self.signal
    }

    pub fn idler_grid(&self) -> &Grid1D {
        &self.idler
    }

    pub fn grid(&self, party: Party) -> &Grid1D {
        match party {
            Party::Signal => &self.signal,
            Party::Idler => &self.idler,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i_s: usize, i_i: usize) -> f64 {
        self.values[i_s * self.idler.count() + i_i]
    }

    pub fn cell(&self) -> f64 {
        self.signal.step() * self.idler.step()
    }

    pub fn total_probability(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell()
    }

    /// Pearson correlation of the two coordinates.
    pub fn correlation(&self) -> f64 {
        let cell = self.cell();
        let (mut ms, mut mi, mut mss, mut mii, mut msi) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (a, xs) in self.signal.coords().enumerate() {
            for (b, xi) in self.idler.coords().enumerate() {
                let w = self.get(a, b) * cell;
                ms += w * xs;
                mi += w * xi;
                mss += w * xs * xs;
                mii += w * xi * xi;
                msi += w * xs * xi;
            }
        }
        let cov = msi - ms * mi;
        cov / ((mss - ms * ms) * (mii - mi * mi)).sqrt()
    }
}

pub fn to_distribution(amp: &JointAmplitude) -> JointDistribution {
    // |f|² of a normalized amplitude is already normalized
    JointDistribution {
        basis: amp.basis,
        signal: amp.signal,
        idler: amp.idler,
        values: amp.values.iter().map(|v| v.norm_sqr()).collect(),
    }
}

/// Gridded one-dimensional probability density.
#[derive(Debug, Clone)]
pub struct Density1D {
    pub grid: Grid1D,
    pub values: Vec<f64>,
}

impl Density1D {
    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.step()
    }

    pub fn mean_and_variance(&self) -> (f64, f64) {
        let d = self.grid.step();
        let (mut m1, mut m2) = (0.0, 0.0);
        for (x, p) in self.grid.coords().zip(&self.values) {
            m1 += p * x * d;
            m2 += p * x * x * d;
        }
        (m1, m2 - m1 * m1)
    }
}

/// Row or column sums times the conjugate step.
pub fn marginal(dist: &JointDistribution, which: Party) -> Density1D {
    let (ns, ni) = (dist.signal.count(), dist.idler.count());
    match which {
        Party::Signal => {
            let d = dist.idler.step();
            let values = dist
                .values
                .chunks_exact(ni)
                .map(|row| row.iter().sum::<f64>() * d)
                .collect();
            Density1D {
                grid: dist.signal,
                values,
            }
        }
        Party::Idler => {
            let d = dist.signal.step();
            let mut values = vec![0.0; ni];
            for row in dist.values.chunks_exact(ni) {
                for (v, p) in values.iter_mut().zip(row) {
                    *v += p;
                }
            }
            values.iter_mut().for_each(|v| *v *= d);
            debug_assert_eq!(dist.values.len(), ns * ni);
            Density1D {
                grid: dist.idler,
                values,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::auto_grid;

    /// Moderate parameters whose amplitude can be gridded directly.
    fn compact() -> SourceParams {
        SourceParams {
            wavenumber_per_mm: 50.0,
            pump_waist_mm: 0.2,
            ..SourceParams::default()
        }
    }

    /// Enough separation between the q+ and q- widths for the position
    /// correlation to turn positive.
    fn moderate() -> SourceParams {
        SourceParams {
            wavenumber_per_mm: 100.0,
            pump_waist_mm: 0.4,
            ..SourceParams::default()
        }
    }

    fn gaussian(x: f64, s: f64) -> f64 {
        (-0.5 * x * x / (s * s)).exp()
    }

    #[test]
    fn default_grid_is_rejected_as_too_coarse() {
        let p = SourceParams::default();
        let g = auto_grid(&p, 1024, 5.0).unwrap();
        match build_amplitude(&p, &g) {
            Err(Error::GridTooCoarse { samples, .. }) => assert!(samples < 1.0),
            other => panic!("expected GridTooCoarse, got {other:?}"),
        }
    }

    #[test]
    fn normalized_and_exchange_symmetric() {
        let p = compact();
        let g = auto_grid(&p, 512, 5.0).unwrap();
        let amp = build_amplitude(&p, &g).unwrap();
        assert!((amp.total_probability() - 1.0).abs() < NORM_TOL);
        let dist = to_distribution(&amp);
        assert!(dist.values().iter().all(|&v| v >= 0.0));
        assert!((dist.total_probability() - 1.0).abs() < NORM_TOL);
        let n = g.count();
        let peak = dist.values().iter().cloned().fold(0.0, f64::max);
        for a in 0..n {
            for b in 0..a {
                let (x, y) = (dist.get(a, b), dist.get(b, a));
                assert!((x - y).abs() <= 1e-12 * peak, "({a},{b})");
            }
        }
    }

    #[test]
    fn parseval_and_correlation_signs() {
        let p = moderate();
        let g = auto_grid(&p, 2048, 5.0).unwrap();
        let amp = build_amplitude(&p, &g).unwrap();
        let pos = to_position_basis(&amp).unwrap();
        // the constructor renormalizes; check the raw transform preserved mass
        assert!((pos.norm_constant() - 1.0).abs() < NORM_TOL);
        assert!((pos.total_probability() - 1.0).abs() < NORM_TOL);
        let k = to_distribution(&amp).correlation();
        let r = to_distribution(&pos).correlation();
        assert!(k < 0.0, "momentum correlation {k}");
        assert!(r > 0.0, "position correlation {r}");
    }

    #[test]
    fn double_gaussian_fourier_pair() {
        // f = exp(-(ks+ki)²/(4a²)) exp(-(ks-ki)²/(4b²)); its transform is
        // exp(-a²(rs+ri)²/4) exp(-b²(rs-ri)²/4) up to a constant.
        let (a, b) = (0.7, 2.5);
        let g = Grid1D::symmetric(256, 14.0).unwrap();
        let amp = JointAmplitude::from_fn(Basis::Momentum, g, g, |ks, ki| {
            let (sp, sm) = (ks + ki, ks - ki);
            Complex64::new((-sp * sp / (4.0 * a * a) - sm * sm / (4.0 * b * b)).exp(), 0.0)
        })
        .unwrap();
        let pos = to_position_basis(&amp).unwrap();
        let expect = JointAmplitude::from_fn(Basis::Position, *pos.signal_grid(), *pos.idler_grid(), |rs, ri| {
            let (rp, rm) = (rs + ri, rs - ri);
            Complex64::new((-a * a * rp * rp / 4.0 - b * b * rm * rm / 4.0).exp(), 0.0)
        })
        .unwrap();
        let cell = pos.signal_grid().step() * pos.idler_grid().step();
        let err: f64 = pos
            .values()
            .iter()
            .zip(expect.values())
            .map(|(x, y)| (x.norm_sqr() - y.norm_sqr()).abs())
            .sum::<f64>()
            * cell;
        assert!(err < 1e-9, "L1 error {err}");
    }

    #[test]
    fn marginals_of_product_density() {
        let g = Grid1D::symmetric(128, 8.0).unwrap();
        let h = Grid1D::new(64, -3.0, 5.0).unwrap();
        let dist = JointDistribution::from_fn(Basis::Momentum, g, h, |x, y| gaussian(x, 1.3) * gaussian(y - 1.0, 0.7))
            .unwrap();
        let ms = marginal(&dist, Party::Signal);
        let mi = marginal(&dist, Party::Idler);
        assert!((ms.total() - 1.0).abs() < NORM_TOL);
        assert!((mi.total() - 1.0).abs() < NORM_TOL);
        let zs: f64 = g.coords().map(|x| gaussian(x, 1.3)).sum::<f64>() * g.step();
        for (x, v) in g.coords().zip(&ms.values) {
            assert!((v - gaussian(x, 1.3) / zs).abs() < 1e-12);
        }
        let zi: f64 = h.coords().map(|y| gaussian(y - 1.0, 0.7)).sum::<f64>() * h.step();
        for (y, v) in h.coords().zip(&mi.values) {
            assert!((v - gaussian(y - 1.0, 0.7) / zi).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_column_marginal() {
        // all mass in one idler column: the signal marginal is that column renormalized
        let g = Grid1D::symmetric(64, 4.0).unwrap();
        let col = 17;
        let dist = JointDistribution::from_fn(Basis::Momentum, g, g, |x, y| {
            if (y - g.coord(col)).abs() < 1e-12 {
                1.0 + x * x
            } else {
                0.0
            }
        })
        .unwrap();
        let ms = marginal(&dist, Party::Signal);
        let z: f64 = g.coords().map(|x| 1.0 + x * x).sum::<f64>() * g.step();
        for (x, v) in g.coords().zip(&ms.values) {
            assert!((v - (1.0 + x * x) / z).abs() < 1e-12);
        }
    }

    #[test]
    fn marginal_symmetric_about_zero() {
        let p = compact();
        let g = auto_grid(&p, 512, 5.0).unwrap();
        let dist = to_distribution(&build_amplitude(&p, &g).unwrap());
        let m = marginal(&dist, Party::Idler);
        let n = m.values.len();
        for i in 0..n / 2 {
            assert!((m.values[i] - m.values[n - 1 - i]).abs() < 1e-9);
        }
    }
}
