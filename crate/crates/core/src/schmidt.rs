//! Schmidt decomposition of the two-photon amplitude.
//!
//! Gridded amplitudes are decomposed by a dense SVD of `f√(Δ_sΔ_i)`. The
//! source kernel at realistic parameters has thousands of samples per axis
//! and a slowly decaying spectrum, so [`source_schmidt`] instead runs a
//! Lanczos iteration on the banded kernel matrix and returns the leading
//! modes, normalized against the continuum norm of the amplitude.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::amplitude::{Basis, JointAmplitude};
use crate::error::{invalid, Error, Result};
use crate::factorized::{phase_matching_table, FactorSettings};
use crate::grid::Grid1D;
use crate::source::SourceParams;

/// Leading Schmidt modes `f(x_s, x_i) ≈ Σ c_n u_n(x_s) v_n(x_i)`.
///
/// Modes are sampled on their grids with `Σ|u_n|²Δ = 1`.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    basis: Basis,
    coefficients: Vec<f64>,
    signal_grid: Grid1D,
    idler_grid: Grid1D,
    signal_modes: Vec<Vec<Complex64>>,
    idler_modes: Vec<Vec<Complex64>>,
    complete: bool,
    warnings: Vec<String>,
}

impl SchmidtDecomposition {
    pub fn basis(&self) -> Basis {
        self.basis
    }

    /// Coefficients `c_n ≥ 0` in descending order.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn signal_grid(&self) -> &Grid1D {
        &self.signal_grid
    }

    pub fn idler_grid(&self) -> &Grid1D {
        &self.idler_grid
    }

    pub fn mode_count(&self) -> usize {
        self.signal_modes.len()
    }

    pub fn signal_mode(&self, n: usize) -> &[Complex64] {
        &self.signal_modes[n]
    }

    pub fn idler_mode(&self, n: usize) -> &[Complex64] {
        &self.idler_modes[n]
    }

    /// Whether `coefficients` holds the whole spectrum rather than its head.
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `Σ c_n²` over the listed coefficients.
    pub fn captured_weight(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }

    /// `-Σ c_n² log₂ c_n²` in bits.
    pub fn entropy(&self) -> f64 {
        self.coefficients
            .iter()
            .map(|c| c * c)
            .filter(|&w| w > 0.0)
            .map(|w| -w * w.log2())
            .sum()
    }

    /// `Σ c_n⁴`.
    pub fn purity(&self) -> f64 {
        self.coefficients.iter().map(|c| c.powi(4)).sum()
    }

    /// `1 / Σ c_n⁴`.
    pub fn schmidt_number(&self) -> f64 {
        1.0 / self.purity()
    }

    /// `√(2(1 - Σ c_n⁴))`.
    pub fn concurrence(&self) -> f64 {
        concurrence_from_purity(self.purity())
    }

    /// Keeps the first `count` modes and coefficients.
    pub fn truncated(&self, count: usize) -> Self {
        let count = count.min(self.mode_count());
        Self {
            basis: self.basis,
            coefficients: self.coefficients[..count].to_vec(),
            signal_grid: self.signal_grid,
            idler_grid: self.idler_grid,
            signal_modes: self.signal_modes[..count].to_vec(),
            idler_modes: self.idler_modes[..count].to_vec(),
            complete: self.complete && count == self.coefficients.len(),
            warnings: self.warnings.clone(),
        }
    }
}

pub fn concurrence_from_purity(purity: f64) -> f64 {
    (2.0 * (1.0 - purity)).max(0.0).sqrt()
}

/// Dense SVD of a gridded amplitude.
///
/// All `min(N_s, N_i)` coefficients are returned; modes are kept for the
/// first `max_modes`, capped at that rank with a warning.
pub fn schmidt_decompose(amp: &JointAmplitude, max_modes: usize) -> Result<SchmidtDecomposition> {
    let total = amp.total_probability();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::NotNormalized { total });
    }
    let (ns, ni) = (amp.signal_grid().count(), amp.idler_grid().count());
    let (ds, di) = (amp.signal_grid().step(), amp.idler_grid().step());
    let scale = (ds * di).sqrt();
    let m = DMatrix::from_row_iterator(ns, ni, amp.values().iter().map(|v| v * scale));
    let svd = m.svd(true, true);
    let u = svd.u.ok_or_else(|| Error::Numerical("SVD did not return U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD did not return Vᴴ".into()))?;

    let rank = ns.min(ni);
    let mut warnings = Vec::new();
    let keep = if max_modes > rank {
        warnings.push(format!("requested {max_modes} modes, grid rank is {rank}"));
        rank
    } else {
        max_modes
    };
    let (us, ui) = (1.0 / ds.sqrt(), 1.0 / di.sqrt());
    let signal_modes = (0..keep)
        .map(|n| u.column(n).iter().map(|z| z * us).collect())
        .collect();
    let idler_modes = (0..keep).map(|n| v_t.row(n).iter().map(|z| z * ui).collect()).collect();
    Ok(SchmidtDecomposition {
        basis: amp.basis(),
        coefficients: svd.singular_values.iter().copied().collect(),
        signal_grid: *amp.signal_grid(),
        idler_grid: *amp.idler_grid(),
        signal_modes,
        idler_modes,
        complete: true,
        warnings,
    })
}

/// Discretization of the source kernel for [`source_schmidt`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSchmidtSettings {
    /// Number of leading modes to return.
    pub modes: usize,
    /// Half-width of the momentum window; derived from `modes` when `None`.
    pub window: Option<f64>,
    /// Sample spacing in units of the pump amplitude width `√2/w0`.
    pub step_fraction: f64,
    /// Band half-width of the pump envelope in units of `√2/w0`.
    pub band_widths: f64,
    /// Krylov dimension; derived from `modes` when `None`.
    pub krylov: Option<usize>,
    /// Upper bound on samples per axis.
    pub max_samples: usize,
    pub seed: u64,
}

impl Default for SourceSchmidtSettings {
    fn default() -> Self {
        Self {
            modes: 24,
            window: None,
            step_fraction: 0.125,
            band_widths: 9.0,
            krylov: None,
            max_samples: 1 << 15,
            seed: 0x5eed,
        }
    }
}

impl SourceSchmidtSettings {
    pub fn with_modes(mut self, modes: usize) -> Self {
        self.modes = modes;
        self
    }

    pub fn with_window(mut self, window: f64) -> Self {
        self.window = Some(window);
        self
    }

    fn resolved_window(&self, params: &SourceParams) -> f64 {
        self.window.unwrap_or_else(|| {
            let pump = std::f64::consts::SQRT_2 * params.sum_width();
            let pm = 0.5 * params.difference_width();
            2.0 * ((2 * self.modes + 1) as f64).sqrt() * (pump * pm).sqrt()
        })
    }
}

/// `‖α‖² ‖φ_L‖² / 2`, the continuum norm of the unnormalized amplitude.
///
/// The phase-matching integral uses the tabulated range plus the analytic
/// `1/q⁴` tail beyond it.
pub fn source_norm(params: &SourceParams) -> Result<f64> {
    let table = phase_matching_table(params, &FactorSettings::default())?;
    let dq = table.grid.step();
    let body: f64 = table.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dq;
    let q = table.grid.max();
    let (k, l) = (params.wavenumber_per_mm, params.crystal_length_mm);
    let tail = 2.0 * 32.0 * k * k / (3.0 * l * l * q.powi(3));
    let pump = (2.0 * std::f64::consts::PI).sqrt() / params.pump_waist_mm;
    Ok(0.5 * pump * (body + tail))
}

/// Leading Schmidt modes of the source amplitude in momentum.
///
/// The kernel `α(k_s+k_i)φ_L(k_s-k_i)` is sampled on a symmetric window,
/// where it is a complex-symmetric anti-banded matrix `F`. Lanczos with full
/// reorthogonalization on `FᴴF` yields the top singular triplets. The
/// coefficients are relative to the continuum norm, so their squares sum to
/// less than one unless the window holds the whole spectrum.
pub fn source_schmidt(params: &SourceParams, settings: &SourceSchmidtSettings) -> Result<SchmidtDecomposition> {
    params.validate()?;
    if settings.modes == 0 {
        return Err(invalid("modes", "must be positive"));
    }
    if !(settings.step_fraction > 0.0 && settings.step_fraction <= 0.5) {
        return Err(invalid(
            "step_fraction",
            format!("{} not in (0, 0.5]", settings.step_fraction),
        ));
    }
    if !(settings.band_widths >= 4.0) {
        return Err(invalid("band_widths", format!("{} < 4", settings.band_widths)));
    }
    let pump = std::f64::consts::SQRT_2 * params.sum_width();
    let dk = settings.step_fraction * pump;
    let window = settings.resolved_window(params);
    if !(window > 0.0 && window.is_finite()) {
        return Err(invalid("window", format!("{window} must be positive")));
    }
    let n = ((2.0 * window / dk).ceil() as usize + 1).next_power_of_two();
    if n > settings.max_samples {
        return Err(Error::MemoryBudget {
            requested: n,
            budget: settings.max_samples,
            suggested: settings.max_samples,
        });
    }
    let grid = Grid1D::symmetric(n, 0.5 * (n - 1) as f64 * dk)?;
    let band = (settings.band_widths * pump / dk).ceil() as usize;
    let scale = dk / source_norm(params)?.sqrt();
    let kernel = AntiBanded::new(&grid, band, |ks, ki| params.amplitude(ks, ki) * scale);

    let modes = settings.modes.min(n);
    let krylov = settings.krylov.unwrap_or(4 * modes + 80).clamp(modes + 1, n);
    let ritz = lanczos_top(&kernel, modes, krylov, settings.seed)?;

    let inv = 1.0 / dk.sqrt();
    let mut coefficients = Vec::with_capacity(modes);
    let mut signal_modes = Vec::with_capacity(modes);
    let mut idler_modes = Vec::with_capacity(modes);
    for (theta, v) in ritz.pairs {
        let sigma = theta.max(0.0).sqrt();
        let mut u = kernel.apply(&v);
        let s = if sigma > 0.0 { inv / sigma } else { 0.0 };
        u.iter_mut().for_each(|z| *z *= s);
        coefficients.push(sigma);
        signal_modes.push(u);
        idler_modes.push(v.iter().map(|z| z.conj() * inv).collect());
    }
    let mut warnings = Vec::new();
    if ritz.max_relative_residual > 1e-6 {
        warnings.push(format!(
            "Lanczos residual {:.2e} after {krylov} steps",
            ritz.max_relative_residual
        ));
    }
    if settings.modes > n {
        warnings.push(format!("requested {} modes, window rank is {n}", settings.modes));
    }
    let captured: f64 = coefficients.iter().map(|c| c * c).sum();
    Ok(SchmidtDecomposition {
        basis: Basis::Momentum,
        coefficients,
        signal_grid: grid,
        idler_grid: grid,
        signal_modes,
        idler_modes,
        complete: 1.0 - captured < 1e-9,
        warnings,
    })
}

/// Quadrature settings for [`source_purity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuritySettings {
    /// Half-range of `q-` in units of `√(8πK/L)`.
    pub extent: f64,
    /// Sample spacing in units of the pump amplitude width `√2/w0`.
    pub step_fraction: f64,
    /// Half-range of the pump factors in units of `√2/w0`.
    pub pump_widths: f64,
}

impl Default for PuritySettings {
    fn default() -> Self {
        Self {
            extent: 4.0,
            step_fraction: 0.125,
            pump_widths: 5.5,
        }
    }
}

/// `Tr ρ_s² = Σ c_n⁴` of the source state without a Schmidt decomposition.
///
/// With `ρ_s(k, k+d) = ∫ α(s)α(s+d) φ_L(2k-s) φ_L*(2k+d-s) ds / ‖f‖²`, the
/// purity `∫∫|ρ_s(k, k+d)|² dk dd` is a triple sum over narrow pump ranges
/// in `s` and `d` and the phase-matching range in `q = 2k`.
pub fn source_purity(params: &SourceParams, settings: &PuritySettings) -> Result<f64> {
    params.validate()?;
    if !(settings.extent >= 1.0) {
        return Err(invalid("extent", format!("{} < 1", settings.extent)));
    }
    if !(settings.step_fraction > 0.0 && settings.step_fraction <= 0.5) {
        return Err(invalid(
            "step_fraction",
            format!("{} not in (0, 0.5]", settings.step_fraction),
        ));
    }
    if !(settings.pump_widths >= 3.0) {
        return Err(invalid("pump_widths", format!("{} < 3", settings.pump_widths)));
    }
    let pump = std::f64::consts::SQRT_2 * params.sum_width();
    let h = settings.step_fraction * pump;
    let e = (settings.pump_widths * pump / h).ceil() as i64;
    let m = (settings.extent * params.difference_width() / h).ceil() as i64;
    if (2 * m + 1) as usize > 1 << 22 {
        return Err(Error::MemoryBudget {
            requested: (2 * m + 1) as usize,
            budget: 1 << 22,
            suggested: 1 << 22,
        });
    }
    let alpha: Vec<f64> = (-2 * e..=2 * e).map(|j| params.pump_envelope(j as f64 * h)).collect();
    let span = m + 3 * e;
    let phi: Vec<Complex64> = (-span..=span).map(|j| params.phase_matching(j as f64 * h)).collect();
    let a = |j: i64| alpha[(j + 2 * e) as usize];
    let f = |j: i64| phi[(j + span) as usize];

    let rows: Vec<f64> = (-m..=m)
        .into_par_iter()
        .map(|i| {
            let mut row = 0.0;
            for d in -e..=e {
                let acc: Complex64 = (-e..=e)
                    .map(|s| f(i - s) * f(i + d - s).conj() * (a(s) * a(s + d)))
                    .sum();
                row += acc.norm_sqr();
            }
            row
        })
        .collect();
    let total: f64 = rows.iter().sum();
    let norm = source_norm(params)?;
    Ok(0.5 * h.powi(4) * total / (norm * norm))
}

/// `F[i][j]` nonzero only for `|i + j - (N-1)| ≤ band`.
struct AntiBanded {
    n: usize,
    band: usize,
    values: Vec<Complex64>,
}

impl AntiBanded {
    fn new(grid: &Grid1D, band: usize, f: impl Fn(f64, f64) -> Complex64 + Sync) -> Self {
        let n = grid.count();
        let width = 2 * band + 1;
        let values = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let ks = grid.coord(i);
                let f = &f;
                (0..width).map(move |t| match Self::column(n, band, i, t) {
                    Some(j) => f(ks, grid.coord(j)),
                    None => Complex64::new(0.0, 0.0),
                })
            })
            .collect();
        Self { n, band, values }
    }

    fn column(n: usize, band: usize, i: usize, t: usize) -> Option<usize> {
        let j = (n - 1 + t).checked_sub(i + band)?;
        (j < n).then_some(j)
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let width = 2 * self.band + 1;
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                let row = &self.values[i * width..(i + 1) * width];
                row.iter()
                    .enumerate()
                    .filter_map(|(t, a)| Self::column(self.n, self.band, i, t).map(|j| a * x[j]))
                    .sum()
            })
            .collect()
    }

    /// `FᴴF x`, using `Fᵀ = F` so that `Fᴴ y = conj(F conj(y))`.
    fn gram(&self, x: &[Complex64]) -> Vec<Complex64> {
        let y: Vec<Complex64> = self.apply(x).iter().map(|z| z.conj()).collect();
        self.apply(&y).iter().map(|z| z.conj()).collect()
    }
}

struct Ritz {
    pairs: Vec<(f64, Vec<Complex64>)>,
    max_relative_residual: f64,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn lanczos_top(op: &AntiBanded, modes: usize, steps: usize, seed: u64) -> Result<Ritz> {
    let n = op.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let s = 1.0 / norm(&q);
    q.iter_mut().for_each(|z| *z *= s);

    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut last_beta = 0.0;
    for _ in 0..steps {
        let mut w = op.gram(&q);
        let a = dot(&q, &w).re;
        for (wi, qi) in w.iter_mut().zip(&q) {
            *wi -= qi * a;
        }
        if let Some(prev) = basis.last() {
            let b = *beta.last().unwrap();
            for (wi, pi) in w.iter_mut().zip(prev) {
                *wi -= pi * b;
            }
        }
        basis.push(q);
        alpha.push(a);
        // full reorthogonalization, twice
        for _ in 0..2 {
            let coeffs: Vec<Complex64> = basis.par_iter().map(|v| dot(v, &w)).collect();
            for (v, c) in basis.iter().zip(&coeffs) {
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= vi * c;
                }
            }
        }
        let b = norm(&w);
        last_beta = b;
        if b < 1e-14 * alpha.iter().fold(0.0f64, |m, a| m.max(a.abs())) || basis.len() == steps {
            break;
        }
        beta.push(b);
        q = w.iter().map(|z| z / b).collect();
    }

    let m = basis.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(f64::MIN_POSITIVE);

    let mut pairs = Vec::with_capacity(modes);
    let mut max_res: f64 = 0.0;
    for &idx in order.iter().take(modes.min(m)) {
        let y = eig.eigenvectors.column(idx);
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        for (k, qk) in basis.iter().enumerate() {
            let c = y[k];
            for (vi, qi) in v.iter_mut().zip(qk) {
                *vi += qi * c;
            }
        }
        let s = 1.0 / norm(&v);
        v.iter_mut().for_each(|z| *z *= s);
        max_res = max_res.max((last_beta * y[m - 1]).abs() / top);
        pairs.push((eig.eigenvalues[idx], v));
    }
    Ok(Ritz {
        pairs,
        max_relative_residual: max_res,
    })
}
