//! Entropies, mutual information, conditional variances, the EPR witness and
//! the entropic key-rate bound. All logarithms are base 2; differential
//! quantities carry the units of the grid they were computed on.

use std::f64::consts::{E, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::amplitude::{marginal, AxisTransform, Basis, Density1D, JointAmplitude, JointDistribution, Party};
use crate::error::{invalid, Error, Result};
use crate::factorized::{FactorSettings, FactorizedDistribution};
use crate::grid::Grid1D;
use crate::source::SourceParams;

/// Allowed deviation of a density's total mass from one.
pub const MASS_TOL: f64 = 1e-6;
/// Maximum disagreement between the two mutual-information routes.
pub const MI_CROSSCHECK_TOL: f64 = 1e-6;
/// Threshold below which cross-basis information counts as negligible.
pub const NEGLIGIBLE_BITS: f64 = 0.01;

/// Density sampled on a uniform grid: values and the measure of one bin.
pub trait GriddedDensity {
    fn samples(&self) -> &[f64];
    fn bin_measure(&self) -> f64;
}

impl GriddedDensity for Density1D {
    fn samples(&self) -> &[f64] {
        &self.values
    }

    fn bin_measure(&self) -> f64 {
        self.grid.step()
    }
}

impl GriddedDensity for JointDistribution {
    fn samples(&self) -> &[f64] {
        self.values()
    }

    fn bin_measure(&self) -> f64 {
        self.cell()
    }
}

fn plogp_sum(values: &[f64]) -> f64 {
    values.iter().filter(|&&p| p > 0.0).map(|&p| p * p.log2()).sum()
}

/// `-Σ p log₂ p · Δ`.
pub fn differential_entropy(density: &impl GriddedDensity) -> Result<f64> {
    differential_entropy_of(density.samples(), density.bin_measure())
}

pub fn differential_entropy_of(values: &[f64], bin_measure: f64) -> Result<f64> {
    let total = values.iter().sum::<f64>() * bin_measure;
    if (total - 1.0).abs() > MASS_TOL || values.iter().any(|&p| p < 0.0) {
        return Err(Error::NotNormalized { total });
    }
    Ok(-plogp_sum(values) * bin_measure)
}

/// Shannon entropy of a probability vector.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    -plogp_sum(probs)
}

/// Mean conditional variance `Δ²(x_A|x_B) = Σ_B p(x_B) Var(x_A | x_B)`.
pub trait ConditionalVariance {
    fn conditional_variance(&self, target: Party) -> Result<f64>;
}

/// Two-variable continuous density with computable entropies.
pub trait Bipartite: ConditionalVariance {
    fn joint_entropy(&self) -> Result<f64>;
    fn marginal_entropy(&self, which: Party) -> Result<f64>;

    /// `H(target | other) = H(target, other) - H(other)`.
    fn conditional_entropy(&self, target: Party) -> Result<f64> {
        Ok(self.joint_entropy()? - self.marginal_entropy(target.other())?)
    }

    /// `H(signal) + H(idler) - H(signal, idler)`.
    fn mutual_information(&self) -> Result<f64> {
        Ok(self.marginal_entropy(Party::Signal)? + self.marginal_entropy(Party::Idler)? - self.joint_entropy()?)
    }
}

impl ConditionalVariance for JointDistribution {
    fn conditional_variance(&self, target: Party) -> Result<f64> {
        let (sg, ig) = (self.signal_grid(), self.idler_grid());
        let (tg, og) = match target {
            Party::Signal => (sg, ig),
            Party::Idler => (ig, sg),
        };
        let mut acc = 0.0;
        let mut mass = 0.0;
        for j in 0..og.count() {
            let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
            for (i, x) in tg.coords().enumerate() {
                let p = match target {
                    Party::Signal => self.get(i, j),
                    Party::Idler => self.get(j, i),
                };
                m0 += p;
                m1 += p * x;
                m2 += p * x * x;
            }
            if m0 > 0.0 {
                acc += m2 - m1 * m1 / m0;
                mass += m0;
            }
        }
        Ok((acc / mass).max(0.0))
    }
}

impl Bipartite for JointDistribution {
    fn joint_entropy(&self) -> Result<f64> {
        differential_entropy(self)
    }

    fn marginal_entropy(&self, which: Party) -> Result<f64> {
        differential_entropy(&marginal(self, which))
    }
}

impl ConditionalVariance for FactorizedDistribution {
    fn conditional_variance(&self, target: Party) -> Result<f64> {
        FactorizedDistribution::conditional_variance(self, target)
    }
}

impl Bipartite for FactorizedDistribution {
    fn joint_entropy(&self) -> Result<f64> {
        Ok(FactorizedDistribution::joint_entropy(self))
    }

    fn marginal_entropy(&self, which: Party) -> Result<f64> {
        FactorizedDistribution::marginal_entropy(self, which)
    }
}

/// Mutual information of a gridded density by the two standard routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutualInformation {
    /// `H(A) + H(B) - H(A, B)`.
    pub via_entropies: f64,
    /// `Σ p log₂(p / (p_A p_B)) Δ_A Δ_B`.
    pub direct: f64,
}

pub fn mutual_information_detail(dist: &JointDistribution) -> Result<MutualInformation> {
    let via_entropies = Bipartite::mutual_information(dist)?;
    let ps = marginal(dist, Party::Signal).values;
    let pi = marginal(dist, Party::Idler).values;
    let ni = pi.len();
    let cell = dist.cell();
    let mut direct = 0.0;
    for (a, row) in dist.values().chunks_exact(ni).enumerate() {
        for (b, &p) in row.iter().enumerate() {
            if p > 0.0 {
                direct += p * (p / (ps[a] * pi[b])).log2();
            }
        }
    }
    Ok(MutualInformation {
        via_entropies,
        direct: direct * cell,
    })
}

/// Mutual information in bits, after checking the two routes agree.
pub fn mutual_information(dist: &JointDistribution) -> Result<f64> {
    let mi = mutual_information_detail(dist)?;
    if (mi.via_entropies - mi.direct).abs() > MI_CROSSCHECK_TOL {
        return Err(Error::Numerical(format!(
            "mutual information routes disagree: {} vs {}",
            mi.via_entropies, mi.direct
        )));
    }
    Ok(mi.direct)
}

/// `Σ P log₂(P / (P_A P_B))` of a row-major `rows × cols` probability table.
pub fn discrete_mutual_information(probs: &[f64], rows: usize, cols: usize) -> Result<f64> {
    if probs.len() != rows * cols || rows == 0 || cols == 0 {
        return Err(Error::Shape(format!("{} entries for {rows}×{cols}", probs.len())));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > MASS_TOL || probs.iter().any(|&p| p < 0.0) {
        return Err(Error::NotNormalized { total });
    }
    let mut pa = vec![0.0; rows];
    let mut pb = vec![0.0; cols];
    for (a, row) in probs.chunks_exact(cols).enumerate() {
        for (b, &p) in row.iter().enumerate() {
            pa[a] += p;
            pb[b] += p;
        }
    }
    let mut mi = 0.0;
    for (a, row) in probs.chunks_exact(cols).enumerate() {
        for (b, &p) in row.iter().enumerate() {
            if p > 0.0 {
                mi += p * (p / (pa[a] * pb[b])).log2();
            }
        }
    }
    Ok(mi.max(0.0))
}

/// EPR-type witness `Δ²(r_A|r_B) · Δ²(k_A|k_B) ≤ 1/4`, with Alice holding the
/// signal photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessReport {
    /// `Δ²(r_A|r_B)` in mm².
    pub position_variance: f64,
    /// `Δ²(k_A|k_B)` in rad²/mm².
    pub momentum_variance: f64,
    pub product: f64,
    pub satisfied: bool,
}

impl WitnessReport {
    pub fn from_variances(position_variance: f64, momentum_variance: f64) -> Self {
        let product = position_variance * momentum_variance;
        Self {
            position_variance,
            momentum_variance,
            product,
            satisfied: product <= 0.25,
        }
    }
}

pub fn epr_witness(momentum: &impl ConditionalVariance, position: &impl ConditionalVariance) -> Result<WitnessReport> {
    Ok(WitnessReport::from_variances(
        position.conditional_variance(Party::Signal)?,
        momentum.conditional_variance(Party::Signal)?,
    ))
}

/// Both forms of the entropic lower bound on the key rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateBound {
    /// `log₂(πe) - H(r_A|r_B) - H(k_A|k_B)`.
    pub entropic: f64,
    /// `½ log₂(1 / (4 Δ²(r_A|r_B) Δ²(k_A|k_B)))`.
    pub variance: f64,
    /// `entropic ≥ variance` within [`MI_CROSSCHECK_TOL`].
    pub consistent: bool,
}

pub fn keyrate_lower_bound(momentum: &impl Bipartite, position: &impl Bipartite) -> Result<KeyRateBound> {
    let hr = position.conditional_entropy(Party::Signal)?;
    let hk = momentum.conditional_entropy(Party::Signal)?;
    let entropic = (PI * E).log2() - hr - hk;
    let w = epr_witness(momentum, position)?;
    let variance = 0.5 * (1.0 / (4.0 * w.product)).log2();
    Ok(KeyRateBound {
        entropic,
        variance,
        consistent: entropic >= variance - MI_CROSSCHECK_TOL,
    })
}

/// Eve-limited key rate `ΔI = I_AB - I_AE` and the bound it is compared with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateReport {
    pub i_ab: f64,
    pub i_ae: f64,
    pub delta_i: f64,
    pub bound: Option<KeyRateBound>,
}

impl KeyRateReport {
    pub fn new(i_ab: f64, i_ae: f64, bound: Option<KeyRateBound>) -> Result<Self> {
        if !(i_ab >= 0.0 && i_ae >= 0.0) {
            return Err(invalid("mutual information", format!("I_AB = {i_ab}, I_AE = {i_ae}")));
        }
        Ok(Self {
            i_ab,
            i_ae,
            delta_i: i_ab - i_ae,
            bound,
        })
    }
}

/// Mutual information between the signal momentum and the idler position of
/// a gridded momentum amplitude.
pub fn cross_basis_mi_gridded(amp: &JointAmplitude) -> Result<f64> {
    if amp.basis() != Basis::Momentum {
        return Err(Error::Shape(
            "cross_basis_mi_gridded expects a momentum amplitude".into(),
        ));
    }
    let (sg, ig) = (*amp.signal_grid(), *amp.idler_grid());
    let ri = ig.reciprocal();
    let mut planner = FftPlanner::new();
    let tf = AxisTransform::new(&ig, &ri, &mut planner);
    let mut data = amp.values().to_vec();
    let mut probs = Vec::with_capacity(data.len());
    for row in data.chunks_exact_mut(ig.count()) {
        tf.apply(row);
        probs.extend(row.iter().map(|v| v.norm_sqr()));
    }
    let z: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= z);
    // on a uniform grid the plug-in Riemann MI equals the discrete MI of the cells
    discrete_mutual_information(&probs, sg.count(), ri.count())
}

/// Resolution of the factorized cross-basis computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossBasisSettings {
    /// Signal-momentum samples.
    pub signal_count: usize,
    /// Zero-padded transform length along the idler axis.
    pub transform_count: usize,
    pub factors: FactorSettings,
}

impl Default for CrossBasisSettings {
    fn default() -> Self {
        Self {
            signal_count: 1 << 13,
            transform_count: 256,
            factors: FactorSettings::default(),
        }
    }
}

/// `I(k_s; r_i)` of the source.
///
/// With `q = k_s + k_i` the idler-position amplitude of each signal momentum
/// is `∫ α(q) φ_L(2k_s - q) e^{iqr} dq` up to a phase, so every row is a single
/// short FFT over the narrow pump envelope.
pub fn cross_basis_mi(params: &SourceParams, settings: &CrossBasisSettings) -> Result<f64> {
    params.validate()?;
    let m = settings.transform_count;
    if m < 64 || !m.is_power_of_two() || settings.signal_count < 64 || !settings.signal_count.is_power_of_two() {
        return Err(invalid(
            "count",
            "signal and transform counts must be powers of two >= 64",
        ));
    }
    let w0 = params.pump_waist_mm;
    // idler positions span the pump waist plus the walk-off of the φ_L chirp
    let dq = PI / (6.0 * w0 + 2.0);
    let qg = Grid1D::new(m, -0.5 * m as f64 * dq, (0.5 * m as f64 - 1.0) * dq)?;
    let rg = qg.reciprocal();
    let envelope: Vec<f64> = qg.coords().map(|q| params.pump_envelope(q)).collect();

    // signal momenta cover the phase-matching table
    let table = crate::factorized::phase_matching_table(params, &settings.factors)?;
    let kg = Grid1D::symmetric(settings.signal_count, 0.5 * table.grid.max())?;

    let mut planner = FftPlanner::new();
    let tf = AxisTransform::new(&qg, &rg, &mut planner);
    let row = |k: f64| -> Vec<f64> {
        let mut data: Vec<Complex64> = qg
            .coords()
            .zip(&envelope)
            .map(|(q, &a)| params.phase_matching(2.0 * k - q) * a)
            .collect();
        tf.apply(&mut data);
        data.iter().map(|v| v.norm_sqr()).collect()
    };

    // first pass: marginals; second pass: Σ P log(P / P_k P_r)
    let rows: Vec<Vec<f64>> = (0..kg.count()).into_par_iter().map(|i| row(kg.coord(i))).collect();
    let z: f64 = rows.iter().flatten().sum();
    if !(z > 0.0) {
        return Err(Error::Numerical("cross-basis density vanishes".into()));
    }
    let pk: Vec<f64> = rows.iter().map(|r| r.iter().sum::<f64>() / z).collect();
    let mut pr = vec![0.0; m];
    for r in &rows {
        for (acc, p) in pr.iter_mut().zip(r) {
            *acc += p / z;
        }
    }
    let mut mi = 0.0;
    for (r, &pki) in rows.iter().zip(&pk) {
        for (&p, &prj) in r.iter().zip(&pr) {
            let p = p / z;
            if p > 0.0 {
                mi += p * (p / (pki * prj)).log2();
            }
        }
    }
    Ok(mi.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bivariate(rho: f64, n: usize, half: f64) -> JointDistribution {
        let g = Grid1D::symmetric(n, half).unwrap();
        let c = 1.0 - rho * rho;
        JointDistribution::from_fn(Basis::Position, g, g, |x, y| {
            (-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * c)).exp()
        })
        .unwrap()
    }

    #[test]
    fn uniform_entropy_is_log_measure() {
        let g = Grid1D::new(256, 0.0, 255.0 * 0.01).unwrap();
        let d = Density1D {
            grid: g,
            values: vec![1.0 / (256.0 * 0.01); 256],
        };
        assert!((differential_entropy(&d).unwrap() - (2.56f64).log2()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_entropy() {
        let g = Grid1D::symmetric(2048, 12.0).unwrap();
        let s = g.step();
        let raw: Vec<f64> = g.coords().map(|x| (-0.5 * x * x).exp()).collect();
        let z: f64 = raw.iter().sum::<f64>() * s;
        let d = Density1D {
            grid: g,
            values: raw.iter().map(|v| v / z).collect(),
        };
        let h = differential_entropy(&d).unwrap();
        assert!((h - 0.5 * (2.0 * PI * E).log2()).abs() < 1e-4);
    }

    #[test]
    fn rejects_unnormalized() {
        let g = Grid1D::symmetric(64, 1.0).unwrap();
        let d = Density1D {
            grid: g,
            values: vec![1.0; 64],
        };
        assert!(matches!(differential_entropy(&d), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn gaussian_mutual_information_and_variance() {
        for rho in [0.0, 0.5, 0.9] {
            let d = bivariate(rho, 512, 9.0);
            let mi = mutual_information_detail(&d).unwrap();
            let exact = -0.5 * (1.0 - rho * rho).log2();
            assert!((mi.direct - exact).abs() < 1e-3, "rho {rho}: {mi:?}");
            assert!((mi.direct - mi.via_entropies).abs() < 1e-6);
            let cv = d.conditional_variance(Party::Signal).unwrap();
            assert!((cv - (1.0 - rho * rho)).abs() < 1e-6 * (1.0 - rho * rho).max(1.0));
        }
    }

    #[test]
    fn gaussian_bound_lines_agree() {
        let d = bivariate(0.8, 512, 9.0);
        let b = keyrate_lower_bound(&d, &d).unwrap();
        assert!((b.entropic - b.variance).abs() < 1e-4, "{b:?}");
        assert!(b.consistent);
    }

    #[test]
    fn discrete_mi_limits() {
        let n = 8;
        let mut diag = vec![0.0; n * n];
        for i in 0..n {
            diag[i * n + i] = 1.0 / n as f64;
        }
        assert!((discrete_mutual_information(&diag, n, n).unwrap() - 3.0).abs() < 1e-12);
        let uniform = vec![1.0 / (n * n) as f64; n * n];
        assert!(discrete_mutual_information(&uniform, n, n).unwrap().abs() < 1e-12);
        assert!(discrete_mutual_information(&uniform, n, n + 1).is_err());
    }

    #[test]
    fn witness_flag_follows_product() {
        assert!(WitnessReport::from_variances(0.5, 0.5).satisfied);
        assert!(!WitnessReport::from_variances(0.5, 0.51).satisfied);
    }

    #[test]
    fn separable_cross_basis() {
        let g = Grid1D::symmetric(128, 8.0).unwrap();
        let amp = JointAmplitude::from_fn(Basis::Momentum, g, g, |a, b| {
            Complex64::new((-a * a).exp() * (-0.3 * b * b).exp(), 0.0)
        })
        .unwrap();
        assert!(cross_basis_mi_gridded(&amp).unwrap() < 1e-9);
    }
}
