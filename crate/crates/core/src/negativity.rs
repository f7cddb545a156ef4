//! Logarithmic negativity of the intercept-resend state.
//!
//! The state is written in the leading `D` Schmidt modes. Eve's measurement
//! of Bob's photon in a pixel basis leaves Alice in a conditional state and
//! Bob with a resent top-hat, projected into the same truncated basis:
//!
//! `ρ(λ) = (1-λ)|ψ⟩⟨ψ| + (λ/2) σ_k + (λ/2) σ_r`, with
//! `σ = Σ_p ρ_A^{(p)} ⊗ |b_p⟩⟨b_p|`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::adversary::AttackParams;
use crate::amplitude::{AxisTransform, Basis, Party};
use crate::detection::{array_edges, DetectorArrayParams};
use crate::error::{invalid, Error, Result};
use crate::factorized::{FactorSettings, SourceDistributions};
use crate::grid::Grid1D;
use crate::schmidt::{source_schmidt, SchmidtDecomposition, SourceSchmidtSettings};
use crate::source::SourceParams;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Log-negativity with the Schmidt weight left out of the truncated basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNegativity {
    pub lambda: f64,
    pub bits: f64,
    pub discarded_weight: f64,
}

/// Pixel edges for Eve's momentum and position measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct ResendBases {
    pub momentum_edges: Vec<f64>,
    pub position_edges: Vec<f64>,
    /// Position samples per pixel when transforming the modes.
    pub oversampling: usize,
}

impl ResendBases {
    /// Bob's array edges at `array.coverage`, split into `pixels` pixels.
    pub fn from_source(source: &SourceDistributions, array: &DetectorArrayParams, pixels: usize) -> Result<Self> {
        array.validate()?;
        if pixels == 0 {
            return Err(invalid("pixels", "must be >= 1"));
        }
        let hk = source
            .get(Basis::Momentum)
            .central_half_width(Party::Idler, array.coverage)?;
        let hr = source
            .get(Basis::Position)
            .central_half_width(Party::Idler, array.coverage)?;
        Ok(Self {
            momentum_edges: array_edges(hk, pixels),
            position_edges: array_edges(hr, pixels),
            oversampling: 16,
        })
    }
}

/// Precomputed `|ψ⟩⟨ψ|`, `σ_k` and `σ_r` in a `D`-mode basis.
#[derive(Debug, Clone)]
pub struct NegativityModel {
    dim: usize,
    coefficients: Vec<f64>,
    discarded_weight: f64,
    pure: DMatrix<Complex64>,
    sigma_momentum: DMatrix<Complex64>,
    sigma_position: DMatrix<Complex64>,
    warnings: Vec<String>,
}

impl NegativityModel {
    /// Builds the model from momentum-basis Schmidt modes.
    ///
    /// Modes beyond `schmidt.mode_count()` are unavailable; `dim` is capped
    /// there with a warning.
    pub fn new(schmidt: &SchmidtDecomposition, dim: usize, bases: &ResendBases) -> Result<Self> {
        if schmidt.basis() != Basis::Momentum {
            return Err(Error::Shape("negativity expects momentum-basis Schmidt modes".into()));
        }
        if dim == 0 {
            return Err(invalid("dim", "must be >= 1"));
        }
        if bases.oversampling == 0 {
            return Err(invalid("oversampling", "must be >= 1"));
        }
        let mut warnings = schmidt.warnings().to_vec();
        let d = if dim > schmidt.mode_count() {
            warnings.push(format!(
                "requested D = {dim}, only {} modes available",
                schmidt.mode_count()
            ));
            schmidt.mode_count()
        } else {
            dim
        };
        let head = &schmidt.coefficients()[..d];
        let kept: f64 = head.iter().map(|c| c * c).sum();
        let discarded_weight = if schmidt.is_complete() {
            schmidt.coefficients()[d..].iter().map(|c| c * c).sum()
        } else {
            (1.0 - kept).max(0.0)
        };
        let scale = 1.0 / kept.sqrt();
        let coefficients: Vec<f64> = head.iter().map(|c| c * scale).collect();

        let mut pure = DMatrix::zeros(d * d, d * d);
        for a in 0..d {
            for b in 0..d {
                pure[(a * d + a, b * d + b)] = Complex64::new(coefficients[a] * coefficients[b], 0.0);
            }
        }

        let grid = schmidt.idler_grid();
        let idler: Vec<&[Complex64]> = (0..d).map(|n| schmidt.idler_mode(n)).collect();
        let sigma_momentum = measure_resend(&coefficients, &idler, grid, &bases.momentum_edges)?;

        let (rgrid, position) = position_modes(&idler, grid, &bases.position_edges, bases.oversampling)?;
        let position_refs: Vec<&[Complex64]> = position.iter().map(Vec::as_slice).collect();
        let sigma_position = measure_resend(&coefficients, &position_refs, &rgrid, &bases.position_edges)?;

        Ok(Self {
            dim: d,
            coefficients,
            discarded_weight,
            pure,
            sigma_momentum,
            sigma_position,
            warnings,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Renormalized coefficients of the truncated pure state.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn discarded_weight(&self) -> f64 {
        self.discarded_weight
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `2 log₂ Σ c_n` for the truncated pure state.
    pub fn pure_state_value(&self) -> f64 {
        2.0 * self.coefficients.iter().sum::<f64>().log2()
    }

    pub fn density_matrix(&self, lambda: f64) -> Result<DMatrix<Complex64>> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(invalid("lambda", format!("{lambda} is outside [0, 1]")));
        }
        let half = Complex64::new(0.5 * lambda, 0.0);
        Ok(&self.pure * Complex64::new(1.0 - lambda, 0.0) + &self.sigma_momentum * half + &self.sigma_position * half)
    }

    pub fn log_negativity(&self, lambda: f64) -> Result<LogNegativity> {
        let rho = self.density_matrix(lambda)?;
        Ok(LogNegativity {
            lambda,
            bits: log_negativity_of(&rho, self.dim),
            discarded_weight: self.discarded_weight,
        })
    }
}

/// `ρ^{T_B}[(a,b),(a',b')] = ρ[(a,b'),(a',b)]`.
pub fn partial_transpose(rho: &DMatrix<Complex64>, dim: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(dim * dim, dim * dim, |r, c| {
        let (a, b) = (r / dim, r % dim);
        let (a2, b2) = (c / dim, c % dim);
        rho[(a * dim + b2, a2 * dim + b)]
    })
}

/// `log₂ ‖ρ^{T_B}‖₁` for a Hermitian `ρ` on `C^dim ⊗ C^dim`.
pub fn log_negativity_of(rho: &DMatrix<Complex64>, dim: usize) -> f64 {
    let pt = partial_transpose(rho, dim);
    let herm = (&pt + pt.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let trace_norm: f64 = eig.eigenvalues.iter().map(|v| v.abs()).sum();
    trace_norm.log2()
}

/// `Σ_p ρ_A^{(p)} ⊗ |b_p⟩⟨b_p|`, trace-normalized.
///
/// Pixel `p` collects the samples with `edges[p] ≤ x < edges[p+1]`;
/// `ρ_A^{(p)}[i,i'] = c_i c_{i'} ⟨v_{i'}|Π_p|v_i⟩` and `b_p ∝ ⟨v_j|Π_p|1⟩`.
fn measure_resend(c: &[f64], modes: &[&[Complex64]], grid: &Grid1D, edges: &[f64]) -> Result<DMatrix<Complex64>> {
    let d = c.len();
    let step = grid.step();
    let pixels = edges.len() - 1;
    let mut overlap = vec![DMatrix::<Complex64>::zeros(d, d); pixels];
    let mut tophat = vec![vec![ZERO; d]; pixels];
    let width = edges[pixels] - edges[0];
    for (i, x) in grid.coords().enumerate() {
        if x < edges[0] || x >= edges[pixels] {
            continue;
        }
        let p = (((x - edges[0]) / width * pixels as f64) as usize).min(pixels - 1);
        // guard against the float division landing one pixel off
        let p = if x < edges[p] {
            p - 1
        } else if x >= edges[p + 1] {
            p + 1
        } else {
            p
        };
        let column: Vec<Complex64> = modes.iter().map(|m| m[i]).collect();
        for j in 0..d {
            let cj = column[j].conj();
            tophat[p][j] += cj;
            for k in 0..d {
                overlap[p][(j, k)] += cj * column[k] * step;
            }
        }
    }

    let mut sigma = DMatrix::<Complex64>::zeros(d * d, d * d);
    for (pi, b) in overlap.iter().zip(&tophat) {
        let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(nb > 1e-300) {
            continue;
        }
        let b: Vec<Complex64> = b.iter().map(|z| z / nb).collect();
        for a in 0..d {
            for a2 in 0..d {
                let ra = pi[(a2, a)] * (c[a] * c[a2]);
                if ra == ZERO {
                    continue;
                }
                for (x, bx) in b.iter().enumerate() {
                    for (y, by) in b.iter().enumerate() {
                        sigma[(a * d + x, a2 * d + y)] += ra * bx * by.conj();
                    }
                }
            }
        }
    }
    let trace: f64 = (0..d * d).map(|i| sigma[(i, i)].re).sum();
    if !(trace > 0.0) {
        return Err(Error::Numerical("measure-and-resend term has zero weight".into()));
    }
    Ok(sigma / Complex64::new(trace, 0.0))
}

/// Transforms momentum modes to position, zero-padding until the position
/// step resolves each pixel `oversampling` times.
fn position_modes(
    modes: &[&[Complex64]],
    grid: &Grid1D,
    edges: &[f64],
    oversampling: usize,
) -> Result<(Grid1D, Vec<Vec<Complex64>>)> {
    let pixels = edges.len() - 1;
    let pixel = (edges[pixels] - edges[0]) / pixels as f64;
    let target = pixel / oversampling as f64;
    let dk = grid.step();
    let needed = (2.0 * PI / (dk * target)).ceil() as usize;
    let count = needed.max(grid.count()).next_power_of_two();
    if count > 1 << 24 {
        return Err(Error::MemoryBudget {
            requested: count,
            budget: 1 << 24,
            suggested: 1 << 24,
        });
    }
    let padded = Grid1D::new(count, grid.min(), grid.min() + (count - 1) as f64 * dk)?;
    let rgrid = padded.reciprocal();
    let reach = edges[0].abs().max(edges[pixels].abs());
    if reach >= rgrid.max() {
        return Err(Error::GridExtent {
            needed: reach,
            available: rgrid.max(),
        });
    }
    let mut planner = FftPlanner::new();
    let transform = AxisTransform::new(&padded, &rgrid, &mut planner);
    let out = modes
        .iter()
        .map(|m| {
            let mut data = vec![ZERO; count];
            data[..m.len()].copy_from_slice(m);
            transform.apply(&mut data);
            data
        })
        .collect();
    Ok((rgrid, out))
}

/// Settings for [`source_log_negativity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativitySettings {
    pub dim: usize,
    pub schmidt: SourceSchmidtSettings,
    pub factors: FactorSettings,
}

impl Default for NegativitySettings {
    fn default() -> Self {
        Self {
            dim: 16,
            schmidt: SourceSchmidtSettings::default(),
            factors: FactorSettings::default(),
        }
    }
}

impl NegativitySettings {
    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }
}

/// Model for the source state attacked with Eve's pixel count from `attack`
/// (Bob's when unset).
pub fn source_negativity_model(
    params: &SourceParams,
    array: &DetectorArrayParams,
    eve_pixels: Option<usize>,
    settings: &NegativitySettings,
) -> Result<NegativityModel> {
    let schmidt = source_schmidt(params, &settings.schmidt.with_modes(settings.dim))?;
    let source = SourceDistributions::new(params, &settings.factors)?;
    let bases = ResendBases::from_source(&source, array, eve_pixels.unwrap_or(array.pixels))?;
    NegativityModel::new(&schmidt, settings.dim, &bases)
}

/// `LN(λ)` of the attacked source state in a `D`-mode Schmidt basis.
pub fn source_log_negativity(
    params: &SourceParams,
    array: &DetectorArrayParams,
    attack: &AttackParams,
    settings: &NegativitySettings,
) -> Result<LogNegativity> {
    attack.validate()?;
    source_negativity_model(params, array, attack.eve_pixels, settings)?.log_negativity(attack.lambda)
}

/// `LN(λ)` for a gridded momentum amplitude, via its dense Schmidt decomposition.
pub fn log_negativity(
    amp: &crate::amplitude::JointAmplitude,
    attack: &AttackParams,
    dim: usize,
    bases: &ResendBases,
) -> Result<LogNegativity> {
    attack.validate()?;
    let schmidt = crate::schmidt::schmidt_decompose(amp, dim)?;
    NegativityModel::new(&schmidt, dim, bases)?.log_negativity(attack.lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::JointAmplitude;

    fn bell_like(c: &[f64]) -> DMatrix<Complex64> {
        let d = c.len();
        let mut rho = DMatrix::zeros(d * d, d * d);
        for a in 0..d {
            for b in 0..d {
                rho[(a * d + a, b * d + b)] = Complex64::new(c[a] * c[b], 0.0);
            }
        }
        rho
    }

    #[test]
    fn pure_state_formula() {
        let c = [0.8f64, 0.5, 0.11f64.sqrt()];
        let expect = 2.0 * c.iter().sum::<f64>().log2();
        assert!((log_negativity_of(&bell_like(&c), 3) - expect).abs() < 1e-12);
    }

    #[test]
    fn product_state_is_zero() {
        let c = [1.0, 0.0];
        assert!(log_negativity_of(&bell_like(&c), 2).abs() < 1e-12);
    }

    #[test]
    fn werner_threshold() {
        // p|Φ+⟩⟨Φ+| + (1-p) I/4 is NPT iff p > 1/3
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi = bell_like(&[s, s]);
        let id = DMatrix::<Complex64>::identity(4, 4) * Complex64::new(0.25, 0.0);
        for (p, npt) in [(0.3, false), (0.34, true), (1.0, true)] {
            let rho = &phi * Complex64::new(p, 0.0) + &id * Complex64::new(1.0 - p, 0.0);
            let ln = log_negativity_of(&rho, 2);
            assert_eq!(ln > 1e-12, npt, "p = {p}: {ln}");
            let expect = if npt { (1.5 * p + 0.5).log2() } else { 0.0 };
            assert!((ln - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn gridded_endpoints() {
        let g = Grid1D::symmetric(128, 10.0).unwrap();
        let amp = JointAmplitude::from_fn(Basis::Momentum, g, g, |x, y| {
            let s = (x + y) * (x + y) + (x - y) * (x - y) / 9.0;
            Complex64::new((-s).exp(), 0.0)
        })
        .unwrap();
        let bases = ResendBases {
            momentum_edges: array_edges(6.0, 16),
            position_edges: array_edges(4.0, 16),
            oversampling: 16,
        };
        let schmidt = crate::schmidt::schmidt_decompose(&amp, 6).unwrap();
        let model = NegativityModel::new(&schmidt, 6, &bases).unwrap();
        let ln0 = model.log_negativity(0.0).unwrap();
        assert!((ln0.bits - model.pure_state_value()).abs() < 1e-9);
        assert!(ln0.discarded_weight < 1e-3);
        assert!(model.log_negativity(1.0).unwrap().bits.abs() < 1e-9);
        let ln = log_negativity(&amp, &AttackParams::new(0.5), 6, &bases).unwrap();
        assert!(ln.bits > 0.0 && ln.bits < ln0.bits);
    }

    #[test]
    fn caps_dimension() {
        let g = Grid1D::symmetric(64, 6.0).unwrap();
        let amp = JointAmplitude::from_fn(Basis::Momentum, g, g, |x, y| {
            Complex64::new((-(x * x + 2.0 * y * y + x * y)).exp(), 0.0)
        })
        .unwrap();
        let schmidt = crate::schmidt::schmidt_decompose(&amp, 4).unwrap();
        let bases = ResendBases {
            momentum_edges: array_edges(3.0, 8),
            position_edges: array_edges(3.0, 8),
            oversampling: 8,
        };
        let model = NegativityModel::new(&schmidt, 10, &bases).unwrap();
        assert_eq!(model.dim(), 4);
        assert!(!model.warnings().is_empty());
    }
}
