//! Entropies of the full two-dimensional transverse model.
//!
//! In sum and difference coordinates the density factorizes,
//! `p(x_s, x_i) ∝ g(x_s + x_i) h(x_s - x_i)`, with `g` an isotropic Gaussian
//! and `h` radially symmetric. The map to `(x_s + x_i, x_s - x_i)` has
//! determinant 4 in two dimensions per photon, so
//! `H(x_s, x_i) = H(g) + H(h) - 2` bits. The marginal of `x_i = (u - v)/2`
//! is the scaled radial convolution `g ∗ h`, evaluated by the angular
//! average `∫ G(|x - r|) dθ = 2π G₀ e^{-(x-r)²/2σ²} I0e(xr/σ²)`.
//!
//! Momentum: `g` has standard deviation `1/w0` per component and
//! `h = |φ_L|²` is a function of `x = q²L/4K`. Position: `g` has standard
//! deviation `w0` and `h ∝ Ci(a)² + (π/2 - Si(a))²` with `a = KR²/4L`, the
//! two-dimensional Fourier transform of `φ_L` at `δ = 0`.

use std::f64::consts::{LN_2, PI};

use rayon::prelude::*;
use spec_math::cephes64::{i0e, sici};

use crate::amplitude::Basis;
use crate::error::{invalid, Error, Result};
use crate::source::SourceParams;

/// `<sin²θ ln sin²θ>` over a period.
const SIN2_LOG_MEAN: f64 = 0.5 - LN_2;

/// Radial grids for [`entropies_full_transverse`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseSettings {
    /// Samples per width of the Gaussian factor.
    pub resolution: usize,
    /// Momentum radial range in units of `√(8πK/L)`.
    pub momentum_extent: f64,
    /// Position radial range in units of `w0`.
    pub position_extent: f64,
    /// Upper bound on samples of any one grid.
    pub max_samples: usize,
}

impl Default for TransverseSettings {
    fn default() -> Self {
        Self {
            resolution: 8,
            momentum_extent: 20.0,
            position_extent: 35.0,
            max_samples: 1 << 23,
        }
    }
}

impl TransverseSettings {
    pub fn with_resolution(mut self, resolution: usize) -> Self {
        self.resolution = resolution;
        self
    }
}

/// Entropies in bits for one basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseEntropies {
    pub basis: Basis,
    /// `H(x_s + x_i)`.
    pub sum_entropy: f64,
    /// `H(x_s - x_i)`.
    pub difference_entropy: f64,
    pub joint_entropy: f64,
    /// `H(x_s) = H(x_i)`.
    pub marginal_entropy: f64,
    pub mutual_information: f64,
    /// Probability captured by the marginal quadrature.
    pub marginal_mass: f64,
}

impl TransverseEntropies {
    fn assemble(basis: Basis, sum: f64, diff: f64, convolution: f64, mass: f64) -> Self {
        let joint = sum + diff - 2.0;
        let marginal = convolution - 2.0;
        Self {
            basis,
            sum_entropy: sum,
            difference_entropy: diff,
            joint_entropy: joint,
            marginal_entropy: marginal,
            mutual_information: 2.0 * marginal - joint,
            marginal_mass: mass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullTransverseEntropies {
    pub momentum: TransverseEntropies,
    pub position: TransverseEntropies,
}

/// Entropy in bits of an isotropic two-dimensional Gaussian.
pub fn gaussian_entropy_2d(sigma: f64) -> f64 {
    (2.0 * PI * std::f64::consts::E * sigma * sigma).log2()
}

pub fn entropies_full_transverse(
    params: &SourceParams,
    settings: &TransverseSettings,
) -> Result<FullTransverseEntropies> {
    Ok(FullTransverseEntropies {
        momentum: momentum_entropies(params, settings)?,
        position: position_entropies(params, settings)?,
    })
}

fn check_settings(params: &SourceParams, settings: &TransverseSettings) -> Result<()> {
    params.validate()?;
    if settings.resolution < 4 {
        return Err(invalid("resolution", format!("{} < 4", settings.resolution)));
    }
    if !(settings.momentum_extent >= 4.0) {
        return Err(invalid("momentum_extent", format!("{} < 4", settings.momentum_extent)));
    }
    if !(settings.position_extent >= 8.0) {
        return Err(invalid("position_extent", format!("{} < 8", settings.position_extent)));
    }
    Ok(())
}

fn budget(requested: usize, per_resolution: f64, settings: &TransverseSettings) -> Result<()> {
    if requested > settings.max_samples {
        return Err(Error::MemoryBudget {
            requested,
            budget: settings.max_samples,
            suggested: ((settings.max_samples as f64 / per_resolution).floor() as usize).max(1),
        });
    }
    Ok(())
}

/// Composite Simpson weights for `n` (odd) points of spacing `h`.
fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    debug_assert!(n % 2 == 1 && n >= 3);
    (0..n)
        .map(|i| {
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

fn odd(n: usize) -> usize {
    n | 1
}

fn xlogx(v: f64) -> f64 {
    if v > 0.0 {
        v * v.ln()
    } else {
        0.0
    }
}

/// Density of the angular-averaged Gaussian convolution at each `x`.
///
/// `radii` ascending with point masses `masses`; only masses within
/// `reach·σ` of `x` contribute.
fn radial_convolution(sigma: f64, radii: &[f64], masses: &[f64], xs: &[f64]) -> Vec<f64> {
    let reach = 14.0 * sigma;
    let s2 = sigma * sigma;
    let norm = 1.0 / (2.0 * PI * s2);
    xs.par_iter()
        .map(|&x| {
            let lo = radii.partition_point(|&r| r < x - reach);
            let hi = radii.partition_point(|&r| r <= x + reach);
            let total: f64 = radii[lo..hi]
                .iter()
                .zip(&masses[lo..hi])
                .map(|(&r, &m)| {
                    let d = x - r;
                    m * (-0.5 * d * d / s2).exp() * i0e(x * r / s2)
                })
                .sum();
            norm * total
        })
        .collect()
}

/// `(∫ c d²x, -∫ c ln c d²x)` over the radial grid `xs = 0, dx, ...`.
fn radial_body(xs: &[f64], values: &[f64]) -> (f64, f64) {
    let w = simpson_weights(xs.len(), xs[1] - xs[0]);
    let mut mass = 0.0;
    let mut ent = 0.0;
    for ((&x, &c), &wi) in xs.iter().zip(values).zip(&w) {
        mass += 2.0 * PI * x * c * wi;
        ent -= 2.0 * PI * x * xlogx(c) * wi;
    }
    (mass, ent)
}

/// Unnormalized `|φ_L|²` as a function of `y = Δk_z L`.
fn sinc2_half(y: f64) -> f64 {
    if y.abs() < 1e-8 {
        1.0
    } else {
        let s = (0.5 * y).sin() / (0.5 * y);
        s * s
    }
}

/// Tail integrals beyond `y = Y` of `u = 4 sin²(y/2)/y²`: `(∫u dy, ∫u ln u dy)`.
fn sinc2_tail(y: f64) -> (f64, f64) {
    let mass = 2.0 / y;
    let ulnu = (2.0 * 4f64.ln() + 4.0 * SIN2_LOG_MEAN) / y - 4.0 * (y.ln() + 1.0) / y;
    (mass, ulnu)
}

/// Tail integrals beyond `a = A` of `u = 1/a²`.
fn inverse_square_tail(a: f64) -> (f64, f64) {
    (1.0 / a, -2.0 * (a.ln() + 1.0) / a)
}

/// Entropy in nats of a radial density `u/Z` with area element `m·dv`,
/// from body sums `(∫u dv, ∫u ln u dv)` and tails.
fn normalized_entropy(m: f64, body: (f64, f64), tail: (f64, f64)) -> (f64, f64) {
    let z = m * (body.0 + tail.0);
    let s = m * (body.1 + tail.1);
    (z, z.ln() - s / z)
}

fn momentum_entropies(params: &SourceParams, settings: &TransverseSettings) -> Result<TransverseEntropies> {
    check_settings(params, settings)?;
    let (k, l) = (params.wavenumber_per_mm, params.crystal_length_mm);
    let dl = params.collinear_mismatch_per_mm * l;
    let sigma = params.sum_width();
    let res = settings.resolution as f64;
    let q_max = settings.momentum_extent * params.difference_width();

    // H(q-) in x = q²L/4K, area element d²q = (4πK/L) dx
    let x_max = q_max * q_max * l / (4.0 * k);
    let dx = 0.32 / res;
    let nx = odd((x_max / dx).ceil() as usize + 1);
    let dq = sigma / res;
    let nq = odd(((q_max + 16.0 * sigma) / dq).ceil() as usize + 1);
    budget(nx.max(nq), (nx.max(nq) as f64) / res, settings)?;
    if x_max - dl < 100.0 {
        return Err(invalid("momentum_extent", "too small for the phase-matching tail"));
    }
    let x_end = (nx - 1) as f64 * dx;
    let wx = simpson_weights(nx, dx);
    let (mut body_u, mut body_ulnu) = (0.0, 0.0);
    for (i, w) in wx.iter().enumerate() {
        let u = sinc2_half(dl - i as f64 * dx);
        body_u += w * u;
        body_ulnu += w * xlogx(u);
    }
    let m = 4.0 * PI * k / l;
    let tail = sinc2_tail(x_end - dl);
    let (z, h_diff) = normalized_entropy(m, (body_u, body_ulnu), tail);

    // marginal: radial convolution of h with the pump Gaussian
    let radii: Vec<f64> = (0..nq).map(|j| j as f64 * dq).collect();
    let masses: Vec<f64> = radii
        .iter()
        .map(|&q| 2.0 * PI * q * dq * sinc2_half(dl - q * q * l / (4.0 * k)) / z)
        .collect();
    let n_out = odd((q_max / dq).ceil() as usize + 1);
    let xs = &radii[..n_out];
    let c = radial_convolution(sigma, &radii, &masses, xs);
    let (mass, ent) = radial_body(xs, &c);
    let y_end = xs[n_out - 1].powi(2) * l / (4.0 * k) - dl;
    let (tm, tulnu) = sinc2_tail(y_end);
    // tail of the normalized density u/z: ∫ (u/z) ln(u/z)
    let tail_mass = m * tm / z;
    let tail_ent = -(m * tulnu / z - z.ln() * tail_mass);

    Ok(TransverseEntropies::assemble(
        Basis::Momentum,
        gaussian_entropy_2d(sigma),
        h_diff / LN_2,
        (ent + tail_ent) / LN_2,
        mass + tail_mass,
    ))
}

/// `|∫_a^∞ e^{iu}/u du|² = Ci(a)² + (π/2 - Si(a))²`.
fn fresnel_profile(a: f64) -> f64 {
    let (si, ci) = sici(a);
    let s = 0.5 * PI - si;
    ci * ci + s * s
}

fn position_entropies(params: &SourceParams, settings: &TransverseSettings) -> Result<TransverseEntropies> {
    check_settings(params, settings)?;
    if params.collinear_mismatch_per_mm != 0.0 {
        return Err(invalid(
            "collinear_mismatch_per_mm",
            "the two-dimensional position factor is implemented for δ = 0",
        ));
    }
    let (k, l) = (params.wavenumber_per_mm, params.crystal_length_mm);
    let sigma = params.pump_waist_mm;
    let res = settings.resolution as f64;

    // H(R-) on a logarithmic grid in a = KR²/4L, area element d²R = (4πL/K) da
    let (t_min, t_max) = (-34.0, 9.0 * std::f64::consts::LN_10);
    let nt = odd((4000.0 * res) as usize);
    let x_max = settings.position_extent * sigma;
    let dx = sigma / res;
    let nx = odd((x_max / dx).ceil() as usize + 1);
    budget(nt.max(nx), 4000.0, settings)?;
    let dt = (t_max - t_min) / (nt - 1) as f64;
    let wt = simpson_weights(nt, dt);
    let a: Vec<f64> = (0..nt).map(|i| (t_min + i as f64 * dt).exp()).collect();
    let u: Vec<f64> = a.par_iter().map(|&a| fresnel_profile(a)).collect();
    let (mut body_u, mut body_ulnu) = (0.0, 0.0);
    for ((&ai, &ui), &w) in a.iter().zip(&u).zip(&wt) {
        body_u += w * ai * ui;
        body_ulnu += w * ai * xlogx(ui);
    }
    let m = 4.0 * PI * l / k;
    let (z, h_diff) = normalized_entropy(m, (body_u, body_ulnu), inverse_square_tail(a[nt - 1]));

    let radii: Vec<f64> = a.iter().map(|&a| (4.0 * l * a / k).sqrt()).collect();
    let masses: Vec<f64> = a
        .iter()
        .zip(&u)
        .zip(&wt)
        .map(|((&a, &u), &w)| m * w * a * u / z)
        .collect();
    let xs: Vec<f64> = (0..nx).map(|i| i as f64 * dx).collect();
    let c = radial_convolution(sigma, &radii, &masses, &xs);
    let (mass, ent) = radial_body(&xs, &c);
    let a_end = k * xs[nx - 1].powi(2) / (4.0 * l);
    let (tm, tulnu) = inverse_square_tail(a_end);
    let tail_mass = m * tm / z;
    let tail_ent = -(m * tulnu / z - z.ln() * tail_mass);

    Ok(TransverseEntropies::assemble(
        Basis::Position,
        gaussian_entropy_2d(sigma),
        h_diff / LN_2,
        (ent + tail_ent) / LN_2,
        mass + tail_mass,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sin2_log_mean() {
        let n = 200_000;
        let mean: f64 = (0..n)
            .map(|i| {
                let s = ((i as f64 + 0.5) * PI / n as f64).sin().powi(2);
                s * s.ln()
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - SIN2_LOG_MEAN).abs() < 1e-9);
    }

    #[test]
    fn gaussian_entropy_by_quadrature() {
        let sigma = 0.7;
        let dx = sigma / 64.0;
        let xs: Vec<f64> = (0..odd((14.0 * sigma / dx) as usize)).map(|i| i as f64 * dx).collect();
        let c: Vec<f64> = xs
            .iter()
            .map(|x| (-0.5 * x * x / (sigma * sigma)).exp() / (2.0 * PI * sigma * sigma))
            .collect();
        let (mass, ent) = radial_body(&xs, &c);
        assert!((mass - 1.0).abs() < 1e-9);
        assert!((ent / LN_2 - gaussian_entropy_2d(sigma)).abs() < 1e-6);
    }

    #[test]
    fn gaussian_convolution_mutual_information() {
        // g, h isotropic Gaussians: MI = 2 log₂((σg² + σh²) / (2σgσh))
        let (sg, sh) = (0.5, 3.0);
        let dr = sg / 16.0;
        let radii: Vec<f64> = (0..odd((14.0 * sh / dr) as usize)).map(|i| i as f64 * dr).collect();
        let w = simpson_weights(radii.len(), dr);
        let masses: Vec<f64> = radii
            .iter()
            .zip(&w)
            .map(|(&r, &w)| 2.0 * PI * r * w * (-0.5 * r * r / (sh * sh)).exp() / (2.0 * PI * sh * sh))
            .collect();
        let xs = &radii[..odd((12.0 * sh / dr) as usize)];
        let c = radial_convolution(sg, &radii, &masses, xs);
        let (mass, ent) = radial_body(xs, &c);
        assert!((mass - 1.0).abs() < 1e-8);
        let r = TransverseEntropies::assemble(
            Basis::Momentum,
            gaussian_entropy_2d(sg),
            gaussian_entropy_2d(sh),
            ent / LN_2,
            mass,
        );
        let expect = 2.0 * ((sg * sg + sh * sh) / (2.0 * sg * sh)).log2();
        assert!(
            (r.mutual_information - expect).abs() < 1e-6,
            "{} vs {expect}",
            r.mutual_information
        );
    }

    #[test]
    fn fresnel_profile_normalization() {
        // ∫₀^∞ |E(a)|² da = π
        let n = odd(200_001);
        let (t0, t1) = (-34.0f64, 30.0f64.ln() * 3.0);
        let dt = (t1 - t0) / (n - 1) as f64;
        let w = simpson_weights(n, dt);
        let body: f64 = (0..n)
            .map(|i| {
                let a = (t0 + i as f64 * dt).exp();
                w[i] * a * fresnel_profile(a)
            })
            .sum();
        let a_end = t1.exp();
        assert!((body + inverse_square_tail(a_end).0 - PI).abs() < 1e-6);
    }

    #[test]
    fn rejects_budget() {
        let p = SourceParams::default();
        let s = TransverseSettings {
            max_samples: 1000,
            ..TransverseSettings::default()
        };
        match entropies_full_transverse(&p, &s) {
            Err(Error::MemoryBudget { suggested, .. }) => assert!(suggested < 8),
            other => panic!("{other:?}"),
        }
    }
}
