//! Transverse biphoton amplitude of a Gaussian-pumped, spectrally filtered
//! degenerate down-conversion source, in the paraxial one-dimension-per-photon
//! model.
//!
//! With `q+ = k_s + k_i` and `q- = k_s - k_i` the amplitude factorizes as
//!
//! ```text
//! f(k_s, k_i) = C · exp(-w0² q+² / 4) · φ_L(q-)
//! φ_L(q)      = (exp(i Δk_z L) - 1) / (i Δk_z L),   Δk_z = δ - q² / (4K)
//! ```
//!
//! Lengths are millimetres and wave numbers rad/mm throughout.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::grid::Grid1D;

/// Refractive index used to derive `K` when none is given (degenerate
/// ordinary wave in BBO near 800 nm).
pub const DEFAULT_REFRACTIVE_INDEX: f64 = 1.66;

/// Below this `|Δk_z L|` the phase-matching function switches to its series.
const SERIES_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    /// Pump wavelength in nm.
    pub pump_wavelength_nm: f64,
    /// Gaussian pump waist `w0` in mm.
    pub pump_waist_mm: f64,
    /// Crystal length `L` in mm.
    pub crystal_length_mm: f64,
    /// Degenerate wave number `K = k_s = k_i` inside the crystal, rad/mm.
    pub wavenumber_per_mm: f64,
    /// Collinear mismatch `δ = 2K - k_p`, rad/mm.
    pub collinear_mismatch_per_mm: f64,
    /// Pair generation probability per pump pulse.
    pub pair_probability: f64,
}

impl Default for SourceParams {
    /// 400 nm pump, 2 mm FWHM waist, 2 mm crystal, `P_PDC = 0.01`.
    fn default() -> Self {
        Self {
            pump_wavelength_nm: 400.0,
            pump_waist_mm: waist_from_fwhm(2.0),
            crystal_length_mm: 2.0,
            wavenumber_per_mm: degenerate_wavenumber(400.0, DEFAULT_REFRACTIVE_INDEX),
            collinear_mismatch_per_mm: 0.0,
            pair_probability: 0.01,
        }
    }
}

/// Converts an intensity FWHM to the `1/e²` intensity radius `w0`.
pub fn waist_from_fwhm(fwhm_mm: f64) -> f64 {
    fwhm_mm / (2.0 * LN_2).sqrt()
}

pub fn fwhm_from_waist(w0_mm: f64) -> f64 {
    w0_mm * (2.0 * LN_2).sqrt()
}

/// `K = 2π n / λ_s` with `λ_s = 2 λ_p`, returned in rad/mm.
pub fn degenerate_wavenumber(pump_wavelength_nm: f64, refractive_index: f64) -> f64 {
    let lambda_mm = 2.0 * pump_wavelength_nm * 1e-6;
    2.0 * PI * refractive_index / lambda_mm
}

impl SourceParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pump_wavelength_nm", self.pump_wavelength_nm),
            ("pump_waist_mm", self.pump_waist_mm),
            ("crystal_length_mm", self.crystal_length_mm),
            ("wavenumber_per_mm", self.wavenumber_per_mm),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("{v} must be finite and > 0")));
            }
        }
        if !self.collinear_mismatch_per_mm.is_finite() {
            return Err(invalid("collinear_mismatch_per_mm", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.pair_probability) {
            return Err(invalid(
                "pair_probability",
                format!("{} is outside [0, 1]", self.pair_probability),
            ));
        }
        Ok(())
    }

    pub fn with_waist(mut self, w0_mm: f64) -> Self {
        self.pump_waist_mm = w0_mm;
        self
    }

    pub fn with_crystal_length(mut self, length_mm: f64) -> Self {
        self.crystal_length_mm = length_mm;
        self
    }

    /// Width `1/w0` of the pump-envelope intensity in `q+`.
    pub fn sum_width(&self) -> f64 {
        1.0 / self.pump_waist_mm
    }

    /// `√(8πK/L)`: location of the first zero of `|φ_L|²` at `δ = 0`.
    pub fn difference_width(&self) -> f64 {
        (8.0 * PI * self.wavenumber_per_mm / self.crystal_length_mm).sqrt()
    }

    /// Pump envelope `α(q+) = exp(-w0² q+² / 4)` (unnormalized).
    pub fn pump_envelope(&self, q_plus: f64) -> f64 {
        let w = self.pump_waist_mm;
        (-0.25 * w * w * q_plus * q_plus).exp()
    }

    /// Longitudinal phase matching `φ_L(q-)`.
    pub fn phase_matching(&self, q_minus: f64) -> Complex64 {
        let dkz = self.collinear_mismatch_per_mm - q_minus * q_minus / (4.0 * self.wavenumber_per_mm);
        phase_matching_of(dkz * self.crystal_length_mm)
    }

    /// `|φ_L(q-)|² = sinc²(Δk_z L / 2)`.
    pub fn phase_matching_intensity(&self, q_minus: f64) -> f64 {
        self.phase_matching(q_minus).norm_sqr()
    }

    /// Unnormalized amplitude `α(k_s + k_i) φ_L(k_s - k_i)`.
    pub fn amplitude(&self, k_s: f64, k_i: f64) -> Complex64 {
        self.phase_matching(k_s - k_i) * self.pump_envelope(k_s + k_i)
    }
}

/// `(e^{ix} - 1)/(ix)`, continuous at `x = 0`.
pub(crate) fn phase_matching_of(x: f64) -> Complex64 {
    if x.abs() < SERIES_THRESHOLD {
        // 1 + ix/2 - x²/6
        Complex64::new(1.0 - x * x / 6.0, 0.5 * x)
    } else {
        // (cos x - 1 + i sin x) / (i x) = sin x / x + i (1 - cos x) / x
        let h = (0.5 * x).sin();
        Complex64::new(x.sin() / x, 2.0 * h * h / x)
    }
}

/// Symmetric momentum grid of half-extent `coverage · max(1/w0, √(8πK/L))`.
pub fn auto_grid(params: &SourceParams, count: usize, coverage_factor: f64) -> Result<Grid1D> {
    params.validate()?;
    if count < 64 || !count.is_power_of_two() {
        return Err(invalid("count", format!("{count} must be a power of two >= 64")));
    }
    if !(coverage_factor.is_finite() && coverage_factor >= 1.0) {
        return Err(invalid("coverage_factor", format!("{coverage_factor} < 1")));
    }
    let half = coverage_factor * params.sum_width().max(params.difference_width());
    Grid1D::symmetric(count, half)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_matching_continuous_at_zero() {
        let p = SourceParams::default();
        let at_zero = p.phase_matching(0.0);
        assert_eq!(at_zero, Complex64::new(1.0, 0.0));
        for q in [1e-9, 1e-6, 1e-3, 0.1] {
            let v = p.phase_matching(q);
            assert!((v - at_zero).norm() < 1e-6, "q = {q}: {v}");
            assert!(v.re.is_finite() && v.im.is_finite());
        }
        // series branch agrees with the closed form just above the threshold
        let x = 2.0 * SERIES_THRESHOLD;
        let series = Complex64::new(1.0 - x * x / 6.0, 0.5 * x);
        assert!((phase_matching_of(x) - series).norm() < 1e-12);
    }

    #[test]
    fn first_sinc_zero() {
        let p = SourceParams::default();
        // Δk_z L = -2π  ⇔  q² = 8πK/L
        let q = p.difference_width();
        assert!(p.phase_matching_intensity(q) < 1e-20);
        assert!(p.phase_matching_intensity(0.9 * q) > 1e-3);
    }

    #[test]
    fn intensity_is_sinc_squared() {
        let p = SourceParams::default();
        for q in [10.0, 150.0, 390.0, 1234.5] {
            let x = -q * q / (4.0 * p.wavenumber_per_mm) * p.crystal_length_mm;
            let sinc = (x / 2.0).sin() / (x / 2.0);
            assert!((p.phase_matching_intensity(q) - sinc * sinc).abs() < 1e-14);
        }
    }

    #[test]
    fn defaults() {
        let p = SourceParams::default();
        assert!((fwhm_from_waist(p.pump_waist_mm) - 2.0).abs() < 1e-12);
        // 2π · 1.66 / 800 nm
        assert!((p.wavenumber_per_mm - 2.0 * PI * 1.66 / 8e-4).abs() < 1e-9);
        p.validate().unwrap();
    }

    #[test]
    fn auto_grid_extent() {
        let p = SourceParams::default();
        let g = auto_grid(&p, 1024, 5.0).unwrap();
        let half = 5.0 * p.sum_width().max(p.difference_width());
        assert_eq!(g.max(), half);
        assert_eq!(g.min(), -half);

        // w0 → ∞: the phase-matching width dominates
        let wide = p.with_waist(1e9);
        let g = auto_grid(&wide, 64, 1.0).unwrap();
        assert!((g.max() - wide.difference_width()).abs() < 1e-12);

        assert!(auto_grid(&p, 32, 5.0).is_err());
        assert!(auto_grid(&p, 1000, 5.0).is_err());
        assert!(auto_grid(&p, 1024, 0.5).is_err());
    }

    #[test]
    fn rejects_bad_params() {
        let p = SourceParams {
            pair_probability: 1.5,
            ..SourceParams::default()
        };
        assert!(p.validate().is_err());
        let p = SourceParams::default().with_waist(0.0);
        assert!(p.validate().is_err());
    }
}
