use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Uniform one-dimensional sampling grid with a power-of-two sample count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    count: usize,
    min: f64,
    max: f64,
}

impl Grid1D {
    pub fn new(count: usize, min: f64, max: f64) -> Result<Self> {
        if count < 2 || !count.is_power_of_two() {
            return Err(invalid("count", format!("{count} is not a power of two >= 2")));
        }
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(invalid("extent", format!("[{min}, {max}] is not increasing")));
        }
        Ok(Self { count, min, max })
    }

    /// Grid spanning `[-half_extent, half_extent]`.
    pub fn symmetric(count: usize, half_extent: f64) -> Result<Self> {
        Self::new(count, -half_extent, half_extent)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.count - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step()
    }

    pub fn coords(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        let step = self.step();
        (0..self.count).map(move |i| self.min + i as f64 * step)
    }

    /// Conjugate grid of a unitary DFT: step `2π/(NΔ)`, centred on zero.
    pub fn reciprocal(&self) -> Self {
        let n = self.count as f64;
        let step = 2.0 * PI / (n * self.step());
        let min = -0.5 * n * step;
        Self {
            count: self.count,
            min,
            max: min + (n - 1.0) * step,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_power_of_two() {
        assert!(Grid1D::new(100, -1.0, 1.0).is_err());
        assert!(Grid1D::new(1, -1.0, 1.0).is_err());
        assert!(Grid1D::new(64, 1.0, -1.0).is_err());
    }

    #[test]
    fn uniform_spacing() {
        let g = Grid1D::symmetric(64, 3.0).unwrap();
        let step = g.step();
        assert!((step - 6.0 / 63.0).abs() < 1e-15);
        let pts: Vec<f64> = g.coords().collect();
        for w in pts.windows(2) {
            assert!(((w[1] - w[0]) - step).abs() <= 1e-12 * step);
        }
        assert!((pts[63] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn reciprocal_step_is_conjugate() {
        let g = Grid1D::symmetric(256, 10.0).unwrap();
        let r = g.reciprocal();
        assert_eq!(r.count(), 256);
        let prod = g.step() * r.step() * 256.0;
        assert!((prod - 2.0 * PI).abs() < 1e-12);
        let back = r.step() * (r.count() - 1) as f64;
        assert!(((r.max() - r.min()) - back).abs() < 1e-12 * back);
    }
}
