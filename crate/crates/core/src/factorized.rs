//! Exact sum/difference factorization of the biphoton density.
//!
//! Both bases share the form
//!
//! ```text
//! p(x_s, x_i) = 2 · g(x_s + x_i) · h(x_s - x_i)
//! ```
//!
//! where `g` and `h` are normalized one-dimensional densities of
//! `x+ = x_s + x_i` and `x- = x_s - x_i`. In momentum `g` is the Gaussian pump
//! envelope and `h = |φ_L|²`; in position `g` is the transformed envelope
//! (again Gaussian) and `h` is `|φ̃_L|²`, obtained by FFT. Every quantity below
//! reduces to one-dimensional quadratures over the narrower factor, so the
//! realistic aspect ratio (several hundred) never needs a two-dimensional grid.

use std::f64::consts::{E, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use statrs::function::erf::erf;

use crate::amplitude::{AxisTransform, Basis, Density1D, JointDistribution, Party};
use crate::error::{invalid, Error, Result};
use crate::grid::Grid1D;
use crate::source::SourceParams;

/// Tail mass dropped on each side when a tabulated factor is used as a
/// quadrature variable.
const NODE_TAIL: f64 = 1e-13;
/// Nodes per unit standard deviation for a Gaussian quadrature variable.
const GAUSS_NODES_PER_SIGMA: usize = 16;
const GAUSS_SPAN: f64 = 9.0;
const MAX_MARGINAL_POINTS: usize = 1 << 20;

/// Normalized one-dimensional density of `x+` or `x-`.
#[derive(Debug, Clone)]
pub enum Profile {
    Gaussian {
        sigma: f64,
    },
    /// Piecewise-linear density on a uniform table, zero outside.
    Tabulated {
        min: f64,
        step: f64,
        values: Vec<f64>,
        cumulative: Vec<f64>,
    },
}

impl Profile {
    pub fn gaussian(sigma: f64) -> Self {
        Profile::Gaussian { sigma }
    }

    /// Normalizes `values` under the trapezoid rule.
    pub fn tabulated(min: f64, step: f64, mut values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || !(step > 0.0) {
            return Err(invalid("values", "tabulated profile needs >= 2 samples"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Numerical("profile must be finite and >= 0".into()));
        }
        let mut cumulative = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in values.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * step;
            cumulative.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::Numerical("profile vanishes".into()));
        }
        values.iter_mut().for_each(|v| *v /= acc);
        cumulative.iter_mut().for_each(|c| *c /= acc);
        Ok(Profile::Tabulated {
            min,
            step,
            values,
            cumulative,
        })
    }

    pub fn density(&self, x: f64) -> f64 {
        match self {
            Profile::Gaussian { sigma } => {
                let z = x / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
            }
            Profile::Tabulated { min, step, values, .. } => {
                let t = (x - min) / step;
                if !(t >= 0.0) {
                    return 0.0;
                }
                let i = t.floor() as usize;
                if i + 1 >= values.len() {
                    return if i + 1 == values.len() && t == i as f64 {
                        values[i]
                    } else {
                        0.0
                    };
                }
                let f = t - i as f64;
                values[i] * (1.0 - f) + values[i + 1] * f
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Profile::Gaussian { sigma } => 0.5 * (1.0 + erf(x / (sigma * 2f64.sqrt()))),
            Profile::Tabulated {
                min,
                step,
                values,
                cumulative,
            } => {
                let t = (x - min) / step;
                if !(t > 0.0) {
                    return 0.0;
                }
                let i = t.floor() as usize;
                if i + 1 >= values.len() {
                    return 1.0;
                }
                let f = t - i as f64;
                let pi = values[i];
                let px = pi * (1.0 - f) + values[i + 1] * f;
                cumulative[i] + 0.5 * (pi + px) * f * step
            }
        }
    }

    /// Differential entropy in bits.
    pub fn entropy(&self) -> f64 {
        match self {
            Profile::Gaussian { sigma } => 0.5 * (2.0 * PI * E * sigma * sigma).log2(),
            Profile::Tabulated { step, values, .. } => {
                -values.iter().filter(|&&p| p > 0.0).map(|&p| p * p.log2()).sum::<f64>() * step
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Profile::Gaussian { sigma } => sigma * sigma,
            Profile::Tabulated { min, step, values, .. } => {
                let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
                for (i, p) in values.iter().enumerate() {
                    let x = min + i as f64 * step;
                    m0 += p;
                    m1 += p * x;
                    m2 += p * x * x;
                }
                m2 / m0 - (m1 / m0).powi(2)
            }
        }
    }

    /// Interval holding all but `tail` of the mass on each side.
    pub fn support(&self, tail: f64) -> (f64, f64) {
        match self {
            Profile::Gaussian { sigma } => {
                let span = if tail > 0.0 {
                    (-2.0 * (tail * sigma * (2.0 * PI).sqrt()).ln()).sqrt().max(1.0)
                } else {
                    GAUSS_SPAN
                };
                // crude inverse of the tail, clamped to a safe range
                let k = span.clamp(GAUSS_SPAN, 12.0);
                (-k * sigma, k * sigma)
            }
            Profile::Tabulated {
                min, step, cumulative, ..
            } => {
                let lo = cumulative.partition_point(|&c| c < tail).saturating_sub(1);
                let hi = cumulative
                    .partition_point(|&c| c <= 1.0 - tail)
                    .min(cumulative.len() - 1);
                (min + lo as f64 * step, min + hi as f64 * step)
            }
        }
    }

    /// Full table extent; unbounded for the Gaussian.
    pub fn extent(&self) -> (f64, f64) {
        match self {
            Profile::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Profile::Tabulated { min, step, values, .. } => (*min, min + (values.len() - 1) as f64 * step),
        }
    }

    /// Characteristic width used to rank the two factors.
    pub fn width(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Resolution at which the profile has structure.
    pub fn resolution(&self) -> f64 {
        match self {
            Profile::Gaussian { sigma } => sigma / GAUSS_NODES_PER_SIGMA as f64,
            Profile::Tabulated { step, .. } => *step,
        }
    }

    /// Discrete quadrature (nodes, weights summing to one).
    pub fn nodes(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Profile::Gaussian { sigma } => {
                let n = 2 * (GAUSS_SPAN as usize) * GAUSS_NODES_PER_SIGMA + 1;
                let h = 2.0 * GAUSS_SPAN * sigma / (n - 1) as f64;
                let xs: Vec<f64> = (0..n).map(|i| -GAUSS_SPAN * sigma + i as f64 * h).collect();
                let mut ws: Vec<f64> = xs.iter().map(|&x| self.density(x)).collect();
                let z: f64 = ws.iter().sum();
                ws.iter_mut().for_each(|w| *w /= z);
                (xs, ws)
            }
            Profile::Tabulated { min, step, values, .. } => {
                let (lo, hi) = self.support(NODE_TAIL);
                let i0 = ((lo - min) / step).round().max(0.0) as usize;
                let i1 = (((hi - min) / step).round() as usize).min(values.len() - 1);
                let xs: Vec<f64> = (i0..=i1).map(|i| min + i as f64 * step).collect();
                let mut ws: Vec<f64> = values[i0..=i1].to_vec();
                let z: f64 = ws.iter().sum();
                ws.iter_mut().for_each(|w| *w /= z);
                (xs, ws)
            }
        }
    }
}

/// Resolution of the tabulated factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorSettings {
    /// Samples of `φ_L(q-)`; a power of two.
    pub count: usize,
    /// Table half-extent in units of `√(8πK/L)`.
    pub extent: f64,
}

impl Default for FactorSettings {
    fn default() -> Self {
        Self {
            count: 1 << 16,
            extent: 40.0,
        }
    }
}

impl FactorSettings {
    pub fn with_count(count: usize) -> Self {
        Self {
            count,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct FactorizedDistribution {
    basis: Basis,
    sum: Profile,
    diff: Profile,
    narrow_sum: bool,
}

/// Momentum and position densities of one source, sharing the `φ_L` table.
#[derive(Debug, Clone)]
pub struct SourceDistributions {
    pub momentum: FactorizedDistribution,
    pub position: FactorizedDistribution,
}

impl SourceDistributions {
    pub fn new(params: &SourceParams, settings: &FactorSettings) -> Result<Self> {
        params.validate()?;
        let table = phase_matching_table(params, settings)?;
        let w0 = params.pump_waist_mm;

        let h_k: Vec<f64> = table.values.iter().map(|v| v.norm_sqr()).collect();
        let momentum = FactorizedDistribution::new(
            Basis::Momentum,
            Profile::gaussian(1.0 / w0),
            Profile::tabulated(table.grid.min(), table.grid.step(), h_k)?,
        );

        // φ̃(x); the density of r- = r_s - r_i is |φ̃(r-/2)|²
        let xg = table.grid.reciprocal();
        let mut planner = FftPlanner::new();
        let tf = AxisTransform::new(&table.grid, &xg, &mut planner);
        let mut data = table.values;
        tf.apply(&mut data);
        let h_r: Vec<f64> = data.iter().map(|v| v.norm_sqr()).collect();
        let position = FactorizedDistribution::new(
            Basis::Position,
            Profile::gaussian(w0),
            Profile::tabulated(2.0 * xg.min(), 2.0 * xg.step(), h_r)?,
        );
        Ok(Self { momentum, position })
    }

    pub fn get(&self, basis: Basis) -> &FactorizedDistribution {
        match basis {
            Basis::Momentum => &self.momentum,
            Basis::Position => &self.position,
        }
    }
}

pub(crate) struct PhaseMatchingTable {
    pub grid: Grid1D,
    pub values: Vec<Complex64>,
}

pub(crate) fn phase_matching_table(params: &SourceParams, settings: &FactorSettings) -> Result<PhaseMatchingTable> {
    if settings.count < 1024 || !settings.count.is_power_of_two() {
        return Err(invalid(
            "count",
            format!("{} must be a power of two >= 1024", settings.count),
        ));
    }
    if !(settings.extent >= 4.0) {
        return Err(invalid("extent", format!("{} < 4", settings.extent)));
    }
    let half = settings.extent * params.difference_width();
    let grid = Grid1D::symmetric(settings.count, half)?;
    let values = grid.coords().map(|q| params.phase_matching(q)).collect();
    Ok(PhaseMatchingTable { grid, values })
}

impl FactorizedDistribution {
    pub fn new(basis: Basis, sum: Profile, diff: Profile) -> Self {
        let narrow_sum = sum.width() <= diff.width();
        Self {
            basis,
            sum,
            diff,
            narrow_sum,
        }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn sum_profile(&self) -> &Profile {
        &self.sum
    }

    pub fn diff_profile(&self) -> &Profile {
        &self.diff
    }

    pub fn density(&self, x_s: f64, x_i: f64) -> f64 {
        2.0 * self.sum.density(x_s + x_i) * self.diff.density(x_s - x_i)
    }

    fn sum_is_narrow(&self) -> bool {
        self.narrow_sum
    }

    /// `H(x_s, x_i) = H(x+) + H(x-) - log₂|det J|`, `|det J| = 2`.
    pub fn joint_entropy(&self) -> f64 {
        self.sum.entropy() + self.diff.entropy() - 1.0
    }

    /// `Cov(x_s, x_i) / (σ_s σ_i)` from the factor variances.
    pub fn correlation(&self) -> f64 {
        let (vp, vm) = (self.sum.variance(), self.diff.variance());
        (vp - vm) / (vp + vm)
    }

    /// Grid on which marginals are evaluated: resolves the wide factor at the
    /// halved scale of `x = (x+ ± x-)/2`.
    fn marginal_grid(&self) -> Result<Grid1D> {
        let (plo, phi) = self.sum.support(NODE_TAIL);
        let (mlo, mhi) = self.diff.support(NODE_TAIL);
        let half = 0.5 * (plo.abs().max(phi.abs()) + mlo.abs().max(mhi.abs()));
        let wide = if self.sum_is_narrow() { &self.diff } else { &self.sum };
        let step = 0.5 * wide.resolution();
        let needed = (2.0 * half / step).ceil() as usize + 1;
        let count = needed.next_power_of_two().max(1024);
        if count > MAX_MARGINAL_POINTS {
            return Err(Error::MemoryBudget {
                requested: count,
                budget: MAX_MARGINAL_POINTS,
                suggested: MAX_MARGINAL_POINTS,
            });
        }
        Grid1D::symmetric(count, half)
    }

    /// Moments `Σ_n w_n y_n^j · wide(…)` of the narrow variable conditioned on
    /// `x_other`, for `j = 0, 1, 2`.
    fn conditional_moments(&self, target: Party, x_other: f64, nodes: &(Vec<f64>, Vec<f64>)) -> [f64; 3] {
        let (ys, ws) = nodes;
        let mut m = [0.0; 3];
        let narrow_sum = self.sum_is_narrow();
        for (&y, &w) in ys.iter().zip(ws) {
            let wide = match (narrow_sum, target) {
                // x_s | x_i: (x+, x_i) ∝ g(x+) h(x+ - 2x_i)
                (true, Party::Signal) => self.diff.density(y - 2.0 * x_other),
                // x_i | x_s: (x+, x_s) ∝ g(x+) h(2x_s - x+)
                (true, Party::Idler) => self.diff.density(2.0 * x_other - y),
                // x_s | x_i: (x-, x_i) ∝ h(x-) g(x- + 2x_i)
                (false, Party::Signal) => self.sum.density(y + 2.0 * x_other),
                // x_i | x_s: (x-, x_s) ∝ h(x-) g(2x_s - x-)
                (false, Party::Idler) => self.sum.density(2.0 * x_other - y),
            };
            let p = w * wide;
            m[0] += p;
            m[1] += p * y;
            m[2] += p * y * y;
        }
        m
    }

    pub fn marginal(&self, which: Party) -> Result<Density1D> {
        let grid = self.marginal_grid()?;
        let nodes = if self.sum_is_narrow() {
            self.sum.nodes()
        } else {
            self.diff.nodes()
        };
        let target = which.other();
        let values = (0..grid.count())
            .into_par_iter()
            .map(|i| 2.0 * self.conditional_moments(target, grid.coord(i), &nodes)[0])
            .collect();
        Ok(Density1D { grid, values })
    }

    pub fn marginal_entropy(&self, which: Party) -> Result<f64> {
        let m = self.marginal(which)?;
        let d = m.grid.step();
        let total = m.total();
        Ok(-m
            .values
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| {
                let q = p / total;
                q * q.log2()
            })
            .sum::<f64>()
            * d)
    }

    /// Mean conditional variance `E_other[Var(x_target | x_other)]`.
    pub fn conditional_variance(&self, target: Party) -> Result<f64> {
        let grid = self.marginal_grid()?;
        let nodes = if self.sum_is_narrow() {
            self.sum.nodes()
        } else {
            self.diff.nodes()
        };
        // collected before summing so the result does not depend on scheduling
        let terms: Vec<(f64, f64)> = (0..grid.count())
            .into_par_iter()
            .map(|i| {
                let [m0, m1, m2] = self.conditional_moments(target, grid.coord(i), &nodes);
                if m0 > 0.0 {
                    (m2 - m1 * m1 / m0, m0)
                } else {
                    (0.0, 0.0)
                }
            })
            .collect();
        let (acc, mass) = terms.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        Ok((acc / mass).max(0.0))
    }

    /// `P(x_party <= x)`.
    pub fn marginal_cdf(&self, which: Party, x: f64) -> f64 {
        let narrow_sum = self.sum_is_narrow();
        let (ys, ws) = if narrow_sum {
            self.sum.nodes()
        } else {
            self.diff.nodes()
        };
        ys.iter()
            .zip(&ws)
            .map(|(&y, &w)| {
                w * match (narrow_sum, which) {
                    (true, Party::Signal) => self.diff.cdf(2.0 * x - y),
                    (true, Party::Idler) => 1.0 - self.diff.cdf(y - 2.0 * x),
                    (false, Party::Signal) => self.sum.cdf(2.0 * x - y),
                    (false, Party::Idler) => self.sum.cdf(2.0 * x + y),
                }
            })
            .sum()
    }

    /// Half-width of the symmetric interval holding `coverage` of the marginal.
    pub fn central_half_width(&self, which: Party, coverage: f64) -> Result<f64> {
        if !(coverage > 0.0 && coverage < 1.0) {
            return Err(invalid("coverage", format!("{coverage} is outside (0, 1)")));
        }
        let mass = |h: f64| self.marginal_cdf(which, h) - self.marginal_cdf(which, -h);
        let mut hi = 0.5 * (self.sum.width() + self.diff.width()).max(1e-12);
        let mut guard = 0;
        while mass(hi) < coverage {
            hi *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(Error::Numerical("coverage interval does not converge".into()));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mass(mid) < coverage {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        Ok(hi)
    }

    /// Probability of each (signal pixel, idler pixel) pair; pixels are the
    /// half-open intervals between consecutive edges.
    pub fn bin(&self, signal_edges: &[f64], idler_edges: &[f64]) -> Result<Vec<f64>> {
        let (na, nb) = (signal_edges.len() - 1, idler_edges.len() - 1);
        let narrow_sum = self.sum_is_narrow();
        let (narrow, wide) = if narrow_sum {
            (&self.sum, &self.diff)
        } else {
            (&self.diff, &self.sum)
        };
        let (wlo, whi) = wide.extent();
        let lim = signal_edges[na].abs().max(signal_edges[0].abs()) + idler_edges[nb].abs().max(idler_edges[0].abs());
        if lim >= whi.min(-wlo) {
            return Err(Error::GridExtent {
                needed: lim,
                available: whi.min(-wlo),
            });
        }
        let (ys, ws) = narrow.nodes();
        let (ymin, ymax) = (ys[0], ys[ys.len() - 1]);
        let mut out = vec![0.0; na * nb];
        for a in 0..na {
            let (a0, a1) = (signal_edges[a], signal_edges[a + 1]);
            // pixels of the idler that can pair with `a` given the narrow support
            let (blo, bhi) = if narrow_sum {
                (ymin - a1, ymax - a0) // x_i = x+ - x_s
            } else {
                (a0 - ymax, a1 - ymin) // x_i = x_s - x-
            };
            let b0 = idler_edges.partition_point(|&e| e <= blo).saturating_sub(1);
            let b1 = idler_edges.partition_point(|&e| e < bhi).min(nb);
            for b in b0..b1 {
                let (c0, c1) = (idler_edges[b], idler_edges[b + 1]);
                let mut p = 0.0;
                for (&y, &w) in ys.iter().zip(&ws) {
                    let (lo, hi) = if narrow_sum {
                        ((2.0 * a0 - y).max(y - 2.0 * c1), (2.0 * a1 - y).min(y - 2.0 * c0))
                    } else {
                        ((2.0 * a0 - y).max(2.0 * c0 + y), (2.0 * a1 - y).min(2.0 * c1 + y))
                    };
                    if hi > lo {
                        p += w * (wide.cdf(hi) - wide.cdf(lo));
                    }
                }
                out[a * nb + b] = p;
            }
        }
        Ok(out)
    }

    /// Samples the density on a rectangular grid.
    pub fn to_grid(&self, signal: Grid1D, idler: Grid1D) -> Result<JointDistribution> {
        JointDistribution::from_fn(self.basis, signal, idler, |xs, xi| self.density(xs, xi))
    }
}
