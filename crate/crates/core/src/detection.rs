//! Pixelated detector arrays, channel loss and dark counts.
//!
//! Each party maps its photon onto `n` equal pixels spanning the central
//! interval that holds a fixed fraction (`coverage`) of the single-photon
//! marginal. Photons landing outside the array are treated as lost, which is
//! folded into the detection efficiency.

use crate::amplitude::{marginal, Basis, JointDistribution, Party};
use crate::error::{invalid, Error, Result};
use crate::factorized::{FactorSettings, FactorizedDistribution, SourceDistributions};
use crate::infotheory::{discrete_mutual_information, ConditionalVariance, WitnessReport};
use crate::source::SourceParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorArrayParams {
    /// Pixels per party per basis.
    pub pixels: usize,
    /// Detection efficiency `η`.
    pub efficiency: f64,
    /// Dark-count probability per pixel per gate.
    pub dark_count_probability: f64,
    /// Fraction of the single-photon marginal spanned by the array.
    pub coverage: f64,
}

impl Default for DetectorArrayParams {
    fn default() -> Self {
        Self {
            pixels: 128,
            efficiency: 0.6,
            dark_count_probability: 1e-6,
            coverage: 0.9995,
        }
    }
}

impl DetectorArrayParams {
    pub fn with_pixels(mut self, pixels: usize) -> Self {
        self.pixels = pixels;
        self
    }

    pub fn with_dark_count_probability(mut self, p: f64) -> Self {
        self.dark_count_probability = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.pixels == 0 {
            return Err(invalid("pixels", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(invalid("efficiency", format!("{} is outside [0, 1]", self.efficiency)));
        }
        if !(0.0..1.0).contains(&self.dark_count_probability) {
            return Err(invalid(
                "dark_count_probability",
                format!("{} is outside [0, 1)", self.dark_count_probability),
            ));
        }
        if !(self.coverage > 0.0 && self.coverage <= 1.0) {
            return Err(invalid("coverage", format!("{} is outside (0, 1]", self.coverage)));
        }
        Ok(())
    }

    /// `η · coverage`: efficiency including photons that miss the array.
    pub fn effective_efficiency(&self) -> f64 {
        self.efficiency * self.coverage
    }

    /// Copy whose efficiency is the effective one, for use in the event
    /// probabilities.
    pub fn effective(&self) -> Self {
        Self {
            efficiency: self.effective_efficiency(),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Throughput `t_A` of Alice's arm.
    pub alice_throughput: f64,
    /// Throughput `t_B = t` of the channel to Bob.
    pub bob_throughput: f64,
    /// Free-space extinction, dB/km.
    pub extinction_db_per_km: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            alice_throughput: 1.0,
            bob_throughput: 1.0,
            extinction_db_per_km: 1.0,
        }
    }
}

impl ChannelParams {
    /// Source at Alice (`t_A = 1`), Bob behind throughput `t`.
    pub fn with_throughput(t: f64) -> Self {
        Self {
            bob_throughput: t,
            ..Self::default()
        }
    }

    pub fn from_loss_db(db: f64) -> Self {
        Self::with_throughput(10f64.powf(-db / 10.0))
    }

    pub fn from_distance_km(km: f64, extinction_db_per_km: f64) -> Self {
        Self {
            extinction_db_per_km,
            ..Self::from_loss_db(km * extinction_db_per_km)
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("alice_throughput", self.alice_throughput),
            ("bob_throughput", self.bob_throughput),
        ] {
            if !(0.0..=1.0).contains(&t) {
                return Err(invalid(name, format!("{t} is outside [0, 1]")));
            }
        }
        if !(self.extinction_db_per_km > 0.0 && self.extinction_db_per_km.is_finite()) {
            return Err(invalid("extinction_db_per_km", "must be finite and > 0"));
        }
        Ok(())
    }

    /// Loss `l = 1 - t_B`.
    pub fn loss(&self) -> f64 {
        1.0 - self.bob_throughput
    }

    pub fn loss_db(&self) -> f64 {
        // adding zero turns -0 into 0
        -10.0 * self.bob_throughput.log10() + 0.0
    }

    pub fn distance_km(&self) -> f64 {
        self.loss_db() / self.extinction_db_per_km
    }
}

/// Probabilities per pump gate of the three accepted-event classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventProbabilities {
    /// Both parties register a dark count.
    pub p1: f64,
    /// One photon and one dark count.
    pub p2: f64,
    /// Both photons detected.
    pub p3: f64,
    /// Part of `p2` in which Alice's click is the photon.
    pub p2_alice_photon: f64,
    /// Part of `p2` in which Bob's click is the photon.
    pub p2_bob_photon: f64,
}

impl EventProbabilities {
    pub fn accepted(&self) -> f64 {
        self.p1 + self.p2 + self.p3
    }

    /// `(P1 + P2) / (P1 + P2 + P3)`.
    pub fn background_fraction(&self) -> f64 {
        (self.p1 + self.p2) / self.accepted()
    }
}

/// Accepted-event probabilities for a single pair-emission chance per gate,
/// using the array efficiency as given.
pub fn event_probabilities(
    pair_probability: f64,
    channel: &ChannelParams,
    array: &DetectorArrayParams,
) -> Result<EventProbabilities> {
    array.validate()?;
    channel.validate()?;
    if !(0.0..=1.0).contains(&pair_probability) {
        return Err(invalid(
            "pair_probability",
            format!("{pair_probability} is outside [0, 1]"),
        ));
    }
    let n = array.pixels as f64;
    let (eta, pd) = (array.efficiency, array.dark_count_probability);
    let (ea, eb) = (eta * channel.alice_throughput, eta * channel.bob_throughput);
    let quiet = 1.0 - pd;

    let p1 = (1.0 - pair_probability + pair_probability * (1.0 - ea) * (1.0 - eb))
        * n
        * n
        * pd
        * pd
        * quiet.powf(2.0 * n - 2.0);
    let single = n * pd * quiet.powf(2.0 * n - 1.0);
    let p2_alice_photon = pair_probability * ea * (1.0 - eb) * single;
    let p2_bob_photon = pair_probability * (1.0 - ea) * eb * single;
    let p3 = pair_probability * eta * eta * channel.alice_throughput * channel.bob_throughput * quiet.powf(2.0 * n);
    Ok(EventProbabilities {
        p1,
        p2: pair_probability * (ea * (1.0 - eb) + (1.0 - ea) * eb) * single,
        p3,
        p2_alice_photon,
        p2_bob_photon,
    })
}

/// Share of each event class in an accepted-event distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentWeights {
    /// Both clicks are photons of one pair.
    pub signal: f64,
    /// At least one click is a dark count.
    pub background: f64,
}

/// Joint probability over (Alice pixel, Bob pixel), row-major in Alice's pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelJointDistribution {
    basis: Basis,
    alice_edges: Vec<f64>,
    bob_edges: Vec<f64>,
    probs: Vec<f64>,
    /// Probability that both photons land on the arrays.
    in_array_mass: f64,
    weights: ComponentWeights,
}

impl PixelJointDistribution {
    /// Normalizes `probs`; the edges carry one more entry than pixels.
    pub fn new(basis: Basis, alice_edges: Vec<f64>, bob_edges: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        let (na, nb) = (alice_edges.len().saturating_sub(1), bob_edges.len().saturating_sub(1));
        if na == 0 || nb == 0 || probs.len() != na * nb {
            return Err(Error::Shape(format!(
                "{} probabilities for {na}×{nb} pixels",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Numerical("pixel probabilities must be finite and >= 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Numerical("no probability on the arrays".into()));
        }
        Ok(Self {
            basis,
            alice_edges,
            bob_edges,
            probs: probs.iter().map(|p| p / total).collect(),
            in_array_mass: total.min(1.0),
            weights: ComponentWeights {
                signal: 1.0,
                background: 0.0,
            },
        })
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn alice_pixels(&self) -> usize {
        self.alice_edges.len() - 1
    }

    pub fn bob_pixels(&self) -> usize {
        self.bob_edges.len() - 1
    }

    pub fn alice_edges(&self) -> &[f64] {
        &self.alice_edges
    }

    pub fn bob_edges(&self) -> &[f64] {
        &self.bob_edges
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.probs[a * self.bob_pixels() + b]
    }

    pub fn in_array_mass(&self) -> f64 {
        self.in_array_mass
    }

    pub fn weights(&self) -> ComponentWeights {
        self.weights
    }

    pub fn alice_marginal(&self) -> Vec<f64> {
        self.probs
            .chunks_exact(self.bob_pixels())
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn bob_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.bob_pixels()];
        for row in self.probs.chunks_exact(self.bob_pixels()) {
            for (o, p) in out.iter_mut().zip(row) {
                *o += p;
            }
        }
        out
    }

    pub fn alice_centers(&self) -> Vec<f64> {
        centers(&self.alice_edges)
    }

    pub fn bob_centers(&self) -> Vec<f64> {
        centers(&self.bob_edges)
    }

    pub fn mutual_information(&self) -> Result<f64> {
        discrete_mutual_information(&self.probs, self.alice_pixels(), self.bob_pixels())
    }

    /// Exact aggregation onto `factor × factor` blocks of pixels.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let (na, nb) = (self.alice_pixels(), self.bob_pixels());
        if factor == 0 || na % factor != 0 || nb % factor != 0 {
            return Err(invalid("factor", format!("{factor} does not divide {na}×{nb}")));
        }
        let (ma, mb) = (na / factor, nb / factor);
        let mut probs = vec![0.0; ma * mb];
        for a in 0..na {
            for b in 0..nb {
                probs[(a / factor) * mb + b / factor] += self.get(a, b);
            }
        }
        Ok(Self {
            alice_edges: self.alice_edges.iter().step_by(factor).copied().collect(),
            bob_edges: self.bob_edges.iter().step_by(factor).copied().collect(),
            probs,
            ..self.clone()
        })
    }

    pub(crate) fn with_probs(&self, probs: Vec<f64>, weights: ComponentWeights) -> Self {
        let total: f64 = probs.iter().sum();
        Self {
            probs: probs.into_iter().map(|p| p / total).collect(),
            weights,
            ..self.clone()
        }
    }
}

impl ConditionalVariance for PixelJointDistribution {
    /// Uses pixel-center coordinates.
    fn conditional_variance(&self, target: Party) -> Result<f64> {
        let (na, nb) = (self.alice_pixels(), self.bob_pixels());
        let (xa, xb) = (self.alice_centers(), self.bob_centers());
        let mut acc = 0.0;
        let mut mass = 0.0;
        let (outer, inner) = match target {
            Party::Signal => (nb, na),
            Party::Idler => (na, nb),
        };
        for j in 0..outer {
            let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
            for i in 0..inner {
                let (p, x) = match target {
                    Party::Signal => (self.get(i, j), xa[i]),
                    Party::Idler => (self.get(j, i), xb[i]),
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

fn centers(edges: &[f64]) -> Vec<f64> {
    edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

/// `n + 1` equally spaced edges on `[-half, half]`. Edge `k` is computed from
/// `k / n` so that nested arrays share bit-identical edges.
pub fn array_edges(half_width: f64, pixels: usize) -> Vec<f64> {
    (0..=pixels)
        .map(|k| -half_width + 2.0 * half_width * (k as f64 / pixels as f64))
        .collect()
}

/// Half-width of the symmetric interval holding `coverage` of a gridded
/// marginal, with each sample standing for a cell of one grid step.
fn gridded_half_width(dist: &JointDistribution, which: Party, coverage: f64) -> Result<f64> {
    let m = marginal(dist, which);
    let g = m.grid;
    let d = g.step();
    let extent = g.max().min(-g.min()) + 0.5 * d;
    let mass_within = |h: f64| -> f64 {
        g.coords()
            .zip(&m.values)
            .map(|(x, p)| p * overlap(x - 0.5 * d, x + 0.5 * d, -h, h))
            .sum()
    };
    if coverage >= 1.0 {
        return Ok(extent);
    }
    let (mut lo, mut hi) = (0.0, extent);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass_within(mid) < coverage {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // reaching into the outermost cells means the grid truncated the marginal
    if hi > extent - d {
        return Err(Error::GridExtent {
            needed: hi,
            available: extent - d,
        });
    }
    Ok(hi)
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Per-cell overlap with each pixel as sparse `(pixel, fraction)` lists.
fn cell_weights(grid: &crate::grid::Grid1D, edges: &[f64]) -> Vec<Vec<(usize, f64)>> {
    let d = grid.step();
    grid.coords()
        .map(|x| {
            let (c0, c1) = (x - 0.5 * d, x + 0.5 * d);
            let first = edges.partition_point(|&e| e <= c0).saturating_sub(1);
            (first..edges.len() - 1)
                .take_while(|&k| edges[k] < c1)
                .filter_map(|k| {
                    let f = overlap(c0, c1, edges[k], edges[k + 1]) / d;
                    (f > 0.0).then_some((k, f))
                })
                .collect()
        })
        .collect()
}

/// Integrates a gridded density over the pixel pairs of two arrays.
pub fn bin_distribution(dist: &JointDistribution, array: &DetectorArrayParams) -> Result<PixelJointDistribution> {
    array.validate()?;
    let ha = gridded_half_width(dist, Party::Signal, array.coverage)?;
    let hb = gridded_half_width(dist, Party::Idler, array.coverage)?;
    let (ea, eb) = (array_edges(ha, array.pixels), array_edges(hb, array.pixels));
    let wa = cell_weights(dist.signal_grid(), &ea);
    let wb = cell_weights(dist.idler_grid(), &eb);
    let n = array.pixels;
    let cell = dist.cell();
    let mut probs = vec![0.0; n * n];
    for (i, ra) in wa.iter().enumerate() {
        if ra.is_empty() {
            continue;
        }
        for (j, rb) in wb.iter().enumerate() {
            let p = dist.get(i, j) * cell;
            if p == 0.0 {
                continue;
            }
            for &(a, fa) in ra {
                for &(b, fb) in rb {
                    probs[a * n + b] += p * fa * fb;
                }
            }
        }
    }
    PixelJointDistribution::new(dist.basis(), ea, eb, probs)
}

/// Exact pixel integration of a factorized density.
pub fn bin_factorized(dist: &FactorizedDistribution, array: &DetectorArrayParams) -> Result<PixelJointDistribution> {
    array.validate()?;
    if array.coverage >= 1.0 {
        return Err(invalid("coverage", "an unbounded density needs coverage < 1"));
    }
    let ha = dist.central_half_width(Party::Signal, array.coverage)?;
    let hb = dist.central_half_width(Party::Idler, array.coverage)?;
    let (ea, eb) = (array_edges(ha, array.pixels), array_edges(hb, array.pixels));
    let probs = dist.bin(&ea, &eb)?;
    PixelJointDistribution::new(dist.basis(), ea, eb, probs)
}

/// Mixture of accepted events: photon pairs, photon + dark count, two dark
/// counts. Dark counts are uniform over the pixels.
pub fn noisy_pixel_joint(
    signal: &PixelJointDistribution,
    probs: &EventProbabilities,
) -> Result<PixelJointDistribution> {
    let accepted = probs.accepted();
    if !(accepted > 0.0) {
        return Err(Error::NoAcceptedEvents);
    }
    let (na, nb) = (signal.alice_pixels(), signal.bob_pixels());
    let (pa, pb) = (signal.alice_marginal(), signal.bob_marginal());
    let (ua, ub) = (1.0 / na as f64, 1.0 / nb as f64);
    let mut out = Vec::with_capacity(na * nb);
    for (a, &pa) in pa.iter().enumerate() {
        for (b, &pb) in pb.iter().enumerate() {
            out.push(
                probs.p3 * signal.get(a, b)
                    + probs.p2_alice_photon * pa * ub
                    + probs.p2_bob_photon * ua * pb
                    + probs.p1 * ua * ub,
            );
        }
    }
    Ok(signal.with_probs(
        out,
        ComponentWeights {
            signal: probs.p3 / accepted,
            background: (probs.p1 + probs.p2) / accepted,
        },
    ))
}

/// One point of a witness scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessScanPoint {
    pub throughput: f64,
    pub witness: WitnessReport,
    pub events: EventProbabilities,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Smallest throughput at which the witness holds.
    At(f64),
    /// Holds everywhere in the scanned range.
    AlwaysSatisfied,
    NeverSatisfied,
}

impl Threshold {
    pub fn value(&self) -> Option<f64> {
        match self {
            Threshold::At(t) => Some(*t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessScan {
    pub points: Vec<WitnessScanPoint>,
    pub threshold: Threshold,
}

/// Binned pure-state joints in both bases, reused across channel settings.
#[derive(Debug, Clone)]
pub struct WitnessScanner {
    pub momentum: PixelJointDistribution,
    pub position: PixelJointDistribution,
    pub array: DetectorArrayParams,
    pub pair_probability: f64,
}

impl WitnessScanner {
    pub fn new(params: &SourceParams, array: &DetectorArrayParams, settings: &FactorSettings) -> Result<Self> {
        let source = SourceDistributions::new(params, settings)?;
        Self::from_source(&source, params.pair_probability, array)
    }

    pub fn from_source(
        source: &SourceDistributions,
        pair_probability: f64,
        array: &DetectorArrayParams,
    ) -> Result<Self> {
        Ok(Self {
            momentum: bin_factorized(&source.momentum, array)?,
            position: bin_factorized(&source.position, array)?,
            array: *array,
            pair_probability,
        })
    }

    pub fn point(&self, throughput: f64) -> Result<WitnessScanPoint> {
        let events = event_probabilities(
            self.pair_probability,
            &ChannelParams::with_throughput(throughput),
            &self.array.effective(),
        )?;
        let k = noisy_pixel_joint(&self.momentum, &events)?;
        let r = noisy_pixel_joint(&self.position, &events)?;
        let witness = WitnessReport::from_variances(
            r.conditional_variance(Party::Signal)?,
            k.conditional_variance(Party::Signal)?,
        );
        Ok(WitnessScanPoint {
            throughput,
            witness,
            events,
        })
    }

    /// Evaluates the scan and bisects the first crossing of 1/4.
    pub fn scan(&self, throughputs: &[f64]) -> Result<WitnessScan> {
        if throughputs.is_empty() {
            return Err(invalid("throughputs", "empty scan range"));
        }
        if throughputs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("throughputs", "must be strictly increasing"));
        }
        let points = throughputs.iter().map(|&t| self.point(t)).collect::<Result<Vec<_>>>()?;
        let threshold = if points.iter().all(|p| p.witness.satisfied) {
            Threshold::AlwaysSatisfied
        } else if let Some(i) = points
            .windows(2)
            .position(|w| !w[0].witness.satisfied && w[1].witness.satisfied)
        {
            let (mut lo, mut hi) = (points[i].throughput, points[i + 1].throughput);
            while hi - lo > 1e-7 {
                let mid = 0.5 * (lo + hi);
                if self.point(mid)?.witness.satisfied {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Threshold::At(hi)
        } else {
            Threshold::NeverSatisfied
        };
        Ok(WitnessScan { points, threshold })
    }
}

/// Throughput above which the noisy pixel-level witness holds.
pub fn witness_threshold_scan(
    params: &SourceParams,
    array: &DetectorArrayParams,
    throughputs: &[f64],
    settings: &FactorSettings,
) -> Result<WitnessScan> {
    WitnessScanner::new(params, array, settings)?.scan(throughputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn no_dark_counts() {
        let array = DetectorArrayParams::default().with_dark_count_probability(0.0);
        let ch = ChannelParams::with_throughput(0.5);
        let e = event_probabilities(0.01, &ch, &array).unwrap();
        assert_eq!((e.p1, e.p2), (0.0, 0.0));
        assert!(rel(e.p3, 0.01 * 0.36 * 0.5) < 1e-12);
    }

    #[test]
    fn hand_arithmetic_single_pixel() {
        let array = DetectorArrayParams {
            pixels: 1,
            efficiency: 0.6,
            dark_count_probability: 0.5,
            coverage: 1.0,
        };
        let e = event_probabilities(0.01, &ChannelParams::with_throughput(1.0), &array).unwrap();
        // P1 = (0.99 + 0.01·0.16)·0.25, P2 = 0.01·0.48·0.5·0.5, P3 = 0.01·0.36·0.25
        assert!(rel(e.p1, 0.9916 * 0.25) < 1e-12);
        assert!(rel(e.p2, 0.0012) < 1e-12);
        assert!(rel(e.p3, 0.0009) < 1e-12);
    }

    #[test]
    fn class_probabilities_vs_pixels() {
        let base = DetectorArrayParams::default();
        let ch = ChannelParams::with_throughput(0.36);
        let mut last = event_probabilities(0.01, &ch, &base.with_pixels(16)).unwrap();
        for n in [32, 64, 128, 256] {
            let e = event_probabilities(0.01, &ch, &base.with_pixels(n)).unwrap();
            assert!(e.p3 < last.p3 && e.p1 > last.p1);
            last = e;
        }
    }

    #[test]
    fn channel_conversions() {
        let c = ChannelParams::from_distance_km(4.4, 1.0);
        assert!((c.loss_db() - 4.4).abs() < 1e-9);
        assert!((c.distance_km() - 4.4).abs() < 1e-9);
        assert!((c.loss() - (1.0 - c.bob_throughput)).abs() < 1e-15);
        assert!((ChannelParams::with_throughput(0.36).loss_db() - 4.437).abs() < 1e-3);
    }

    #[test]
    fn noise_free_mixture_is_identity() {
        let s = PixelJointDistribution::new(
            Basis::Momentum,
            array_edges(1.0, 2),
            array_edges(1.0, 2),
            vec![0.4, 0.1, 0.1, 0.4],
        )
        .unwrap();
        let e = EventProbabilities {
            p1: 0.0,
            p2: 0.0,
            p3: 0.3,
            p2_alice_photon: 0.0,
            p2_bob_photon: 0.0,
        };
        assert_eq!(noisy_pixel_joint(&s, &e).unwrap().probs(), s.probs());
        let only_dark = EventProbabilities { p1: 1e-6, p3: 0.0, ..e };
        let u = noisy_pixel_joint(&s, &only_dark).unwrap();
        assert!(u.probs().iter().all(|p| (p - 0.25).abs() < 1e-15));
        assert!(matches!(
            noisy_pixel_joint(&s, &EventProbabilities { p3: 0.0, ..e }),
            Err(Error::NoAcceptedEvents)
        ));
    }

    #[test]
    fn gridded_binning_single_pixel_and_blocks() {
        let g = Grid1D::symmetric(128, 6.0).unwrap();
        let d = JointDistribution::from_fn(Basis::Position, g, g, |x, y| {
            (-(x * x - 1.6 * x * y + y * y) / 0.72).exp()
        })
        .unwrap();
        let one = bin_distribution(
            &d,
            &DetectorArrayParams {
                pixels: 1,
                coverage: 1.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((one.probs()[0] - 1.0).abs() < 1e-12);
        assert_eq!(one.mutual_information().unwrap(), 0.0);

        let array = DetectorArrayParams {
            pixels: 16,
            coverage: 0.99,
            ..Default::default()
        };
        let fine = bin_distribution(&d, &array).unwrap();
        let coarse = bin_distribution(&d, &array.with_pixels(8)).unwrap();
        let blocks = fine.coarsen(2).unwrap();
        for (a, b) in blocks.probs().iter().zip(coarse.probs()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(blocks.alice_edges(), coarse.alice_edges());
    }

    #[test]
    fn coverage_beyond_grid_is_rejected() {
        let g = Grid1D::symmetric(64, 1.0).unwrap();
        let flat = JointDistribution::from_fn(Basis::Position, g, g, |_, _| 1.0).unwrap();
        assert!(matches!(
            bin_distribution(&flat, &DetectorArrayParams::default()),
            Err(Error::GridExtent { .. })
        ));
        let narrow = JointDistribution::from_fn(Basis::Position, g, g, |x, y| (-(x * x + y * y) / 0.02).exp()).unwrap();
        assert!(bin_distribution(&narrow, &DetectorArrayParams::default()).is_ok());
    }
}
