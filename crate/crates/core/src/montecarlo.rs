//! Event-level Monte Carlo of the protocol.
//!
//! Each pump gate may emit a pair. The photons are sampled at pixel
//! resolution from the binned source distribution, may be intercepted by Eve,
//! are lost in the channel or the detectors, and are mixed with per-pixel dark
//! counts. Gates in which neither a pair nor a dark count occurs are skipped
//! with geometric gaps, so the cost scales with the number of eventful gates.
//!
//! Gates are split into fixed batches; batch `i` draws from the ChaCha8
//! stream `i` of `seed`, which makes the output independent of the number of
//! worker threads.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

use crate::adversary::{attacked_pixel_joint, lambda_max, AttackParams};
use crate::amplitude::{Basis, Party};
use crate::detection::{
    bin_factorized, event_probabilities, ChannelParams, DetectorArrayParams, EventProbabilities, PixelJointDistribution,
};
use crate::error::{invalid, Error, Result};
use crate::factorized::{FactorSettings, SourceDistributions};
use crate::infotheory::{discrete_mutual_information, ConditionalVariance};
use crate::source::SourceParams;

/// Generator used for every batch, as recorded in output metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64(seed), stream = batch index";

/// Header of the event log written by [`write_event_log`].
pub const EVENT_LOG_HEADER: &str = "gate,alice_basis,bob_basis,alice_click,alice_pixel,alice_photon,\
bob_click,bob_pixel,bob_photon,eve_basis,eve_pixel,accepted,class";

fn basis_index(basis: Basis) -> usize {
    match basis {
        Basis::Momentum => 0,
        Basis::Position => 1,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub pulses: u64,
    pub seed: u64,
    /// Gates per batch; part of the determinism contract.
    pub batch_size: u64,
    pub source: SourceParams,
    pub channel: ChannelParams,
    pub array: DetectorArrayParams,
    pub attack: AttackParams,
    pub factors: FactorSettings,
}

impl SimConfig {
    pub fn new(pulses: u64, seed: u64) -> Self {
        Self {
            pulses,
            seed,
            batch_size: 1 << 20,
            source: SourceParams::default(),
            channel: ChannelParams::default(),
            array: DetectorArrayParams::default(),
            attack: AttackParams::new(0.0),
            factors: FactorSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pulses == 0 {
            return Err(invalid("pulses", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be >= 1"));
        }
        self.source.validate()?;
        self.channel.validate()?;
        self.array.validate()?;
        self.attack.validate()?;
        if self.array.coverage >= 1.0 {
            return Err(invalid("coverage", "the simulated arrays need coverage < 1"));
        }
        let ne = self.attack.eve_pixels.unwrap_or(self.array.pixels);
        if !self.array.pixels.is_multiple_of(ne) {
            return Err(invalid(
                "eve_pixels",
                format!("{ne} does not divide Bob's {} pixels", self.array.pixels),
            ));
        }
        Ok(())
    }

    pub fn batches(&self) -> u64 {
        self.pulses.div_ceil(self.batch_size)
    }
}

/// Outcome of one party's array in one gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Click {
    None,
    /// Exactly one pixel fired; `photon` is false for a pure dark count.
    Single {
        pixel: usize,
        photon: bool,
    },
    Multiple,
}

impl Click {
    pub fn is_single(&self) -> bool {
        matches!(self, Click::Single { .. })
    }
}

/// Eve's measurement of an intercepted photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EveRecord {
    pub basis: Basis,
    /// `None` when the photon missed her array; nothing is resent then.
    pub pixel: Option<usize>,
}

/// Accepted-event class by click provenance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventClass {
    /// Two dark counts.
    DarkDark,
    /// One photon and one dark count.
    PhotonDark,
    /// Both photons.
    PhotonPhoton,
}

impl EventClass {
    pub fn number(self) -> u8 {
        match self {
            EventClass::DarkDark => 1,
            EventClass::PhotonDark => 2,
            EventClass::PhotonPhoton => 3,
        }
    }
}

/// One gate in which at least one pixel fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventRecord {
    pub gate: u64,
    pub alice_basis: Basis,
    pub bob_basis: Basis,
    pub alice: Click,
    pub bob: Click,
    pub eve: Option<EveRecord>,
    /// `None` unless both sides registered exactly one click.
    pub class: Option<EventClass>,
}

impl EventRecord {
    pub fn accepted(&self) -> bool {
        self.class.is_some()
    }

    /// Accepted, matching bases.
    pub fn sifted(&self) -> bool {
        self.accepted() && self.alice_basis == self.bob_basis
    }

    /// Sifted event whose Bob click carries no correlation with Alice's.
    pub fn uncorrelated(&self) -> bool {
        match self.class {
            Some(EventClass::PhotonPhoton) => self.eve.is_some_and(|e| e.basis != self.alice_basis),
            Some(_) => true,
            None => false,
        }
    }

    fn pixels(&self) -> Option<(usize, usize)> {
        match (self.alice, self.bob) {
            (Click::Single { pixel: a, .. }, Click::Single { pixel: b, .. }) => Some((a, b)),
            _ => None,
        }
    }
}

fn classify(alice: Click, bob: Click) -> Option<EventClass> {
    match (alice, bob) {
        (Click::Single { photon: pa, .. }, Click::Single { photon: pb, .. }) => Some(match (pa, pb) {
            (true, true) => EventClass::PhotonPhoton,
            (false, false) => EventClass::DarkDark,
            _ => EventClass::PhotonDark,
        }),
        _ => None,
    }
}

/// Inverse-CDF sampler for the per-array dark-count number.
#[derive(Debug, Clone)]
struct DarkCounts {
    /// Cumulative `Binomial(n, P_dark)`.
    cdf: Vec<f64>,
    /// Cumulative distribution of Alice's count given that the pair of arrays
    /// fired at least once.
    first_nonzero_cdf: Vec<f64>,
    /// Cumulative distribution given at least one count.
    nonzero_cdf: Vec<f64>,
    /// `(1 - P_dark)^n`.
    quiet: f64,
}

impl DarkCounts {
    fn new(pixels: usize, pd: f64) -> Result<Self> {
        if pd == 0.0 {
            return Ok(Self {
                cdf: vec![1.0],
                first_nonzero_cdf: vec![1.0],
                nonzero_cdf: vec![1.0],
                quiet: 1.0,
            });
        }
        let binom = Binomial::new(pd, pixels as u64).map_err(|e| Error::Numerical(e.to_string()))?;
        let mut pmf = Vec::new();
        let mut tail = 1.0;
        for k in 0..=pixels as u64 {
            let p = binom.pmf(k);
            pmf.push(p);
            tail -= p;
            if k > 0 && tail < 1e-17 {
                break;
            }
        }
        let quiet = pmf[0];
        let cumulative = |w: &[f64]| -> Vec<f64> {
            let total: f64 = w.iter().sum();
            let mut acc = 0.0;
            w.iter()
                .map(|p| {
                    acc += p;
                    acc / total
                })
                .collect()
        };
        let mut first = pmf.clone();
        first[0] = quiet * (1.0 - quiet);
        let mut nonzero = pmf.clone();
        nonzero[0] = 0.0;
        Ok(Self {
            cdf: cumulative(&pmf),
            first_nonzero_cdf: cumulative(&first),
            nonzero_cdf: cumulative(&nonzero),
            quiet,
        })
    }

    fn draw(cdf: &[f64], rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        Self::draw(&self.cdf, rng)
    }

    /// Counts on two arrays conditioned on at least one dark count.
    fn sample_nonzero_pair(&self, rng: &mut impl Rng) -> (usize, usize) {
        let a = Self::draw(&self.first_nonzero_cdf, rng);
        let b = if a == 0 {
            Self::draw(&self.nonzero_cdf, rng)
        } else {
            self.sample(rng)
        };
        (a, b)
    }
}

/// Pixel tables of one basis; index `n` stands for "outside the array".
#[derive(Debug, Clone)]
struct BasisTables {
    joint: WeightedAliasIndex<f64>,
    alice: WeightedAliasIndex<f64>,
    bob: WeightedAliasIndex<f64>,
}

fn alias(weights: Vec<f64>) -> Result<WeightedAliasIndex<f64>> {
    WeightedAliasIndex::new(weights).map_err(|e| Error::Numerical(format!("sampling table: {e}")))
}

impl BasisTables {
    fn new(source: &SourceDistributions, signal: &PixelJointDistribution, basis: Basis) -> Result<Self> {
        let dist = source.get(basis);
        let n = signal.alice_pixels();
        let scale = signal.in_array_mass();
        let pixel_mass = |which: Party, edges: &[f64]| -> Vec<f64> {
            edges
                .windows(2)
                .map(|w| (dist.marginal_cdf(which, w[1]) - dist.marginal_cdf(which, w[0])).max(0.0))
                .collect()
        };
        let ma = pixel_mass(Party::Signal, signal.alice_edges());
        let mb = pixel_mass(Party::Idler, signal.bob_edges());
        let m = n + 1;
        let mut joint = vec![0.0; m * m];
        for a in 0..n {
            for b in 0..n {
                joint[a * m + b] = signal.get(a, b) * scale;
            }
        }
        let (ra, rb) = (signal.alice_marginal(), signal.bob_marginal());
        for a in 0..n {
            joint[a * m + n] = (ma[a] - ra[a] * scale).max(0.0);
        }
        for b in 0..n {
            joint[n * m + b] = (mb[b] - rb[b] * scale).max(0.0);
        }
        let listed: f64 = joint.iter().sum();
        joint[n * m + n] = (1.0 - listed).max(0.0);
        let with_outside = |mut v: Vec<f64>| {
            let inside: f64 = v.iter().sum();
            v.push((1.0 - inside).max(0.0));
            v
        };
        Ok(Self {
            joint: alias(joint)?,
            alice: alias(with_outside(ma))?,
            bob: alias(with_outside(mb))?,
        })
    }
}

/// Per-batch counters that are not visible in the event records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct BatchCounts {
    pairs: u64,
}

/// Precomputed sampling tables for one configuration.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimConfig,
    signal: [PixelJointDistribution; 2],
    tables: [BasisTables; 2],
    dark: DarkCounts,
    eve_block: usize,
    /// Probability that a gate holds a pair or a dark count.
    eventful: f64,
    /// Probability of a pair given an eventful gate.
    pair_given_eventful: f64,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let source = SourceDistributions::new(&config.source, &config.factors)?;
        Self::from_source(config, &source)
    }

    /// Reuses source tables built for `config.source`.
    pub fn from_source(config: SimConfig, source: &SourceDistributions) -> Result<Self> {
        config.validate()?;
        let signal = [
            bin_factorized(&source.momentum, &config.array)?,
            bin_factorized(&source.position, &config.array)?,
        ];
        let tables = [
            BasisTables::new(source, &signal[0], Basis::Momentum)?,
            BasisTables::new(source, &signal[1], Basis::Position)?,
        ];
        let n = config.array.pixels;
        let pd = config.array.dark_count_probability;
        let dark = DarkCounts::new(n, pd)?;
        let p = config.source.pair_probability;
        let log_quiet = (-p).ln_1p() + 2.0 * dark.quiet.ln();
        let eventful = -log_quiet.exp_m1();
        let pair_given_eventful = if eventful > 0.0 { p / eventful } else { 0.0 };
        let eve_block = n / config.attack.eve_pixels.unwrap_or(n);
        Ok(Self {
            config,
            signal,
            tables,
            dark,
            eve_block,
            eventful,
            pair_given_eventful,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Normalized in-array pixel joint of the photon pair.
    pub fn signal(&self, basis: Basis) -> &PixelJointDistribution {
        &self.signal[basis_index(basis)]
    }

    /// Analytic event probabilities with the coverage folded into `η`.
    pub fn analytic_events(&self) -> Result<EventProbabilities> {
        event_probabilities(
            self.config.source.pair_probability,
            &self.config.channel,
            &self.config.array.effective(),
        )
    }

    /// Analytic distribution of sifted pixel pairs, including the attack.
    pub fn analytic_joint(&self, basis: Basis) -> Result<PixelJointDistribution> {
        let events = self.analytic_events()?;
        Ok(attacked_pixel_joint(self.signal(basis), &events, &self.config.attack)?.alice_bob)
    }

    /// All gates with at least one click, in gate order.
    pub fn events(&self) -> Vec<EventRecord> {
        let batches: Vec<Vec<EventRecord>> = (0..self.config.batches())
            .into_par_iter()
            .map(|i| {
                let mut out = Vec::new();
                self.run_batch(i, |r| out.push(r));
                out
            })
            .collect();
        batches.into_iter().flatten().collect()
    }

    /// Streams every batch into counters without keeping the records.
    pub fn tally(&self) -> EventTally {
        (0..self.config.batches())
            .into_par_iter()
            .fold(
                || self.empty_tally(),
                |mut tally, i| {
                    let counts = self.run_batch(i, |r| tally.add(&r));
                    tally.pairs += counts.pairs;
                    tally
                },
            )
            .reduce(|| self.empty_tally(), |a, b| a.merged(b))
            .with_pulses(self.config.pulses)
    }

    /// Tally of an already simulated record list.
    pub fn tally_records(&self, records: &[EventRecord]) -> EventTally {
        let mut tally = self.empty_tally();
        for r in records {
            tally.add(r);
        }
        tally.pairs = u64::MAX;
        tally.with_pulses(self.config.pulses)
    }

    fn empty_tally(&self) -> EventTally {
        let n = self.config.array.pixels;
        EventTally {
            pulses: 0,
            pairs: 0,
            recorded: 0,
            classes: [0; 3],
            multi_click: 0,
            one_sided: 0,
            dropped: 0,
            uncorrelated: 0,
            sifted: [vec![0; n * n], vec![0; n * n]],
            edges: [
                (
                    self.signal[0].alice_edges().to_vec(),
                    self.signal[0].bob_edges().to_vec(),
                ),
                (
                    self.signal[1].alice_edges().to_vec(),
                    self.signal[1].bob_edges().to_vec(),
                ),
            ],
            pixels: n,
        }
    }

    fn run_batch(&self, batch: u64, mut emit: impl FnMut(EventRecord)) -> BatchCounts {
        let mut counts = BatchCounts::default();
        if self.eventful <= 0.0 {
            return counts;
        }
        let start = batch * self.config.batch_size;
        let end = (start + self.config.batch_size).min(self.config.pulses);
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(batch);
        let log_skip = (-self.eventful).ln_1p();
        let mut gate = start;
        loop {
            if self.eventful < 1.0 {
                let u = 1.0 - rng.random::<f64>();
                let gap = (u.ln() / log_skip).floor();
                if gap >= (end - gate) as f64 {
                    break;
                }
                gate += gap as u64;
            }
            if gate >= end {
                break;
            }
            let pair = rng.random::<f64>() < self.pair_given_eventful;
            counts.pairs += pair as u64;
            if let Some(record) = self.gate(gate, pair, &mut rng) {
                emit(record);
            }
            gate += 1;
        }
        counts
    }

    fn random_basis(rng: &mut impl Rng) -> Basis {
        if rng.random::<bool>() {
            Basis::Momentum
        } else {
            Basis::Position
        }
    }

    /// Pixels of both photons, `None` outside the arrays.
    fn sample_pair(&self, alice: Basis, bob: Basis, rng: &mut impl Rng) -> (Option<usize>, Option<usize>) {
        let n = self.config.array.pixels;
        let inside = |k: usize| (k < n).then_some(k);
        if alice == bob {
            let k = self.tables[basis_index(alice)].joint.sample(rng);
            (inside(k / (n + 1)), inside(k % (n + 1)))
        } else {
            let a = self.tables[basis_index(alice)].alice.sample(rng);
            let b = self.tables[basis_index(bob)].bob.sample(rng);
            (inside(a), inside(b))
        }
    }

    fn gate(&self, gate: u64, pair: bool, rng: &mut ChaCha8Rng) -> Option<EventRecord> {
        let n = self.config.array.pixels;
        let (ka, kb) = if pair {
            (self.dark.sample(rng), self.dark.sample(rng))
        } else {
            self.dark.sample_nonzero_pair(rng)
        };
        let alice_basis = Self::random_basis(rng);
        let bob_basis = Self::random_basis(rng);
        let (mut alice_photon, mut bob_photon, mut eve) = (None, None, None);
        if pair {
            let lambda = self.config.attack.lambda;
            if lambda > 0.0 && rng.random::<f64>() < lambda {
                let eve_basis = Self::random_basis(rng);
                let (a, e) = self.sample_pair(alice_basis, eve_basis, rng);
                let eve_pixel = e.map(|e| e / self.eve_block);
                alice_photon = a;
                bob_photon = eve_pixel.map(|p| {
                    if bob_basis == eve_basis {
                        p * self.eve_block + rng.random_range(0..self.eve_block)
                    } else {
                        rng.random_range(0..n)
                    }
                });
                eve = Some(EveRecord {
                    basis: eve_basis,
                    pixel: eve_pixel,
                });
            } else {
                (alice_photon, bob_photon) = self.sample_pair(alice_basis, bob_basis, rng);
            }
            let eta = self.config.array.efficiency;
            let (ta, tb) = (self.config.channel.alice_throughput, self.config.channel.bob_throughput);
            alice_photon = alice_photon.filter(|_| rng.random::<f64>() < eta * ta);
            bob_photon = bob_photon.filter(|_| rng.random::<f64>() < eta * tb);
        }
        let alice = resolve(alice_photon, ka, n, rng);
        let bob = resolve(bob_photon, kb, n, rng);
        if alice == Click::None && bob == Click::None {
            return None;
        }
        Some(EventRecord {
            gate,
            alice_basis,
            bob_basis,
            alice,
            bob,
            eve,
            class: classify(alice, bob),
        })
    }
}

/// Click pattern from a photon pixel and `darks` distinct dark pixels.
fn resolve(photon: Option<usize>, darks: usize, pixels: usize, rng: &mut impl Rng) -> Click {
    match (photon, darks) {
        (None, 0) => Click::None,
        (Some(p), 0) => Click::Single { pixel: p, photon: true },
        (_, 1) => {
            let d = rng.random_range(0..pixels);
            match photon {
                None => Click::Single {
                    pixel: d,
                    photon: false,
                },
                // a dark count on the photon's own pixel is still one click
                Some(p) if p == d => Click::Single { pixel: p, photon: true },
                Some(_) => Click::Multiple,
            }
        }
        _ => Click::Multiple,
    }
}

/// Simulates every gate of `config` and returns the records in gate order.
pub fn simulate_pulses(config: SimConfig) -> Result<Vec<EventRecord>> {
    Ok(Simulator::new(config)?.events())
}

/// Accepted pixel pairs with matching bases.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SiftedPairs {
    pub momentum: Vec<(usize, usize)>,
    pub position: Vec<(usize, usize)>,
    /// Accepted events discarded for mismatched bases.
    pub dropped: u64,
}

impl SiftedPairs {
    pub fn get(&self, basis: Basis) -> &[(usize, usize)] {
        match basis {
            Basis::Momentum => &self.momentum,
            Basis::Position => &self.position,
        }
    }

    pub fn kept(&self) -> usize {
        self.momentum.len() + self.position.len()
    }
}

pub fn sift(records: &[EventRecord]) -> SiftedPairs {
    let mut out = SiftedPairs::default();
    for r in records.iter().filter(|r| r.accepted()) {
        let Some(pair) = r.pixels() else { continue };
        if r.alice_basis != r.bob_basis {
            out.dropped += 1;
        } else if r.alice_basis == Basis::Momentum {
            out.momentum.push(pair);
        } else {
            out.position.push(pair);
        }
    }
    out
}

/// Integer counters of a simulation run; merging is exact in any order.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTally {
    pub pulses: u64,
    /// Emitted pairs; `u64::MAX` when built from records, which do not carry it.
    pub pairs: u64,
    /// Gates with at least one click.
    pub recorded: u64,
    /// Accepted events of classes 1, 2 and 3.
    pub classes: [u64; 3],
    /// Gates with more than one click on either side.
    pub multi_click: u64,
    /// Gates with a single click on one side and none on the other.
    pub one_sided: u64,
    /// Accepted events with mismatched bases.
    pub dropped: u64,
    /// Sifted events whose Bob click is uncorrelated with Alice's.
    pub uncorrelated: u64,
    /// Sifted pixel-pair counts per basis, row-major in Alice's pixel.
    pub sifted: [Vec<u64>; 2],
    edges: [(Vec<f64>, Vec<f64>); 2],
    pixels: usize,
}

impl EventTally {
    fn add(&mut self, r: &EventRecord) {
        self.recorded += 1;
        if r.alice == Click::Multiple || r.bob == Click::Multiple {
            self.multi_click += 1;
        } else if r.alice.is_single() != r.bob.is_single() {
            self.one_sided += 1;
        }
        let Some(class) = r.class else { return };
        self.classes[class.number() as usize - 1] += 1;
        if r.alice_basis != r.bob_basis {
            self.dropped += 1;
            return;
        }
        if r.uncorrelated() {
            self.uncorrelated += 1;
        }
        if let Some((a, b)) = r.pixels() {
            self.sifted[basis_index(r.alice_basis)][a * self.pixels + b] += 1;
        }
    }

    fn merged(mut self, other: Self) -> Self {
        self.pairs += other.pairs;
        self.recorded += other.recorded;
        for k in 0..3 {
            self.classes[k] += other.classes[k];
        }
        self.multi_click += other.multi_click;
        self.one_sided += other.one_sided;
        self.dropped += other.dropped;
        self.uncorrelated += other.uncorrelated;
        for (s, o) in self.sifted.iter_mut().zip(&other.sifted) {
            for (x, y) in s.iter_mut().zip(o) {
                *x += y;
            }
        }
        self
    }

    fn with_pulses(mut self, pulses: u64) -> Self {
        self.pulses = pulses;
        self
    }

    pub fn pixels(&self) -> usize {
        self.pixels
    }

    pub fn accepted(&self) -> u64 {
        self.classes.iter().sum()
    }

    pub fn sifted_total(&self) -> u64 {
        self.sifted.iter().flatten().sum()
    }

    pub fn sifted_counts(&self, basis: Basis) -> &[u64] {
        &self.sifted[basis_index(basis)]
    }

    /// Sifted counts as a normalized joint, `None` without events.
    pub fn sifted_joint(&self, basis: Basis) -> Option<PixelJointDistribution> {
        let counts = self.sifted_counts(basis);
        if counts.iter().all(|&c| c == 0) {
            return None;
        }
        let (ea, eb) = &self.edges[basis_index(basis)];
        PixelJointDistribution::new(
            basis,
            ea.clone(),
            eb.clone(),
            counts.iter().map(|&c| c as f64).collect(),
        )
        .ok()
    }
}

/// Frequency estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn binomial(successes: u64, trials: u64) -> Self {
        if trials == 0 {
            return Self {
                value: f64::NAN,
                std_error: f64::NAN,
            };
        }
        let p = successes as f64 / trials as f64;
        Self {
            value: p,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        }
    }
}

/// Distance of an observed frequency from `expected` in binomial standard
/// deviations under `expected`; zero when both vanish.
pub fn binomial_z(successes: u64, trials: u64, expected: f64) -> f64 {
    let observed = successes as f64 / trials as f64;
    let sigma = (expected * (1.0 - expected) / trials as f64).sqrt();
    if sigma == 0.0 {
        return if observed == expected { 0.0 } else { f64::INFINITY };
    }
    (observed - expected) / sigma
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalEvents {
    pub p1: Estimate,
    pub p2: Estimate,
    pub p3: Estimate,
}

impl EmpiricalEvents {
    pub fn get(&self, class: EventClass) -> Estimate {
        match class {
            EventClass::DarkDark => self.p1,
            EventClass::PhotonDark => self.p2,
            EventClass::PhotonPhoton => self.p3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisStatistics {
    pub pairs: u64,
    /// Plug-in mutual information, bits.
    pub mutual_information: f64,
    /// Plug-in estimate plus the Miller–Madow bias correction.
    pub miller_madow: f64,
    /// `Δ²(x_A | x_B)` at pixel centers.
    pub alice_conditional_variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalStatistics {
    pub pulses: u64,
    pub events: EmpiricalEvents,
    pub momentum: Option<BasisStatistics>,
    pub position: Option<BasisStatistics>,
    /// Uncorrelated share of the sifted events.
    pub background_fraction: Estimate,
}

impl EmpiricalStatistics {
    pub fn get(&self, basis: Basis) -> Option<&BasisStatistics> {
        match basis {
            Basis::Momentum => self.momentum.as_ref(),
            Basis::Position => self.position.as_ref(),
        }
    }

    /// `Δ²(r_A|r_B)·Δ²(k_A|k_B)` when both bases have events.
    pub fn variance_product(&self) -> Option<f64> {
        Some(self.position?.alice_conditional_variance * self.momentum?.alice_conditional_variance)
    }
}

/// Plug-in mutual information of a count matrix and its Miller–Madow
/// correction `((m_A - 1) + (m_B - 1) - (m_AB - 1)) / (2N ln 2)`, where `m`
/// counts occupied bins.
pub fn plug_in_mutual_information(counts: &[u64], rows: usize, cols: usize) -> Result<(f64, f64)> {
    if counts.len() != rows * cols {
        return Err(Error::Shape(format!("{} counts for {rows}×{cols} bins", counts.len())));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::NoAcceptedEvents);
    }
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let mi = discrete_mutual_information(&probs, rows, cols)?;
    let occupied = |it: &mut dyn Iterator<Item = u64>| it.filter(|&c| c > 0).count() as f64;
    let m_ab = occupied(&mut counts.iter().copied());
    let m_a = occupied(&mut (0..rows).map(|a| counts[a * cols..(a + 1) * cols].iter().sum()));
    let m_b = occupied(&mut (0..cols).map(|b| (0..rows).map(|a| counts[a * cols + b]).sum()));
    let correction = ((m_a - 1.0) + (m_b - 1.0) - (m_ab - 1.0)) / (2.0 * total as f64 * std::f64::consts::LN_2);
    Ok((mi, mi + correction))
}

pub fn estimate_statistics(tally: &EventTally) -> Result<EmpiricalStatistics> {
    if tally.pulses == 0 {
        return Err(invalid("pulses", "must be >= 1"));
    }
    let n = tally.pixels;
    let basis = |b: Basis| -> Result<Option<BasisStatistics>> {
        let Some(joint) = tally.sifted_joint(b) else {
            return Ok(None);
        };
        let counts = tally.sifted_counts(b);
        let (mi, mm) = plug_in_mutual_information(counts, n, n)?;
        Ok(Some(BasisStatistics {
            pairs: counts.iter().sum(),
            mutual_information: mi,
            miller_madow: mm,
            alice_conditional_variance: joint.conditional_variance(Party::Signal)?,
        }))
    };
    Ok(EmpiricalStatistics {
        pulses: tally.pulses,
        events: EmpiricalEvents {
            p1: Estimate::binomial(tally.classes[0], tally.pulses),
            p2: Estimate::binomial(tally.classes[1], tally.pulses),
            p3: Estimate::binomial(tally.classes[2], tally.pulses),
        },
        momentum: basis(Basis::Momentum)?,
        position: basis(Basis::Position)?,
        background_fraction: Estimate::binomial(tally.uncorrelated, tally.sifted_total()),
    })
}

/// Pearson chi-square test result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareTest {
    fn new(statistic: f64, dof: usize) -> Result<Self> {
        if dof == 0 {
            return Err(Error::Numerical("chi-square test without degrees of freedom".into()));
        }
        let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Numerical(e.to_string()))?;
        Ok(Self {
            statistic,
            dof,
            p_value: dist.sf(statistic),
        })
    }

    pub fn passes(&self, significance: f64) -> bool {
        self.p_value >= significance
    }
}

/// Goodness of fit of `counts` to `probs`; cells expecting fewer than
/// `min_expected` events are pooled into one.
pub fn chi_square_goodness_of_fit(counts: &[u64], probs: &[f64], min_expected: f64) -> Result<ChiSquareTest> {
    if counts.len() != probs.len() {
        return Err(Error::Shape(format!(
            "{} counts against {} probabilities",
            counts.len(),
            probs.len()
        )));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::NoAcceptedEvents);
    }
    let norm: f64 = probs.iter().sum();
    let n = total as f64;
    let (mut stat, mut bins) = (0.0, 0usize);
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        let e = n * p / norm;
        if e >= min_expected {
            stat += (c as f64 - e).powi(2) / e;
            bins += 1;
        } else {
            pooled_obs += c as f64;
            pooled_exp += e;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        bins += 1;
    } else if pooled_obs > 0.0 {
        stat = f64::INFINITY;
    }
    ChiSquareTest::new(stat, bins.saturating_sub(1))
}

/// Homogeneity of two `(uncorrelated, correlated)` count pairs.
pub fn chi_square_two_by_two(first: [u64; 2], second: [u64; 2]) -> Result<ChiSquareTest> {
    let rows = [first, second].map(|r| r.map(|c| c as f64));
    let total: f64 = rows.iter().flatten().sum();
    let row_sum = rows.map(|r| r[0] + r[1]);
    let col_sum = [rows[0][0] + rows[1][0], rows[0][1] + rows[1][1]];
    if row_sum.contains(&0.0) || col_sum.contains(&0.0) {
        return Err(Error::Numerical("empty row or column in a 2×2 table".into()));
    }
    let mut stat = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let e = row_sum[i] * col_sum[j] / total;
            stat += (rows[i][j] - e).powi(2) / e;
        }
    }
    ChiSquareTest::new(stat, 1)
}

/// Background fraction with Eve at `λ_max` against an honest channel whose
/// extra loss gives the same analytic background fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HidingReport {
    pub loss_db: f64,
    pub lambda: f64,
    pub adjusted_loss_db: f64,
    /// Analytic uncorrelated share of the sifted events under attack.
    pub analytic_fraction: f64,
    /// `(uncorrelated, sifted)` with Eve.
    pub attacked: (u64, u64),
    /// `(uncorrelated, sifted)` on the honest channel.
    pub honest: (u64, u64),
    pub test: ChiSquareTest,
}

impl HidingReport {
    pub fn attacked_fraction(&self) -> f64 {
        self.attacked.0 as f64 / self.attacked.1 as f64
    }

    pub fn honest_fraction(&self) -> f64 {
        self.honest.0 as f64 / self.honest.1 as f64
    }
}

/// Runs the hiding comparison at `loss_db`; `base` supplies everything but
/// the channel and the attack.
pub fn hiding_test(base: &SimConfig, source: &SourceDistributions, loss_db: f64) -> Result<HidingReport> {
    let channel = ChannelParams {
        extinction_db_per_km: base.channel.extinction_db_per_km,
        ..ChannelParams::from_loss_db(loss_db)
    };
    let lambda = lambda_max(channel.loss(), &base.array)?;
    let effective = base.array.effective();
    let p = base.source.pair_probability;
    let events = event_probabilities(p, &channel, &effective)?;
    let target = (events.p1 + events.p2 + 0.5 * lambda * events.p3) / events.accepted();

    // the honest background fraction falls monotonically with throughput
    let fraction = |t: f64| -> Result<f64> {
        Ok(event_probabilities(p, &ChannelParams::with_throughput(t), &effective)?.background_fraction())
    };
    let (mut lo, mut hi) = (channel.bob_throughput.ln() - 50.0, channel.bob_throughput.ln());
    if fraction(lo.exp())? < target {
        return Err(Error::Numerical(format!(
            "no honest loss reaches background fraction {target}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if fraction(mid.exp())? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let adjusted = ChannelParams {
        extinction_db_per_km: base.channel.extinction_db_per_km,
        ..ChannelParams::with_throughput(hi.exp())
    };

    let run = |channel: ChannelParams, attack: AttackParams| -> Result<(u64, u64)> {
        let config = SimConfig {
            channel,
            attack,
            ..base.clone()
        };
        let tally = Simulator::from_source(config, source)?.tally();
        Ok((tally.uncorrelated, tally.sifted_total()))
    };
    let attacked = run(
        channel,
        AttackParams {
            lambda,
            eve_pixels: base.attack.eve_pixels,
        },
    )?;
    let honest = run(adjusted, AttackParams::new(0.0))?;
    let test = chi_square_two_by_two([attacked.0, attacked.1 - attacked.0], [honest.0, honest.1 - honest.0])?;
    Ok(HidingReport {
        loss_db: channel.loss_db(),
        lambda,
        adjusted_loss_db: adjusted.loss_db(),
        analytic_fraction: target,
        attacked,
        honest,
        test,
    })
}

fn click_fields(click: Click) -> (&'static str, String, &'static str) {
    match click {
        Click::None => ("none", String::new(), ""),
        Click::Single { pixel, photon } => ("single", pixel.to_string(), if photon { "1" } else { "0" }),
        Click::Multiple => ("multi", String::new(), ""),
    }
}

/// Writes one comma-separated line per record under [`EVENT_LOG_HEADER`].
pub fn write_event_log<W: Write>(records: &[EventRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{EVENT_LOG_HEADER}")?;
    for r in records {
        let (ac, ap, aph) = click_fields(r.alice);
        let (bc, bp, bph) = click_fields(r.bob);
        let (eb, ep) = match r.eve {
            Some(e) => (e.basis.name(), e.pixel.map(|p| p.to_string()).unwrap_or_default()),
            None => ("", String::new()),
        };
        let class = r.class.map(|c| c.number().to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{ac},{ap},{aph},{bc},{bp},{bph},{eb},{ep},{},{class}",
            r.gate,
            r.alice_basis.name(),
            r.bob_basis.name(),
            r.accepted() as u8,
        )?;
    }
    Ok(())
}
