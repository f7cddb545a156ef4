use std::f64::consts::{E, PI};
use std::sync::OnceLock;

use proptest::prelude::*;
use spatial_qkd::adversary::lambda_max;
use spatial_qkd::detection::{
    bin_factorized, event_probabilities, noisy_pixel_joint, ChannelParams, DetectorArrayParams, EventProbabilities,
    PixelJointDistribution,
};
use spatial_qkd::factorized::{FactorSettings, SourceDistributions};
use spatial_qkd::infotheory::{discrete_mutual_information, Bipartite, ConditionalVariance};
use spatial_qkd::transverse::{entropies_full_transverse, TransverseSettings};
use spatial_qkd::{Basis, Grid1D, JointDistribution, Party, SourceParams};

fn signal16() -> &'static PixelJointDistribution {
    static SIGNAL: OnceLock<PixelJointDistribution> = OnceLock::new();
    SIGNAL.get_or_init(|| {
        let s = SourceDistributions::new(&SourceParams::default(), &FactorSettings::with_count(1 << 14)).unwrap();
        bin_factorized(&s.momentum, &DetectorArrayParams::default().with_pixels(16).effective()).unwrap()
    })
}

fn array(pixels: usize, efficiency: f64, dark: f64) -> DetectorArrayParams {
    DetectorArrayParams {
        pixels,
        efficiency,
        dark_count_probability: dark,
        ..DetectorArrayParams::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn single_pixel_outcomes_close(
        pair in 0.0..1.0f64,
        eta in 0.0..1.0f64,
        dark in 0.0..0.99f64,
        ta in 0.0..1.0f64,
        tb in 0.0..1.0f64,
    ) {
        let ch = ChannelParams { alice_throughput: ta, bob_throughput: tb, ..ChannelParams::default() };
        let e = event_probabilities(pair, &ch, &array(1, eta, dark)).unwrap();
        // Enumerate (pair, photon at A, photon at B, dark at A, dark at B).
        let mut classes = [0.0; 3];
        let mut rejected = 0.0;
        for bits in 0..32u32 {
            let on = |k: u32| bits >> k & 1 == 1;
            let (emitted, pa, pb, da, db) = (on(0), on(1), on(2), on(3), on(4));
            if !emitted && (pa || pb) {
                continue;
            }
            let f = |x: bool, p: f64| if x { p } else { 1.0 - p };
            let mut w = f(emitted, pair) * f(da, dark) * f(db, dark);
            if emitted {
                w *= f(pa, eta * ta) * f(pb, eta * tb);
            }
            // One click per side, from exactly one source.
            if pa != da && pb != db {
                classes[usize::from(pa) + usize::from(pb)] += w;
            } else {
                rejected += w;
            }
        }
        prop_assert!((e.p1 - classes[0]).abs() < 1e-12);
        prop_assert!((e.p2 - classes[1]).abs() < 1e-12);
        prop_assert!((e.p3 - classes[2]).abs() < 1e-12);
        prop_assert!((e.accepted() + rejected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_max_bounded_and_monotone(
        l in 0.0..1.0f64,
        dl in 0.0..0.5f64,
        n in 1usize..512,
        dark in 1e-9..0.1f64,
    ) {
        let a = array(n, 0.6, dark);
        let v = lambda_max(l, &a).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!(lambda_max((l + dl).min(1.0), &a).unwrap() >= v);
        prop_assert!(lambda_max(l, &array(n + 1, 0.6, dark)).unwrap() >= v);
        prop_assert!(lambda_max(l, &array(n, 0.6, dark * 0.5)).unwrap() <= v);
    }

    #[test]
    fn pair_click_probability_falls_with_pixels(n in 1usize..1024, dark in 1e-8..1e-3f64, t in 0.01..1.0f64) {
        let ch = ChannelParams::with_throughput(t);
        let e = event_probabilities(0.01, &ch, &array(n, 0.6, dark)).unwrap();
        let f = event_probabilities(0.01, &ch, &array(n + 1, 0.6, dark)).unwrap();
        prop_assert!(f.p3 < e.p3);
        if (n as f64 + 1.0) * dark < 0.01 {
            prop_assert!(f.p1 > e.p1);
        }
    }

    #[test]
    fn discrete_information_is_bounded(
        rows in 1usize..8,
        cols in 1usize..8,
        seed in prop::collection::vec(0.0..1.0f64, 64),
    ) {
        let raw: Vec<f64> = seed[..rows * cols].iter().map(|v| v + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let mi = discrete_mutual_information(&probs, rows, cols).unwrap();
        prop_assert!(mi >= 0.0);
        prop_assert!(mi <= (rows.min(cols) as f64).log2() + 1e-12);
    }

    #[test]
    fn more_background_means_less_information(p3 in 1e-4..1e-2f64, p1 in 1e-9..1e-4f64, p2 in 1e-9..1e-3f64) {
        let signal = signal16();
        let events = |k: f64| EventProbabilities {
            p1: k * p1,
            p2: k * p2,
            p3,
            p2_alice_photon: 0.5 * k * p2,
            p2_bob_photon: 0.5 * k * p2,
        };
        let one = noisy_pixel_joint(signal, &events(1.0)).unwrap().mutual_information().unwrap();
        let two = noisy_pixel_joint(signal, &events(2.0)).unwrap().mutual_information().unwrap();
        prop_assert!(two < one);
        prop_assert!(one < signal.mutual_information().unwrap());
    }

    #[test]
    fn coarsening_keeps_mass_and_loses_information(factor in prop::sample::select(vec![2usize, 4, 8])) {
        let fine = signal16();
        let coarse = fine.coarsen(factor).unwrap();
        prop_assert_eq!(coarse.alice_pixels(), 16 / factor);
        prop_assert!((coarse.probs().iter().sum::<f64>() - fine.probs().iter().sum::<f64>()).abs() < 1e-12);
        prop_assert!(coarse.mutual_information().unwrap() <= fine.mutual_information().unwrap() + 1e-12);
    }

    #[test]
    fn conditional_entropy_below_gaussian_bound(
        mx in -2.0..2.0f64,
        my in -2.0..2.0f64,
        sx in 0.3..1.5f64,
        sy in 0.3..1.5f64,
        rho in -0.95..0.95f64,
        weight in 0.0..1.0f64,
    ) {
        let g = Grid1D::symmetric(256, 8.0).unwrap();
        let gauss = |x: f64, y: f64, mx: f64, my: f64, sx: f64, sy: f64, r: f64| {
            let (u, v) = ((x - mx) / sx, (y - my) / sy);
            (-(u * u - 2.0 * r * u * v + v * v) / (2.0 * (1.0 - r * r))).exp() / (sx * sy * (1.0 - r * r).sqrt())
        };
        let d = JointDistribution::from_fn(Basis::Position, g, g, |x, y| {
            weight * gauss(x, y, mx, my, sx, sy, rho) + (1.0 - weight) * gauss(x, y, -mx, 0.0, 0.5, 1.0, -0.3)
        })
        .unwrap();
        for party in [Party::Signal, Party::Idler] {
            let h = d.conditional_entropy(party).unwrap();
            let v = d.conditional_variance(party).unwrap();
            prop_assert!(h <= 0.5 * (2.0 * PI * E * v).log2() + 1e-6, "H {} vs variance {}", h, v);
        }
    }
}

#[test]
fn two_axes_carry_more_information_than_one() {
    let params = SourceParams::default().with_waist(0.5).with_crystal_length(5.0);
    let one = SourceDistributions::new(&params, &FactorSettings::default()).unwrap();
    let two = entropies_full_transverse(&params, &TransverseSettings::default().with_resolution(4)).unwrap();
    assert!(two.momentum.mutual_information > one.momentum.mutual_information().unwrap());
    assert!(two.position.mutual_information > one.position.mutual_information().unwrap());
}
