//! Acceptance criteria 1 to 9, one PASS/FAIL line each.

use std::f64::consts::{E, PI};
use std::io::Write;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use spatial_qkd::adversary::{lambda_max, SecurityAnalyzer};
use spatial_qkd::detection::{event_probabilities, ChannelParams, DetectorArrayParams, Threshold, WitnessScanner};
use spatial_qkd::factorized::{FactorSettings, SourceDistributions};
use spatial_qkd::infotheory::{
    cross_basis_mi, epr_witness, keyrate_lower_bound, mutual_information, Bipartite, ConditionalVariance,
    CrossBasisSettings,
};
use spatial_qkd::montecarlo::{binomial_z, estimate_statistics, hiding_test, SimConfig, Simulator};
use spatial_qkd::negativity::{source_negativity_model, NegativitySettings};
use spatial_qkd::schmidt::schmidt_decompose;
use spatial_qkd::{Basis, Grid1D, JointAmplitude, JointDistribution, Party, SourceParams};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed.as_secs_f64() < limit_s as f64
}

fn bivariate(rho: f64, n: usize, half: f64) -> JointDistribution {
    let g = Grid1D::symmetric(n, half).unwrap();
    let c = 1.0 - rho * rho;
    JointDistribution::from_fn(Basis::Position, g, g, |x, y| {
        (-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * c)).exp()
    })
    .unwrap()
}

fn witness_thresholds() -> Outcome {
    let params = SourceParams::default();
    let throughputs: Vec<f64> = (1..=50).map(|i| i as f64 * 0.02).collect();
    let mut parts = Vec::new();
    let mut ok = true;
    for (n, lo, hi) in [(128, 0.28, 0.44), (256, 0.60, 0.76)] {
        let start = Instant::now();
        let array = DetectorArrayParams::default().with_pixels(n);
        let scan = WitnessScanner::new(&params, &array, &FactorSettings::default())
            .and_then(|s| s.scan(&throughputs))
            .map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        match scan.threshold {
            Threshold::At(t) => {
                ok &= (lo..=hi).contains(&t) && within(elapsed, 120);
                parts.push(format!(
                    "n={n}: t*={t:.4} in [{lo}, {hi}] ({:.1} s)",
                    elapsed.as_secs_f64()
                ));
            }
            other => {
                ok = false;
                parts.push(format!("n={n}: {other:?}"));
            }
        }
    }
    check(ok, parts.join("; "))
}

fn security_crossing() -> Outcome {
    let start = Instant::now();
    let params = SourceParams::default();
    let array = DetectorArrayParams::default();
    let source = SourceDistributions::new(&params, &FactorSettings::default()).map_err(|e| e.to_string())?;
    let analyzer = SecurityAnalyzer::new(&source, params.pair_probability, &array).map_err(|e| e.to_string())?;
    let losses: Vec<f64> = (0..=50).map(f64::from).collect();
    let curve = analyzer.curve(&losses).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let Some(z) = curve.zero_crossing else {
        return Err("no zero crossing in 0 to 50 dB".into());
    };
    check(
        (30.0..=40.0).contains(&z.loss_db) && (0.60..=0.90).contains(&z.lambda) && within(elapsed, 300),
        format!(
            "ΔI^min = 0 at {:.2} dB, λ = {:.4} ({:.1} s)",
            z.loss_db,
            z.lambda,
            elapsed.as_secs_f64()
        ),
    )
}

fn information_trends() -> Outcome {
    let waists = [0.5, 1.0, 2.0, 4.0];
    let lengths = [1.0, 2.0, 5.0, 10.0];
    let mut mi = [[0.0; 4]; 4];
    let mut worst_cross: f64 = 0.0;
    for (i, &w) in waists.iter().enumerate() {
        for (j, &l) in lengths.iter().enumerate() {
            let p = SourceParams::default().with_waist(w).with_crystal_length(l);
            let s = SourceDistributions::new(&p, &FactorSettings::default()).map_err(|e| e.to_string())?;
            let k = s.momentum.mutual_information().map_err(|e| e.to_string())?;
            let r = s.position.mutual_information().map_err(|e| e.to_string())?;
            mi[i][j] = 0.5 * (k + r);
            let cross = cross_basis_mi(&p, &CrossBasisSettings::default()).map_err(|e| e.to_string())?;
            worst_cross = worst_cross.max(cross);
        }
    }
    let up_in_w = (0..4).all(|j| (0..3).all(|i| mi[i + 1][j] > mi[i][j]));
    let down_in_l = (0..4).all(|i| (0..3).all(|j| mi[i][j + 1] < mi[i][j]));
    check(
        up_in_w && down_in_l && worst_cross < 0.01,
        format!(
            "increasing in w0: {up_in_w}, decreasing in L: {down_in_l}, MI {:.3} to {:.3} bits, max cross-basis MI {worst_cross:.2e} bits",
            mi[0][3], mi[3][0]
        ),
    )
}

fn closed_forms() -> Outcome {
    let mut fails = Vec::new();
    let unit = ChannelParams::default();

    // n = 1 by hand.
    let (p, eta, pd) = (0.01, 0.6, 0.5);
    let array = DetectorArrayParams {
        pixels: 1,
        efficiency: eta,
        dark_count_probability: pd,
        ..DetectorArrayParams::default()
    };
    let e = event_probabilities(p, &unit, &array).map_err(|e| e.to_string())?;
    let p1 = (1.0 - p + p * (1.0 - eta) * (1.0 - eta)) * pd * pd;
    let p2 = p * 2.0 * eta * (1.0 - eta) * pd * (1.0 - pd);
    let p3 = p * eta * eta * (1.0 - pd) * (1.0 - pd);
    for (name, got, want) in [("P1", e.p1, p1), ("P2", e.p2, p2), ("P3", e.p3, p3)] {
        if rel(got, want) > 1e-12 {
            fails.push(format!("{name} {got} vs {want}"));
        }
    }

    let cold = DetectorArrayParams::default().with_dark_count_probability(0.0);
    let ch = ChannelParams {
        bob_throughput: 0.36,
        ..ChannelParams::default()
    };
    let e = event_probabilities(0.01, &ch, &cold).map_err(|e| e.to_string())?;
    if e.p1 != 0.0 || e.p2 != 0.0 || rel(e.p3, 0.01 * 0.6 * 0.6 * 0.36) > 1e-12 {
        fails.push(format!("P_dark = 0 gives {e:?}"));
    }
    let e = event_probabilities(0.01, &ch, &DetectorArrayParams::default()).map_err(|e| e.to_string())?;
    if e.background_fraction() >= 0.01 {
        fails.push(format!("background fraction {} at t = 0.36", e.background_fraction()));
    }

    let defaults = DetectorArrayParams::default();
    let lm = |l: f64, a: &DetectorArrayParams| lambda_max(l, a).map_err(|e| e.to_string());
    if lm(0.0, &defaults)? != 0.0 || lm(0.5, &cold)? != 0.0 || lm(1.0, &defaults)? != 1.0 {
        fails.push("λ_max limit cases".into());
    }
    let want = 256.0 / ((1.0 / 0.9 - 1.0) * (1e6 - 1.0) + 128.0);
    let got = lm(0.9, &defaults)?;
    if rel(got, want) > 1e-12 {
        fails.push(format!("λ_max(0.9) {got} vs {want}"));
    }
    if fails.is_empty() {
        Ok(format!(
            "event probabilities and λ_max within 1e-12 relative; λ_max(0.9) = {got:.4e}"
        ))
    } else {
        Err(fails.join("; "))
    }
}

fn oracles() -> Outcome {
    let mut worst_mi: f64 = 0.0;
    let mut worst_cv: f64 = 0.0;
    for rho in [0.0, 0.5, 0.9, 0.99] {
        let d = bivariate(rho, 2048, 7.0);
        let mi = mutual_information(&d).map_err(|e| e.to_string())?;
        worst_mi = worst_mi.max((mi + 0.5 * (1.0 - rho * rho).log2()).abs());
        let cv = d.conditional_variance(Party::Signal).map_err(|e| e.to_string())?;
        worst_cv = worst_cv.max(rel(cv, 1.0 - rho * rho));
    }

    let (a, b) = (1.0, 3.0);
    let g = Grid1D::symmetric(256, 16.0).unwrap();
    let amp = JointAmplitude::from_fn(Basis::Momentum, g, g, |x, y| {
        Complex64::new(
            (-(x + y).powi(2) / (4.0 * a * a) - (x - y).powi(2) / (4.0 * b * b)).exp(),
            0.0,
        )
    })
    .map_err(|e| e.to_string())?;
    let d = schmidt_decompose(&amp, 12).map_err(|e| e.to_string())?;
    let mu = (a - b).abs() / (a + b);
    let worst_c = d
        .coefficients()
        .iter()
        .enumerate()
        .map(|(n, c)| (c - ((1.0 - mu * mu) * mu.powi(2 * n as i32)).sqrt()).abs())
        .fold(0.0, f64::max);
    check(
        worst_mi <= 1e-3 && worst_cv <= 1e-6 && worst_c <= 1e-4,
        format!(
            "max |MI error| {worst_mi:.2e} bits, max conditional variance error {worst_cv:.2e} relative, \
             max Schmidt coefficient error {worst_c:.2e}"
        ),
    )
}

fn entropic_bound() -> Outcome {
    let mut dists: Vec<(String, Box<dyn Bipartite>)> = Vec::new();
    for rho in [0.0, 0.5, 0.9, 0.99] {
        dists.push((format!("gaussian ρ={rho}"), Box::new(bivariate(rho, 1024, 7.0))));
    }
    let g = Grid1D::symmetric(512, 6.0).unwrap();
    let mixture = JointDistribution::from_fn(Basis::Position, g, g, |x, y| {
        (-((x - 1.5).powi(2) + (y - 1.5).powi(2)) / 0.3).exp()
            + 0.5 * (-((x + y).powi(2) + (x - y).powi(2) / 8.0)).exp()
    })
    .map_err(|e| e.to_string())?;
    dists.push(("gaussian mixture".into(), Box::new(mixture)));
    let flat = JointDistribution::from_fn(Basis::Position, g, g, |x, y| {
        f64::from(x.abs() < 2.0 && (x - y).abs() < 0.5)
    })
    .map_err(|e| e.to_string())?;
    dists.push(("uniform band".into(), Box::new(flat)));
    for (w, l) in [(1.69864, 2.0), (0.5, 10.0), (4.0, 1.0)] {
        let p = SourceParams::default().with_waist(w).with_crystal_length(l);
        let s = SourceDistributions::new(&p, &FactorSettings::default()).map_err(|e| e.to_string())?;
        dists.push((format!("source w0={w} L={l} momentum"), Box::new(s.momentum)));
        dists.push((format!("source w0={w} L={l} position"), Box::new(s.position)));
    }

    let mut worst = f64::NEG_INFINITY;
    let mut worst_name = String::new();
    for (name, d) in &dists {
        for party in [Party::Signal, Party::Idler] {
            let h = d.conditional_entropy(party).map_err(|e| e.to_string())?;
            let v = d.conditional_variance(party).map_err(|e| e.to_string())?;
            let slack = h - 0.5 * (2.0 * PI * E * v).log2();
            if slack > worst {
                worst = slack;
                worst_name = name.clone();
            }
        }
    }

    let mut lines: f64 = 0.0;
    for rho in [0.5, 0.8, 0.99] {
        let d = bivariate(rho, 2048, 7.0);
        let b = keyrate_lower_bound(&d, &d).map_err(|e| e.to_string())?;
        lines = lines.max((b.entropic - b.variance).abs());
    }
    check(
        worst <= 1e-6 && lines <= 1e-4,
        format!(
            "{} distributions, largest H - ½log₂(2πeΔ²) = {worst:.2e} bits ({worst_name}); \
             bound lines differ by at most {lines:.2e} bits",
            dists.len()
        ),
    )
}

fn pure_state_witness() -> Outcome {
    let params = SourceParams::default();
    let mut products = Vec::new();
    for count in [1 << 16, 1 << 17] {
        let s = SourceDistributions::new(&params, &FactorSettings::with_count(count)).map_err(|e| e.to_string())?;
        products.push(
            epr_witness(&s.momentum, &s.position)
                .map_err(|e| e.to_string())?
                .product,
        );
    }
    let change = rel(products[1], products[0]);
    check(
        products[0] < 0.25 && change < 0.02,
        format!("product {:.4e}, change under grid doubling {change:.2e}", products[0]),
    )
}

fn monte_carlo() -> Outcome {
    let start = Instant::now();
    let params = SourceParams::default();
    let source = SourceDistributions::new(&params, &FactorSettings::default()).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut ok = true;

    let sim = Simulator::from_source(SimConfig::new(10_000_000, 1), &source).map_err(|e| e.to_string())?;
    let tally = sim.tally();
    let analytic = sim.analytic_events().map_err(|e| e.to_string())?;
    let z: Vec<f64> = [analytic.p1, analytic.p2, analytic.p3]
        .iter()
        .enumerate()
        .map(|(k, &p)| binomial_z(tally.classes[k], tally.pulses, p))
        .collect();
    ok &= z.iter().all(|v| v.abs() <= 4.0);
    parts.push(format!("z(P1,P2,P3) = ({:.2}, {:.2}, {:.2})", z[0], z[1], z[2]));

    let mut config = SimConfig::new(10_000_000, 2);
    config.array.pixels = 32;
    let sim = Simulator::from_source(config, &source).map_err(|e| e.to_string())?;
    let stats = estimate_statistics(&sim.tally()).map_err(|e| e.to_string())?;
    for basis in [Basis::Momentum, Basis::Position] {
        let want = sim
            .analytic_joint(basis)
            .and_then(|j| j.mutual_information())
            .map_err(|e| e.to_string())?;
        let got = stats.get(basis).ok_or("no sifted events")?.mutual_information;
        ok &= (got - want).abs() <= 0.05;
        parts.push(format!("n=32 {} MI {got:.3} vs {want:.3}", basis.name()));
    }

    let base = SimConfig::new(20_000_000_000, 3);
    let h = hiding_test(&base, &source, 35.0).map_err(|e| e.to_string())?;
    ok &= h.test.passes(0.01);
    parts.push(format!(
        "λ_max = {:.3} at 35 dB: background {:.4} vs {:.4}, p = {:.3}",
        h.lambda,
        h.attacked_fraction(),
        h.honest_fraction(),
        h.test.p_value
    ));
    let elapsed = start.elapsed();
    ok &= within(elapsed, 600);
    parts.push(format!("{:.0} s", elapsed.as_secs_f64()));
    check(ok, parts.join("; "))
}

fn negativity_endpoints() -> Outcome {
    let model = source_negativity_model(
        &SourceParams::default(),
        &DetectorArrayParams::default(),
        None,
        &NegativitySettings::default(),
    )
    .map_err(|e| e.to_string())?;
    let c = model.coefficients();
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let closed = 2.0 * (c.iter().sum::<f64>() / norm).log2();
    let ln = |l: f64| model.log_negativity(l).map(|v| v.bits).map_err(|e| e.to_string());
    let (l0, l99, l1) = (ln(0.0)?, ln(0.99)?, ln(1.0)?);
    check(
        (l0 - closed).abs() <= 1e-6 && l1.abs() <= 1e-9 && l99 > 0.0,
        format!(
            "D = {}: LN(0) = {l0:.6} vs {closed:.6}, LN(0.99) = {l99:.5}, LN(1) = {l1:.1e}",
            model.dim()
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 9] = [
        ("witness thresholds", witness_thresholds),
        ("security crossing", security_crossing),
        ("information trends", information_trends),
        ("closed forms", closed_forms),
        ("oracle equivalence", oracles),
        ("entropic bound", entropic_bound),
        ("pure-state witness", pure_state_witness),
        ("monte carlo consistency", monte_carlo),
        ("log-negativity endpoints", negativity_endpoints),
    ];
    let mut failed = Vec::new();
    writeln!(std::io::stdout()).unwrap();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = run();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        // Written past the test harness capture so every line shows.
        let mut out = std::io::stdout().lock();
        writeln!(out, "criterion {}: {tag} {name}: {detail}", i + 1).unwrap();
        out.flush().unwrap();
        if outcome.is_err() {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
