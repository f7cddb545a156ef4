//! Intercept-resend attack on Bob's photon.
//!
//! Eve intercepts a fraction `λ` of the photons, measures each in a random
//! basis at her own pixelization and resends the pixel eigenstate. A matched
//! basis leaves the Alice–Bob correlation intact; a mismatched one leaves Bob
//! with a flat distribution, indistinguishable from dark counts.

use crate::detection::{
    event_probabilities, ChannelParams, ComponentWeights, DetectorArrayParams, EventProbabilities,
    PixelJointDistribution,
};
use crate::error::{invalid, Error, Result};
use crate::factorized::SourceDistributions;
use crate::infotheory::discrete_mutual_information;

/// Largest intercept-resend ratio that channel loss `l` and dark counts can
/// hide, `min{2n / ((1/l - 1)(1/P_dark - 1) + n), 1}`.
pub fn lambda_max(loss: f64, array: &DetectorArrayParams) -> Result<f64> {
    array.validate()?;
    if !(0.0..=1.0).contains(&loss) {
        return Err(invalid("loss", format!("{loss} is outside [0, 1]")));
    }
    let pd = array.dark_count_probability;
    if loss == 0.0 || pd == 0.0 {
        return Ok(0.0);
    }
    let n = array.pixels as f64;
    let v = 2.0 * n / ((1.0 / loss - 1.0) * (1.0 / pd - 1.0) + n);
    Ok(v.min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackParams {
    /// Intercepted fraction `λ`.
    pub lambda: f64,
    /// Eve's pixel count; `None` uses Bob's.
    pub eve_pixels: Option<usize>,
}

impl AttackParams {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            eve_pixels: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(invalid("lambda", format!("{} is outside [0, 1]", self.lambda)));
        }
        if self.eve_pixels == Some(0) {
            return Err(invalid("eve_pixels", "must be >= 1"));
        }
        Ok(())
    }
}

/// Accepted-event joints under attack.
#[derive(Debug, Clone)]
pub struct AttackedJoints {
    pub alice_bob: PixelJointDistribution,
    /// Alice's pixel against Eve's; uniform in Eve's pixel whenever she holds
    /// no information.
    pub alice_eve: Vec<f64>,
    pub eve_pixels: usize,
}

impl AttackedJoints {
    pub fn alice_eve_information(&self) -> Result<f64> {
        discrete_mutual_information(&self.alice_eve, self.alice_bob.alice_pixels(), self.eve_pixels)
    }
}

/// Mixes the intercept-resend channel into the accepted-event distribution.
///
/// Eve's pixels must tile Bob's: her resent top-hat spreads evenly over the
/// Bob pixels inside it.
pub fn attacked_pixel_joint(
    signal: &PixelJointDistribution,
    events: &EventProbabilities,
    attack: &AttackParams,
) -> Result<AttackedJoints> {
    attack.validate()?;
    let accepted = events.accepted();
    if !(accepted > 0.0) {
        return Err(Error::NoAcceptedEvents);
    }
    let (na, nb) = (signal.alice_pixels(), signal.bob_pixels());
    let ne = attack.eve_pixels.unwrap_or(nb);
    if nb % ne != 0 {
        return Err(invalid("eve_pixels", format!("{ne} does not divide Bob's {nb} pixels")));
    }
    let block = nb / ne;
    let lam = attack.lambda;

    // Alice × Eve for a matched-basis intercept
    let mut ae_signal = vec![0.0; na * ne];
    for a in 0..na {
        for b in 0..nb {
            ae_signal[a * ne + b / block] += signal.get(a, b);
        }
    }
    // Bob's pixel after a matched-basis resend
    let mut intercepted = vec![0.0; na * nb];
    for a in 0..na {
        for b in 0..nb {
            intercepted[a * nb + b] = ae_signal[a * ne + b / block] / block as f64;
        }
    }

    let (pa, pb) = (signal.alice_marginal(), signal.bob_marginal());
    let (ua, ub, ue) = (1.0 / na as f64, 1.0 / nb as f64, 1.0 / ne as f64);
    let mut ab = Vec::with_capacity(na * nb);
    for a in 0..na {
        for b in 0..nb {
            let photons = (1.0 - lam) * signal.get(a, b) + 0.5 * lam * intercepted[a * nb + b] + 0.5 * lam * pa[a] * ub;
            ab.push(
                events.p3 * photons
                    + events.p2_alice_photon * pa[a] * ub
                    + events.p2_bob_photon * ua * pb[b]
                    + events.p1 * ua * ub,
            );
        }
    }
    let alice_bob = signal.with_probs(
        ab,
        ComponentWeights {
            signal: events.p3 * (1.0 - 0.5 * lam) / accepted,
            background: (events.p1 + events.p2 + 0.5 * lam * events.p3) / accepted,
        },
    );
    let alice_eve = (0..na * ne)
        .map(|i| 0.5 * lam * ae_signal[i] + (1.0 - 0.5 * lam) * pa[i / ne] * ue)
        .collect();
    Ok(AttackedJoints {
        alice_bob,
        alice_eve,
        eve_pixels: ne,
    })
}

/// Worst-case key information at one loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityPoint {
    pub loss: f64,
    pub loss_db: f64,
    pub lambda_max: f64,
    pub i_ab_min: f64,
    pub i_ae_max: f64,
    pub delta_i_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroCrossing {
    pub loss_db: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecurityCurve {
    pub points: Vec<SecurityPoint>,
    pub zero_crossing: Option<ZeroCrossing>,
}

/// Security analysis in the key basis (momentum) with Eve at `λ_max`.
#[derive(Debug, Clone)]
pub struct SecurityAnalyzer {
    pub signal: PixelJointDistribution,
    pub array: DetectorArrayParams,
    pub pair_probability: f64,
    pub eve_pixels: Option<usize>,
}

impl SecurityAnalyzer {
    pub fn new(source: &SourceDistributions, pair_probability: f64, array: &DetectorArrayParams) -> Result<Self> {
        Ok(Self {
            signal: crate::detection::bin_factorized(&source.momentum, array)?,
            array: *array,
            pair_probability,
            eve_pixels: None,
        })
    }

    pub fn events(&self, channel: &ChannelParams) -> Result<EventProbabilities> {
        event_probabilities(self.pair_probability, channel, &self.array.effective())
    }

    /// `ΔI^min = I_AB^min - I_AE^max` at the given loss.
    pub fn point(&self, loss: f64) -> Result<SecurityPoint> {
        let channel = ChannelParams::with_throughput(1.0 - loss);
        let lam = lambda_max(loss, &self.array)?;
        let attacked = attacked_pixel_joint(
            &self.signal,
            &self.events(&channel)?,
            &AttackParams {
                lambda: lam,
                eve_pixels: self.eve_pixels,
            },
        )?;
        let i_ab_min = attacked.alice_bob.mutual_information()?;
        let i_ae_max = attacked.alice_eve_information()?;
        Ok(SecurityPoint {
            loss,
            loss_db: channel.loss_db(),
            lambda_max: lam,
            i_ab_min,
            i_ae_max,
            delta_i_min: i_ab_min - i_ae_max,
        })
    }

    pub fn point_db(&self, loss_db: f64) -> Result<SecurityPoint> {
        self.point(1.0 - 10f64.powf(-loss_db / 10.0))
    }

    /// Evaluates the losses (in dB, increasing) and bisects the first sign
    /// change of `ΔI^min`.
    pub fn curve(&self, losses_db: &[f64]) -> Result<SecurityCurve> {
        if losses_db.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("losses_db", "must be strictly increasing"));
        }
        let points = losses_db
            .iter()
            .map(|&db| self.point_db(db))
            .collect::<Result<Vec<_>>>()?;
        let mut zero_crossing = None;
        if let Some(i) = points
            .windows(2)
            .position(|w| w[0].delta_i_min > 0.0 && w[1].delta_i_min <= 0.0)
        {
            let (mut lo, mut hi) = (points[i].loss_db, points[i + 1].loss_db);
            while hi - lo > 1e-6 {
                let mid = 0.5 * (lo + hi);
                if self.point_db(mid)?.delta_i_min > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let at = self.point_db(0.5 * (lo + hi))?;
            zero_crossing = Some(ZeroCrossing {
                loss_db: at.loss_db,
                lambda: at.lambda_max,
            });
        }
        Ok(SecurityCurve { points, zero_crossing })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::Basis;
    use crate::detection::array_edges;

    fn array(n: usize) -> DetectorArrayParams {
        DetectorArrayParams::default().with_pixels(n)
    }

    #[test]
    fn lambda_max_limits() {
        assert_eq!(lambda_max(0.0, &array(128)).unwrap(), 0.0);
        assert_eq!(
            lambda_max(0.5, &array(128).with_dark_count_probability(0.0)).unwrap(),
            0.0
        );
        assert_eq!(lambda_max(1.0, &array(128)).unwrap(), 1.0);
        let v = lambda_max(0.9, &array(128)).unwrap();
        let exact = 256.0 / ((1.0 / 0.9 - 1.0) * (1e6 - 1.0) + 128.0);
        assert!(((v - exact) / exact).abs() < 1e-12);
        assert!((v - 2.30e-3).abs() < 5e-6);
    }

    #[test]
    fn lambda_max_monotone() {
        let mut last = 0.0;
        for i in 1..100 {
            let v = lambda_max(i as f64 / 100.0, &array(128)).unwrap();
            assert!(v >= last);
            assert!(lambda_max(i as f64 / 100.0, &array(256)).unwrap() >= v);
            last = v;
        }
    }

    fn toy_signal() -> PixelJointDistribution {
        let n = 4;
        let mut p = vec![0.02 / 12.0; n * n];
        for i in 0..n {
            p[i * n + i] = 0.98 / 4.0;
        }
        PixelJointDistribution::new(Basis::Momentum, array_edges(1.0, n), array_edges(1.0, n), p).unwrap()
    }

    fn quiet() -> EventProbabilities {
        EventProbabilities {
            p1: 0.0,
            p2: 0.0,
            p3: 1e-3,
            p2_alice_photon: 0.0,
            p2_bob_photon: 0.0,
        }
    }

    #[test]
    fn no_attack_leaves_eve_blind() {
        let s = toy_signal();
        let j = attacked_pixel_joint(&s, &quiet(), &AttackParams::new(0.0)).unwrap();
        for (a, b) in j.alice_bob.probs().iter().zip(s.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(j.alice_eve_information().unwrap().abs() < 1e-12);
    }

    #[test]
    fn full_attack_halves_correlation() {
        let s = toy_signal();
        let i0 = s.mutual_information().unwrap();
        let j = attacked_pixel_joint(&s, &quiet(), &AttackParams::new(1.0)).unwrap();
        let i_ab = j.alice_bob.mutual_information().unwrap();
        assert!(i_ab > 0.0 && i_ab < i0);
        assert!(j.alice_eve_information().unwrap() > 0.0);
        let total: f64 = j.alice_eve.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coarse_eve() {
        let s = toy_signal();
        let j = attacked_pixel_joint(
            &s,
            &quiet(),
            &AttackParams {
                lambda: 1.0,
                eve_pixels: Some(2),
            },
        )
        .unwrap();
        assert_eq!(j.alice_eve.len(), 8);
        let fine = attacked_pixel_joint(&s, &quiet(), &AttackParams::new(1.0)).unwrap();
        assert!(j.alice_eve_information().unwrap() < fine.alice_eve_information().unwrap());
        assert!(attacked_pixel_joint(
            &s,
            &quiet(),
            &AttackParams {
                lambda: 1.0,
                eve_pixels: Some(3)
            }
        )
        .is_err());
    }

    #[test]
    fn eve_information_grows_with_lambda() {
        let s = toy_signal();
        let mut last = -1.0;
        for i in 0..=10 {
            let j = attacked_pixel_joint(&s, &quiet(), &AttackParams::new(i as f64 / 10.0)).unwrap();
            let v = j.alice_eve_information().unwrap();
            assert!(v >= last);
            last = v;
            let t: f64 = j.alice_bob.probs().iter().sum();
            assert!((t - 1.0).abs() < 1e-9);
        }
    }
}
