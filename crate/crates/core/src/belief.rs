//! Defender-side HMM filter over the two-state chain.
//!
//! The filter is conditioned on the attacker's modeled probe probabilities
//! in each state (a [`ProbeProfile`]), the defender's own action and the
//! probe observation. Detection has no false positives: an observed probe
//! always comes from a real one, which is seen with probability `1 - nu`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::game::{DefenderAction, ModelParams};

/// Probability that the attacker controls the system.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Belief(f64);

impl Belief {
    pub const CLEAN: Belief = Belief(0.0);

    pub fn new(p_attacker: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&p_attacker) {
            Ok(Belief(p_attacker))
        } else {
            Err(Error::InvalidParams(format!("belief {p_attacker} outside [0, 1]")))
        }
    }

    /// Builds a belief, clamping tiny rounding excursions into [0, 1].
    pub(crate) fn clamped(p_attacker: f64) -> Self {
        Belief(p_attacker.clamp(0.0, 1.0))
    }

    pub fn p_attacker(self) -> f64 {
        self.0
    }

    pub fn p_defender(self) -> f64 {
        1.0 - self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observation {
    ProbeDetected,
    NoDetection,
}

impl Observation {
    pub const ALL: [Observation; 2] = [Observation::ProbeDetected, Observation::NoDetection];

    pub fn name(self) -> &'static str {
        match self {
            Observation::ProbeDetected => "ProbeDetected",
            Observation::NoDetection => "NoDetection",
        }
    }
}

/// Attacker probe probabilities the filter conditions on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeProfile {
    pub p_probe_given_s0: f64,
    pub p_probe_given_s1: f64,
}

impl ProbeProfile {
    pub fn new(p_probe_given_s0: f64, p_probe_given_s1: f64) -> Result<Self> {
        for p in [p_probe_given_s0, p_probe_given_s1] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParams(format!("probe probability {p} outside [0, 1]")));
            }
        }
        Ok(Self {
            p_probe_given_s0,
            p_probe_given_s1,
        })
    }
}

/// Success probability of a single probe, `1 - exp(-alpha)`.
pub fn probe_success_probability(params: &ModelParams) -> f64 {
    -(-params.alpha).exp_m1()
}

/// Samples the defender's observation. Consumes exactly one uniform.
pub fn sample_observation<R: Rng + ?Sized>(probe_occurred: bool, params: &ModelParams, rng: &mut R) -> Observation {
    let u: f64 = rng.random();
    if probe_occurred && u < 1.0 - params.nu {
        Observation::ProbeDetected
    } else {
        Observation::NoDetection
    }
}

/// Unnormalized next-state weights `[w0, w1]` after the defender continues.
fn continue_weights(b: Belief, o: Observation, probes: &ProbeProfile, params: &ModelParams) -> [f64; 2] {
    let (b0, b1) = (b.p_defender(), b.p_attacker());
    let (p0, p1) = (probes.p_probe_given_s0, probes.p_probe_given_s1);
    let nu = params.nu;
    let stay = params.stay_probability();
    let success = probe_success_probability(params);
    match o {
        Observation::ProbeDetected => [
            b0 * p0 * (1.0 - nu) * stay,
            b0 * p0 * (1.0 - nu) * success + b1 * p1 * (1.0 - nu),
        ],
        Observation::NoDetection => [
            b0 * (p0 * nu * stay + (1.0 - p0)),
            b0 * p0 * nu * success + b1 * (p1 * nu + 1.0 - p1),
        ],
    }
}

/// Total probability of observing `o` from belief `b`.
pub fn observation_likelihood(
    b: Belief,
    d: DefenderAction,
    o: Observation,
    probes: &ProbeProfile,
    params: &ModelParams,
) -> f64 {
    match d {
        DefenderAction::Continue => {
            let w = continue_weights(b, o, probes, params);
            w[0] + w[1]
        }
        // The probe is still seen; its outcome is wiped by the reimage.
        DefenderAction::Reimage => {
            let probe = b.p_defender() * probes.p_probe_given_s0 + b.p_attacker() * probes.p_probe_given_s1;
            let detected = probe * (1.0 - params.nu);
            match o {
                Observation::ProbeDetected => detected,
                Observation::NoDetection => 1.0 - detected,
            }
        }
    }
}

/// Normalized two-component posterior `[P(s=0), P(s=1)]` together with
/// the observation likelihood `sigma`.
pub fn posterior_components(
    b: Belief,
    d: DefenderAction,
    o: Observation,
    probes: &ProbeProfile,
    params: &ModelParams,
) -> Result<([f64; 2], f64)> {
    let impossible = || Error::ImpossibleObservation { observation: o.name() };
    match d {
        DefenderAction::Reimage => {
            let sigma = observation_likelihood(b, d, o, probes, params);
            if sigma <= 0.0 {
                return Err(impossible());
            }
            Ok(([1.0, 0.0], sigma))
        }
        DefenderAction::Continue => {
            let w = continue_weights(b, o, probes, params);
            let sigma = w[0] + w[1];
            if sigma <= 0.0 {
                return Err(impossible());
            }
            Ok(([w[0] / sigma, w[1] / sigma], sigma))
        }
    }
}

/// Bayes update of the belief. Returns the posterior and the likelihood
/// `sigma` of the observation.
pub fn posterior(
    b: Belief,
    d: DefenderAction,
    o: Observation,
    probes: &ProbeProfile,
    params: &ModelParams,
) -> Result<(Belief, f64)> {
    let (post, sigma) = posterior_components(b, d, o, probes, params)?;
    Ok((Belief::clamped(post[1]), sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(alpha: f64, nu: f64) -> ModelParams {
        ModelParams::new(alpha, nu, 0.95, 0.3, 0.05, 50.0).unwrap()
    }

    fn profile(p0: f64, p1: f64) -> ProbeProfile {
        ProbeProfile::new(p0, p1).unwrap()
    }

    #[test]
    fn success_probability_values() {
        assert!((probe_success_probability(&params(0.2, 0.2)) - 0.181269).abs() < 1e-6);
        assert!((probe_success_probability(&params(0.693147, 0.2)) - 0.5).abs() < 1e-6);
        assert!((probe_success_probability(&params(800.0, 0.2)) - 1.0).abs() < 1e-15);
        let tiny = probe_success_probability(&params(1e-12, 0.2));
        assert!(tiny > 0.0 && tiny < 1.0);
    }

    #[test]
    fn observation_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            assert_eq!(sample_observation(false, &params(0.2, 0.0), &mut rng), Observation::NoDetection);
            assert_eq!(sample_observation(true, &params(0.2, 0.0), &mut rng), Observation::ProbeDetected);
        }
        let n = 100_000;
        let p = params(0.2, 0.5);
        let hits = (0..n)
            .filter(|_| sample_observation(true, &p, &mut rng) == Observation::ProbeDetected)
            .count();
        let sigma = (0.25 / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn detected_probe_from_clean_system() {
        // Detection implies a probe against state 0, so the posterior is
        // the probe's success probability; sigma = 0.5 * 1 * 0.5.
        let (post, sigma) = posterior(
            Belief::new(0.5).unwrap(),
            DefenderAction::Continue,
            Observation::ProbeDetected,
            &profile(1.0, 0.0),
            &params(0.2, 0.5),
        )
        .unwrap();
        assert!((post.p_attacker() - 0.181269246922018).abs() < 1e-9);
        assert!((sigma - 0.25).abs() < 1e-12);
    }

    #[test]
    fn quiet_clean_system_stays_clean() {
        let (post, sigma) = posterior(
            Belief::CLEAN,
            DefenderAction::Continue,
            Observation::NoDetection,
            &profile(0.0, 0.0),
            &params(0.2, 0.2),
        )
        .unwrap();
        assert_eq!(post.p_attacker(), 0.0);
        assert_eq!(sigma, 1.0);
    }

    #[test]
    fn compromised_is_absorbing_under_continue() {
        for p0 in [0.0, 0.3, 1.0] {
            let (post, _) = posterior(
                Belief::new(1.0).unwrap(),
                DefenderAction::Continue,
                Observation::NoDetection,
                &profile(p0, 0.0),
                &params(0.2, 0.2),
            )
            .unwrap();
            assert_eq!(post.p_attacker(), 1.0);
        }
    }

    #[test]
    fn reimage_resets_and_reports_likelihood() {
        let b = Belief::new(0.4).unwrap();
        let probes = profile(0.5, 0.25);
        let p = params(0.2, 0.2);
        let (post_d, sd) = posterior(b, DefenderAction::Reimage, Observation::ProbeDetected, &probes, &p).unwrap();
        let (post_n, sn) = posterior(b, DefenderAction::Reimage, Observation::NoDetection, &probes, &p).unwrap();
        assert_eq!(post_d.p_attacker(), 0.0);
        assert_eq!(post_n.p_attacker(), 0.0);
        let expected = (0.6 * 0.5 + 0.4 * 0.25) * 0.8;
        assert!((sd - expected).abs() < 1e-15);
        assert!((sd + sn - 1.0).abs() < 1e-15);
    }

    #[test]
    fn impossible_detection() {
        let err = posterior(
            Belief::new(0.3).unwrap(),
            DefenderAction::Continue,
            Observation::ProbeDetected,
            &profile(0.0, 0.0),
            &params(0.2, 0.2),
        )
        .unwrap_err();
        assert!(matches!(err, Error::ImpossibleObservation { .. }));
    }

    /// Always-probing conditioning reduces the detected update to the
    /// normalized product `b * [[q, 1 - q], [0, 1]]`.
    #[test]
    fn always_probing_matches_transition_product() {
        let p = params(0.5, 0.3);
        let q = (-0.5f64).exp();
        for k in 0..=20 {
            let b1 = k as f64 / 20.0;
            let b0 = 1.0 - b1;
            let (post, _) = posterior(
                Belief::new(b1).unwrap(),
                DefenderAction::Continue,
                Observation::ProbeDetected,
                &profile(1.0, 1.0),
                &p,
            )
            .unwrap();
            let row = [b0 * q, b0 * (1.0 - q) + b1];
            let expected = row[1] / (row[0] + row[1]);
            assert!((post.p_attacker() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn filter_is_monotone_in_prior() {
        for &p0 in &[0.0, 0.1, 0.5, 0.9, 1.0] {
            for &nu in &[0.0, 0.2, 0.5, 1.0] {
                for &alpha in &[0.1, 0.2, 0.5, 2.0] {
                    let p = params(alpha, nu);
                    let probes = profile(p0, 0.0);
                    for d in DefenderAction::ALL {
                        for o in Observation::ALL {
                            let mut last = -1.0;
                            for k in 0..=100 {
                                let b = Belief::new(k as f64 / 100.0).unwrap();
                                let Ok((post, _)) = posterior(b, d, o, &probes, &p) else {
                                    continue;
                                };
                                assert!(post.p_attacker() >= last - 1e-12);
                                last = post.p_attacker();
                            }
                        }
                    }
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2_000))]

        #[test]
        fn posterior_normalized_and_total_probability(
            b in 0.0f64..=1.0,
            p0 in 0.0f64..=1.0,
            p1 in 0.0f64..=1.0,
            nu in 0.0f64..=1.0,
            alpha in 1e-3f64..5.0,
        ) {
            let p = params(alpha, nu);
            let probes = profile(p0, p1);
            let b = Belief::new(b).unwrap();
            for d in DefenderAction::ALL {
                let total: f64 = Observation::ALL
                    .iter()
                    .map(|&o| observation_likelihood(b, d, o, &probes, &p))
                    .sum();
                prop_assert!((total - 1.0).abs() <= 1e-12);
                for o in Observation::ALL {
                    if let Ok((post, sigma)) = posterior(b, d, o, &probes, &p) {
                        prop_assert!(sigma > 0.0);
                        prop_assert!((0.0..=1.0).contains(&post.p_attacker()));
                        let (c, _) = posterior_components(b, d, o, &probes, &p).unwrap();
                        prop_assert!((c[0] + c[1] - 1.0).abs() <= 1e-12);
                        prop_assert!(c.iter().all(|x| (0.0..=1.0).contains(x)));
                    }
                }
            }
        }
    }
}
