//! Episode generation and Monte Carlo value estimation.
//!
//! Every episode starts from a freshly imaged system (`s = 0`, belief 0).
//! Each step draws exactly four uniforms (defender action, attacker action,
//! next state, observation), so two rollouts sharing a seed use common
//! random numbers even when their policies differ.

use std::io::Write;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::belief::{posterior, sample_observation, Belief, Observation};
use crate::error::Result;
use crate::game::{
    reward_attacker, reward_defender, sample_transition, AttackerAction, DefenderAction, ModelParams, SystemState,
};
use crate::policy::ThresholdPolicy;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: SystemState,
    pub belief_before: Belief,
    pub defender_action: DefenderAction,
    pub attacker_action: AttackerAction,
    pub observation: Observation,
    pub reward_defender: f64,
    pub reward_attacker: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueEstimate {
    pub mean_defender: f64,
    pub mean_attacker: f64,
    pub stderr_defender: f64,
    pub stderr_attacker: f64,
    pub episodes: usize,
}

/// Smallest `H >= 1` with `gamma^H * r_max / (1 - gamma) < epsilon`.
pub fn truncation_horizon(gamma: f64, epsilon: f64, r_max: f64) -> usize {
    assert!(gamma > 0.0 && gamma < 1.0 && epsilon > 0.0 && r_max > 0.0);
    let tail = |h: i32| gamma.powi(h) * r_max / (1.0 - gamma);
    // Closed-form guess, then walk to the exact boundary.
    let guess = ((epsilon * (1.0 - gamma) / r_max).ln() / gamma.ln()).floor().max(1.0) as i32;
    let mut h = guess.max(1);
    while h > 1 && tail(h - 1) < epsilon {
        h -= 1;
    }
    while tail(h) >= epsilon {
        h += 1;
    }
    h as usize
}

/// Deterministic child seed for work item `index` under `seed`.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// Rollout where the defender's filter conditions on `filter_model` rather
/// than on the acting attacker policy. Used to hold the defender's
/// inference fixed while the attacker deviates.
pub fn rollout_with_filter(
    params: &ModelParams,
    defender: &ThresholdPolicy,
    attacker: &ThresholdPolicy,
    filter_model: &ThresholdPolicy,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    assert!(horizon >= 1, "horizon must be >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = SystemState::DefenderControls;
    let mut belief = Belief::CLEAN;
    let mut steps = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let (u_d, u_a): (f64, f64) = (rng.random(), rng.random());
        let d = if u_d < defender.defender_reimage_probability(belief) {
            DefenderAction::Reimage
        } else {
            DefenderAction::Continue
        };
        let a = if u_a < attacker.attacker_probe_probability(state, belief) {
            AttackerAction::Probe
        } else {
            AttackerAction::NoProbe
        };
        let next = sample_transition(state, d, a, params, &mut rng);
        let o = sample_observation(a == AttackerAction::Probe, params, &mut rng);
        steps.push(Step {
            state,
            belief_before: belief,
            defender_action: d,
            attacker_action: a,
            observation: o,
            reward_defender: reward_defender(state, d, params),
            reward_attacker: reward_attacker(state, a, params),
        });
        belief = posterior(belief, d, o, &filter_model.probe_profile(belief), params)?.0;
        state = next;
    }
    Ok(Trajectory { steps, seed })
}

/// Plays one episode; the defender's filter conditions on the acting
/// attacker policy.
pub fn rollout(
    params: &ModelParams,
    defender: &ThresholdPolicy,
    attacker: &ThresholdPolicy,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    rollout_with_filter(params, defender, attacker, attacker, horizon, seed)
}

/// Exact discounted sums `(J_D, J_A)` of the recorded rewards.
pub fn discounted_returns(traj: &Trajectory, gamma: f64) -> (f64, f64) {
    let mut discount = 1.0;
    let (mut jd, mut ja) = (0.0, 0.0);
    for step in &traj.steps {
        jd += discount * step.reward_defender;
        ja += discount * step.reward_attacker;
        discount *= gamma;
    }
    (jd, ja)
}

/// Recomputes the belief sequence from the recorded actions and
/// observations. The result has one more entry than there are steps.
pub fn replay_beliefs(traj: &Trajectory, params: &ModelParams, filter_model: &ThresholdPolicy) -> Result<Vec<Belief>> {
    let mut belief = Belief::CLEAN;
    let mut out = Vec::with_capacity(traj.steps.len() + 1);
    out.push(belief);
    for step in &traj.steps {
        belief = posterior(belief, step.defender_action, step.observation, &filter_model.probe_profile(belief), params)?.0;
        out.push(belief);
    }
    Ok(out)
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo estimate of both players' discounted values. Episode `e`
/// runs under `child_seed(seed, e)`; the reduction is sequential so the
/// result does not depend on the number of worker threads.
pub fn estimate_values(
    params: &ModelParams,
    defender: &ThresholdPolicy,
    attacker: &ThresholdPolicy,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<ValueEstimate> {
    assert!(episodes >= 2, "need at least two episodes for a standard error");
    let returns = (0..episodes as u64)
        .into_par_iter()
        .map(|e| {
            let traj = rollout(params, defender, attacker, horizon, child_seed(seed, e))?;
            Ok(discounted_returns(&traj, params.gamma))
        })
        .collect::<Result<Vec<_>>>()?;
    let (jd, ja): (Vec<f64>, Vec<f64>) = returns.into_iter().unzip();
    let (mean_defender, stderr_defender) = mean_and_stderr(&jd);
    let (mean_attacker, stderr_attacker) = mean_and_stderr(&ja);
    Ok(ValueEstimate {
        mean_defender,
        mean_attacker,
        stderr_defender,
        stderr_attacker,
        episodes,
    })
}

fn state_code(s: SystemState) -> u8 {
    s.index() as u8
}

/// Writes `t,s,b,d,a,o,r_D,r_A` lines (with header). Actions and states use
/// their numeric codes; the observation is 1 for a detected probe.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,s,b,d,a,o,r_D,r_A")?;
    for (t, step) in traj.steps.iter().enumerate() {
        let o = match step.observation {
            Observation::ProbeDetected => 1,
            Observation::NoDetection => 0,
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            t,
            state_code(step.state),
            step.belief_before.p_attacker(),
            step.defender_action.index(),
            step.attacker_action.index(),
            o,
            step.reward_defender,
            step.reward_attacker
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::policy::Role;

    fn params() -> ModelParams {
        ModelParams::reference(0.3, 0.05)
    }

    #[test]
    fn horizon_values() {
        // 0.95^193 / 0.05 = 1.0039e-3, 0.95^194 / 0.05 = 9.537e-4
        assert_eq!(truncation_horizon(0.95, 1e-3, 1.0), 194);
        assert_eq!(truncation_horizon(0.5, 1.0, 1.0), 2);
        assert!(truncation_horizon(1e-9, 0.5, 1.0) <= 2);
    }

    #[test]
    fn geometric_return() {
        let steps = |n: usize| Trajectory {
            steps: vec![
                Step {
                    state: SystemState::DefenderControls,
                    belief_before: Belief::CLEAN,
                    defender_action: DefenderAction::Continue,
                    attacker_action: AttackerAction::NoProbe,
                    observation: Observation::NoDetection,
                    reward_defender: 1.0,
                    reward_attacker: 0.0,
                };
                n
            ],
            seed: 0,
        };
        let (jd, ja) = discounted_returns(&steps(193), 0.95);
        assert!((jd - (1.0 - 0.95f64.powi(193)) / 0.05).abs() < 1e-10);
        assert!((jd - 19.998996110720).abs() < 1e-9);
        assert_eq!(ja, 0.0);
        let (jd, _) = discounted_returns(&steps(1), 0.95);
        assert_eq!(jd, 1.0);
    }

    #[test]
    fn static_system() {
        let p = params();
        let d = ThresholdPolicy::defender(1.0, 50.0);
        let a = ThresholdPolicy::step(Role::Attacker, 0.0);
        let traj = rollout(&p, &d, &a, 100, 3).unwrap();
        assert!(traj
            .steps
            .iter()
            .all(|s| s.state == SystemState::DefenderControls && s.belief_before == Belief::CLEAN));
        let (jd, ja) = discounted_returns(&traj, p.gamma);
        assert!((jd - (1.0 - 0.95f64.powi(100)) / 0.05).abs() < 1e-9);
        assert_eq!(ja, 0.0);
    }

    #[test]
    fn always_reimage_resets_every_step() {
        let p = params();
        let d = ThresholdPolicy::step(Role::Defender, 0.0);
        let a = ThresholdPolicy::step(Role::Attacker, 1.0);
        let traj = rollout(&p, &d, &a, 200, 8).unwrap();
        for step in &traj.steps {
            assert_eq!(step.state, SystemState::DefenderControls);
            assert_eq!(step.defender_action, DefenderAction::Reimage);
            assert!((step.reward_defender - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn first_compromise_time_is_geometric() {
        let p = ModelParams::reference(0.3, 0.05);
        let d = ThresholdPolicy::step(Role::Defender, 1.0);
        let a = ThresholdPolicy::step(Role::Attacker, 1.0);
        let n = 10_000;
        let times: Vec<f64> = (0..n)
            .map(|e| {
                let traj = rollout(&p, &d, &a, 400, child_seed(77, e)).unwrap();
                let t = traj.steps.iter().position(|s| s.state == SystemState::AttackerControls);
                t.expect("compromise within 400 steps") as f64
            })
            .collect();
        let success = 1.0 - (-0.2f64).exp();
        let expected = 1.0 / success;
        let sd = (1.0 - success).sqrt() / success;
        let mean = times.iter().sum::<f64>() / n as f64;
        assert!((mean - expected).abs() < 3.0 * sd / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn determinism_and_replay() {
        let p = params();
        let d = ThresholdPolicy::defender(0.55, 50.0);
        let a = ThresholdPolicy::attacker(0.35, 50.0);
        let t1 = rollout(&p, &d, &a, 300, 42).unwrap();
        let t2 = rollout(&p, &d, &a, 300, 42).unwrap();
        assert_eq!(t1, t2);
        let replay = replay_beliefs(&t1, &p, &a).unwrap();
        for (step, b) in t1.steps.iter().zip(&replay) {
            assert!((step.belief_before.p_attacker() - b.p_attacker()).abs() <= 1e-12);
        }
        let bound = p.reward_bound();
        for step in &t1.steps {
            assert!(step.reward_defender.abs() <= bound && step.reward_attacker.abs() <= bound);
            assert_eq!(step.reward_defender, reward_defender(step.state, step.defender_action, &p));
            assert_eq!(step.reward_attacker, reward_attacker(step.state, step.attacker_action, &p));
        }
    }

    #[test]
    fn absorption_without_reimage() {
        let p = params();
        let d = ThresholdPolicy::step(Role::Defender, 1.0);
        let a = ThresholdPolicy::attacker(0.8, 50.0);
        for seed in 0..50 {
            let traj = rollout(&p, &d, &a, 150, seed).unwrap();
            if let Some(t) = traj.steps.iter().position(|s| s.state == SystemState::AttackerControls) {
                assert!(traj.steps[t..].iter().all(|s| s.state == SystemState::AttackerControls));
            }
        }
    }

    #[test]
    fn estimates_are_reproducible() {
        let p = params();
        let d = ThresholdPolicy::defender(0.5, 50.0);
        let a = ThresholdPolicy::attacker(0.3, 50.0);
        let e1 = estimate_values(&p, &d, &a, 64, 120, 9).unwrap();
        let e2 = estimate_values(&p, &d, &a, 64, 120, 9).unwrap();
        assert_eq!(e1, e2);
        assert!(e1.stderr_defender >= 0.0 && e1.stderr_attacker >= 0.0);

        let quiet = ThresholdPolicy::step(Role::Attacker, 0.0);
        let never = ThresholdPolicy::defender(1.0, 50.0);
        let e = estimate_values(&p, &never, &quiet, 16, 194, 1).unwrap();
        assert!((e.mean_defender - (1.0 - 0.95f64.powi(194)) / 0.05).abs() < 1e-9);
        assert!(e.stderr_defender.abs() < 1e-12);
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let p = params();
        let traj = rollout(&p, &ThresholdPolicy::defender(0.5, 50.0), &ThresholdPolicy::attacker(0.3, 50.0), 5, 1).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,s,b,d,a,o,r_D,r_A");
        assert_eq!(lines.len(), 6);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 8));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn episodes_replay_their_beliefs(
            theta_d in 0.0f64..=1.0,
            theta_a in 0.0f64..=1.0,
            cd in 0.0f64..=1.0,
            seed in any::<u64>(),
        ) {
            let p = ModelParams::reference(cd, 0.05);
            let d = ThresholdPolicy::defender(theta_d, p.steepness);
            let a = ThresholdPolicy::attacker(theta_a, p.steepness);
            let traj = rollout(&p, &d, &a, 60, seed).unwrap();
            prop_assert_eq!(traj.steps.len(), 60);
            let replayed = replay_beliefs(&traj, &p, &a).unwrap();
            for (step, b) in traj.steps.iter().zip(&replayed) {
                prop_assert_eq!(step.belief_before, *b);
            }
            prop_assert_eq!(rollout(&p, &d, &a, 60, seed).unwrap(), traj);
        }
    }
}
