//! REINFORCE best-response learning and the alternating fictitious-play
//! loop over the two players' thresholds.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{ModelParams, SystemState};
use crate::policy::{Move, Role, ThresholdPolicy};
use crate::simulator::{child_seed, rollout, truncation_horizon, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    None,
    /// Per-time-step batch mean of the discounted reward-to-go, computed
    /// leave-one-out so the estimator stays unbiased.
    MeanReturn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub batch_episodes: usize,
    pub horizon: usize,
    /// Initial step size; iteration `k` of a player uses `learning_rate / sqrt(k)`.
    pub learning_rate: f64,
    pub inner_iterations: usize,
    pub outer_rounds_max: usize,
    pub convergence_tol: f64,
    pub baseline: Baseline,
    pub seed: u64,
    /// Starting thresholds `(defender, attacker)`.
    pub initial_thetas: (f64, f64),
    /// Largest threshold change allowed in one gradient step.
    pub max_step: f64,
    /// Extra starting thresholds tried by each best response in
    /// fictitious play, besides the warm start.
    pub restarts: Vec<f64>,
    /// Episodes used to compare best-response candidates.
    pub evaluation_episodes: usize,
}

impl LearnConfig {
    /// Defaults for a parameter set: 256 episodes per batch, horizon
    /// truncated at 1e-3 of the reward bound, step 0.2 capped at 0.05 per
    /// iteration, 100 inner iterations, at most 50 rounds, tolerance 1e-3,
    /// restarts from 0.1, 0.3, 0.5, 0.7 and 0.9.
    pub fn for_params(params: &ModelParams, seed: u64) -> Self {
        Self {
            batch_episodes: 256,
            horizon: truncation_horizon(params.gamma, 1e-3, params.reward_bound()),
            learning_rate: 0.2,
            inner_iterations: 100,
            outer_rounds_max: 50,
            convergence_tol: 1e-3,
            baseline: Baseline::MeanReturn,
            seed,
            initial_thetas: (0.5, 0.5),
            max_step: 0.05,
            restarts: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            evaluation_episodes: 1024,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Validation(what.to_string()));
        if self.batch_episodes < 1 || self.horizon < 1 || self.inner_iterations < 1 || self.outer_rounds_max < 1 {
            return bad("learner counts must be >= 1");
        }
        if !(self.learning_rate >= 0.0) {
            return bad("learning_rate must be >= 0");
        }
        if !(self.convergence_tol > 0.0) {
            return bad("convergence_tol must be > 0");
        }
        let (d, a) = self.initial_thetas;
        if !(0.0..=1.0).contains(&d) || !(0.0..=1.0).contains(&a) {
            return bad("initial thetas must lie in [0, 1]");
        }
        if self.restarts.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return bad("restart thetas must lie in [0, 1]");
        }
        if !(self.max_step > 0.0) {
            return bad("max_step must be > 0");
        }
        if self.evaluation_episodes < 2 {
            return bad("evaluation_episodes must be >= 2");
        }
        Ok(())
    }
}

/// One row of the fictitious-play history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub theta_defender: f64,
    pub theta_attacker: f64,
    /// Mean discounted return of the last defender batch in the round.
    pub value_defender: f64,
    /// Mean discounted return of the last attacker batch in the round.
    pub value_attacker: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub theta_defender: f64,
    pub theta_attacker: f64,
    pub rounds_used: usize,
    pub history: Vec<RoundRecord>,
    pub converged: bool,
}

/// Policy-gradient estimate from one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientEstimate {
    pub gradient: f64,
    /// Standard error of `gradient` across episodes.
    pub stderr: f64,
    /// Batch mean of the learner's discounted return.
    pub mean_return: f64,
}

fn policies_for<'a>(
    policy: &'a ThresholdPolicy,
    opponent: &'a ThresholdPolicy,
) -> (&'a ThresholdPolicy, &'a ThresholdPolicy) {
    match policy.role {
        Role::Defender => (policy, opponent),
        Role::Attacker => (opponent, policy),
    }
}

/// Per-step score `d/dtheta ln pi(a_t | .)` and discounted reward
/// `gamma^t r_t` of the learning player.
fn score_and_rewards(traj: &Trajectory, policy: &ThresholdPolicy, gamma: f64) -> (Vec<f64>, Vec<f64>) {
    let mut discount = 1.0;
    let mut scores = Vec::with_capacity(traj.steps.len());
    let mut rewards = Vec::with_capacity(traj.steps.len());
    for step in &traj.steps {
        let (chosen, r) = match policy.role {
            Role::Defender => (Move::Defender(step.defender_action), step.reward_defender),
            Role::Attacker => (Move::Attacker(step.attacker_action), step.reward_attacker),
        };
        let state = match policy.role {
            Role::Defender => SystemState::DefenderControls,
            Role::Attacker => step.state,
        };
        scores.push(policy.log_policy_gradient(state, step.belief_before, chosen));
        rewards.push(discount * r);
        discount *= gamma;
    }
    (scores, rewards)
}

/// Score-function gradient of the learning player's discounted return,
/// `mean_e sum_t score_t (G_t - baseline_t)` with `G_t = sum_{k >= t} gamma^k r_k`.
pub fn estimate_gradient(
    params: &ModelParams,
    policy: &ThresholdPolicy,
    opponent: &ThresholdPolicy,
    cfg: &LearnConfig,
    seed: u64,
) -> Result<GradientEstimate> {
    let (defender, attacker) = policies_for(policy, opponent);
    let n = cfg.batch_episodes;
    let batch = (0..n as u64)
        .into_par_iter()
        .map(|e| {
            let traj = rollout(params, defender, attacker, cfg.horizon, child_seed(seed, e))?;
            let (scores, mut to_go) = score_and_rewards(&traj, policy, params.gamma);
            for t in (0..to_go.len().saturating_sub(1)).rev() {
                to_go[t] += to_go[t + 1];
            }
            Ok((scores, to_go))
        })
        .collect::<Result<Vec<_>>>()?;

    let horizon = cfg.horizon;
    let mut sums = vec![0.0; horizon];
    for (_, to_go) in &batch {
        for (s, g) in sums.iter_mut().zip(to_go) {
            *s += g;
        }
    }
    let terms: Vec<f64> = batch
        .iter()
        .map(|(scores, to_go)| {
            (0..horizon)
                .map(|t| {
                    let base = match cfg.baseline {
                        Baseline::MeanReturn if n > 1 => (sums[t] - to_go[t]) / (n - 1) as f64,
                        _ => 0.0,
                    };
                    scores[t] * (to_go[t] - base)
                })
                .sum::<f64>()
        })
        .collect();
    let gradient = terms.iter().sum::<f64>() / n as f64;
    if !gradient.is_finite() {
        return Err(Error::InvalidParams(format!("non-finite policy gradient {gradient}")));
    }
    let stderr = if n > 1 {
        let var = terms.iter().map(|x| (x - gradient).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(GradientEstimate {
        gradient,
        stderr,
        mean_return: sums[0] / n as f64,
    })
}

/// One projected gradient-ascent step on the threshold with the configured
/// learning rate.
pub fn reinforce_update(
    params: &ModelParams,
    policy: &ThresholdPolicy,
    opponent: &ThresholdPolicy,
    cfg: &LearnConfig,
    round_seed: u64,
) -> Result<ThresholdPolicy> {
    Ok(reinforce_step(params, policy, opponent, cfg, round_seed, cfg.learning_rate)?.0)
}

fn reinforce_step(
    params: &ModelParams,
    policy: &ThresholdPolicy,
    opponent: &ThresholdPolicy,
    cfg: &LearnConfig,
    seed: u64,
    step_size: f64,
) -> Result<(ThresholdPolicy, GradientEstimate)> {
    let est = estimate_gradient(params, policy, opponent, cfg, seed)?;
    let delta = (step_size * est.gradient).clamp(-cfg.max_step, cfg.max_step);
    Ok((policy.with_theta(policy.theta + delta), est))
}

/// Runs `inner_iterations` REINFORCE steps against a frozen opponent.
/// `first_iteration` continues the player's step-size schedule across
/// rounds; `stream` separates the random streams of different calls.
pub fn gradient_ascent(
    params: &ModelParams,
    policy: &ThresholdPolicy,
    opponent: &ThresholdPolicy,
    cfg: &LearnConfig,
    stream: u64,
    first_iteration: usize,
) -> Result<(ThresholdPolicy, GradientEstimate)> {
    let mut current = *policy;
    let mut last = GradientEstimate {
        gradient: 0.0,
        stderr: f64::NAN,
        mean_return: f64::NAN,
    };
    for k in 0..cfg.inner_iterations {
        let iteration = first_iteration + k + 1;
        let step_size = cfg.learning_rate / (iteration as f64).sqrt();
        let (next, est) = reinforce_step(params, &current, opponent, cfg, child_seed(stream, k as u64), step_size)?;
        current = next;
        last = est;
    }
    Ok((current, last))
}

/// Per-episode discounted returns of `policy` against `opponent`.
pub fn episode_returns(
    params: &ModelParams,
    policy: &ThresholdPolicy,
    opponent: &ThresholdPolicy,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let (defender, attacker) = policies_for(policy, opponent);
    (0..episodes as u64)
        .into_par_iter()
        .map(|e| {
            let traj = rollout(params, defender, attacker, horizon, child_seed(seed, e))?;
            let mut discount = 1.0;
            let mut total = 0.0;
            for step in &traj.steps {
                let r = match policy.role {
                    Role::Defender => step.reward_defender,
                    Role::Attacker => step.reward_attacker,
                };
                total += discount * r;
                discount *= params.gamma;
            }
            Ok(total)
        })
        .collect()
}

/// Best response against a frozen opponent: gradient ascent from the
/// given policy and from every threshold in `cfg.restarts`. The warm
/// result is kept unless another candidate beats it by more than two
/// paired standard errors on a common evaluation batch. Returns the chosen
/// policy and the last gradient estimate of its run.
pub fn learn_best_response(
    params: &ModelParams,
    policy: &ThresholdPolicy,
    opponent: &ThresholdPolicy,
    cfg: &LearnConfig,
    stream: u64,
    first_iteration: usize,
) -> Result<(ThresholdPolicy, GradientEstimate)> {
    let warm = gradient_ascent(params, policy, opponent, cfg, child_seed(stream, 0), first_iteration)?;
    if cfg.restarts.is_empty() {
        return Ok(warm);
    }
    let eval_seed = child_seed(stream, u64::MAX);
    let returns = |p: &ThresholdPolicy| {
        episode_returns(params, p, opponent, cfg.evaluation_episodes, cfg.horizon, eval_seed)
    };
    let warm_returns = returns(&warm.0)?;
    let mut best = warm;
    let mut best_gain = 0.0;
    for (i, &theta) in cfg.restarts.iter().enumerate() {
        let start = policy.with_theta(theta);
        let candidate = gradient_ascent(params, &start, opponent, cfg, child_seed(stream, i as u64 + 1), 0)?;
        let diffs: Vec<f64> = returns(&candidate.0)?
            .iter()
            .zip(&warm_returns)
            .map(|(c, w)| c - w)
            .collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let stderr = (var / n).sqrt();
        if mean > 2.0 * stderr && mean > best_gain {
            best = candidate;
            best_gain = mean;
        }
    }
    Ok(best)
}

/// Alternating best-response learning: each round the attacker learns
/// against the frozen defender, then the defender against the updated
/// attacker. Stops once neither threshold moves by more than
/// `convergence_tol` within a round.
pub fn fictitious_play(params: &ModelParams, cfg: &LearnConfig) -> Result<EquilibriumResult> {
    params.validate()?;
    cfg.validate()?;
    let k = params.steepness;
    let mut defender = ThresholdPolicy::defender(cfg.initial_thetas.0, k);
    let mut attacker = ThresholdPolicy::attacker(cfg.initial_thetas.1, k);
    let mut history = Vec::new();
    for round in 1..=cfg.outer_rounds_max {
        let round_stream = child_seed(cfg.seed, round as u64);
        let done = (round - 1) * cfg.inner_iterations;
        let (new_attacker, est_a) =
            learn_best_response(params, &attacker, &defender, cfg, child_seed(round_stream, 1), done)?;
        let (new_defender, est_d) =
            learn_best_response(params, &defender, &new_attacker, cfg, child_seed(round_stream, 0), done)?;
        let moved = (new_attacker.theta - attacker.theta)
            .abs()
            .max((new_defender.theta - defender.theta).abs());
        attacker = new_attacker;
        defender = new_defender;
        history.push(RoundRecord {
            round,
            theta_defender: defender.theta,
            theta_attacker: attacker.theta,
            value_defender: est_d.mean_return,
            value_attacker: est_a.mean_return,
        });
        if moved <= cfg.convergence_tol {
            return Ok(EquilibriumResult {
                theta_defender: defender.theta,
                theta_attacker: attacker.theta,
                rounds_used: round,
                history,
                converged: true,
            });
        }
    }
    Ok(EquilibriumResult {
        theta_defender: defender.theta,
        theta_attacker: attacker.theta,
        rounds_used: cfg.outer_rounds_max,
        history,
        converged: false,
    })
}

impl EquilibriumResult {
    /// Per-round progress as CSV: `round,theta_D,theta_A,J_D,J_A`.
    pub fn write_history_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["round", "theta_D", "theta_A", "J_D", "J_A"])?;
        for h in &self.history {
            w.write_record([
                h.round.to_string(),
                h.theta_defender.to_string(),
                h.theta_attacker.to_string(),
                h.value_defender.to_string(),
                h.value_attacker.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::oracle::{attacker_best_response, oracle_equilibrium, BeliefGrid, SolveOptions};

    fn small(params: &ModelParams, seed: u64) -> LearnConfig {
        LearnConfig {
            batch_episodes: 32,
            inner_iterations: 5,
            outer_rounds_max: 3,
            evaluation_episodes: 64,
            ..LearnConfig::for_params(params, seed)
        }
    }

    #[test]
    fn silent_opponent_gives_zero_gradient() {
        let p = ModelParams::reference(0.5, 0.05);
        let cfg = small(&p, 1);
        let defender = ThresholdPolicy::defender(0.5, 50.0);
        let silent = ThresholdPolicy::step(Role::Attacker, 0.0);
        let est = estimate_gradient(&p, &defender, &silent, &cfg, 3).unwrap();
        assert!(est.gradient.abs() < 1e-9, "{}", est.gradient);
        let next = reinforce_update(&p, &defender, &silent, &cfg, 3).unwrap();
        assert!((next.theta - 0.5).abs() < 1e-12);
    }

    #[test]
    fn update_projects_onto_unit_interval() {
        let p = ModelParams::reference(0.5, 0.05);
        let cfg = LearnConfig {
            learning_rate: 1.0,
            max_step: f64::INFINITY,
            ..small(&p, 1)
        };
        // A shallow sigmoid reimages often at b = 0, which only costs
        // against an attacker that never probes.
        let defender = ThresholdPolicy::defender(0.99, 1.0);
        let silent = ThresholdPolicy::step(Role::Attacker, 0.0);
        let est = estimate_gradient(&p, &defender, &silent, &cfg, 5).unwrap();
        assert!(est.gradient > 1.0, "{}", est.gradient);
        assert_eq!(reinforce_update(&p, &defender, &silent, &cfg, 5).unwrap().theta, 1.0);
    }

    #[test]
    fn zero_learning_rate_is_inert() {
        let p = ModelParams::reference(0.5, 0.05);
        let cfg = LearnConfig {
            learning_rate: 0.0,
            ..small(&p, 1)
        };
        let attacker = ThresholdPolicy::attacker(0.37, 50.0);
        let defender = ThresholdPolicy::defender(0.4, 50.0);
        let (out, _) = gradient_ascent(&p, &attacker, &defender, &cfg, 9, 0).unwrap();
        assert_eq!(out, attacker);
    }

    #[test]
    fn step_is_capped() {
        let p = ModelParams::reference(0.9, 0.1);
        let cfg = LearnConfig {
            max_step: 0.01,
            ..small(&p, 1)
        };
        let defender = ThresholdPolicy::defender(0.6, 50.0);
        let attacker = ThresholdPolicy::attacker(0.42, 50.0);
        let next = reinforce_update(&p, &defender, &attacker, &cfg, 2).unwrap();
        assert!((next.theta - 0.6).abs() <= 0.01 + 1e-15);
        assert!(next.theta < 0.6);
    }

    #[test]
    fn gradient_matches_common_random_number_differences() {
        let p = ModelParams::reference(0.9, 0.1);
        let cfg = LearnConfig {
            batch_episodes: 4096,
            ..LearnConfig::for_params(&p, 11)
        };
        let attacker = ThresholdPolicy::attacker(0.42, 50.0);
        let h = 0.01;
        for theta in [0.3, 0.6] {
            let defender = ThresholdPolicy::defender(theta, 50.0);
            let est = estimate_gradient(&p, &defender, &attacker, &cfg, 21).unwrap();
            let n = 4096;
            let up = episode_returns(&p, &defender.with_theta(theta + h), &attacker, n, cfg.horizon, 77).unwrap();
            let down = episode_returns(&p, &defender.with_theta(theta - h), &attacker, n, cfg.horizon, 77).unwrap();
            let diffs: Vec<f64> = up.iter().zip(&down).map(|(u, d)| (u - d) / (2.0 * h)).collect();
            let fd = diffs.iter().sum::<f64>() / n as f64;
            let var = diffs.iter().map(|x| (x - fd).powi(2)).sum::<f64>() / (n - 1) as f64;
            let fd_err = (var / n as f64).sqrt();
            let combined = (fd_err.powi(2) + est.stderr.powi(2)).sqrt();
            assert!(
                (est.gradient - fd).abs() <= 3.0 * combined,
                "theta {theta}: {} vs {fd} (error {combined})",
                est.gradient
            );
        }
    }

    #[test]
    fn attacker_learns_to_stay_quiet_against_constant_reimaging() {
        let p = ModelParams::reference(0.5, 0.1);
        let cfg = LearnConfig::for_params(&p, 4);
        let defender = ThresholdPolicy::step(Role::Defender, 0.0);
        let start = ThresholdPolicy::attacker(0.5, 50.0);
        let (learned, _) = learn_best_response(&p, &start, &defender, &cfg, 13, 0).unwrap();
        let grid = BeliefGrid::uniform(201).unwrap();
        let oracle = attacker_best_response(&defender, &learned, &grid, &p, SolveOptions::default())
            .unwrap()
            .threshold
            .value()
            .unwrap();
        assert_eq!(oracle, 0.0);
        assert!(learned.theta <= 0.05, "{}", learned.theta);
    }

    #[test]
    fn defender_keeps_quiet_against_a_silent_attacker() {
        // From a clean start the belief never leaves 0, so any threshold
        // well above 0 is optimal; the learner must not start reimaging.
        let p = ModelParams::reference(0.5, 0.05);
        let cfg = LearnConfig::for_params(&p, 4);
        let silent = ThresholdPolicy::step(Role::Attacker, 0.0);
        let start = ThresholdPolicy::defender(0.5, 50.0);
        let (learned, est) = learn_best_response(&p, &start, &silent, &cfg, 13, 0).unwrap();
        assert!(learned.defender_reimage_probability(crate::belief::Belief::CLEAN) < 1e-3);
        assert!((est.mean_return - 1.0 / (1.0 - p.gamma)).abs() < 0.01);
    }

    #[test]
    fn infinite_tolerance_stops_after_one_round() {
        let p = ModelParams::reference(0.5, 0.05);
        let cfg = LearnConfig {
            convergence_tol: f64::INFINITY,
            ..small(&p, 2)
        };
        let r = fictitious_play(&p, &cfg).unwrap();
        assert!(r.converged);
        assert_eq!(r.rounds_used, 1);
        assert_eq!(r.history.len(), 1);
    }

    #[test]
    fn same_seed_same_result() {
        let p = ModelParams::reference(0.5, 0.05);
        let cfg = small(&p, 8);
        let a = fictitious_play(&p, &cfg).unwrap();
        let b = fictitious_play(&p, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), a.rounds_used);
        for h in &a.history {
            assert!((0.0..=1.0).contains(&h.theta_defender) && (0.0..=1.0).contains(&h.theta_attacker));
        }
        let c = fictitious_play(&p, &small(&p, 9)).unwrap();
        assert_ne!(a.history, c.history);
    }

    #[test]
    fn free_reimaging_equilibrium() {
        let p = ModelParams::reference(0.0, 0.1);
        let grid = BeliefGrid::uniform(201).unwrap();
        let oracle = oracle_equilibrium(&p, &grid, (0.5, 0.5), 100, 1e-9, SolveOptions::default()).unwrap();
        let learned = fictitious_play(&p, &LearnConfig::for_params(&p, 7)).unwrap();
        assert!((learned.theta_defender - oracle.theta_defender).abs() <= 0.05);
        assert!((learned.theta_attacker - oracle.theta_attacker).abs() <= 0.05);
    }

    #[test]
    fn config_validation() {
        let p = ModelParams::reference(0.5, 0.05);
        let ok = LearnConfig::for_params(&p, 1);
        assert!(ok.validate().is_ok());
        assert!(LearnConfig { batch_episodes: 0, ..ok.clone() }.validate().is_err());
        assert!(LearnConfig { convergence_tol: 0.0, ..ok.clone() }.validate().is_err());
        assert!(LearnConfig { restarts: vec![1.5], ..ok.clone() }.validate().is_err());
        assert!(LearnConfig { initial_thetas: (-0.1, 0.5), ..ok }.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn gradient_estimates_are_finite(
            theta in 0.0f64..=1.0,
            opponent in 0.0f64..=1.0,
            k in 1.0f64..200.0,
            seed in any::<u64>(),
        ) {
            let p = ModelParams { steepness: k, ..ModelParams::reference(0.5, 0.05) };
            let cfg = LearnConfig { batch_episodes: 8, horizon: 40, ..LearnConfig::for_params(&p, 0) };
            let d = ThresholdPolicy::defender(theta, k);
            let a = ThresholdPolicy::attacker(opponent, k);
            prop_assert!(estimate_gradient(&p, &d, &a, &cfg, seed).unwrap().gradient.is_finite());
            let swapped = estimate_gradient(&p, &a.with_theta(theta), &d.with_theta(opponent), &cfg, seed).unwrap();
            prop_assert!(swapped.gradient.is_finite());
        }
    }
}
