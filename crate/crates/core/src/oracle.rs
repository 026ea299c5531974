//! Ground-truth best responses by value iteration on a uniform belief grid.
//!
//! The defender's best response solves the belief MDP induced by a fixed
//! attacker policy; the attacker's best response solves the MDP over
//! `(state, defender belief)` induced by a fixed defender policy, with the
//! belief driven by the defender's filter. Successor beliefs falling
//! between grid points are valued by linear interpolation, which keeps the
//! discretized operator a `gamma`-contraction in the sup norm.

use std::io::Write;

use crate::belief::{observation_likelihood, posterior, Belief, Observation};
use crate::error::{Error, Result};
use crate::game::{
    reward_attacker, reward_defender, transition_distribution, AttackerAction, DefenderAction, ModelParams,
    SystemState,
};
use crate::policy::{Role, ThresholdPolicy};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

/// Uniformly spaced beliefs `0 = b_0 < ... < b_{n-1} = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefGrid {
    points: Vec<f64>,
}

impl BeliefGrid {
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParams(format!("belief grid needs at least 3 points, got {n}")));
        }
        let step = 1.0 / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
        points[n - 1] = 1.0;
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn belief(&self, i: usize) -> Belief {
        Belief::clamped(self.points[i])
    }

    /// Left neighbour index and the weight on the right neighbour.
    pub fn bracket(&self, b: f64) -> (usize, f64) {
        let n = self.points.len();
        let x = b.clamp(0.0, 1.0) * (n - 1) as f64;
        let i = (x.floor() as usize).min(n - 2);
        (i, (x - i as f64).clamp(0.0, 1.0))
    }

    pub fn interpolate(&self, values: &[f64], b: f64) -> f64 {
        let (i, w) = self.bracket(b);
        (1.0 - w) * values[i] + w * values[i + 1]
    }
}

/// Threshold read off a greedy table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    At(f64),
    /// More than one switch, or a single switch in the wrong direction.
    Degenerate,
}

impl Threshold {
    pub fn value(self) -> Option<f64> {
        match self {
            Threshold::At(t) => Some(t),
            Threshold::Degenerate => None,
        }
    }
}

/// True iff the sequence changes value at most once.
pub fn single_crossing<A: PartialEq>(actions: &[A]) -> bool {
    actions.windows(2).filter(|w| w[0] != w[1]).count() <= 1
}

/// Threshold from per-point "high action" flags along the grid: the
/// midpoint between the last low point and the first high point. A
/// constant sequence gives the boundary (1 if always low, 0 if always high).
pub fn extract_threshold(high: &[bool], grid: &BeliefGrid) -> Threshold {
    debug_assert_eq!(high.len(), grid.len());
    let Some(first) = high.iter().position(|&h| h) else {
        return Threshold::At(1.0);
    };
    if !high[first..].iter().all(|&h| h) {
        return Threshold::Degenerate;
    }
    if first == 0 {
        return Threshold::At(0.0);
    }
    let pts = grid.points();
    Threshold::At(0.5 * (pts[first - 1] + pts[first]))
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    prob: f64,
    state: usize,
    index: usize,
    weight: f64,
}

impl Edge {
    fn value(&self, values: &[Vec<f64>]) -> f64 {
        let row = &values[self.state];
        self.prob * ((1.0 - self.weight) * row[self.index] + self.weight * row[self.index + 1])
    }
}

/// Expected immediate reward and successor distribution for one
/// `(state, grid point, action)` triple.
#[derive(Debug, Clone, Default)]
struct Choice {
    reward: f64,
    edges: Vec<Edge>,
}

impl Choice {
    fn q(&self, gamma: f64, values: &[Vec<f64>]) -> f64 {
        self.reward + gamma * self.edges.iter().map(|e| e.value(values)).sum::<f64>()
    }

    fn push(&mut self, prob: f64, state: usize, grid: &BeliefGrid, b: f64) {
        if prob <= 0.0 {
            return;
        }
        let (index, weight) = grid.bracket(b);
        self.edges.push(Edge {
            prob,
            state,
            index,
            weight,
        });
    }
}

/// Successor belief for the attacker-side model. An observation the filter
/// deems impossible (only reachable when the attacker deviates from the
/// profile the defender conditions on) leaves the belief where it was.
fn next_belief(b: Belief, d: DefenderAction, o: Observation, filter_model: &ThresholdPolicy, params: &ModelParams) -> f64 {
    match posterior(b, d, o, &filter_model.probe_profile(b), params) {
        Ok((post, _)) => post.p_attacker(),
        Err(_) => match d {
            DefenderAction::Reimage => 0.0,
            DefenderAction::Continue => b.p_attacker(),
        },
    }
}

fn observation_given_action(a: AttackerAction, o: Observation, params: &ModelParams) -> f64 {
    match (a, o) {
        (AttackerAction::Probe, Observation::ProbeDetected) => 1.0 - params.nu,
        (AttackerAction::Probe, Observation::NoDetection) => params.nu,
        (AttackerAction::NoProbe, Observation::ProbeDetected) => 0.0,
        (AttackerAction::NoProbe, Observation::NoDetection) => 1.0,
    }
}

/// Defender belief-MDP choices: `[Reimage, Continue]` at every grid point.
fn defender_choices(attacker: &ThresholdPolicy, grid: &BeliefGrid, params: &ModelParams) -> Vec<[Choice; 2]> {
    (0..grid.len())
        .map(|i| {
            let b = grid.belief(i);
            let probes = attacker.probe_profile(b);
            DefenderAction::ALL.map(|d| {
                let mut choice = Choice {
                    reward: b.p_defender() * reward_defender(SystemState::DefenderControls, d, params)
                        + b.p_attacker() * reward_defender(SystemState::AttackerControls, d, params),
                    edges: Vec::with_capacity(2),
                };
                for o in Observation::ALL {
                    if let Ok((post, sigma)) = posterior(b, d, o, &probes, params) {
                        choice.push(sigma, 0, grid, post.p_attacker());
                    }
                }
                choice
            })
        })
        .collect()
}

/// How the attacker-side model draws the defender's observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObservationModel {
    /// `o ~ sigma(o | b, d)`: the belief evolves as the defender's own
    /// filter predicts it, independently of the attacker's realized action.
    #[default]
    FilterLikelihood,
    /// `o` is generated by the attacker's chosen action, so probing can
    /// steer the defender's belief (this is what sampled episodes do).
    ActionDriven,
}

/// Attacker MDP choices: `[Probe, NoProbe]` for every `(state, grid point)`.
fn attacker_choices(
    defender: &ThresholdPolicy,
    filter_model: &ThresholdPolicy,
    observations: ObservationModel,
    grid: &BeliefGrid,
    params: &ModelParams,
) -> [Vec<[Choice; 2]>; 2] {
    SystemState::ALL.map(|s| {
        (0..grid.len())
            .map(|i| {
                let b = grid.belief(i);
                let probes = filter_model.probe_profile(b);
                AttackerAction::ALL.map(|a| {
                    let mut choice = Choice {
                        reward: reward_attacker(s, a, params),
                        edges: Vec::with_capacity(8),
                    };
                    for d in DefenderAction::ALL {
                        let pd = defender.defender_action_probability(b, d);
                        if pd <= 0.0 {
                            continue;
                        }
                        let next_state = transition_distribution(s, d, a, params);
                        for o in Observation::ALL {
                            let po = match observations {
                                ObservationModel::FilterLikelihood => observation_likelihood(b, d, o, &probes, params),
                                ObservationModel::ActionDriven => observation_given_action(a, o, params),
                            };
                            if po <= 0.0 {
                                continue;
                            }
                            let nb = next_belief(b, d, o, filter_model, params);
                            for (s_next, ps) in next_state.iter().enumerate() {
                                choice.push(pd * po * ps, s_next, grid, nb);
                            }
                        }
                    }
                    choice
                })
            })
            .collect()
    })
}

/// Controls for the value-iteration loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub observations: ObservationModel,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            observations: ObservationModel::default(),
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    /// Stop once the sup-norm change is below `tol (1 - gamma) / (2 gamma)`.
    fn bound(&self, gamma: f64) -> f64 {
        self.tol * (1.0 - gamma) / (2.0 * gamma)
    }
}

struct Iterated {
    values: Vec<Vec<f64>>,
    greedy: Vec<Vec<usize>>,
    residuals: Vec<f64>,
}

/// Value iteration over `rows[s][i][action]`, optionally with the actions
/// mixed by fixed weights (policy evaluation) instead of maximized. Ties
/// in the maximization go to the action with index `passive`.
fn iterate(
    rows: &[Vec<[Choice; 2]>],
    mixing: Option<&[Vec<[f64; 2]>]>,
    passive: usize,
    gamma: f64,
    opts: SolveOptions,
) -> Result<Iterated> {
    assert!(opts.tol > 0.0, "solver tolerance must be positive");
    let bound = opts.bound(gamma);
    let mut values: Vec<Vec<f64>> = rows.iter().map(|r| vec![0.0; r.len()]).collect();
    let mut next = values.clone();
    let mut greedy: Vec<Vec<usize>> = rows.iter().map(|r| vec![passive; r.len()]).collect();
    let mut residuals = Vec::new();
    for _ in 0..opts.max_iterations {
        let mut residual: f64 = 0.0;
        for (s, row) in rows.iter().enumerate() {
            for (i, choices) in row.iter().enumerate() {
                let q = [choices[0].q(gamma, &values), choices[1].q(gamma, &values)];
                let v = match mixing {
                    Some(w) => w[s][i][0] * q[0] + w[s][i][1] * q[1],
                    None => {
                        let active = 1 - passive;
                        let pick = if q[active] > q[passive] { active } else { passive };
                        greedy[s][i] = pick;
                        q[pick]
                    }
                };
                residual = residual.max((v - values[s][i]).abs());
                next[s][i] = v;
            }
        }
        std::mem::swap(&mut values, &mut next);
        residuals.push(residual);
        if residual <= bound {
            return Ok(Iterated {
                values,
                greedy,
                residuals,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
        bound,
    })
}

#[derive(Debug, Clone)]
pub struct DefenderTable {
    pub grid: BeliefGrid,
    pub values: Vec<f64>,
    pub greedy: Vec<DefenderAction>,
    pub threshold: Threshold,
    /// Sup-norm change of the final sweep.
    pub residual: f64,
    pub residual_history: Vec<f64>,
}

impl DefenderTable {
    pub fn single_crossing(&self) -> bool {
        single_crossing(&self.greedy)
    }

    pub fn value_at(&self, b: f64) -> f64 {
        self.grid.interpolate(&self.values, b)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "b,value,action")?;
        for ((b, v), d) in self.grid.points().iter().zip(&self.values).zip(&self.greedy) {
            writeln!(out, "{b},{v},{}", d.index())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AttackerTable {
    pub grid: BeliefGrid,
    /// Indexed by `SystemState::index`, then grid point.
    pub values: [Vec<f64>; 2],
    pub greedy: [Vec<AttackerAction>; 2],
    /// Read off the `s = 0` row.
    pub threshold: Threshold,
    pub residual: f64,
    pub residual_history: Vec<f64>,
}

impl AttackerTable {
    pub fn single_crossing(&self) -> bool {
        self.greedy.iter().all(|row| single_crossing(row))
    }

    pub fn value_at(&self, s: SystemState, b: f64) -> f64 {
        self.grid.interpolate(&self.values[s.index()], b)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "s,b,value,action")?;
        for s in SystemState::ALL {
            let row = self.values[s.index()].iter().zip(&self.greedy[s.index()]);
            for (b, (v, a)) in self.grid.points().iter().zip(row) {
                writeln!(out, "{},{b},{v},{}", s.index(), a.index())?;
            }
        }
        Ok(())
    }
}

/// Defender best response to a fixed attacker policy.
pub fn defender_best_response(
    attacker: &ThresholdPolicy,
    grid: &BeliefGrid,
    params: &ModelParams,
    opts: SolveOptions,
) -> Result<DefenderTable> {
    let rows = vec![defender_choices(attacker, grid, params)];
    let solved = iterate(&rows, None, DefenderAction::Continue.index(), params.gamma, opts)?;
    let greedy: Vec<DefenderAction> = solved.greedy[0].iter().map(|&k| DefenderAction::ALL[k]).collect();
    let high: Vec<bool> = greedy.iter().map(|&d| d == DefenderAction::Reimage).collect();
    let mut values = solved.values;
    Ok(DefenderTable {
        threshold: extract_threshold(&high, grid),
        grid: grid.clone(),
        values: values.swap_remove(0),
        greedy,
        residual: *solved.residuals.last().unwrap(),
        residual_history: solved.residuals,
    })
}

/// Attacker best response to a fixed defender policy, with the defender's
/// filter conditioned on `filter_model` (the attacker policy the defender
/// believes it faces).
pub fn attacker_best_response(
    defender: &ThresholdPolicy,
    filter_model: &ThresholdPolicy,
    grid: &BeliefGrid,
    params: &ModelParams,
    opts: SolveOptions,
) -> Result<AttackerTable> {
    let rows = attacker_choices(defender, filter_model, opts.observations, grid, params);
    let solved = iterate(&rows, None, AttackerAction::NoProbe.index(), params.gamma, opts)?;
    let greedy: [Vec<AttackerAction>; 2] =
        [0, 1].map(|s| solved.greedy[s].iter().map(|&k| AttackerAction::ALL[k]).collect());
    let high: Vec<bool> = greedy[0].iter().map(|&a| a == AttackerAction::NoProbe).collect();
    let mut values = solved.values;
    let v1 = values.pop().unwrap();
    let v0 = values.pop().unwrap();
    Ok(AttackerTable {
        threshold: extract_threshold(&high, grid),
        grid: grid.clone(),
        values: [v0, v1],
        greedy,
        residual: *solved.residuals.last().unwrap(),
        residual_history: solved.residuals,
    })
}

/// Value of a fixed defender policy in the defender's belief MDP, the
/// counterpart of [`defender_best_response`] values.
pub fn defender_policy_value(
    defender: &ThresholdPolicy,
    attacker: &ThresholdPolicy,
    grid: &BeliefGrid,
    params: &ModelParams,
    opts: SolveOptions,
) -> Result<Vec<f64>> {
    let rows = vec![defender_choices(attacker, grid, params)];
    let weights = vec![(0..grid.len())
        .map(|i| DefenderAction::ALL.map(|d| defender.defender_action_probability(grid.belief(i), d)))
        .collect::<Vec<_>>()];
    let mut solved = iterate(&rows, Some(&weights), DefenderAction::Continue.index(), params.gamma, opts)?;
    Ok(solved.values.swap_remove(0))
}

/// Value of a fixed attacker policy in the same model as
/// [`attacker_best_response`], so the two are directly comparable.
pub fn attacker_policy_value(
    defender: &ThresholdPolicy,
    attacker: &ThresholdPolicy,
    filter_model: &ThresholdPolicy,
    grid: &BeliefGrid,
    params: &ModelParams,
    opts: SolveOptions,
) -> Result<[Vec<f64>; 2]> {
    let rows = attacker_choices(defender, filter_model, opts.observations, grid, params);
    let weights: Vec<Vec<[f64; 2]>> = SystemState::ALL
        .iter()
        .map(|&s| {
            (0..grid.len())
                .map(|i| AttackerAction::ALL.map(|a| attacker.attacker_action_probability(s, grid.belief(i), a)))
                .collect()
        })
        .collect();
    let solved = iterate(&rows, Some(&weights), AttackerAction::NoProbe.index(), params.gamma, opts)?;
    let mut values = solved.values.into_iter();
    Ok([values.next().unwrap(), values.next().unwrap()])
}

/// Values of a fixed policy pair on the `(state, grid point)` chain.
#[derive(Debug, Clone)]
pub struct PolicyValues {
    pub grid: BeliefGrid,
    /// Indexed by `SystemState::index`, then grid point.
    pub defender: [Vec<f64>; 2],
    pub attacker: [Vec<f64>; 2],
}

impl PolicyValues {
    /// Values from the initial condition (clean system, belief 0).
    pub fn at_start(&self) -> (f64, f64) {
        (self.defender[0][0], self.attacker[0][0])
    }

    /// Values when the episode starts at belief `b` with the state drawn
    /// from that belief.
    pub fn at_belief(&self, b: f64) -> (f64, f64) {
        let mix = |rows: &[Vec<f64>; 2]| {
            (1.0 - b) * self.grid.interpolate(&rows[0], b) + b * self.grid.interpolate(&rows[1], b)
        };
        (mix(&self.defender), mix(&self.attacker))
    }

    /// Values averaged over a uniform initial belief (state drawn from it).
    pub fn uniform_start(&self) -> (f64, f64) {
        let n = self.grid.len();
        let h = 1.0 / (n - 1) as f64;
        // trapezoid rule over the grid
        let (mut d, mut a) = (0.0, 0.0);
        for (i, &b) in self.grid.points().iter().enumerate() {
            let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
            let (vd, va) = self.at_belief(b);
            d += w * vd;
            a += w * va;
        }
        (d, a)
    }
}

/// Evaluates a fixed policy pair under the sampled dynamics: observations
/// come from the attacker's realized probes and the defender's filter
/// conditions on `filter_model`.
pub fn evaluate_policies_with_filter(
    defender: &ThresholdPolicy,
    attacker: &ThresholdPolicy,
    filter_model: &ThresholdPolicy,
    grid: &BeliefGrid,
    params: &ModelParams,
    opts: SolveOptions,
) -> Result<PolicyValues> {
    // One row per (s, i): rewards for both players and the successor edges.
    let chain: Vec<Vec<(f64, f64, Vec<Edge>)>> = SystemState::ALL
        .iter()
        .map(|&s| {
            (0..grid.len())
                .map(|i| {
                    let b = grid.belief(i);
                    let mut rd = 0.0;
                    let mut edges = Choice::default();
                    for d in DefenderAction::ALL {
                        let pd = defender.defender_action_probability(b, d);
                        rd += pd * reward_defender(s, d, params);
                        for a in AttackerAction::ALL {
                            let pa = attacker.attacker_action_probability(s, b, a);
                            if pd * pa <= 0.0 {
                                continue;
                            }
                            let next_state = transition_distribution(s, d, a, params);
                            for o in Observation::ALL {
                                let po = observation_given_action(a, o, params);
                                if po <= 0.0 {
                                    continue;
                                }
                                let nb = next_belief(b, d, o, filter_model, params);
                                for (s_next, ps) in next_state.iter().enumerate() {
                                    edges.push(pd * pa * po * ps, s_next, grid, nb);
                                }
                            }
                        }
                    }
                    let ra = AttackerAction::ALL
                        .iter()
                        .map(|&a| attacker.attacker_action_probability(s, b, a) * reward_attacker(s, a, params))
                        .sum();
                    (rd, ra, edges.edges)
                })
                .collect()
        })
        .collect();

    let bound = opts.bound(params.gamma);
    let gamma = params.gamma;
    let n = grid.len();
    let mut vd = vec![vec![0.0; n]; 2];
    let mut va = vec![vec![0.0; n]; 2];
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let mut nd = vec![vec![0.0; n]; 2];
        let mut na = vec![vec![0.0; n]; 2];
        residual = 0.0;
        for s in 0..2 {
            for i in 0..n {
                let (rd, ra, edges) = &chain[s][i];
                nd[s][i] = rd + gamma * edges.iter().map(|e| e.value(&vd)).sum::<f64>();
                na[s][i] = ra + gamma * edges.iter().map(|e| e.value(&va)).sum::<f64>();
                residual = residual
                    .max((nd[s][i] - vd[s][i]).abs())
                    .max((na[s][i] - va[s][i]).abs());
            }
        }
        vd = nd;
        va = na;
        if residual <= bound {
            let mut vd = vd.into_iter();
            let mut va = va.into_iter();
            return Ok(PolicyValues {
                grid: grid.clone(),
                defender: [vd.next().unwrap(), vd.next().unwrap()],
                attacker: [va.next().unwrap(), va.next().unwrap()],
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        residual,
        bound,
    })
}

/// Evaluates a fixed policy pair; the filter conditions on `attacker`.
pub fn evaluate_policies(
    defender: &ThresholdPolicy,
    attacker: &ThresholdPolicy,
    grid: &BeliefGrid,
    params: &ModelParams,
    opts: SolveOptions,
) -> Result<PolicyValues> {
    evaluate_policies_with_filter(defender, attacker, attacker, grid, params, opts)
}

/// Outcome of iterating exact best responses to a fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleEquilibrium {
    pub theta_defender: f64,
    pub theta_attacker: f64,
    pub rounds: usize,
    pub converged: bool,
}

fn threshold_or_err(t: Threshold, who: Role) -> Result<f64> {
    t.value().ok_or_else(|| Error::Degenerate(format!("{who:?} best response")))
}

/// Alternates attacker then defender best responses (sigmoid policies with
/// the model steepness) until neither threshold moves by more than `tol`.
pub fn oracle_equilibrium(
    params: &ModelParams,
    grid: &BeliefGrid,
    start: (f64, f64),
    max_rounds: usize,
    tol: f64,
    opts: SolveOptions,
) -> Result<OracleEquilibrium> {
    let k = params.steepness;
    let (mut theta_d, mut theta_a) = start;
    for round in 1..=max_rounds {
        let defender = ThresholdPolicy::defender(theta_d, k);
        let attacker = ThresholdPolicy::attacker(theta_a, k);
        let new_a = threshold_or_err(attacker_best_response(&defender, &attacker, grid, params, opts)?.threshold, Role::Attacker)?;
        let new_d = threshold_or_err(
            defender_best_response(&ThresholdPolicy::attacker(new_a, k), grid, params, opts)?.threshold,
            Role::Defender,
        )?;
        let moved = (new_a - theta_a).abs().max((new_d - theta_d).abs());
        theta_a = new_a;
        theta_d = new_d;
        if moved <= tol {
            return Ok(OracleEquilibrium {
                theta_defender: theta_d,
                theta_attacker: theta_a,
                rounds: round,
                converged: true,
            });
        }
    }
    Ok(OracleEquilibrium {
        theta_defender: theta_d,
        theta_attacker: theta_a,
        rounds: max_rounds,
        converged: false,
    })
}

/// Exact best responses to a threshold pair and what each player would
/// gain by switching to them, measured from the clean start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub best_response_defender: Threshold,
    pub best_response_attacker: Threshold,
    pub exploitability_defender: f64,
    pub exploitability_attacker: f64,
}

impl Certificate {
    /// Largest distance between a returned threshold and the matching best
    /// response threshold; infinite when a best response is degenerate.
    pub fn threshold_gap(&self, theta_defender: f64, theta_attacker: f64) -> f64 {
        let gap = |t: Threshold, theta: f64| t.value().map_or(f64::INFINITY, |v| (v - theta).abs());
        gap(self.best_response_defender, theta_defender).max(gap(self.best_response_attacker, theta_attacker))
    }
}

pub fn equilibrium_certificate(
    params: &ModelParams,
    theta_defender: f64,
    theta_attacker: f64,
    grid: &BeliefGrid,
    opts: SolveOptions,
) -> Result<Certificate> {
    let defender = ThresholdPolicy::defender(theta_defender, params.steepness);
    let attacker = ThresholdPolicy::attacker(theta_attacker, params.steepness);
    let br_d = defender_best_response(&attacker, grid, params, opts)?;
    let br_a = attacker_best_response(&defender, &attacker, grid, params, opts)?;
    let own_d = defender_policy_value(&defender, &attacker, grid, params, opts)?;
    let own_a = attacker_policy_value(&defender, &attacker, &attacker, grid, params, opts)?;
    Ok(Certificate {
        best_response_defender: br_d.threshold,
        best_response_attacker: br_a.threshold,
        exploitability_defender: br_d.values[0] - own_d[0],
        exploitability_attacker: br_a.values[0][0] - own_a[0][0],
    })
}
