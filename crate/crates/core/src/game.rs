//! State, action and reward model of the reimage/probe game together with
//! its exact transition kernel.
//!
//! Two states: the defender controls the system (0) or the attacker does
//! (1). Each step the defender chooses between reimaging and continuing,
//! the attacker between probing and staying quiet. A probe against a
//! defender-held system succeeds with the constant probability
//! `1 - exp(-alpha)` unless the defender reimages in the same step.

use rand::Rng;

use crate::error::{Error, Result};

/// Scalar constants of the game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Probe effectiveness rate; a single probe succeeds with `1 - exp(-alpha)`.
    pub alpha: f64,
    /// Probability that a probe goes undetected by the defender.
    pub nu: f64,
    /// Discount factor.
    pub gamma: f64,
    /// Reimage cost `C_D`.
    pub cost_defender: f64,
    /// Per-probe cost `C_A`.
    pub cost_attacker: f64,
    /// Sigmoid steepness `K` used by the threshold policies.
    pub steepness: f64,
}

impl ModelParams {
    pub fn new(
        alpha: f64,
        nu: f64,
        gamma: f64,
        cost_defender: f64,
        cost_attacker: f64,
        steepness: f64,
    ) -> Result<Self> {
        let params = Self {
            alpha,
            nu,
            gamma,
            cost_defender,
            cost_attacker,
            steepness,
        };
        params.validate()?;
        Ok(params)
    }

    /// Reference parameter set: alpha = 0.2, nu = 0.2, gamma = 0.95, K = 50,
    /// with the given costs.
    pub fn reference(cost_defender: f64, cost_attacker: f64) -> Self {
        Self {
            alpha: 0.2,
            nu: 0.2,
            gamma: 0.95,
            cost_defender,
            cost_attacker,
            steepness: 50.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParams(what.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.nu) {
            return bad("nu must lie in [0, 1]");
        }
        if !(self.alpha > 0.0) {
            return bad("alpha must be > 0");
        }
        if !(self.steepness > 0.0) {
            return bad("steepness must be > 0");
        }
        if !(self.cost_defender >= 0.0 && self.cost_defender.is_finite()) {
            return bad("cost_defender must be finite and >= 0");
        }
        if !(self.cost_attacker >= 0.0 && self.cost_attacker.is_finite()) {
            return bad("cost_attacker must be finite and >= 0");
        }
        Ok(())
    }

    /// Probability that a probe fails, `exp(-alpha)`.
    pub fn stay_probability(&self) -> f64 {
        (-self.alpha).exp()
    }

    /// Largest per-step reward magnitude, `1 + max(C_D, C_A)`.
    pub fn reward_bound(&self) -> f64 {
        1.0 + self.cost_defender.max(self.cost_attacker)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemState {
    DefenderControls = 0,
    AttackerControls = 1,
}

impl SystemState {
    pub const ALL: [SystemState; 2] = [SystemState::DefenderControls, SystemState::AttackerControls];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DefenderAction {
    Reimage = 0,
    Continue = 1,
}

impl DefenderAction {
    pub const ALL: [DefenderAction; 2] = [DefenderAction::Reimage, DefenderAction::Continue];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackerAction {
    Probe = 0,
    NoProbe = 1,
}

impl AttackerAction {
    pub const ALL: [AttackerAction; 2] = [AttackerAction::Probe, AttackerAction::NoProbe];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Distribution of the next state, indexed by `SystemState::index`.
pub fn transition_distribution(
    s: SystemState,
    d: DefenderAction,
    a: AttackerAction,
    params: &ModelParams,
) -> [f64; 2] {
    use AttackerAction::*;
    use DefenderAction::*;
    use SystemState::*;
    match (s, d, a) {
        (_, Reimage, _) => [1.0, 0.0],
        (DefenderControls, Continue, Probe) => {
            let stay = params.stay_probability();
            [stay, 1.0 - stay]
        }
        (DefenderControls, Continue, NoProbe) => [1.0, 0.0],
        (AttackerControls, Continue, _) => [0.0, 1.0],
    }
}

/// Draws the next state. Always consumes exactly one uniform from `rng`.
pub fn sample_transition<R: Rng + ?Sized>(
    s: SystemState,
    d: DefenderAction,
    a: AttackerAction,
    params: &ModelParams,
    rng: &mut R,
) -> SystemState {
    let u: f64 = rng.random();
    let dist = transition_distribution(s, d, a, params);
    if u < dist[SystemState::AttackerControls.index()] {
        SystemState::AttackerControls
    } else {
        SystemState::DefenderControls
    }
}

pub fn reward_defender(s: SystemState, d: DefenderAction, params: &ModelParams) -> f64 {
    match (s, d) {
        (_, DefenderAction::Reimage) => 1.0 - params.cost_defender,
        (SystemState::DefenderControls, DefenderAction::Continue) => 1.0,
        (SystemState::AttackerControls, DefenderAction::Continue) => 0.0,
    }
}

pub fn reward_attacker(s: SystemState, a: AttackerAction, params: &ModelParams) -> f64 {
    let control = match s {
        SystemState::DefenderControls => 0.0,
        SystemState::AttackerControls => 1.0,
    };
    match a {
        AttackerAction::Probe => control - params.cost_attacker,
        AttackerAction::NoProbe => control,
    }
}

/// Attacker-side kernel once the defender's reimage decision is averaged
/// out: rows are the current state, columns the next state, for a fixed
/// attacker action and defender reimage probability `reimage_prob`.
pub fn attacker_kernel(a: AttackerAction, reimage_prob: f64, params: &ModelParams) -> [[f64; 2]; 2] {
    let mut kernel = [[0.0; 2]; 2];
    for s in SystemState::ALL {
        for d in DefenderAction::ALL {
            let w = match d {
                DefenderAction::Reimage => reimage_prob,
                DefenderAction::Continue => 1.0 - reimage_prob,
            };
            let row = transition_distribution(s, d, a, params);
            for (next, p) in row.iter().enumerate() {
                kernel[s.index()][next] += w * p;
            }
        }
    }
    kernel
}
