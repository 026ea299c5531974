//! Sigmoid threshold policies for both players.
//!
//! A policy puts probability `1 / (1 + exp(-K (b - theta)))` on its
//! "high-belief" action: reimaging for the defender, staying quiet for the
//! attacker. An infinite steepness gives the hard step, with ties at
//! `b == theta` going to the high-belief action.

use crate::belief::{Belief, ProbeProfile};
use crate::game::{AttackerAction, DefenderAction, SystemState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Defender,
    Attacker,
}

impl Role {
    pub fn opponent(self) -> Role {
        match self {
            Role::Defender => Role::Attacker,
            Role::Attacker => Role::Defender,
        }
    }
}

/// An action of either player, for code that handles both roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Defender(DefenderAction),
    Attacker(AttackerAction),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPolicy {
    pub theta: f64,
    pub steepness: f64,
    pub role: Role,
    /// Attacker only: never probe once the system is compromised. When
    /// false the same sigmoid is applied in both states.
    pub quiet_when_compromised: bool,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl ThresholdPolicy {
    pub fn new(role: Role, theta: f64, steepness: f64) -> Self {
        debug_assert!(steepness > 0.0);
        Self {
            theta: theta.clamp(0.0, 1.0),
            steepness,
            role,
            quiet_when_compromised: true,
        }
    }

    pub fn defender(theta: f64, steepness: f64) -> Self {
        Self::new(Role::Defender, theta, steepness)
    }

    pub fn attacker(theta: f64, steepness: f64) -> Self {
        Self::new(Role::Attacker, theta, steepness)
    }

    /// Hard threshold (infinite steepness).
    pub fn step(role: Role, theta: f64) -> Self {
        Self::new(role, theta, f64::INFINITY)
    }

    pub fn with_theta(self, theta: f64) -> Self {
        Self {
            theta: theta.clamp(0.0, 1.0),
            ..self
        }
    }

    pub fn is_step(&self) -> bool {
        self.steepness.is_infinite()
    }

    fn active_in(&self, s: SystemState) -> bool {
        !(self.role == Role::Attacker && self.quiet_when_compromised && s == SystemState::AttackerControls)
    }

    /// Probability of the high-belief action at `b`.
    pub fn high_probability(&self, b: Belief) -> f64 {
        let b = b.p_attacker();
        if self.is_step() {
            return if b >= self.theta { 1.0 } else { 0.0 };
        }
        sigmoid(self.steepness * (b - self.theta))
    }

    /// `(ln P(high), ln P(low))` at `b`.
    fn log_probabilities(&self, b: Belief) -> (f64, f64) {
        if self.is_step() {
            let h = self.high_probability(b);
            return (h.ln(), (1.0 - h).ln());
        }
        let x = self.steepness * (b.p_attacker() - self.theta);
        (-softplus(-x), -softplus(x))
    }

    /// d/dtheta of `(ln P(high), ln P(low))`.
    fn log_gradients(&self, b: Belief) -> (f64, f64) {
        if self.is_step() {
            return (0.0, 0.0);
        }
        let h = self.high_probability(b);
        let k = self.steepness;
        (-k * (1.0 - h), k * h)
    }

    pub fn defender_reimage_probability(&self, b: Belief) -> f64 {
        debug_assert_eq!(self.role, Role::Defender);
        self.high_probability(b)
    }

    pub fn attacker_probe_probability(&self, s: SystemState, b: Belief) -> f64 {
        debug_assert_eq!(self.role, Role::Attacker);
        if !self.active_in(s) {
            return 0.0;
        }
        if self.is_step() {
            return 1.0 - self.high_probability(b);
        }
        sigmoid(-self.steepness * (b.p_attacker() - self.theta))
    }

    /// Probe probabilities in both states, as used by the defender's filter.
    pub fn probe_profile(&self, b: Belief) -> ProbeProfile {
        ProbeProfile {
            p_probe_given_s0: self.attacker_probe_probability(SystemState::DefenderControls, b),
            p_probe_given_s1: self.attacker_probe_probability(SystemState::AttackerControls, b),
        }
    }

    pub fn defender_action_probability(&self, b: Belief, d: DefenderAction) -> f64 {
        let r = self.defender_reimage_probability(b);
        match d {
            DefenderAction::Reimage => r,
            DefenderAction::Continue => 1.0 - r,
        }
    }

    pub fn attacker_action_probability(&self, s: SystemState, b: Belief, a: AttackerAction) -> f64 {
        let p = self.attacker_probe_probability(s, b);
        match a {
            AttackerAction::Probe => p,
            AttackerAction::NoProbe => 1.0 - p,
        }
    }

    /// `ln pi(chosen | s, b)`; `s` is ignored for the defender.
    pub fn log_probability(&self, s: SystemState, b: Belief, chosen: Move) -> f64 {
        let (high, low) = self.log_probabilities(b);
        match chosen {
            Move::Defender(DefenderAction::Reimage) => high,
            Move::Defender(DefenderAction::Continue) => low,
            Move::Attacker(a) if !self.active_in(s) => match a {
                AttackerAction::Probe => f64::NEG_INFINITY,
                AttackerAction::NoProbe => 0.0,
            },
            Move::Attacker(AttackerAction::NoProbe) => high,
            Move::Attacker(AttackerAction::Probe) => low,
        }
    }

    /// Score function: d/dtheta of `ln pi(chosen | s, b)`.
    pub fn log_policy_gradient(&self, s: SystemState, b: Belief, chosen: Move) -> f64 {
        let (high, low) = self.log_gradients(b);
        match chosen {
            Move::Defender(DefenderAction::Reimage) => high,
            Move::Defender(DefenderAction::Continue) => low,
            Move::Attacker(_) if !self.active_in(s) => 0.0,
            Move::Attacker(AttackerAction::NoProbe) => high,
            Move::Attacker(AttackerAction::Probe) => low,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn b(x: f64) -> Belief {
        Belief::new(x).unwrap()
    }

    #[test]
    fn defender_sigmoid_values() {
        let p = ThresholdPolicy::defender(0.45, 20.0);
        assert!((p.defender_reimage_probability(b(0.45)) - 0.5).abs() < 1e-15);
        assert!((p.defender_reimage_probability(b(0.0)) - 1.2339457598623172e-4).abs() < 1e-12);
        let steep = ThresholdPolicy::defender(0.45, 50.0);
        assert!((steep.defender_reimage_probability(b(1.0)) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn attacker_orientation() {
        let p = ThresholdPolicy::attacker(0.3, 50.0);
        assert_eq!(p.attacker_probe_probability(SystemState::AttackerControls, b(0.1)), 0.0);
        assert!((p.attacker_probe_probability(SystemState::DefenderControls, b(0.3)) - 0.5).abs() < 1e-15);
        let never = ThresholdPolicy::attacker(0.0, 50.0);
        let x = never.attacker_probe_probability(SystemState::DefenderControls, b(0.5));
        assert!((x - 1.3887943864771144e-11).abs() < 1e-20);
    }

    #[test]
    fn ablation_flag_applies_sigmoid_in_both_states() {
        let mut p = ThresholdPolicy::attacker(0.6, 50.0);
        p.quiet_when_compromised = false;
        let x0 = p.attacker_probe_probability(SystemState::DefenderControls, b(0.2));
        let x1 = p.attacker_probe_probability(SystemState::AttackerControls, b(0.2));
        assert_eq!(x0, x1);
        assert!(p.log_policy_gradient(SystemState::AttackerControls, b(0.6), Move::Attacker(AttackerAction::Probe)) > 0.0);
    }

    #[test]
    fn step_policies() {
        let always = ThresholdPolicy::step(Role::Defender, 0.0);
        assert_eq!(always.defender_reimage_probability(Belief::CLEAN), 1.0);
        let never = ThresholdPolicy::step(Role::Attacker, 0.0);
        assert_eq!(never.attacker_probe_probability(SystemState::DefenderControls, Belief::CLEAN), 0.0);
        let greedy = ThresholdPolicy::step(Role::Attacker, 1.0);
        assert_eq!(greedy.attacker_probe_probability(SystemState::DefenderControls, b(0.99)), 1.0);
        assert_eq!(
            always.log_policy_gradient(SystemState::DefenderControls, b(0.3), Move::Defender(DefenderAction::Reimage)),
            0.0
        );
    }

    #[test]
    fn score_values_at_midpoint() {
        let p = ThresholdPolicy::defender(0.4, 20.0);
        let s = SystemState::DefenderControls;
        assert!((p.log_policy_gradient(s, b(0.4), Move::Defender(DefenderAction::Reimage)) + 10.0).abs() < 1e-12);
        assert!((p.log_policy_gradient(s, b(0.4), Move::Defender(DefenderAction::Continue)) - 10.0).abs() < 1e-12);
        let a = ThresholdPolicy::attacker(0.4, 20.0);
        for act in AttackerAction::ALL {
            assert_eq!(a.log_policy_gradient(SystemState::AttackerControls, b(0.7), Move::Attacker(act)), 0.0);
        }
    }

    #[test]
    fn score_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for _ in 0..2_000 {
            let theta = rng.random_range(0.05..0.95);
            let k = rng.random_range(1.0..100.0);
            let belief = b(rng.random::<f64>());
            let role = if rng.random::<bool>() { Role::Defender } else { Role::Attacker };
            let chosen = match role {
                Role::Defender => Move::Defender(DefenderAction::ALL[rng.random_range(0..2)]),
                Role::Attacker => Move::Attacker(AttackerAction::ALL[rng.random_range(0..2)]),
            };
            let s = SystemState::DefenderControls;
            let p = ThresholdPolicy::new(role, theta, k);
            let fd = (p.with_theta(theta + h).log_probability(s, belief, chosen)
                - p.with_theta(theta - h).log_probability(s, belief, chosen))
                / (2.0 * h);
            let g = p.log_policy_gradient(s, belief, chosen);
            assert!((g - fd).abs() <= 1e-6 * g.abs().max(1e-3), "g {g} fd {fd}");
        }
    }

    #[test]
    fn monotone_orientation() {
        let d = ThresholdPolicy::defender(0.37, 50.0);
        let a = ThresholdPolicy::attacker(0.37, 50.0);
        let mut last_d = -1.0;
        let mut last_a = 2.0;
        for i in 0..=1000 {
            let x = b(i as f64 / 1000.0);
            let r = d.defender_reimage_probability(x);
            let p = a.attacker_probe_probability(SystemState::DefenderControls, x);
            assert!(r >= last_d && p <= last_a);
            last_d = r;
            last_a = p;
        }
    }

    #[test]
    fn steeper_sigmoid_approaches_step() {
        for x in [0.1, 0.3, 0.44, 0.46, 0.6, 0.9] {
            let probs: Vec<f64> = [20.0, 50.0, 500.0]
                .iter()
                .map(|&k| ThresholdPolicy::defender(0.45, k).defender_reimage_probability(b(x)))
                .collect();
            if x > 0.45 {
                assert!(probs.windows(2).all(|w| w[1] >= w[0]));
            } else {
                assert!(probs.windows(2).all(|w| w[1] <= w[0]));
            }
        }
    }
}
