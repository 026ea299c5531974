//! Structural checks on exact best responses across a parameter matrix:
//! every greedy table must switch action at most once, a compromised
//! attacker never probes, and the attacker values holding the system at
//! least as much as not holding it.

use rayon::prelude::*;

use crate::error::Result;
use crate::game::{AttackerAction, ModelParams};
use crate::oracle::{attacker_best_response, defender_best_response, BeliefGrid, SolveOptions};
use crate::policy::ThresholdPolicy;

pub const ALPHAS: [f64; 3] = [0.1, 0.2, 0.5];
pub const NUS: [f64; 2] = [0.1, 0.5];
pub const GAMMAS: [f64; 2] = [0.9, 0.95];
pub const COSTS: [f64; 3] = [0.1, 0.5, 0.9];
pub const OPPONENT_THETAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct StructureCase {
    pub params: ModelParams,
    /// Threshold of the fixed opponent in both solves.
    pub opponent_theta: f64,
    pub defender_single_crossing: bool,
    pub attacker_single_crossing: bool,
    pub attacker_quiet_when_compromised: bool,
    pub attacker_values_ordered: bool,
}

impl StructureCase {
    pub fn passes(&self) -> bool {
        self.defender_single_crossing
            && self.attacker_single_crossing
            && self.attacker_quiet_when_compromised
            && self.attacker_values_ordered
    }
}

/// The `alpha x nu x gamma x cost` matrix. The cost value is used for both
/// players, so the defender solve sweeps `C_D` and the attacker solve
/// sweeps `C_A` over the same three values.
pub fn structure_matrix(steepness: f64) -> Vec<ModelParams> {
    let mut out = Vec::new();
    for alpha in ALPHAS {
        for nu in NUS {
            for gamma in GAMMAS {
                for cost in COSTS {
                    out.push(ModelParams {
                        alpha,
                        nu,
                        gamma,
                        cost_defender: cost,
                        cost_attacker: cost,
                        steepness,
                    });
                }
            }
        }
    }
    out
}

/// Solves both best responses for every matrix point and opponent threshold.
pub fn check_structure(grid: &BeliefGrid, opts: SolveOptions, steepness: f64) -> Result<Vec<StructureCase>> {
    let jobs: Vec<(ModelParams, f64)> = structure_matrix(steepness)
        .into_iter()
        .flat_map(|p| OPPONENT_THETAS.map(|t| (p, t)))
        .collect();
    jobs.par_iter()
        .map(|&(params, theta)| {
            let attacker = ThresholdPolicy::attacker(theta, steepness);
            let defender = ThresholdPolicy::defender(theta, steepness);
            let d = defender_best_response(&attacker, grid, &params, opts)?;
            let a = attacker_best_response(&defender, &attacker, grid, &params, opts)?;
            Ok(StructureCase {
                params,
                opponent_theta: theta,
                defender_single_crossing: d.single_crossing() && d.threshold.value().is_some(),
                attacker_single_crossing: a.single_crossing() && a.threshold.value().is_some(),
                attacker_quiet_when_compromised: a.greedy[1].iter().all(|&x| x == AttackerAction::NoProbe),
                attacker_values_ordered: a.values[1].iter().zip(&a.values[0]).all(|(v1, v0)| v1 >= v0),
            })
        })
        .collect()
}
