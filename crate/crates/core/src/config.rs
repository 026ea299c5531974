//! Line-oriented `key = value` configuration for sweeps and single runs.
//!
//! ```text
//! # reference panel
//! gamma = 0.95
//! ca_values = 0.01, 0.05, 0.1
//! mode = both
//! ```
//!
//! Unknown keys are rejected; absent keys keep their defaults.

use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::game::ModelParams;
use crate::learner::{Baseline, LearnConfig};
use crate::oracle::{ObservationModel, SolveOptions};
use crate::simulator::truncation_horizon;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Learn,
    Oracle,
    Both,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "learn" => Ok(Mode::Learn),
            "oracle" => Ok(Mode::Oracle),
            "both" => Ok(Mode::Both),
            other => Err(format!("unknown mode `{other}` (expected learn, oracle or both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub cd_min: f64,
    pub cd_max: f64,
    pub cd_steps: usize,
    pub ca_values: Vec<f64>,
    /// Model parameters; the sweep overrides both costs per cell.
    pub params: ModelParams,
    /// Learner settings. Its horizon is ignored unless `horizon` is set.
    pub learn: LearnConfig,
    /// Fixed rollout horizon; `None` derives it from each cell's costs.
    pub horizon: Option<usize>,
    pub grid_size: usize,
    pub solver: SolveOptions,
    /// Cap on exact best-response rounds in oracle mode.
    pub oracle_rounds: usize,
    pub output: PathBuf,
    pub mode: Mode,
    /// Worker threads for the sweep; 0 uses the available parallelism.
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let params = ModelParams::reference(0.5, 0.05);
        Self {
            cd_min: 0.0,
            cd_max: 1.0,
            cd_steps: 21,
            ca_values: vec![0.01, 0.05, 0.1],
            learn: LearnConfig::for_params(&params, 0),
            params,
            horizon: None,
            grid_size: 201,
            solver: SolveOptions::default(),
            oracle_rounds: 100,
            output: PathBuf::from("sweep-out"),
            mode: Mode::Learn,
            workers: 0,
        }
    }
}

impl SweepConfig {
    /// Learner settings for one parameter point.
    pub fn learn_config_for(&self, params: &ModelParams) -> LearnConfig {
        LearnConfig {
            horizon: self
                .horizon
                .unwrap_or_else(|| truncation_horizon(params.gamma, 1e-3, params.reward_bound())),
            ..self.learn.clone()
        }
    }

    /// Reimage costs of the sweep, ascending.
    pub fn cd_values(&self) -> Vec<f64> {
        if self.cd_steps == 1 {
            return vec![self.cd_min];
        }
        let span = self.cd_max - self.cd_min;
        (0..self.cd_steps)
            .map(|i| self.cd_min + span * i as f64 / (self.cd_steps - 1) as f64)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Validation(what));
        if !(0.0..=1.0).contains(&self.cd_min) || !(0.0..=1.0).contains(&self.cd_max) {
            return bad("cd_min and cd_max must lie in [0, 1]".into());
        }
        if self.cd_min > self.cd_max {
            return bad(format!("cd_min {} exceeds cd_max {}", self.cd_min, self.cd_max));
        }
        if self.cd_steps < 1 {
            return bad("cd_steps must be >= 1".into());
        }
        if self.ca_values.is_empty() {
            return bad("ca_values must not be empty".into());
        }
        if let Some(c) = self.ca_values.iter().find(|c| !(**c >= 0.0)) {
            return bad(format!("ca_values must be >= 0 (got {c})"));
        }
        if self.grid_size < 3 {
            return bad("grid_size must be >= 3".into());
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iterations < 1 {
            return bad("solver tol must be > 0 and max_iterations >= 1".into());
        }
        if self.oracle_rounds < 1 {
            return bad("oracle_rounds must be >= 1".into());
        }
        if self.horizon == Some(0) {
            return bad("horizon must be >= 1".into());
        }
        self.params.validate().map_err(|e| Error::Validation(e.to_string()))?;
        self.learn.validate()
    }

    /// Applies one `key = value` setting. Errors carry no line number; the
    /// caller adds it.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "alpha" => self.params.alpha = number(value)?,
            "nu" => self.params.nu = number(value)?,
            "gamma" => self.params.gamma = number(value)?,
            "steepness" => self.params.steepness = number(value)?,
            "cost_defender" => self.params.cost_defender = number(value)?,
            "cost_attacker" => self.params.cost_attacker = number(value)?,
            "cd_min" => self.cd_min = number(value)?,
            "cd_max" => self.cd_max = number(value)?,
            "cd_steps" => self.cd_steps = number(value)?,
            "ca_values" => self.ca_values = list(value)?,
            "batch_episodes" => self.learn.batch_episodes = number(value)?,
            "horizon" => self.horizon = Some(number(value)?),
            "learning_rate" => self.learn.learning_rate = number(value)?,
            "max_step" => self.learn.max_step = number(value)?,
            "inner_iterations" => self.learn.inner_iterations = number(value)?,
            "outer_rounds_max" => self.learn.outer_rounds_max = number(value)?,
            "convergence_tol" => self.learn.convergence_tol = number(value)?,
            "baseline" => {
                self.learn.baseline = match value {
                    "none" => Baseline::None,
                    "mean_return" => Baseline::MeanReturn,
                    other => return Err(format!("unknown baseline `{other}` (expected none or mean_return)")),
                }
            }
            "restarts" => self.learn.restarts = if value.is_empty() { Vec::new() } else { list(value)? },
            "evaluation_episodes" => self.learn.evaluation_episodes = number(value)?,
            "initial_defender" => self.learn.initial_thetas.0 = number(value)?,
            "initial_attacker" => self.learn.initial_thetas.1 = number(value)?,
            "seed" => self.learn.seed = number(value)?,
            "grid_size" => self.grid_size = number(value)?,
            "solver_tol" => self.solver.tol = number(value)?,
            "solver_max_iterations" => self.solver.max_iterations = number(value)?,
            "observations" => {
                self.solver.observations = match value {
                    "filter" => ObservationModel::FilterLikelihood,
                    "action" => ObservationModel::ActionDriven,
                    other => return Err(format!("unknown observation model `{other}` (expected filter or action)")),
                }
            }
            "oracle_rounds" => self.oracle_rounds = number(value)?,
            "output" => self.output = PathBuf::from(value),
            "mode" => self.mode = value.parse()?,
            "workers" => self.workers = number(value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }
}

fn number<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("cannot parse `{value}`"))
}

fn list(value: &str) -> std::result::Result<Vec<f64>, String> {
    value.split(',').map(|v| number(v.trim())).collect()
}

/// Parses a configuration document on top of the defaults and validates it.
pub fn parse_config(text: &str) -> Result<SweepConfig> {
    let mut cfg = SweepConfig::default();
    apply_config(&mut cfg, text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Applies a configuration document to `cfg` without validating.
pub fn apply_config(cfg: &mut SweepConfig, text: &str) -> Result<()> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: i + 1, message };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected `key = value`, found `{line}`")))?;
        cfg.set(key.trim(), value.trim()).map_err(parse_err)?;
    }
    Ok(())
}
