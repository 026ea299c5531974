use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mtd_core::belief::{posterior, Belief, Observation, ProbeProfile};
use mtd_core::check::check_structure;
use mtd_core::config::{apply_config, SweepConfig};
use mtd_core::game::DefenderAction;
use mtd_core::learner::fictitious_play;
use mtd_core::oracle::{attacker_best_response, defender_best_response, oracle_equilibrium, BeliefGrid};
use mtd_core::policy::ThresholdPolicy;
use mtd_core::simulator::{child_seed, estimate_values, rollout, write_trajectory_csv};
use mtd_core::sweep::{run_sweep, write_sweep};
use mtd_core::{Error, Result};

#[derive(Parser)]
#[command(name = "mtd", version, about = "Reimage/probe moving-target-defence game: simulate, solve, learn, sweep")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out a fixed threshold pair and report Monte Carlo values.
    Simulate(SimulateArgs),
    /// Exact best response (or fixed point) on a belief grid.
    Solve(SolveArgs),
    /// One fictitious-play run at `cost_defender`, `cost_attacker`.
    Learn(LearnArgs),
    /// Equilibrium thresholds over a cost grid, one CSV per attacker cost.
    Sweep(SweepArgs),
    /// Threshold-structure and filter checks.
    Check(CheckArgs),
}

/// Configuration file plus flags mirroring its keys; flags win.
#[derive(Args)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Any configuration key, as `key=value`; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    nu: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    steepness: Option<String>,
    #[arg(long)]
    cost_defender: Option<String>,
    #[arg(long)]
    cost_attacker: Option<String>,
    #[arg(long)]
    grid_size: Option<String>,
    #[arg(long)]
    workers: Option<String>,
}

impl Common {
    fn load(&self, extra: &[(&str, Option<String>)]) -> Result<SweepConfig> {
        let mut cfg = SweepConfig::default();
        if let Some(path) = &self.config {
            apply_config(&mut cfg, &fs::read_to_string(path)?)?;
        }
        let named = [
            ("alpha", &self.alpha),
            ("nu", &self.nu),
            ("gamma", &self.gamma),
            ("steepness", &self.steepness),
            ("cost_defender", &self.cost_defender),
            ("cost_attacker", &self.cost_attacker),
            ("grid_size", &self.grid_size),
            ("workers", &self.workers),
        ];
        for (key, value) in named.iter().map(|(k, v)| (*k, (*v).clone())).chain(extra.iter().cloned()) {
            if let Some(value) = value {
                cfg.set(key, &value).map_err(|m| Error::Validation(format!("--{key}: {m}")))?;
            }
        }
        for pair in &self.set {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::Validation(format!("--set expects KEY=VALUE, got `{pair}`")))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|m| Error::Validation(format!("--set {pair}: {m}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0.5)]
    theta_defender: f64,
    #[arg(long, default_value_t = 0.5)]
    theta_attacker: f64,
    #[arg(long, default_value_t = 1000)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    horizon: Option<usize>,
    /// Write the first episode's trajectory here.
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Player {
    Defender,
    Attacker,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Whose best response to compute.
    #[arg(long, value_enum, default_value_t = Player::Defender)]
    role: Player,
    /// Threshold of the fixed opponent.
    #[arg(long, default_value_t = 0.5)]
    opponent_theta: f64,
    /// Attacker threshold the defender's filter assumes (attacker role).
    #[arg(long, default_value_t = 0.5)]
    filter_theta: f64,
    /// Iterate best responses to a fixed point instead.
    #[arg(long)]
    equilibrium: bool,
    /// Write the solved table here.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: u64,
    /// Write the per-round history here.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    output: Option<String>,
    /// learn, oracle or both.
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    common: Common,
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let cfg = args.common.load(&[])?;
    let p = cfg.params;
    let defender = ThresholdPolicy::defender(args.theta_defender, p.steepness);
    let attacker = ThresholdPolicy::attacker(args.theta_attacker, p.steepness);
    let horizon = args.horizon.unwrap_or_else(|| cfg.learn_config_for(&p).horizon);
    if let Some(path) = &args.trajectory {
        let traj = rollout(&p, &defender, &attacker, horizon, child_seed(args.seed, 0))?;
        write_trajectory_csv(&traj, fs::File::create(path)?)?;
    }
    if args.episodes < 2 {
        return Err(Error::Validation("--episodes must be >= 2".into()));
    }
    let v = estimate_values(&p, &defender, &attacker, args.episodes, horizon, args.seed)?;
    println!(
        "value_defender={} stderr_defender={} value_attacker={} stderr_attacker={} episodes={}",
        v.mean_defender, v.stderr_defender, v.mean_attacker, v.stderr_attacker, v.episodes
    );
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let cfg = args.common.load(&[])?;
    let p = cfg.params;
    let grid = BeliefGrid::uniform(cfg.grid_size)?;
    if args.equilibrium {
        let eq = oracle_equilibrium(&p, &grid, cfg.learn.initial_thetas, cfg.oracle_rounds, 1e-12, cfg.solver)?;
        println!(
            "theta_defender={} theta_attacker={} rounds={} converged={}",
            eq.theta_defender, eq.theta_attacker, eq.rounds, eq.converged
        );
        return Ok(());
    }
    match args.role {
        Player::Defender => {
            let opponent = ThresholdPolicy::attacker(args.opponent_theta, p.steepness);
            let table = defender_best_response(&opponent, &grid, &p, cfg.solver)?;
            if let Some(path) = &args.output {
                table.write_csv(fs::File::create(path)?)?;
            }
            println!("threshold={:?} single_crossing={} residual={:e}", table.threshold, table.single_crossing(), table.residual);
        }
        Player::Attacker => {
            let opponent = ThresholdPolicy::defender(args.opponent_theta, p.steepness);
            let filter_model = ThresholdPolicy::attacker(args.filter_theta, p.steepness);
            let table = attacker_best_response(&opponent, &filter_model, &grid, &p, cfg.solver)?;
            if let Some(path) = &args.output {
                table.write_csv(fs::File::create(path)?)?;
            }
            println!("threshold={:?} single_crossing={} residual={:e}", table.threshold, table.single_crossing(), table.residual);
        }
    }
    Ok(())
}

fn learn(args: LearnArgs) -> Result<()> {
    let cfg = args.common.load(&[("seed", Some(args.seed.to_string()))])?;
    let p = cfg.params;
    let result = fictitious_play(&p, &cfg.learn_config_for(&p))?;
    if let Some(path) = &args.history {
        result.write_history_csv(fs::File::create(path)?)?;
    }
    println!(
        "theta_defender={} theta_attacker={} rounds={} converged={}",
        result.theta_defender, result.theta_attacker, result.rounds_used, result.converged
    );
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let cfg = args.common.load(&[
        ("seed", Some(args.seed.to_string())),
        ("output", args.output.clone()),
        ("mode", args.mode.clone()),
    ])?;
    let panels = run_sweep(&cfg)?;
    for path in write_sweep(&panels, &cfg.output, cfg.mode)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn check(args: CheckArgs) -> Result<bool> {
    let cfg = args.common.load(&[])?;
    let grid = BeliefGrid::uniform(cfg.grid_size)?;
    let cases = check_structure(&grid, cfg.solver, cfg.params.steepness)?;
    let failed = cases.iter().filter(|c| !c.passes()).count();
    println!("structure: {} of {} cases pass", cases.len() - failed, cases.len());
    for c in cases.iter().filter(|c| !c.passes()) {
        println!("  fail: {:?}", c);
    }

    let p = cfg.params;
    let mut filter_ok = true;
    for i in 0..=100 {
        let b = Belief::new(i as f64 / 100.0)?;
        let probes = ProbeProfile::new(0.7, 0.2)?;
        let mut total = 0.0;
        for o in Observation::ALL {
            if let Ok((_, sigma)) = posterior(b, DefenderAction::Continue, o, &probes, &p) {
                total += sigma;
            }
        }
        let (reset, _) = posterior(b, DefenderAction::Reimage, Observation::NoDetection, &probes, &p)?;
        filter_ok &= (total - 1.0).abs() <= 1e-12 && reset.p_attacker() == 0.0;
    }
    println!("filter: {}", if filter_ok { "pass" } else { "fail" });
    Ok(failed == 0 && filter_ok)
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidParams(_) => "invalid_params",
        Error::ImpossibleObservation { .. } => "impossible_observation",
        Error::NoConvergence { .. } => "no_convergence",
        Error::Degenerate(_) => "degenerate",
        Error::Parse { .. } => "parse",
        Error::Validation(_) => "validation",
        Error::Io(_) => "io",
        Error::Csv(_) => "csv",
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate(a) => simulate(a).map(|_| true),
        Command::Solve(a) => solve(a).map(|_| true),
        Command::Learn(a) => learn(a).map(|_| true),
        Command::Sweep(a) => sweep(a).map(|_| true),
        Command::Check(a) => check(a),
    }
}

fn error_line(e: &Error) -> String {
    format!("error\t{}\t{}", kind(e), e.to_string().replace(['\t', '\n'], " "))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error\tcheck_failed\tone or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(2)
        }
    }
}
