use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stabilizer_core::experiments::{
    config_matrix, run_drift, run_eval, run_noise_sweep, run_radial, run_train, Agent, ExperimentConfig,
};
use stabilizer_core::plant::{ScenarioKind, ScenarioSpec};
use stabilizer_core::ppo::checkpoint::load_checkpoint;
use stabilizer_core::Error;

#[derive(Parser)]
#[command(name = "stabilizer", version, about = "Train and evaluate the residual biped stabilizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML). Built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; defaults to `output_dir` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PolicyArg {
    /// Trained policy; the bare analytical controller is evaluated when omitted.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a residual policy and write the learning curve and checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
        /// Fraction of each batch that is mirrored, e.g. 0, 1/8, 1/4, 1/2, 1.
        #[arg(long, value_parser = parse_ratio)]
        ratio: Option<f64>,
    },
    /// Train every symmetry ratio on the flat and uneven scenarios.
    Matrix {
        #[command(flatten)]
        common: Common,
    },
    /// Mean duration, NNI and MSI over evaluation episodes.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        policy: PolicyArg,
        #[arg(long, default_value = "l1")]
        scenario: ScenarioKind,
    },
    /// Largest recoverable push per direction.
    Radial {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        policy: PolicyArg,
    },
    /// Long walk in place without pushes, tracking COM drift.
    Drift {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        policy: PolicyArg,
    },
    /// Mean duration against multiplicative observation noise.
    Noise {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        policy: PolicyArg,
        #[arg(long, default_value = "l1")]
        scenario: ScenarioKind,
    },
    /// Print the default configuration as TOML.
    DefaultConfig,
}

fn parse_ratio(s: &str) -> Result<f64, String> {
    let value = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| format!("bad numerator in '{s}'"))?;
            let d: f64 = d.trim().parse().map_err(|_| format!("bad denominator in '{s}'"))?;
            if d == 0.0 {
                return Err("denominator is zero".into());
            }
            n / d
        }
        None => s.trim().parse().map_err(|_| format!("'{s}' is not a number or fraction"))?,
    };
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(format!("ratio {value} is outside [0, 1]"))
    }
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), Error> {
    let cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    std::fs::create_dir_all(&out)?;
    Ok((cfg, out))
}

fn agent(cfg: &ExperimentConfig, path: Option<&Path>) -> Result<Option<Agent>, Error> {
    path.map(|p| Agent::from_checkpoint(&load_checkpoint(p)?, cfg.controller)).transpose()
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train { common, ratio } => {
            let (mut cfg, out) = load(&common)?;
            cfg.train.seed = common.seed;
            if let Some(r) = ratio {
                cfg.train.symmetry_ratio = r;
            }
            let outcome = run_train(&cfg, &out)?;
            let last = outcome.curve.last().map_or(0.0, |p| p.mean_duration);
            println!("trained {} episodes, final rolling mean {last:.2} s -> {}", outcome.episodes, out.display());
        }
        Command::Matrix { common } => {
            let (mut base, out) = load(&common)?;
            base.train.seed = common.seed;
            base.output_dir = out;
            for cfg in config_matrix(&base) {
                let outcome = run_train(&cfg, &cfg.output_dir)?;
                let last = outcome.curve.last().map_or(0.0, |p| p.mean_duration);
                println!("{}: final rolling mean {last:.2} s", cfg.output_dir.display());
            }
        }
        Command::Eval { common, policy, scenario } => {
            let (cfg, out) = load(&common)?;
            let agent = agent(&cfg, policy.checkpoint.as_deref())?;
            let spec = scenario_for(&cfg, scenario);
            let r = run_eval(&cfg, agent.as_ref(), spec, common.seed, &out)?;
            println!(
                "{scenario}: {} episodes, mean duration {:.2} s, NNI {:.3}, MSI {:.3}",
                r.episodes, r.mean_duration, r.mean_nni, r.mean_msi
            );
        }
        Command::Radial { common, policy } => {
            let (cfg, out) = load(&common)?;
            let agent = agent(&cfg, policy.checkpoint.as_deref())?;
            for row in run_radial(&cfg, agent.as_ref(), common.seed, &out)? {
                println!("{:6.1} deg  {:7.1} N", row.direction_deg, row.max_force);
            }
        }
        Command::Drift { common, policy } => {
            let (cfg, out) = load(&common)?;
            let agent = agent(&cfg, policy.checkpoint.as_deref())?;
            let r = run_drift(&cfg, agent.as_ref(), common.seed, &out)?;
            println!("distance {:.3} m over {:.1} s, fell: {}", r.total_distance, r.duration, r.fell);
        }
        Command::Noise { common, policy, scenario } => {
            let (cfg, out) = load(&common)?;
            let agent = agent(&cfg, policy.checkpoint.as_deref())?;
            let spec = scenario_for(&cfg, scenario);
            for (pct, d) in run_noise_sweep(&cfg, agent.as_ref(), spec, common.seed, &out)? {
                println!("{pct:5.1} %  {d:8.2} s");
            }
        }
        Command::DefaultConfig => print!("{}", ExperimentConfig::default().to_toml()?),
    }
    Ok(())
}

/// The configured scenario when its kind matches, else the built-in one.
fn scenario_for(cfg: &ExperimentConfig, kind: ScenarioKind) -> ScenarioSpec {
    if cfg.scenario.kind == kind {
        cfg.scenario
    } else {
        ScenarioSpec { caps: cfg.scenario.caps, ..ScenarioSpec::of_kind(kind) }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
