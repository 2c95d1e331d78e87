//! Deterministic-policy evaluation: episode statistics, radial push
//! tolerance, long-horizon drift and observation-noise robustness.

use std::path::Path;

use super::{derive_seed, rng_stream, write_csv, Agent, ExperimentConfig};
use crate::control::{ResidualAction, RESIDUAL_DIM};
use crate::error::Result;
use crate::lip::Vec2;
use crate::plant::{apply_obs_noise, Observation, PushEvent, ScenarioSpec, Termination, WalkingEnv};
use crate::symmetry::trajectory_msi;

const NOISE_STREAM: u64 = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub episodes: usize,
    pub episode_cap: f64,
    /// Largest multiplicative observation noise factor; 1 disables noise.
    pub noise: f64,
    /// Replaces the random push interval with a fixed one.
    pub push_interval: Option<f64>,
    pub seed: u64,
    pub with_msi: bool,
}

impl EvalOptions {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            episodes: cfg.eval.episodes,
            episode_cap: cfg.scenario.caps.eval,
            noise: 1.0,
            push_interval: None,
            seed: 0,
            with_msi: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub durations: Vec<f64>,
    pub mean_duration: f64,
    pub mean_nni: f64,
    pub mean_msi: f64,
    pub episodes: usize,
}

fn policy_action(agent: Option<&Agent>, env: &WalkingEnv, obs: &[f64]) -> Result<ResidualAction> {
    match agent {
        Some(a) => a.act_normalized(obs),
        None => Ok(ResidualAction::zero(env.controller.gains)),
    }
}

/// Runs `opts.episodes` episodes with the deterministic policy, or with the
/// bare analytical controller when `agent` is `None`.
pub fn evaluate(
    agent: Option<&Agent>,
    cfg: &ExperimentConfig,
    scenario: ScenarioSpec,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let mut scenario = scenario;
    if let Some(t) = opts.push_interval {
        scenario.push.interval = [t, t];
    }
    let mut env = cfg.env(scenario, opts.episode_cap, opts.seed)?;
    let sat = cfg.controller.saturation;
    let mut durations = Vec::with_capacity(opts.episodes);
    let (mut nni_sum, mut msi_sum) = (0.0, 0.0);
    for ep in 0..opts.episodes {
        let ep_seed = derive_seed(opts.seed, ep as u64);
        env.reset_with_seed(ep_seed)?;
        let mut noise_rng = rng_stream(ep_seed, NOISE_STREAM);
        let mut states = Vec::new();
        let (mut nni, mut steps) = (0.0, 0usize);
        loop {
            let raw = apply_obs_noise(&env.observation(), opts.noise, &mut noise_rng)?;
            let obs = match agent {
                Some(a) => a.normalize(raw.as_slice()),
                None => raw.as_slice().to_vec(),
            };
            let action = policy_action(agent, &env, &obs)?;
            nni += action.influence(&sat);
            steps += 1;
            if opts.with_msi && agent.is_some() {
                states.push(obs);
            }
            if env.step(&action)?.termination != Termination::Alive {
                break;
            }
        }
        durations.push(env.time());
        nni_sum += nni / steps as f64;
        if let Some(a) = agent.filter(|_| opts.with_msi) {
            let policy = |o: &[f64]| a.act_normalized(o).map(|r| r.to_vec()).unwrap_or_default();
            msi_sum += trajectory_msi(policy, &states, &cfg.mirror, RESIDUAL_DIM)?;
        }
    }
    let n = opts.episodes.max(1) as f64;
    Ok(EvalReport {
        mean_duration: durations.iter().sum::<f64>() / n,
        mean_nni: nni_sum / n,
        mean_msi: msi_sum / n,
        episodes: opts.episodes,
        durations,
    })
}

/// Evaluates and writes `eval.csv` (one summary row) and `episodes.csv`.
pub fn run_eval(
    cfg: &ExperimentConfig,
    agent: Option<&Agent>,
    scenario: ScenarioSpec,
    seed: u64,
    out: &Path,
) -> Result<EvalReport> {
    let opts = EvalOptions { seed, ..EvalOptions::new(cfg) };
    let report = evaluate(agent, cfg, scenario, &opts)?;
    let hash = cfg.hash()?;
    write_csv(
        out.join("eval.csv"),
        &hash,
        seed,
        &["scenario", "episodes", "mean_duration_s", "mean_nni", "mean_msi"],
        &[vec![
            scenario.kind.to_string(),
            report.episodes.to_string(),
            report.mean_duration.to_string(),
            report.mean_nni.to_string(),
            report.mean_msi.to_string(),
        ]],
    )?;
    let rows: Vec<Vec<String>> =
        report.durations.iter().enumerate().map(|(i, d)| vec![i.to_string(), d.to_string()]).collect();
    write_csv(out.join("episodes.csv"), &hash, seed, &["episode", "duration_s"], &rows)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialRow {
    pub direction_deg: f64,
    pub max_force: f64,
}

const RADIAL_PUSH_TIME: f64 = 2.0;
const RADIAL_SETTLE: f64 = 4.0;
const RADIAL_BISECTIONS: usize = 3;

/// Fraction of trials that stay up after a single push of `force` newtons
/// along `direction`. Trials spread the push over one step period.
pub fn recovery_rate(
    agent: Option<&Agent>,
    cfg: &ExperimentConfig,
    scenario: ScenarioSpec,
    direction: Vec2,
    force: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let scenario = scenario.without_pushes();
    let horizon = RADIAL_PUSH_TIME + cfg.gait.step_duration + RADIAL_SETTLE;
    let mut env = cfg.env(scenario, horizon, seed)?;
    let mut ok = 0;
    for k in 0..trials {
        env.reset_with_seed(derive_seed(seed, k as u64))?;
        let t_start = RADIAL_PUSH_TIME + cfg.gait.step_duration * k as f64 / trials as f64;
        env.set_pushes(vec![PushEvent { t_start, duration: cfg.scenario.push.duration, force, direction }]);
        let fell = loop {
            let obs = env.observation();
            let action = match agent {
                Some(a) => a.act(obs.as_slice())?,
                None => ResidualAction::zero(env.controller.gains),
            };
            match env.step(&action)?.termination {
                Termination::Alive => {}
                Termination::Timeout => break false,
                Termination::Fell => break true,
            }
        };
        if !fell {
            ok += 1;
        }
    }
    Ok(ok as f64 / trials as f64)
}

/// Largest push each direction withstands in at least `threshold` of the
/// trials: a force ramp followed by a short bisection.
pub fn radial_sweep(agent: Option<&Agent>, cfg: &ExperimentConfig, seed: u64) -> Result<Vec<RadialRow>> {
    let e = &cfg.eval;
    let mut rows = Vec::with_capacity(e.radial_directions);
    for d in 0..e.radial_directions {
        let deg = 360.0 * d as f64 / e.radial_directions as f64;
        let dir = Vec2::new(deg.to_radians().cos(), deg.to_radians().sin());
        let passes = |f: f64| -> Result<bool> {
            Ok(recovery_rate(agent, cfg, cfg.scenario, dir, f, e.radial_trials, seed)? >= e.radial_threshold)
        };
        let mut good = 0.0;
        let mut bad = None;
        let mut f = e.radial_force_step;
        while f <= e.radial_force_max {
            if passes(f)? {
                good = f;
                f += e.radial_force_step;
            } else {
                bad = Some(f);
                break;
            }
        }
        if let Some(mut hi) = bad {
            for _ in 0..RADIAL_BISECTIONS {
                let mid = 0.5 * (good + hi);
                if passes(mid)? {
                    good = mid;
                } else {
                    hi = mid;
                }
            }
        }
        rows.push(RadialRow { direction_deg: deg, max_force: good });
    }
    Ok(rows)
}

pub fn run_radial(cfg: &ExperimentConfig, agent: Option<&Agent>, seed: u64, out: &Path) -> Result<Vec<RadialRow>> {
    let rows = radial_sweep(agent, cfg, seed)?;
    let csv: Vec<Vec<String>> =
        rows.iter().map(|r| vec![r.direction_deg.to_string(), r.max_force.to_string()]).collect();
    write_csv(out.join("radial.csv"), &cfg.hash()?, seed, &["direction_deg", "max_force_n"], &csv)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    /// `(t, x, y)` of the COM every sample period.
    pub samples: Vec<(f64, f64, f64)>,
    pub total_distance: f64,
    pub fell: bool,
    pub duration: f64,
}

/// Walks in place on flat ground without pushes and records the COM path.
pub fn drift(agent: Option<&Agent>, cfg: &ExperimentConfig, seed: u64) -> Result<DriftReport> {
    let mut scenario = ScenarioSpec::l1().without_pushes();
    scenario.caps = cfg.scenario.caps;
    let period = cfg.eval.drift_sample_period;
    let mut env = cfg.env(scenario, cfg.eval.drift_duration, seed)?;
    env.reset_with_seed(seed)?;
    let c = env.state().c;
    let mut samples = vec![(0.0, c.x, c.y)];
    let mut next_sample = period;
    let fell = loop {
        let obs: Observation = env.observation();
        let action = match agent {
            Some(a) => a.act(obs.as_slice())?,
            None => ResidualAction::zero(env.controller.gains),
        };
        let term = env.step(&action)?.termination;
        if env.time() >= next_sample - 1e-9 {
            let c = env.state().c;
            samples.push((next_sample, c.x, c.y));
            next_sample += period;
        }
        match term {
            Termination::Alive => {}
            Termination::Timeout => break false,
            Termination::Fell => break true,
        }
    };
    let total_distance = samples.windows(2).map(|w| ((w[1].1 - w[0].1).powi(2) + (w[1].2 - w[0].2).powi(2)).sqrt()).sum();
    Ok(DriftReport { samples, total_distance, fell, duration: env.time() })
}

/// Writes `drift.csv` (t, x, y, cumulative distance) and `drift_summary.csv`.
pub fn run_drift(cfg: &ExperimentConfig, agent: Option<&Agent>, seed: u64, out: &Path) -> Result<DriftReport> {
    let report = drift(agent, cfg, seed)?;
    let hash = cfg.hash()?;
    let mut dist = 0.0;
    let mut rows = Vec::with_capacity(report.samples.len());
    for (i, s) in report.samples.iter().enumerate() {
        if i > 0 {
            let p = report.samples[i - 1];
            dist += ((s.1 - p.1).powi(2) + (s.2 - p.2).powi(2)).sqrt();
        }
        rows.push(vec![s.0.to_string(), s.1.to_string(), s.2.to_string(), dist.to_string()]);
    }
    write_csv(out.join("drift.csv"), &hash, seed, &["t_s", "x_m", "y_m", "distance_m"], &rows)?;
    write_csv(
        out.join("drift_summary.csv"),
        &hash,
        seed,
        &["total_distance_m", "fell", "duration_s"],
        &[vec![report.total_distance.to_string(), report.fell.to_string(), report.duration.to_string()]],
    )?;
    Ok(report)
}

/// Mean duration per noise level with pushes at a fixed interval.
pub fn noise_sweep(
    agent: Option<&Agent>,
    cfg: &ExperimentConfig,
    scenario: ScenarioSpec,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    cfg.eval
        .noise_levels
        .iter()
        .map(|&n| {
            let opts = EvalOptions {
                episodes: cfg.eval.noise_episodes,
                noise: n,
                push_interval: Some(cfg.eval.noise_push_interval),
                seed,
                with_msi: false,
                ..EvalOptions::new(cfg)
            };
            Ok(((n - 1.0) * 100.0, evaluate(agent, cfg, scenario, &opts)?.mean_duration))
        })
        .collect()
}

pub fn run_noise_sweep(
    cfg: &ExperimentConfig,
    agent: Option<&Agent>,
    scenario: ScenarioSpec,
    seed: u64,
    out: &Path,
) -> Result<Vec<(f64, f64)>> {
    let rows = noise_sweep(agent, cfg, scenario, seed)?;
    let csv: Vec<Vec<String>> = rows.iter().map(|(n, d)| vec![format!("{n:.1}"), d.to_string()]).collect();
    write_csv(out.join("noise.csv"), &cfg.hash()?, seed, &["noise_pct", "mean_duration_s"], &csv)?;
    Ok(rows)
}
