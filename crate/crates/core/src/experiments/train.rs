//! Rollout collection over parallel environments and the PPO training loop.

use std::collections::VecDeque;
use std::path::PathBuf;

use rand_distr::{Distribution, StandardNormal};

use super::{derive_seed, rng_stream, write_csv, Agent, EvalOptions, ExperimentConfig};
use crate::control::{ResidualAction, ACTION_DIM};
use crate::error::Result;
use crate::plant::{Termination, WalkingEnv, OBS_DIM};
use crate::ppo::checkpoint::{save_checkpoint, Checkpoint};
use crate::ppo::{gae_advantages, linear_lr, ppo_update, reward, Adam, PolicyParams, Trajectory, UpdateStats};
use crate::symmetry::{augment_batch, Sample, SharedNormStats};

const ENV_STREAM: u64 = 100;
const ACTION_STREAM: u64 = 200;
const UPDATE_STREAM: u64 = 300;
const INIT_STREAM: u64 = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub env_steps: u64,
    pub mean_duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub batch: usize,
    pub env_steps: u64,
    pub rolling_mean_duration: f64,
    pub episodes_completed: usize,
    pub gradient_samples: usize,
    pub update: UpdateStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub curve: Vec<CurvePoint>,
    /// Deterministic evaluations taken every `curve_eval_interval` batches.
    pub eval_curve: Vec<CurvePoint>,
    pub checkpoint: Checkpoint,
    /// Checkpoint with the highest rolling mean duration seen.
    pub best: Checkpoint,
    pub episodes: usize,
}

struct Worker {
    env: WalkingEnv,
    rng: rand_chacha::ChaCha8Rng,
    /// Raw observation of the current state.
    obs: Vec<f64>,
}

/// Trains a policy from scratch. `on_batch` sees every batch report and the
/// current checkpoint; it may write files or stop nothing.
pub fn train<F>(cfg: &ExperimentConfig, mut on_batch: F) -> Result<TrainOutcome>
where
    F: FnMut(&BatchReport, &Checkpoint) -> Result<()>,
{
    cfg.validate()?;
    let tc = &cfg.train;
    let seed = tc.seed;
    let mut init_rng = rng_stream(seed, INIT_STREAM);
    let mut update_rng = rng_stream(seed, UPDATE_STREAM);
    let mut params = PolicyParams::new(OBS_DIM, ACTION_DIM, &tc.hidden, tc.log_std_init, &mut init_rng);
    let mut adam = Adam::new(params.n_params());
    let mut stats = SharedNormStats::new(OBS_DIM);

    let mut workers = (0..tc.n_envs as u64)
        .map(|i| {
            let env = cfg.env(cfg.scenario, cfg.scenario.caps.train, derive_seed(seed, ENV_STREAM + i))?;
            let obs = env.observation().0.to_vec();
            Ok(Worker { env, rng: rng_stream(seed, ACTION_STREAM + i), obs })
        })
        .collect::<Result<Vec<_>>>()?;

    let steps_per_env = tc.steps_per_env();
    let mut env_steps: u64 = 0;
    let mut durations: VecDeque<f64> = VecDeque::with_capacity(tc.curve_window);
    let mut episodes = 0usize;
    let mut curve = Vec::new();
    let mut eval_curve = Vec::new();
    let mut best: Option<(f64, Checkpoint)> = None;
    let mut batch_index = 0usize;

    while env_steps < tc.total_steps {
        let mut local = SharedNormStats::new(OBS_DIM);
        let mut samples = Vec::with_capacity(tc.batch_size);
        for w in workers.iter_mut() {
            let traj = collect(w, &params, &stats, cfg, steps_per_env, &mut local, &mut |d| {
                episodes += 1;
                if durations.len() == tc.curve_window {
                    durations.pop_front();
                }
                durations.push_back(d);
            })?;
            let adv = gae_advantages(&traj, tc.gamma, tc.gae_lambda)?;
            for t in 0..traj.len() {
                samples.push(Sample {
                    obs: traj.obs[t].clone(),
                    action: traj.actions[t].clone(),
                    advantage: adv[t],
                    value_target: adv[t] + traj.values[t],
                });
            }
        }
        stats.merge(&local)?;

        let batch = augment_batch(&samples, tc.symmetry_ratio, &cfg.mirror)?;
        let lr = linear_lr(tc.lr0, env_steps, tc.total_steps);
        let update = ppo_update(&mut params, &mut adam, &batch, tc, lr, &mut update_rng)?;
        env_steps += tc.batch_size as u64;
        batch_index += 1;

        let rolling = if durations.is_empty() {
            // No episode has finished yet: every episode lasted at least this long.
            workers.iter().map(|w| w.env.time()).sum::<f64>() / workers.len() as f64
        } else {
            durations.iter().sum::<f64>() / durations.len() as f64
        };
        curve.push(CurvePoint { env_steps, mean_duration: rolling });
        let ckpt = Checkpoint { params: params.clone(), stats: stats.clone(), seed };
        if best.as_ref().is_none_or(|(b, _)| rolling > *b) {
            best = Some((rolling, ckpt.clone()));
        }
        let interval = cfg.eval.curve_eval_interval;
        if interval > 0 && (batch_index.is_multiple_of(interval) || env_steps >= tc.total_steps) {
            let agent = Agent::from_checkpoint(&ckpt, cfg.controller)?;
            let opts = EvalOptions {
                episodes: cfg.eval.curve_eval_episodes,
                seed: derive_seed(seed, 500),
                ..EvalOptions::new(cfg)
            };
            let report = super::evaluate(Some(&agent), cfg, cfg.scenario, &opts)?;
            eval_curve.push(CurvePoint { env_steps, mean_duration: report.mean_duration });
        }
        let report = BatchReport {
            batch: batch_index,
            env_steps,
            rolling_mean_duration: rolling,
            episodes_completed: episodes,
            gradient_samples: batch.len(),
            update,
        };
        on_batch(&report, &ckpt)?;
    }

    let checkpoint = Checkpoint { params, stats, seed };
    let best = best.map(|(_, c)| c).unwrap_or_else(|| checkpoint.clone());
    Ok(TrainOutcome { curve, eval_curve, checkpoint, best, episodes })
}

/// Steps one worker `n` times with stochastic actions under frozen
/// normalization, updating `local` with every raw observation.
fn collect(
    w: &mut Worker,
    params: &PolicyParams,
    stats: &SharedNormStats,
    cfg: &ExperimentConfig,
    n: usize,
    local: &mut SharedNormStats,
    on_episode: &mut dyn FnMut(f64),
) -> Result<Trajectory> {
    let mut traj = Trajectory::default();
    let std: Vec<f64> = params.log_std.iter().map(|l| l.exp()).collect();
    let sat = cfg.controller.saturation;
    for _ in 0..n {
        local.update(&w.obs, &cfg.mirror)?;
        let obs = stats.normalize(&w.obs);
        let out = params.forward(&obs)?;
        let action: Vec<f64> = out
            .mean
            .iter()
            .zip(&std)
            .map(|(m, s)| {
                let z: f64 = StandardNormal.sample(&mut w.rng);
                m + s * z
            })
            .collect();
        let residual = ResidualAction::from_raw(&action, &cfg.controller)?;
        let r = reward(&residual, &sat);
        let outcome = w.env.step(&residual)?;
        let next_raw = w.env.observation().0.to_vec();
        let (done, next_value) = match outcome.termination {
            Termination::Alive => (false, params.value(&stats.normalize(&next_raw))?),
            Termination::Timeout => (true, params.value(&stats.normalize(&next_raw))?),
            Termination::Fell => (true, 0.0),
        };
        traj.obs.push(obs);
        traj.actions.push(action);
        traj.rewards.push(r * cfg.train.reward_scale);
        traj.values.push(out.value);
        traj.next_values.push(next_value);
        traj.done.push(done);
        if done {
            on_episode(w.env.time());
            w.env.reset()?;
            w.obs = w.env.observation().0.to_vec();
        } else {
            w.obs = next_raw;
        }
    }
    Ok(traj)
}

/// Trains and writes `learning_curve.csv`, `policy.ckpt`, `best.ckpt`, and
/// when enabled `eval_curve.csv` and periodic `policy_<batch>.ckpt` files.
pub fn run_train(cfg: &ExperimentConfig, out: &std::path::Path) -> Result<TrainOutcome> {
    std::fs::create_dir_all(out)?;
    let interval = cfg.train.checkpoint_interval;
    let dir = PathBuf::from(out);
    let outcome = train(cfg, |report, ckpt| {
        if interval > 0 && report.batch % interval == 0 {
            save_checkpoint(ckpt, &dir.join(format!("policy_{:05}.ckpt", report.batch)))?;
        }
        Ok(())
    })?;
    let hash = cfg.hash()?;
    let seed = cfg.train.seed;
    let rows = |c: &[CurvePoint]| {
        c.iter().map(|p| vec![(p.env_steps as f64 / 1e6).to_string(), p.mean_duration.to_string()]).collect::<Vec<_>>()
    };
    write_csv(out.join("learning_curve.csv"), &hash, seed, &["million_steps", "mean_duration_s"], &rows(&outcome.curve))?;
    if !outcome.eval_curve.is_empty() {
        write_csv(
            out.join("eval_curve.csv"),
            &hash,
            seed,
            &["million_steps", "eval_mean_duration_s"],
            &rows(&outcome.eval_curve),
        )?;
    }
    save_checkpoint(&outcome.checkpoint, &out.join("policy.ckpt"))?;
    save_checkpoint(&outcome.best, &out.join("best.ckpt"))?;
    Ok(outcome)
}
