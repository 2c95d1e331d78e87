//! Proximal policy optimization: clipped surrogate, generalized advantage
//! estimation, λ-return value targets and a linear learning-rate schedule.

pub mod checkpoint;
pub mod net;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::control::{ResidualAction, Saturation};
use crate::error::{check_dim, Error, Result};
use crate::symmetry::Sample;
pub use net::{gaussian_entropy, gaussian_log_prob, Mlp, PolicyOutput, PolicyParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub lr0: f64,
    pub clip_eps: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Multiplies rewards before advantage and return estimation, keeping
    /// value targets near unit scale. Reported rewards are unscaled.
    pub reward_scale: f64,
    /// Applied to the actor and critic gradients separately.
    pub max_grad_norm: f64,
    pub total_steps: u64,
    pub symmetry_ratio: f64,
    pub seed: u64,
    pub n_envs: usize,
    pub hidden: Vec<usize>,
    pub log_std_init: f64,
    /// Completed episodes in the rolling mean of the learning curve.
    pub curve_window: usize,
    /// Batches between periodic checkpoints; 0 keeps only the final one.
    pub checkpoint_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 8192,
            minibatch_size: 512,
            epochs: 4,
            lr0: 3e-4,
            clip_eps: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            value_coef: 0.5,
            entropy_coef: 0.003,
            reward_scale: 0.01,
            max_grad_norm: 0.5,
            total_steps: 2_000_000,
            symmetry_ratio: 0.0,
            seed: 0,
            n_envs: 8,
            hidden: vec![64, 64],
            log_std_init: -1.0,
            curve_window: 100,
            checkpoint_interval: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.batch_size > 0
            && self.minibatch_size > 0
            && self.epochs > 0
            && self.lr0 > 0.0
            && self.clip_eps > 0.0
            && self.clip_eps < 1.0
            && (0.0..=1.0).contains(&self.gamma)
            && (0.0..=1.0).contains(&self.gae_lambda)
            && (0.0..=1.0).contains(&self.symmetry_ratio)
            && self.n_envs > 0
            && self.batch_size.is_multiple_of(self.n_envs)
            && self.max_grad_norm > 0.0
            && self.reward_scale > 0.0
            && self.curve_window > 0
            && !self.hidden.is_empty()
            && self.hidden.iter().all(|&h| h > 0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training config {self:?}")))
        }
    }

    pub fn steps_per_env(&self) -> usize {
        self.batch_size / self.n_envs
    }
}

/// `R = 1 − (1/J)·Σ|δ_i|/S_i` over the `J` residual channels.
pub fn reward(residual: &ResidualAction, s: &Saturation) -> f64 {
    1.0 - residual.influence(s)
}

/// `lr0·(1 − k/total)`, floored at zero.
pub fn linear_lr(lr0: f64, step: u64, total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    (lr0 * (1.0 - step as f64 / total as f64)).max(0.0)
}

/// One environment's rollout segment. `done[t]` marks the last step of an
/// episode; `next_value[t]` is the critic value of the state after step `t`,
/// or 0 when that step ended in a fall.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub next_values: Vec<f64>,
    pub done: Vec<bool>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.rewards.len();
        check_dim("trajectory values", n, self.values.len())?;
        check_dim("trajectory next values", n, self.next_values.len())?;
        check_dim("trajectory done flags", n, self.done.len())?;
        if !self.obs.is_empty() {
            check_dim("trajectory observations", n, self.obs.len())?;
            check_dim("trajectory actions", n, self.actions.len())?;
        }
        Ok(())
    }
}

/// Recursive GAE: `A_t = δ_t + γλ·A_{t+1}` with the recursion cut at
/// episode ends.
pub fn gae_advantages(traj: &Trajectory, gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    traj.validate()?;
    let n = traj.len();
    let mut adv = vec![0.0; n];
    let mut next = 0.0;
    for t in (0..n).rev() {
        let delta = traj.rewards[t] + gamma * traj.next_values[t] - traj.values[t];
        let carry = if traj.done[t] { 0.0 } else { next };
        adv[t] = delta + gamma * lambda * carry;
        next = adv[t];
    }
    Ok(adv)
}

/// λ-return value targets `A_t + V(s_t)`.
pub fn lambda_returns(traj: &Trajectory, gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    let adv = gae_advantages(traj, gamma, lambda)?;
    Ok(adv.iter().zip(&traj.values).map(|(a, v)| a + v).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefficients {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Row-stacked minibatch.
#[derive(Debug, Clone)]
pub struct Minibatch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub advantages: Vec<f64>,
    pub value_targets: Vec<f64>,
    pub logp_old: Vec<f64>,
}

impl Minibatch {
    pub fn from_samples(samples: &[&Sample], advantages: &[f64], logp_old: &[f64]) -> Result<Self> {
        let n = samples.len();
        let (od, ad) = match samples.first() {
            Some(s) => (s.obs.len(), s.action.len()),
            None => return Err(Error::Domain("empty minibatch".into())),
        };
        let mut obs = Vec::with_capacity(n * od);
        let mut actions = Vec::with_capacity(n * ad);
        for s in samples {
            check_dim("sample observation", od, s.obs.len())?;
            check_dim("sample action", ad, s.action.len())?;
            obs.extend_from_slice(&s.obs);
            actions.extend_from_slice(&s.action);
        }
        let shape = |d: usize, v: Vec<f64>| Array2::from_shape_vec((n, d), v).map_err(|e| Error::Domain(e.to_string()));
        Ok(Self {
            obs: shape(od, obs)?,
            actions: shape(ad, actions)?,
            advantages: advantages.to_vec(),
            value_targets: samples.iter().map(|s| s.value_target).collect(),
            logp_old: logp_old.to_vec(),
        })
    }
}

/// Clipped surrogate term `min(ρA, clip(ρ, 1−ε, 1+ε)A)` for one sample.
pub fn clipped_objective(ratio: f64, advantage: f64, eps: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - eps, 1.0 + eps) * advantage)
}

/// Loss `c_p·L_clip + c_v·L_V − c_e·H` and its exact gradient in the flat
/// parameter layout, where `L_clip` is the negated mean clipped surrogate,
/// `L_V` the mean squared value error and `H` the policy entropy.
pub fn loss_and_grad(
    params: &PolicyParams,
    mb: &Minibatch,
    clip_eps: f64,
    coef: LossCoefficients,
) -> Result<(LossStats, Vec<f64>)> {
    let n = mb.obs.nrows();
    check_dim("minibatch observations", params.obs_dim(), mb.obs.ncols())?;
    check_dim("minibatch actions", params.act_dim(), mb.actions.ncols())?;
    let nf = n as f64;
    let act_dim = params.act_dim();
    let log_std = &params.log_std;
    let inv_var: Vec<f64> = log_std.iter().map(|ls| (-2.0 * ls).exp()).collect();

    let actor_acts = params.actor.forward(mb.obs.view());
    let mean = actor_acts.last().expect("output layer");
    let critic_acts = params.critic.forward(mb.obs.view());
    let values = critic_acts.last().expect("output layer");

    let mut grad = vec![0.0; params.n_params()];
    let mut g_mean = Array2::<f64>::zeros((n, act_dim));
    let mut g_log_std = vec![0.0; act_dim];
    let mut g_value = Array2::<f64>::zeros((n, 1));
    let mut stats = LossStats::default();

    for i in 0..n {
        let a = mb.actions.row(i);
        let m = mean.row(i);
        let mut logp = 0.0;
        for j in 0..act_dim {
            let d = a[j] - m[j];
            logp += -0.5 * d * d * inv_var[j] - log_std[j] - 0.5 * net::LOG_2PI;
        }
        let log_ratio = logp - mb.logp_old[i];
        let ratio = log_ratio.exp();
        let adv = mb.advantages[i];
        stats.policy -= clipped_objective(ratio, adv, clip_eps) / nf;
        stats.approx_kl += ((ratio - 1.0) - log_ratio) / nf;
        let clipped = (ratio - 1.0).abs() > clip_eps;
        if clipped {
            stats.clip_fraction += 1.0 / nf;
        }
        // The unclipped branch is selected unless clipping lowers the objective.
        let unclipped_active = ratio * adv <= ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * adv;
        if unclipped_active || !clipped {
            let dl_dlogp = -coef.policy * adv * ratio / nf;
            for j in 0..act_dim {
                let d = a[j] - m[j];
                g_mean[[i, j]] += dl_dlogp * d * inv_var[j];
                g_log_std[j] += dl_dlogp * (d * d * inv_var[j] - 1.0);
            }
        }
        let err = values[[i, 0]] - mb.value_targets[i];
        stats.value += err * err / nf;
        g_value[[i, 0]] = coef.value * 2.0 * err / nf;
    }
    stats.entropy = gaussian_entropy(log_std.as_slice().expect("contiguous"));
    for g in g_log_std.iter_mut() {
        *g -= coef.entropy;
    }
    stats.total = coef.policy * stats.policy + coef.value * stats.value - coef.entropy * stats.entropy;

    let actor_len = params.actor.n_params();
    params.actor.backward(&actor_acts, g_mean, &mut grad[..actor_len]);
    grad[actor_len..actor_len + act_dim].copy_from_slice(&g_log_std);
    params.critic.backward(&critic_acts, g_value, &mut grad[params.actor_len()..]);

    if !stats.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("ppo loss {stats:?}")));
    }
    Ok((stats, grad))
}

/// Adam optimizer over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

fn clip_norm(g: &mut [f64], max_norm: f64) {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        g.iter_mut().for_each(|v| *v *= s);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub loss: LossStats,
    pub samples: usize,
    pub minibatches: usize,
}

/// Log-probabilities of each sample's action under `params`.
pub fn log_probs(params: &PolicyParams, samples: &[Sample]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    let od = params.obs_dim();
    let mut obs = Vec::with_capacity(samples.len() * od);
    for s in samples {
        check_dim("sample observation", od, s.obs.len())?;
        obs.extend_from_slice(&s.obs);
    }
    let x = ArrayView2::from_shape((samples.len(), od), &obs).map_err(|e| Error::Domain(e.to_string()))?;
    let mean = params.actor.forward(x).pop().expect("output layer");
    let ls = params.log_std.to_vec();
    Ok(samples
        .iter()
        .enumerate()
        .map(|(i, s)| gaussian_log_prob(&s.action, mean.row(i).as_slice().expect("contiguous"), &ls))
        .collect())
}

/// Runs `epochs` passes of shuffled minibatch Adam steps over `batch`.
/// Behaviour log-probabilities come from `params` as passed in, which also
/// covers mirrored samples that were never acted on. Advantages are
/// standardized over the whole (augmented) batch.
pub fn ppo_update<R: Rng>(
    params: &mut PolicyParams,
    adam: &mut Adam,
    batch: &[Sample],
    config: &TrainConfig,
    lr: f64,
    rng: &mut R,
) -> Result<UpdateStats> {
    if batch.is_empty() {
        return Err(Error::Domain("empty training batch".into()));
    }
    let logp_old = log_probs(params, batch)?;
    let n = batch.len() as f64;
    let mean = batch.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = batch.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    let adv: Vec<f64> = batch.iter().map(|s| (s.advantage - mean) / std).collect();

    let coef = LossCoefficients { policy: 1.0, value: config.value_coef, entropy: config.entropy_coef };
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut flat = params.to_flat();
    let actor_len = params.actor_len();
    let mut acc = LossStats::default();
    let mut count = 0usize;
    for _ in 0..config.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.minibatch_size) {
            let samples: Vec<&Sample> = chunk.iter().map(|&i| &batch[i]).collect();
            let a: Vec<f64> = chunk.iter().map(|&i| adv[i]).collect();
            let lp: Vec<f64> = chunk.iter().map(|&i| logp_old[i]).collect();
            let mb = Minibatch::from_samples(&samples, &a, &lp)?;
            let (stats, mut grad) = loss_and_grad(params, &mb, config.clip_eps, coef)?;
            let (ga, gc) = grad.split_at_mut(actor_len);
            clip_norm(ga, config.max_grad_norm);
            clip_norm(gc, config.max_grad_norm);
            adam.step(&mut flat, &grad, lr);
            params.set_flat(&flat)?;
            acc.total += stats.total;
            acc.policy += stats.policy;
            acc.value += stats.value;
            acc.entropy += stats.entropy;
            acc.clip_fraction += stats.clip_fraction;
            acc.approx_kl += stats.approx_kl;
            count += 1;
        }
    }
    let k = count as f64;
    let loss = LossStats {
        total: acc.total / k,
        policy: acc.policy / k,
        value: acc.value / k,
        entropy: acc.entropy / k,
        clip_fraction: acc.clip_fraction / k,
        approx_kl: acc.approx_kl / k,
    };
    Ok(UpdateStats { loss, samples: batch.len(), minibatches: count })
}
