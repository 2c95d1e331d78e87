//! Sagittal-plane reflection of observations and actions, partial batch
//! augmentation, reflection-shared normalization and the mirrored symmetry
//! index.

use serde::{Deserialize, Serialize};

use crate::control::{idx, ACTION_DIM, RESIDUAL_DIM};
use crate::error::{check_dim, Error, Result};
use crate::plant::OBS_DIM;

/// Reflection as a signed permutation: `out[i] = sign[i] * x[perm[i]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorSpec {
    pub obs_perm: Vec<usize>,
    pub obs_sign: Vec<f64>,
    pub act_perm: Vec<usize>,
    pub act_sign: Vec<f64>,
}

/// Observation entries that change sign under the reflection: lateral COM
/// offset and velocity, roll and roll rate, lateral ZMP and swing offsets,
/// and the support side.
const OBS_FLIPS: [usize; 7] = [1, 4, 7, 9, 11, 13, 15];
const ACT_FLIPS: [usize; 3] = [idx::ZMP_Y, idx::TAU_ROLL, idx::STEP_Y];

impl Default for MirrorSpec {
    fn default() -> Self {
        let signs = |n: usize, flips: &[usize]| {
            (0..n).map(|i| if flips.contains(&i) { -1.0 } else { 1.0 }).collect::<Vec<_>>()
        };
        Self {
            obs_perm: (0..OBS_DIM).collect(),
            obs_sign: signs(OBS_DIM, &OBS_FLIPS),
            act_perm: (0..ACTION_DIM).collect(),
            act_sign: signs(ACTION_DIM, &ACT_FLIPS),
        }
    }
}

struct LayoutBuilder {
    perm: Vec<usize>,
    sign: Vec<f64>,
}

impl LayoutBuilder {
    fn new() -> Self {
        Self { perm: Vec::new(), sign: Vec::new() }
    }

    /// A left/right pair that swaps, with the given sign on both sides.
    fn pair(&mut self, sign: f64) {
        let i = self.perm.len();
        self.perm.extend([i + 1, i]);
        self.sign.extend([sign, sign]);
    }

    fn single(&mut self, sign: f64) {
        self.perm.push(self.perm.len());
        self.sign.push(sign);
    }
}

impl MirrorSpec {
    /// Full-body layout with 38 observations and 27 actions: mirrored joint
    /// pairs plus unique entries that are kept or inverted.
    pub fn full_body_layout() -> Self {
        let (keep, inv) = (1.0, -1.0);
        let mut obs = LayoutBuilder::new();
        // shoulder, hip: roll/pitch/yaw pairs
        for _ in 0..2 {
            obs.pair(inv);
            obs.pair(keep);
            obs.pair(inv);
        }
        // waist roll, pitch, yaw
        obs.single(inv);
        obs.single(keep);
        obs.single(inv);
        // ankle roll/pitch, knee, elbow
        obs.pair(inv);
        obs.pair(keep);
        obs.pair(keep);
        obs.pair(keep);
        // foot centre of pressure x, y and force
        obs.pair(keep);
        obs.pair(inv);
        obs.pair(keep);
        // torso linear velocity, angular velocity (roll, pitch, yaw), height, pitch, roll
        for s in [keep, inv, keep, inv, keep, inv, keep, keep, inv] {
            obs.single(s);
        }

        let mut act = LayoutBuilder::new();
        // shoulder roll/pitch/yaw, elbow, hip roll/pitch/yaw, knee, ankle pitch
        for s in [inv, keep, inv, keep, inv, keep, inv, keep, keep] {
            act.pair(s);
        }
        // waist roll, pitch, yaw
        for s in [inv, keep, inv] {
            act.single(s);
        }
        // step length, COM height, K_Φ (2), K_ζ (2)
        for _ in 0..6 {
            act.single(keep);
        }
        Self { obs_perm: obs.perm, obs_sign: obs.sign, act_perm: act.perm, act_sign: act.sign }
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_perm.len()
    }

    pub fn act_dim(&self) -> usize {
        self.act_perm.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_signed_involution("observation", &self.obs_perm, &self.obs_sign)?;
        check_signed_involution("action", &self.act_perm, &self.act_sign)
    }
}

fn check_signed_involution(what: &str, perm: &[usize], sign: &[f64]) -> Result<()> {
    if perm.len() != sign.len() {
        return Err(Error::Config(format!("{what} mirror: permutation and sign tables differ in length")));
    }
    for (i, &p) in perm.iter().enumerate() {
        if p >= perm.len() || perm[p] != i {
            return Err(Error::Config(format!("{what} mirror: index {i} does not map back to itself")));
        }
        if sign[i].abs() != 1.0 || sign[i] * sign[p] != 1.0 {
            return Err(Error::Config(format!("{what} mirror: sign at {i} breaks the involution")));
        }
    }
    Ok(())
}

fn apply(perm: &[usize], sign: &[f64], x: &[f64], what: &'static str) -> Result<Vec<f64>> {
    check_dim(what, perm.len(), x.len())?;
    Ok(perm.iter().zip(sign).map(|(&p, &s)| s * x[p]).collect())
}

/// Reflected observation.
pub fn mirror_state(obs: &[f64], spec: &MirrorSpec) -> Result<Vec<f64>> {
    apply(&spec.obs_perm, &spec.obs_sign, obs, "mirror_state")
}

/// Reflected action.
pub fn mirror_action(act: &[f64], spec: &MirrorSpec) -> Result<Vec<f64>> {
    apply(&spec.act_perm, &spec.act_sign, act, "mirror_action")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub advantage: f64,
    pub value_target: f64,
}

impl Sample {
    pub fn mirrored(&self, spec: &MirrorSpec) -> Result<Sample> {
        Ok(Sample {
            obs: mirror_state(&self.obs, spec)?,
            action: mirror_action(&self.action, spec)?,
            advantage: self.advantage,
            value_target: self.value_target,
        })
    }
}

/// Inserts a reflected copy after selected samples so that the number of
/// copies is `ratio` times the number of originals. A running accumulator
/// picks the samples: with ratio 1/2 every second sample is copied.
pub fn augment_batch(samples: &[Sample], ratio: f64, spec: &MirrorSpec) -> Result<Vec<Sample>> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::Range { what: "symmetry ratio", value: ratio, lo: 0.0, hi: 1.0 });
    }
    let extra = (samples.len() as f64 * ratio).ceil() as usize;
    let mut out = Vec::with_capacity(samples.len() + extra);
    let mut acc = 0.0;
    for s in samples {
        out.push(s.clone());
        acc += ratio;
        if acc >= 1.0 - 1e-9 {
            acc -= 1.0;
            out.push(s.mirrored(spec)?);
        }
    }
    Ok(out)
}

/// Running observation statistics shared between each entry and its
/// reflection, so the normalization itself carries no left/right bias.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedNormStats {
    pub count: f64,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

pub const NORM_EPS: f64 = 1e-8;
pub const NORM_CLIP: f64 = 10.0;

impl SharedNormStats {
    pub fn new(dim: usize) -> Self {
        Self { count: 0.0, sum: vec![0.0; dim], sum_sq: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.sum.len()
    }

    /// Adds `obs` and its reflection.
    pub fn update(&mut self, obs: &[f64], spec: &MirrorSpec) -> Result<()> {
        check_dim("norm stats", self.dim(), obs.len())?;
        let m = mirror_state(obs, spec)?;
        for i in 0..obs.len() {
            self.sum[i] += obs[i] + m[i];
            self.sum_sq[i] += obs[i] * obs[i] + m[i] * m[i];
        }
        self.count += 2.0;
        Ok(())
    }

    pub fn merge(&mut self, other: &SharedNormStats) -> Result<()> {
        check_dim("norm stats merge", self.dim(), other.dim())?;
        self.count += other.count;
        for i in 0..self.dim() {
            self.sum[i] += other.sum[i];
            self.sum_sq[i] += other.sum_sq[i];
        }
        Ok(())
    }

    pub fn mean(&self, i: usize) -> f64 {
        if self.count == 0.0 {
            0.0
        } else {
            self.sum[i] / self.count
        }
    }

    pub fn std(&self, i: usize) -> f64 {
        if self.count == 0.0 {
            return 1.0;
        }
        let mean = self.mean(i);
        (self.sum_sq[i] / self.count - mean * mean).max(0.0).sqrt()
    }

    pub fn normalize(&self, obs: &[f64]) -> Vec<f64> {
        obs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let std = self.std(i);
                ((x - self.mean(i)) / (std * std + NORM_EPS).sqrt()).clamp(-NORM_CLIP, NORM_CLIP)
            })
            .collect()
    }
}

/// Mirrored symmetry index `‖δ − δ′‖₁ / (½(‖δ‖₁ + ‖δ′‖₁))`; zero when both
/// vectors are zero.
pub fn msi(delta: &[f64], delta_prime: &[f64]) -> Result<f64> {
    check_dim("msi", delta.len(), delta_prime.len())?;
    let diff: f64 = delta.iter().zip(delta_prime).map(|(a, b)| (a - b).abs()).sum();
    let n1: f64 = delta.iter().map(|v| v.abs()).sum();
    let n2: f64 = delta_prime.iter().map(|v| v.abs()).sum();
    if n1 + n2 == 0.0 {
        return Ok(0.0);
    }
    // Rounding can push the quotient an ulp past the triangle-inequality bound.
    Ok((diff / (0.5 * (n1 + n2))).min(2.0))
}

/// Mean MSI along a trajectory. `policy` maps an observation to the bounded
/// action it applies; only the first `residual_dim` entries (the residuals)
/// are compared, after reflecting the action taken at the reflected state.
pub fn trajectory_msi<F>(policy: F, states: &[Vec<f64>], spec: &MirrorSpec, residual_dim: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if states.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut total = 0.0;
    for s in states {
        let delta = policy(s);
        let delta_prime = mirror_action(&policy(&mirror_state(s, spec)?), spec)?;
        total += msi(&delta[..residual_dim], &delta_prime[..residual_dim])?;
    }
    Ok(total / states.len() as f64)
}

/// Residual part of the reduced plant's action.
pub const MSI_DIM: usize = RESIDUAL_DIM;
