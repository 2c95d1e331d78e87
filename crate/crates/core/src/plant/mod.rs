//! Reduced-order biped: a linear inverted pendulum with a torso flywheel,
//! rectangular feet and discrete stepping.

pub mod env;
pub mod scenario;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::control::ActuationCommand;
use crate::error::{domain, Result};
use crate::gait::{mirror2, swing_trajectory, Side, Vec3};
use crate::lip::{Vec2, GRAVITY};

pub use env::{StepOutcome, WalkingEnv};
pub use scenario::{
    platform_tilt, sample_terrain, schedule_pushes, PushEvent, ScenarioKind, ScenarioSpec, TiltProcess,
};

pub const OBS_DIM: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantParams {
    pub mass: f64,
    pub flywheel_inertia: f64,
    pub flywheel_damping: f64,
    pub max_torque: f64,
    pub foot_half_extents: [f64; 2],
    pub physics_dt: f64,
    pub control_period: f64,
    /// Natural frequency of the critically damped COM height loop.
    pub height_omega: f64,
    /// Largest horizontal distance between the COM and a landing foot.
    pub max_reach: f64,
    /// Smallest lateral gap between the feet at landing (no crossing).
    pub min_foot_gap: f64,
    /// Ground-slope bias per unit foothold height difference over step length.
    pub terrain_slope_gain: f64,
    pub fall_height: f64,
    pub fall_angle_deg: f64,
    pub fall_distance: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            mass: 31.0,
            flywheel_inertia: 1.2,
            flywheel_damping: 0.5,
            max_torque: 50.0,
            foot_half_extents: [0.09, 0.045],
            physics_dt: 0.002,
            control_period: 0.02,
            height_omega: 20.0,
            max_reach: 0.3,
            min_foot_gap: 0.06,
            terrain_slope_gain: 1.0,
            fall_height: 0.35,
            fall_angle_deg: 60.0,
            fall_distance: 0.6,
        }
    }
}

impl PlantParams {
    pub fn half_extents(&self) -> Vec2 {
        Vec2::new(self.foot_half_extents[0], self.foot_half_extents[1])
    }

    pub fn substeps(&self) -> usize {
        (self.control_period / self.physics_dt).round().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mass > 0.0
            && self.flywheel_inertia > 0.0
            && self.flywheel_damping >= 0.0
            && self.physics_dt > 0.0
            && self.physics_dt <= 0.01
            && self.control_period >= self.physics_dt
            && self.foot_half_extents.iter().all(|&h| h > 0.0)
            && self.max_reach > 0.0;
        if ok {
            Ok(())
        } else {
            Err(crate::error::Error::Config(format!("invalid plant params {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub c: Vec3,
    pub c_dot: Vec3,
    /// (pitch, roll).
    pub phi: Vec2,
    pub phi_dot: Vec2,
    pub support_pos: Vec3,
    pub swing_pos: Vec3,
    pub support_side: Side,
    pub zmp: Vec2,
    pub step_phase: f64,
    /// Duration of the current step as last commanded.
    pub step_duration: f64,
    pub time: f64,
    /// Swing foot position at lift-off.
    pub swing_from: Vec3,
    pub swing_height: f64,
    /// Planned landing for the swing foot; replaced by capture-step overrides.
    pub landing_target: Vec2,
    /// Terrain height under the next landing.
    pub next_terrain_height: f64,
    /// Slope bias acting while on the current foothold, m/s².
    pub ground_bias: Vec2,
}

impl PlantState {
    /// COM height above the support foot.
    pub fn com_height(&self) -> f64 {
        self.c.z - self.support_pos.z
    }

    pub fn support_xy(&self) -> Vec2 {
        self.support_pos.xy()
    }

    /// Reflection through the sagittal plane.
    pub fn mirrored(&self) -> PlantState {
        let m3 = |v: Vec3| Vec3::new(v.x, -v.y, v.z);
        PlantState {
            c: m3(self.c),
            c_dot: m3(self.c_dot),
            phi: Vec2::new(self.phi.x, -self.phi.y),
            phi_dot: Vec2::new(self.phi_dot.x, -self.phi_dot.y),
            support_pos: m3(self.support_pos),
            swing_pos: m3(self.swing_pos),
            support_side: self.support_side.opposite(),
            zmp: mirror2(self.zmp),
            swing_from: m3(self.swing_from),
            landing_target: mirror2(self.landing_target),
            ground_bias: mirror2(self.ground_bias),
            ..*self
        }
    }
}

/// External inputs acting on the plant during one physics step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Disturbance {
    pub force: Vec2,
    /// Platform angles in radians: `[x-axis actuator, y-axis actuator]`.
    pub tilt: [f64; 2],
}

impl Disturbance {
    pub fn mirrored(&self) -> Disturbance {
        Disturbance { force: mirror2(self.force), tilt: [-self.tilt[0], self.tilt[1]] }
    }
}

/// What happened during a physics step besides integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepEvents {
    pub touchdown: bool,
}

/// Advances the plant by `dt` under `cmd`.
pub fn step_dynamics(
    state: &PlantState,
    cmd: &ActuationCommand,
    dt: f64,
    params: &PlantParams,
    disturbance: &Disturbance,
) -> Result<(PlantState, StepEvents)> {
    if !(dt > 0.0 && dt <= 0.01) {
        return Err(domain(format!("physics dt must lie in (0, 0.01], got {dt}")));
    }
    let mut s = *state;
    let m = params.mass;
    let height = s.com_height().max(1e-3);
    let omega2 = GRAVITY / height;

    let support = s.support_xy();
    let half = params.half_extents();
    let zmp = Vec2::new(
        cmd.zmp_cmd.x.clamp(support.x - half.x, support.x + half.x),
        cmd.zmp_cmd.y.clamp(support.y - half.y, support.y + half.y),
    );
    let tau = Vec2::new(
        cmd.flywheel_torque.x.clamp(-params.max_torque, params.max_torque),
        cmd.flywheel_torque.y.clamp(-params.max_torque, params.max_torque),
    );

    // Pitch torque reacts along x, roll torque along y.
    let tilt_bias = Vec2::new(-GRAVITY * disturbance.tilt[1].sin(), -GRAVITY * disturbance.tilt[0].sin());
    let acc_xy = (s.c.xy() - zmp) * omega2 - tau / (m * height)
        + disturbance.force / m
        + tilt_bias
        + s.ground_bias;
    let target_z = s.support_pos.z + cmd.commanded_c_z;
    let wz = params.height_omega;
    let acc_z = wz * wz * (target_z - s.c.z) - 2.0 * wz * s.c_dot.z;

    s.c_dot += Vec3::new(acc_xy.x, acc_xy.y, acc_z) * dt;
    s.c += s.c_dot * dt;

    let phi_acc = (tau - s.phi_dot * params.flywheel_damping) / params.flywheel_inertia;
    s.phi_dot += phi_acc * dt;
    s.phi += s.phi_dot * dt;

    s.zmp = zmp;
    s.time += dt;
    s.step_phase += dt;
    s.step_duration = cmd.commanded_t;
    if let Some(target) = cmd.next_footstep_override {
        s.landing_target = target;
    }

    let mut events = StepEvents::default();
    if s.step_phase >= s.step_duration {
        touchdown(&mut s, params);
        events.touchdown = true;
    } else {
        let to = Vec3::new(s.landing_target.x, s.landing_target.y, s.next_terrain_height);
        let t = s.step_phase.min(s.step_duration);
        s.swing_pos = swing_trajectory(s.swing_from, to, s.swing_height, 0.0, s.step_duration, t)?;
    }
    Ok((s, events))
}

/// Kinematically feasible landing closest to `target`.
pub fn feasible_landing(target: Vec2, com: Vec2, support: Vec2, landing_side: Side, params: &PlantParams) -> Vec2 {
    let mut p = target;
    let sign = landing_side.sign();
    if sign * (p.y - support.y) < params.min_foot_gap {
        p.y = support.y + sign * params.min_foot_gap;
    }
    let d = p - com;
    let n = d.norm();
    if n > params.max_reach {
        p = com + d * (params.max_reach / n);
        if sign * (p.y - support.y) < params.min_foot_gap {
            p.y = support.y + sign * params.min_foot_gap;
        }
    }
    p
}

fn touchdown(s: &mut PlantState, params: &PlantParams) {
    let old_support = s.support_pos;
    let landing_side = s.support_side.opposite();
    let xy = feasible_landing(s.landing_target, s.c.xy(), old_support.xy(), landing_side, params);
    let new_support = Vec3::new(xy.x, xy.y, s.next_terrain_height);

    let step = xy - old_support.xy();
    let len = step.norm();
    s.ground_bias = if len > 1e-9 {
        let slope = (new_support.z - old_support.z) / len;
        step / len * (-GRAVITY * params.terrain_slope_gain * slope)
    } else {
        Vec2::zeros()
    };

    s.swing_pos = old_support;
    s.swing_from = old_support;
    s.support_pos = new_support;
    s.support_side = landing_side;
    s.step_phase = 0.0;
    s.zmp = xy;
}

/// Observation vector, support-relative:
/// `[c−support (3), ċ (3), φ (pitch, roll), φ̇ (pitch, roll), zmp−support (2),
///   swing−support (2), phase / T, support side]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn build_observation(state: &PlantState) -> Observation {
    let rel = state.c - state.support_pos;
    let zmp = state.zmp - state.support_xy();
    let swing = state.swing_pos.xy() - state.support_xy();
    Observation([
        rel.x,
        rel.y,
        rel.z,
        state.c_dot.x,
        state.c_dot.y,
        state.c_dot.z,
        state.phi.x,
        state.phi.y,
        state.phi_dot.x,
        state.phi_dot.y,
        zmp.x,
        zmp.y,
        swing.x,
        swing.y,
        state.step_phase / state.step_duration,
        state.support_side.sign(),
    ])
}

/// Multiplies every entry by an independent factor drawn from `U(1, max_factor)`.
pub fn apply_obs_noise<R: Rng>(obs: &Observation, max_factor: f64, rng: &mut R) -> Result<Observation> {
    if !(max_factor >= 1.0) {
        return Err(domain(format!("noise factor must be at least 1, got {max_factor}")));
    }
    let mut out = *obs;
    if max_factor > 1.0 {
        for v in out.0.iter_mut() {
            *v *= rng.random_range(1.0..=max_factor);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Alive,
    Fell,
    Timeout,
}

pub fn check_termination(state: &PlantState, params: &PlantParams, episode_cap: f64) -> Termination {
    let limit = params.fall_angle_deg.to_radians();
    let fell = state.com_height() < params.fall_height
        || state.phi.x.abs() > limit
        || state.phi.y.abs() > limit
        || (state.c.xy() - state.support_xy()).norm() > params.fall_distance
        || !state.c.iter().all(|v| v.is_finite());
    if fell {
        Termination::Fell
    } else if state.time >= episode_cap - 1e-9 {
        Termination::Timeout
    } else {
        Termination::Alive
    }
}
