//! Closed-loop walking environment: plant, planner and analytical
//! controller stepped together at the policy rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::{sample_terrain, schedule_pushes, PushEvent, ScenarioSpec, TiltProcess};
use super::{
    build_observation, check_termination, step_dynamics, Disturbance, Observation, PlantParams, PlantState,
    Termination,
};
use crate::control::{control_cycle, ActuationCommand, ControllerConfig, ResidualAction, SensorReadout};
use crate::error::{Error, Result};
use crate::gait::{mirror2, GaitConfig, GaitPlan, Side, Stance, Vec3};
use crate::lip::{ComState, PendulumModel, Vec2, GRAVITY};

const PUSH_STREAM: u64 = 1;
const TERRAIN_STREAM: u64 = 2;
const TILT_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub termination: Termination,
    pub touchdowns: usize,
    pub saturated: bool,
}

#[derive(Debug, Clone)]
pub struct WalkingEnv {
    pub params: PlantParams,
    pub scenario: ScenarioSpec,
    pub gait: GaitConfig,
    pub controller: ControllerConfig,
    pub episode_cap: f64,
    state: PlantState,
    plan: GaitPlan,
    pushes: Vec<PushEvent>,
    tilt: TiltProcess,
    seed_rng: ChaCha8Rng,
    push_rng: ChaCha8Rng,
    terrain_rng: ChaCha8Rng,
    tilt_rng: ChaCha8Rng,
    last_cmd: Option<ActuationCommand>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl WalkingEnv {
    /// Builds an environment; episode seeds are drawn from `seed`.
    pub fn new(
        params: PlantParams,
        scenario: ScenarioSpec,
        gait: GaitConfig,
        controller: ControllerConfig,
        episode_cap: f64,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        scenario.validate()?;
        gait.validate()?;
        controller.validate()?;
        let (state, plan) = Self::initial(&params, &gait)?;
        let mut env = Self {
            params,
            scenario,
            gait,
            controller,
            episode_cap,
            state,
            plan,
            pushes: Vec::new(),
            tilt: TiltProcess::new(scenario.tilt.resample_period),
            seed_rng: ChaCha8Rng::seed_from_u64(seed),
            push_rng: stream(seed, PUSH_STREAM),
            terrain_rng: stream(seed, TERRAIN_STREAM),
            tilt_rng: stream(seed, TILT_STREAM),
            last_cmd: None,
        };
        env.reset()?;
        Ok(env)
    }

    /// Neutral stance on the reference: left foot supporting, COM between
    /// the feet and moving with the planned velocity.
    fn initial(params: &PlantParams, gait: &GaitConfig) -> Result<(PlantState, GaitPlan)> {
        let half = gait.stride_y * 0.5;
        let stance = Stance { support: Vec2::new(0.0, half), swing: Vec2::new(0.0, -half), support_side: Side::Left };
        let plan = GaitPlan::new(gait, &stance, &ComState::new(Vec2::zeros(), Vec2::zeros()), 0.0)?;
        let c = plan.com_ref(0.0)?;
        let c_dot = plan.com_ref_dot(0.0)?;
        let next = plan.footsteps[1].pos;
        let state = PlantState {
            c: Vec3::new(c.x, c.y, gait.com_height),
            c_dot: Vec3::new(c_dot.x, c_dot.y, 0.0),
            phi: Vec2::zeros(),
            phi_dot: Vec2::zeros(),
            support_pos: Vec3::new(stance.support.x, stance.support.y, 0.0),
            swing_pos: Vec3::new(stance.swing.x, stance.swing.y, 0.0),
            support_side: Side::Left,
            zmp: stance.support,
            step_phase: 0.0,
            step_duration: gait.step_duration,
            time: 0.0,
            swing_from: Vec3::new(stance.swing.x, stance.swing.y, 0.0),
            swing_height: gait.swing_height,
            landing_target: next,
            next_terrain_height: 0.0,
            ground_bias: Vec2::zeros(),
        };
        let _ = params;
        Ok((state, plan))
    }

    /// Starts a new episode with fresh disturbance streams.
    pub fn reset(&mut self) -> Result<()> {
        let episode_seed: u64 = self.seed_rng.random();
        self.reset_with_seed(episode_seed)
    }

    pub fn reset_with_seed(&mut self, episode_seed: u64) -> Result<()> {
        let (state, plan) = Self::initial(&self.params, &self.gait)?;
        self.state = state;
        self.plan = plan;
        self.push_rng = stream(episode_seed, PUSH_STREAM);
        self.terrain_rng = stream(episode_seed, TERRAIN_STREAM);
        self.tilt_rng = stream(episode_seed, TILT_STREAM);
        let p = &self.scenario.push;
        self.pushes = if p.enabled {
            schedule_pushes(&mut self.push_rng, p.interval, p.force, p.duration, self.episode_cap)
        } else {
            Vec::new()
        };
        self.tilt = TiltProcess::new(self.scenario.tilt.resample_period);
        self.state.next_terrain_height = sample_terrain(&mut self.terrain_rng, self.scenario.terrain_amplitude)?;
        self.last_cmd = None;
        Ok(())
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn plan(&self) -> &GaitPlan {
        &self.plan
    }

    pub fn pushes(&self) -> &[PushEvent] {
        &self.pushes
    }

    pub fn set_pushes(&mut self, pushes: Vec<PushEvent>) {
        self.pushes = pushes;
    }

    pub fn last_command(&self) -> Option<&ActuationCommand> {
        self.last_cmd.as_ref()
    }

    pub fn observation(&self) -> Observation {
        build_observation(&self.state)
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    /// Overwrites the plant state and replans from it, as at a touchdown.
    pub fn set_state(&mut self, state: PlantState) -> Result<()> {
        self.state = state;
        self.plan = self.replan_at(state.time - state.step_phase, &state)?;
        Ok(())
    }

    fn replan_at(&self, origin: f64, s: &PlantState) -> Result<GaitPlan> {
        let stance = Stance { support: s.support_xy(), swing: s.swing_from.xy(), support_side: s.support_side };
        let c = ComState::new(s.c.xy(), s.c_dot.xy());
        GaitPlan::new(&self.gait, &stance, &c, origin)
    }

    fn disturbance(&mut self) -> Disturbance {
        let t = self.state.time;
        let force = self
            .pushes
            .iter()
            .filter(|p| p.active(t))
            .fold(Vec2::zeros(), |acc, p| acc + p.force_vector());
        let tilt = if self.scenario.tilt.enabled {
            self.tilt.update(&mut self.tilt_rng, t, self.state.c.xy(), &self.scenario.tilt);
            let a = self.tilt.angles(t);
            [a[0].to_radians(), a[1].to_radians()]
        } else {
            [0.0; 2]
        };
        Disturbance { force, tilt }
    }

    fn sensors(&self) -> SensorReadout {
        let s = &self.state;
        SensorReadout {
            time: s.time,
            step_phase: s.step_phase,
            com: ComState::new(s.c.xy(), s.c_dot.xy()),
            phi: s.phi,
            phi_dot: s.phi_dot,
            support: s.support_xy(),
            foot_half_extents: self.params.half_extents(),
            flywheel_inertia: self.params.flywheel_inertia,
        }
    }

    /// Advances one control period with `residual` held constant.
    pub fn step(&mut self, residual: &ResidualAction) -> Result<StepOutcome> {
        let dt = self.params.physics_dt;
        let mut touchdowns = 0;
        let mut saturated = false;
        let mut termination = Termination::Alive;
        for _ in 0..self.params.substeps() {
            let disturbance = self.disturbance();
            let model = PendulumModel::new(GRAVITY, self.state.com_height().max(0.05))?;
            let cmd = control_cycle(&self.sensors(), &self.plan, residual, &model, &self.controller)?;
            saturated |= cmd.zmp_saturated;
            let (next, events) = step_dynamics(&self.state, &cmd, dt, &self.params, &disturbance)?;
            self.state = next;
            self.last_cmd = Some(cmd);
            if events.touchdown {
                touchdowns += 1;
                self.plan = self.replan_at(self.state.time, &self.state)?;
                self.state.landing_target = self.plan.footsteps[1].pos;
                self.state.next_terrain_height =
                    sample_terrain(&mut self.terrain_rng, self.scenario.terrain_amplitude)?;
            }
            termination = check_termination(&self.state, &self.params, self.episode_cap);
            if termination != Termination::Alive {
                break;
            }
        }
        if self.state.c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("plant state".into()));
        }
        Ok(StepOutcome { termination, touchdowns, saturated })
    }

    /// The environment reflected through the sagittal plane, including its
    /// plan and scheduled pushes. Random streams are shared unchanged.
    pub fn mirrored(&self) -> Result<WalkingEnv> {
        let mut env = self.clone();
        env.state = self.state.mirrored();
        env.plan = self.plan.mirrored()?;
        env.pushes = self
            .pushes
            .iter()
            .map(|p| PushEvent { direction: mirror2(p.direction), ..*p })
            .collect();
        env.tilt.from[0] = -env.tilt.from[0];
        env.tilt.to[0] = -env.tilt.to[0];
        Ok(env)
    }
}
