//! Closed-loop tracking: torso regulation, DCM tracking, ZMP saturation and
//! capture-step adjustment, with learned residuals merged into the command.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gait::GaitPlan;
use crate::lip::{capture_step, dcm_of, ComState, DcmPoint, PendulumModel, Vec2};

/// Number of residual channels (everything except the gains).
pub const RESIDUAL_DIM: usize = 8;
/// Number of gain outputs: `K_Φ` (pitch, roll) and `K_ζ` (x, y).
pub const GAIN_DIM: usize = 4;
pub const ACTION_DIM: usize = RESIDUAL_DIM + GAIN_DIM;

/// Indices into the residual vector.
pub mod idx {
    pub const ZMP_X: usize = 0;
    pub const ZMP_Y: usize = 1;
    pub const TAU_PITCH: usize = 2;
    pub const TAU_ROLL: usize = 3;
    pub const STEP_X: usize = 4;
    pub const STEP_Y: usize = 5;
    pub const COM_Z: usize = 6;
    pub const STEP_T: usize = 7;
}

/// Controller gains. Both vectors are ordered (pitch, roll) and (x, y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gains {
    pub k_phi: [f64; 2],
    pub k_zeta: [f64; 2],
}

impl Default for Gains {
    fn default() -> Self {
        Self { k_phi: [6.0, 6.0], k_zeta: [3.0, 3.0] }
    }
}

impl Gains {
    pub fn validate(&self) -> Result<()> {
        if self.k_phi.iter().chain(self.k_zeta.iter()).all(|&k| k > 0.0 && k.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidGains(format!("{self:?}")))
        }
    }

    pub fn k_phi(&self) -> Vec2 {
        Vec2::new(self.k_phi[0], self.k_phi[1])
    }

    pub fn k_zeta(&self) -> Vec2 {
        Vec2::new(self.k_zeta[0], self.k_zeta[1])
    }
}

/// Per-channel residual bound `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Saturation {
    pub zmp: f64,
    pub torque: f64,
    pub step: f64,
    pub com_height: f64,
    pub step_time: f64,
}

impl Default for Saturation {
    fn default() -> Self {
        Self { zmp: 0.03, torque: 20.0, step: 0.05, com_height: 0.05, step_time: 0.1 }
    }
}

impl Saturation {
    pub fn vector(&self) -> [f64; RESIDUAL_DIM] {
        [
            self.zmp,
            self.zmp,
            self.torque,
            self.torque,
            self.step,
            self.step,
            self.com_height,
            self.step_time,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualAction {
    pub delta: [f64; RESIDUAL_DIM],
    pub gains_out: Gains,
}

impl ResidualAction {
    pub fn zero(gains: Gains) -> Self {
        Self { delta: [0.0; RESIDUAL_DIM], gains_out: gains }
    }

    pub fn delta_zmp(&self) -> Vec2 {
        Vec2::new(self.delta[idx::ZMP_X], self.delta[idx::ZMP_Y])
    }

    pub fn torque(&self) -> Vec2 {
        Vec2::new(self.delta[idx::TAU_PITCH], self.delta[idx::TAU_ROLL])
    }

    pub fn delta_step(&self) -> Vec2 {
        Vec2::new(self.delta[idx::STEP_X], self.delta[idx::STEP_Y])
    }

    pub fn within(&self, s: &Saturation) -> bool {
        self.delta.iter().zip(s.vector()).all(|(d, s)| d.abs() <= s)
    }

    /// Maps an unbounded policy output through `tanh`: residual `i` becomes
    /// `S_i·tanh(u_i)`, each gain `centre + span·tanh(u)`.
    pub fn from_raw(u: &[f64], config: &ControllerConfig) -> Result<Self> {
        check_dim("raw action", ACTION_DIM, u.len())?;
        let s = config.saturation.vector();
        let mut delta = [0.0; RESIDUAL_DIM];
        for i in 0..RESIDUAL_DIM {
            delta[i] = s[i] * u[i].tanh();
        }
        let g = &u[RESIDUAL_DIM..];
        let (c, span) = (config.gains, config.gain_span);
        let gains_out = Gains {
            k_phi: [c.k_phi[0] + span.k_phi[0] * g[0].tanh(), c.k_phi[1] + span.k_phi[1] * g[1].tanh()],
            k_zeta: [c.k_zeta[0] + span.k_zeta[0] * g[2].tanh(), c.k_zeta[1] + span.k_zeta[1] * g[3].tanh()],
        };
        Ok(Self { delta, gains_out })
    }

    /// Bounded action vector: the residuals followed by the gains.
    pub fn to_vec(&self) -> Vec<f64> {
        let g = &self.gains_out;
        let mut v = self.delta.to_vec();
        v.extend([g.k_phi[0], g.k_phi[1], g.k_zeta[0], g.k_zeta[1]]);
        v
    }

    /// Neural network influence: mean of `|δ_i| / S_i` over the residuals.
    pub fn influence(&self, s: &Saturation) -> f64 {
        self.delta.iter().zip(s.vector()).map(|(d, s)| d.abs() / s).sum::<f64>() / RESIDUAL_DIM as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuationCommand {
    pub zmp_cmd: Vec2,
    /// (pitch, roll), N·m.
    pub flywheel_torque: Vec2,
    pub next_footstep_override: Option<Vec2>,
    pub commanded_c_z: f64,
    pub commanded_t: f64,
    pub zmp_saturated: bool,
}

/// Fixed controller settings that are not learned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub gains: Gains,
    pub saturation: Saturation,
    /// Half-width of the range each learned gain may move around `gains`.
    pub gain_span: Gains,
    /// Velocity gain turning the torso rate command into flywheel torque.
    pub torque_rate_gain: f64,
    pub step_time_min: f64,
    pub step_time_max: f64,
    /// Recompute the capture step every cycle, not only under saturation.
    pub force_step_adjust: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            gains: Gains::default(),
            saturation: Saturation::default(),
            gain_span: Gains { k_phi: [4.0, 4.0], k_zeta: [2.0, 2.0] },
            torque_rate_gain: 10.0,
            step_time_min: 0.2,
            step_time_max: 1.0,
            force_step_adjust: false,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        self.gains.validate()?;
        let spans_ok = self
            .gain_span
            .k_phi
            .iter()
            .zip(self.gains.k_phi)
            .chain(self.gain_span.k_zeta.iter().zip(self.gains.k_zeta))
            .all(|(&span, k)| span >= 0.0 && span < k);
        let s = self.saturation.vector();
        if !spans_ok
            || s.iter().any(|&v| !(v > 0.0))
            || !(self.step_time_min > 0.0 && self.step_time_min < self.step_time_max)
        {
            return Err(Error::Config(format!("invalid controller config {self:?}")));
        }
        Ok(())
    }
}

/// Measured plant quantities the controller consumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorReadout {
    pub time: f64,
    pub step_phase: f64,
    pub com: ComState,
    /// (pitch, roll).
    pub phi: Vec2,
    pub phi_dot: Vec2,
    pub support: Vec2,
    pub foot_half_extents: Vec2,
    pub flywheel_inertia: f64,
}

/// Torso rate command `φ̇_d − K_Φ(φ − φ_d)`.
pub fn torso_pd(phi: Vec2, phi_dot_d: Vec2, phi_d: Vec2, k_phi: Vec2) -> Vec2 {
    phi_dot_d - k_phi.component_mul(&(phi - phi_d))
}

/// ZMP that makes the pendulum realize `ζ̇ = ζ̇_d − K_ζ(ζ − ζ_d)`.
pub fn dcm_tracker(
    zeta: DcmPoint,
    zeta_d: DcmPoint,
    zeta_d_dot: Vec2,
    k_zeta: Vec2,
    omega: f64,
) -> Result<Vec2> {
    if !(omega > 0.0) {
        return Err(crate::error::domain(format!("omega must be positive, got {omega}")));
    }
    let zeta_dot_cmd = zeta_d_dot - k_zeta.component_mul(&(zeta.zeta - zeta_d.zeta));
    Ok(zeta.zeta - zeta_dot_cmd / omega)
}

/// Clamps the ZMP to the rectangular support polygon (a closed set).
pub fn saturate_zmp(zmp_cmd: Vec2, support_center: Vec2, half_extents: Vec2) -> (Vec2, bool) {
    let lo = support_center - half_extents;
    let hi = support_center + half_extents;
    let clamped = Vec2::new(zmp_cmd.x.clamp(lo.x, hi.x), zmp_cmd.y.clamp(lo.y, hi.y));
    let saturated = clamped != zmp_cmd;
    (clamped, saturated)
}

/// Capture-step override plus the learned step offset, only when the
/// tracker cannot realize its ZMP.
pub fn maybe_adjust_step(
    zeta: DcmPoint,
    current_foot: Vec2,
    t: f64,
    step_duration: f64,
    omega: f64,
    saturated: bool,
    delta_step: Vec2,
) -> Result<Option<Vec2>> {
    if !saturated {
        return Ok(None);
    }
    Ok(Some(capture_step(current_foot, zeta, omega, t, step_duration)? + delta_step))
}

/// One pass of the analytical controller with residuals merged in.
pub fn control_cycle(
    sensors: &SensorReadout,
    plan: &GaitPlan,
    residual: &ResidualAction,
    model: &PendulumModel,
    config: &ControllerConfig,
) -> Result<ActuationCommand> {
    let gains = residual.gains_out;
    gains.validate()?;
    let omega = model.omega();

    let step_end = plan.origin + plan.footsteps[0].t_f;
    let t_ref = sensors.time.clamp(plan.origin, step_end);
    let zeta = dcm_of(&sensors.com, omega)?;
    let zeta_d = DcmPoint::new(plan.dcm_ref(t_ref)?);
    let zeta_d_dot = plan.dcm_ref_dot(t_ref)?;

    let zmp = dcm_tracker(zeta, zeta_d, zeta_d_dot, gains.k_zeta(), omega)? + residual.delta_zmp();
    let (zmp_cmd, saturated) = saturate_zmp(zmp, sensors.support, sensors.foot_half_extents);

    let commanded_t = (plan.config.step_duration + residual.delta[idx::STEP_T])
        .clamp(config.step_time_min, config.step_time_max);
    let phase = sensors.step_phase.min(commanded_t);
    let next_footstep_override = maybe_adjust_step(
        zeta,
        sensors.support,
        phase,
        commanded_t,
        omega,
        saturated || config.force_step_adjust,
        residual.delta_step(),
    )?;

    let rate = torso_pd(sensors.phi, Vec2::zeros(), Vec2::zeros(), gains.k_phi());
    let flywheel_torque =
        (rate - sensors.phi_dot) * (sensors.flywheel_inertia * config.torque_rate_gain) + residual.torque();

    Ok(ActuationCommand {
        zmp_cmd,
        flywheel_torque,
        next_footstep_override,
        commanded_c_z: plan.config.com_height + residual.delta[idx::COM_Z],
        commanded_t,
        zmp_saturated: saturated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait::{GaitConfig, Side, Stance};
    use approx::assert_abs_diff_eq;

    const W: f64 = 3.1321;

    #[test]
    fn torso_pd_examples() {
        let k = Vec2::new(5.0, 5.0);
        let phi = Vec2::new(0.1, -0.2);
        assert_eq!(torso_pd(phi, Vec2::zeros(), phi, k), Vec2::zeros());
        let out = torso_pd(Vec2::new(0.1, 0.0), Vec2::zeros(), Vec2::zeros(), k);
        assert_abs_diff_eq!(out.x, -0.5, epsilon = 1e-15);
        assert_eq!(out.y, 0.0);
        let flipped = torso_pd(Vec2::new(-0.1, 0.0), Vec2::zeros(), Vec2::zeros(), k);
        assert_eq!(flipped, -out);
    }

    #[test]
    fn tracker_examples() {
        let p_ref = Vec2::new(0.0, 0.1);
        let zd = Vec2::new(0.02, 0.05);
        let zd_dot = (zd - p_ref) * W;
        let p = dcm_tracker(DcmPoint::new(zd), DcmPoint::new(zd), zd_dot, Vec2::new(3.0, 3.0), W).unwrap();
        assert_abs_diff_eq!((p - p_ref).norm(), 0.0, epsilon = 1e-15);

        let p = dcm_tracker(
            DcmPoint::new(Vec2::new(0.05, 0.0)),
            DcmPoint::new(Vec2::zeros()),
            Vec2::zeros(),
            Vec2::new(4.0, 4.0),
            W,
        )
        .unwrap();
        assert_abs_diff_eq!(p.x, 0.11386, epsilon = 1e-5);
        assert!(dcm_tracker(DcmPoint::new(zd), DcmPoint::new(zd), zd_dot, Vec2::new(3.0, 3.0), 0.0).is_err());
    }

    #[test]
    fn tracker_monotone_in_gain() {
        let z = DcmPoint::new(Vec2::new(0.03, -0.02));
        let mut last = 0.0;
        for k in 1..20 {
            let p = dcm_tracker(z, DcmPoint::new(Vec2::zeros()), Vec2::zeros(), Vec2::repeat(k as f64), W).unwrap();
            let d = (p - z.zeta).norm();
            assert!(d > last);
            last = d;
        }
    }

    #[test]
    fn saturation_examples() {
        let c = Vec2::new(0.0, 0.1);
        let h = Vec2::new(0.1, 0.05);
        assert_eq!(saturate_zmp(Vec2::new(0.02, 0.12), c, h), (Vec2::new(0.02, 0.12), false));
        let (p, s) = saturate_zmp(Vec2::new(0.2, 0.1), c, h);
        assert!(s);
        assert_eq!(p.x, 0.1);
        let edge = c + h;
        assert_eq!(saturate_zmp(edge, c, h), (edge, false));
    }

    #[test]
    fn step_adjust_examples() {
        let z = DcmPoint::new(Vec2::new(0.1, 0.0));
        assert_eq!(maybe_adjust_step(z, Vec2::zeros(), 0.2, 0.5, W, false, Vec2::zeros()).unwrap(), None);
        let f = Vec2::new(0.0, 0.1);
        let ds = Vec2::new(0.01, -0.02);
        assert_eq!(maybe_adjust_step(DcmPoint::new(f), f, 0.2, 0.5, W, true, ds).unwrap(), Some(f + ds));
        let out = maybe_adjust_step(z, Vec2::zeros(), 0.2, 0.5, W, true, Vec2::new(0.02, 0.0)).unwrap().unwrap();
        assert_abs_diff_eq!(out.x, 0.27590, epsilon = 1e-5);
    }

    fn on_reference_setup(t: f64) -> (SensorReadout, GaitPlan, PendulumModel) {
        let cfg = GaitConfig::default();
        let stance =
            Stance { support: Vec2::new(0.0, 0.1), swing: Vec2::new(0.0, -0.1), support_side: Side::Left };
        let plan = GaitPlan::new(&cfg, &stance, &ComState::new(Vec2::zeros(), Vec2::zeros()), 0.0).unwrap();
        let model = PendulumModel::new(crate::lip::GRAVITY, cfg.com_height).unwrap();
        let sensors = SensorReadout {
            time: t,
            step_phase: t,
            com: ComState::new(plan.com_ref(t).unwrap(), plan.com_ref_dot(t).unwrap()),
            phi: Vec2::zeros(),
            phi_dot: Vec2::zeros(),
            support: stance.support,
            foot_half_extents: Vec2::new(0.09, 0.045),
            flywheel_inertia: 1.2,
        };
        (sensors, plan, model)
    }

    #[test]
    fn zero_residual_on_reference_is_pure_analytical() {
        let (sensors, plan, model) = on_reference_setup(0.2);
        let cfg = ControllerConfig::default();
        let cmd = control_cycle(&sensors, &plan, &ResidualAction::zero(cfg.gains), &model, &cfg).unwrap();
        assert!(!cmd.zmp_saturated);
        assert_eq!(cmd.next_footstep_override, None);
        assert_abs_diff_eq!((cmd.zmp_cmd - sensors.support).norm(), 0.0, epsilon = 1e-12);
        assert_eq!(cmd.commanded_c_z, 0.6);
        assert_eq!(cmd.commanded_t, 0.5);
        assert_eq!(cmd.flywheel_torque, Vec2::zeros());

        // Same composition done by hand, compared bit for bit.
        let omega = model.omega();
        let zeta = dcm_of(&sensors.com, omega).unwrap();
        let p = dcm_tracker(
            zeta,
            DcmPoint::new(plan.dcm_ref(0.2).unwrap()),
            plan.dcm_ref_dot(0.2).unwrap(),
            cfg.gains.k_zeta(),
            omega,
        )
        .unwrap();
        let (p, _) = saturate_zmp(p, sensors.support, sensors.foot_half_extents);
        assert_eq!(cmd.zmp_cmd, p);
    }

    #[test]
    fn zero_gains_are_rejected() {
        let (sensors, plan, model) = on_reference_setup(0.1);
        let gains = Gains { k_phi: [0.0, 0.0], k_zeta: [0.0, 0.0] };
        let err = control_cycle(&sensors, &plan, &ResidualAction::zero(gains), &model, &ControllerConfig::default());
        assert!(matches!(err, Err(Error::InvalidGains(_))));
    }

    #[test]
    fn step_time_residual_is_clamped() {
        let (sensors, plan, model) = on_reference_setup(0.1);
        let cfg = ControllerConfig { step_time_max: 0.55, ..Default::default() };
        let mut r = ResidualAction::zero(cfg.gains);
        r.delta[idx::STEP_T] = 0.1;
        let cmd = control_cycle(&sensors, &plan, &r, &model, &cfg).unwrap();
        assert_eq!(cmd.commanded_t, 0.55);
    }

    #[test]
    fn config_validation() {
        assert!(ControllerConfig::default().validate().is_ok());
        let mut cfg = ControllerConfig::default();
        cfg.gain_span.k_zeta = [5.0, 5.0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn raw_action_mapping() {
        let cfg = ControllerConfig::default();
        let r = ResidualAction::from_raw(&[0.0; ACTION_DIM], &cfg).unwrap();
        assert_eq!(r, ResidualAction::zero(cfg.gains));
        assert_eq!(r.influence(&cfg.saturation), 0.0);

        let r = ResidualAction::from_raw(&[50.0; ACTION_DIM], &cfg).unwrap();
        assert!(r.within(&cfg.saturation));
        assert!((r.influence(&cfg.saturation) - 1.0).abs() < 1e-12);
        assert!((r.gains_out.k_phi[0] - 10.0).abs() < 1e-12);
        assert!((r.gains_out.k_zeta[1] - 5.0).abs() < 1e-12);

        let r = ResidualAction::from_raw(&[-50.0; ACTION_DIM], &cfg).unwrap();
        assert!(r.gains_out.validate().is_ok());
        assert_eq!(r.to_vec().len(), ACTION_DIM);
        assert!(ResidualAction::from_raw(&[0.0; 5], &cfg).is_err());
    }
}
