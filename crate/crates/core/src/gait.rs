//! Online planners: footsteps, step timing, swing-foot splines and the
//! COM/DCM references that the tracker follows.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lip::{natural_frequency, ComSegment, ComState, Vec2, GRAVITY};

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// `+1` for left, `-1` for right.
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn from_sign(sign: f64) -> Side {
        if sign >= 0.0 {
            Side::Left
        } else {
            Side::Right
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaitConfig {
    pub stride_x: f64,
    /// Lateral distance between the feet.
    pub stride_y: f64,
    pub step_duration: f64,
    pub swing_height: f64,
    pub com_height: f64,
    pub n_steps: usize,
}

impl Default for GaitConfig {
    fn default() -> Self {
        Self {
            stride_x: 0.0,
            stride_y: 0.2,
            step_duration: 0.5,
            swing_height: 0.04,
            com_height: 0.6,
            n_steps: 2,
        }
    }
}

impl GaitConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.step_duration > 0.0
            && self.swing_height >= 0.0
            && self.com_height > 0.0
            && self.stride_y > 0.0
            && self.stride_x.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid gait config {self:?}")))
        }
    }

    pub fn omega(&self) -> Result<f64> {
        natural_frequency(GRAVITY, self.com_height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footstep {
    pub pos: Vec2,
    pub side: Side,
    pub t_0: f64,
    pub t_f: f64,
}

/// Current foot configuration: the foot bearing weight and the free foot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stance {
    pub support: Vec2,
    pub swing: Vec2,
    pub support_side: Side,
}

impl Stance {
    pub fn mirrored(&self) -> Stance {
        Stance {
            support: mirror2(self.support),
            swing: mirror2(self.swing),
            support_side: self.support_side.opposite(),
        }
    }
}

pub(crate) fn mirror2(v: Vec2) -> Vec2 {
    Vec2::new(v.x, -v.y)
}

/// Generates `n_steps` new footsteps, each placed `stride_x` ahead of and
/// `stride_y` beside the previous one, starting with the current swing foot.
pub fn plan_footsteps(config: &GaitConfig, stance: &Stance) -> Result<Vec<Footstep>> {
    if config.n_steps == 0 {
        return Err(Error::EmptyPlan("n_steps is zero"));
    }
    if stance.support == stance.swing {
        return Err(domain("support and swing feet coincide"));
    }
    let mut steps = Vec::with_capacity(config.n_steps);
    let mut prev = stance.support;
    let mut side = stance.support_side.opposite();
    for _ in 0..config.n_steps {
        let pos = prev + Vec2::new(config.stride_x, side.sign() * config.stride_y);
        steps.push(Footstep { pos, side, t_0: 0.0, t_f: 0.0 });
        prev = pos;
        side = side.opposite();
    }
    Ok(steps)
}

pub fn assign_step_times(footsteps: &[Footstep], step_duration: f64) -> Result<Vec<Footstep>> {
    if !(step_duration > 0.0) {
        return Err(domain(format!("step duration must be positive, got {step_duration}")));
    }
    Ok(footsteps
        .iter()
        .enumerate()
        .map(|(k, f)| Footstep {
            t_0: k as f64 * step_duration,
            t_f: (k + 1) as f64 * step_duration,
            ..*f
        })
        .collect())
}

fn smoothstep(s: f64) -> f64 {
    s * s * (3.0 - 2.0 * s)
}

/// Swing-foot position. Horizontal motion is a cubic with zero end
/// velocities; the vertical lift is two cubics meeting at the apex.
pub fn swing_trajectory(from: Vec3, to: Vec3, z_max: f64, t_0: f64, t_f: f64, t: f64) -> Result<Vec3> {
    if !(t_0 < t_f) {
        return Err(domain("swing needs t_0 < t_f"));
    }
    if t < t_0 || t > t_f {
        return Err(Error::Range { what: "t", value: t, lo: t_0, hi: t_f });
    }
    if t == t_f {
        return Ok(to);
    }
    let s = (t - t_0) / (t_f - t_0);
    let mut out = from + (to - from) * smoothstep(s);
    let lift = if s <= 0.5 { smoothstep(2.0 * s) } else { smoothstep(2.0 * (1.0 - s)) };
    out.z += z_max * lift;
    Ok(out)
}

/// Piecewise COM reference, one boundary-value segment per support interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ComReference {
    pub segments: Vec<ComSegment>,
}

impl ComReference {
    pub fn start(&self) -> f64 {
        self.segments[0].t0
    }

    pub fn end(&self) -> f64 {
        self.segments[self.segments.len() - 1].tf
    }

    /// Segment active at `t`; junction times belong to the later segment.
    pub fn segment_at(&self, t: f64) -> Result<&ComSegment> {
        if t < self.start() || t > self.end() {
            return Err(Error::Range { what: "t", value: t, lo: self.start(), hi: self.end() });
        }
        Ok(self
            .segments
            .iter()
            .find(|s| t < s.tf)
            .unwrap_or_else(|| &self.segments[self.segments.len() - 1]))
    }

    pub fn position(&self, t: f64) -> Result<Vec2> {
        self.segment_at(t)?.position(t)
    }

    pub fn velocity(&self, t: f64) -> Result<Vec2> {
        self.segment_at(t)?.velocity(t)
    }
}

/// COM reference over a timestamped support sequence. Each segment ends
/// halfway between its foot and the next one; the last ends over its foot.
pub fn plan_com(footsteps: &[Footstep], config: &GaitConfig, c_start: &ComState) -> Result<ComReference> {
    if footsteps.is_empty() {
        return Err(Error::EmptyPlan("no footsteps to plan the COM over"));
    }
    let omega = config.omega()?;
    let mut c0 = c_start.c;
    let mut segments = Vec::with_capacity(footsteps.len());
    for (i, f) in footsteps.iter().enumerate() {
        let cf = match footsteps.get(i + 1) {
            Some(next) => (f.pos + next.pos) * 0.5,
            None => f.pos,
        };
        segments.push(ComSegment::new(f.pos, c0, cf, f.t_0, f.t_f, omega)?);
        c0 = cf;
    }
    Ok(ComReference { segments })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcmReference {
    com: ComReference,
    omega: f64,
}

impl DcmReference {
    pub fn zeta(&self, t: f64) -> Result<Vec2> {
        let seg = self.com.segment_at(t)?;
        Ok(seg.position(t)? + seg.velocity(t)? / self.omega)
    }

    pub fn zeta_dot(&self, t: f64) -> Result<Vec2> {
        let seg = self.com.segment_at(t)?;
        Ok(seg.velocity(t)? + seg.acceleration(t)? / self.omega)
    }
}

/// DCM reference from the analytic derivatives of the COM segments.
pub fn plan_dcm(com_ref: &ComReference, omega: f64) -> Result<DcmReference> {
    if !(omega > 0.0) {
        return Err(domain("omega must be positive"));
    }
    Ok(DcmReference { com: com_ref.clone(), omega })
}

/// A complete plan anchored at `origin` (world time). `footsteps[0]` is the
/// current support foot; evaluation methods take world time.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitPlan {
    pub config: GaitConfig,
    pub origin: f64,
    pub footsteps: Vec<Footstep>,
    pub stance: Stance,
    pub c_start: ComState,
    com: ComReference,
    dcm: DcmReference,
}

impl GaitPlan {
    pub fn new(config: &GaitConfig, stance: &Stance, c_start: &ComState, origin: f64) -> Result<Self> {
        config.validate()?;
        let mut support = vec![Footstep {
            pos: stance.support,
            side: stance.support_side,
            t_0: 0.0,
            t_f: 0.0,
        }];
        support.extend(plan_footsteps(config, stance)?);
        let footsteps = assign_step_times(&support, config.step_duration)?;
        let com = plan_com(&footsteps, config, c_start)?;
        let dcm = plan_dcm(&com, config.omega()?)?;
        Ok(Self { config: *config, origin, footsteps, stance: *stance, c_start: *c_start, com, dcm })
    }

    /// The same plan reflected through the sagittal plane.
    pub fn mirrored(&self) -> Result<Self> {
        let c_start = ComState::new(mirror2(self.c_start.c), mirror2(self.c_start.c_dot));
        Self::new(&self.config, &self.stance.mirrored(), &c_start, self.origin)
    }

    pub fn omega(&self) -> f64 {
        self.dcm.omega
    }

    pub fn end_time(&self) -> f64 {
        self.origin + self.com.end()
    }

    pub fn com_reference(&self) -> &ComReference {
        &self.com
    }

    fn local(&self, t: f64) -> f64 {
        t - self.origin
    }

    pub fn com_ref(&self, t: f64) -> Result<Vec2> {
        self.com.position(self.local(t))
    }

    pub fn com_ref_dot(&self, t: f64) -> Result<Vec2> {
        self.com.velocity(self.local(t))
    }

    pub fn dcm_ref(&self, t: f64) -> Result<Vec2> {
        self.dcm.zeta(self.local(t))
    }

    pub fn dcm_ref_dot(&self, t: f64) -> Result<Vec2> {
        self.dcm.zeta_dot(self.local(t))
    }

    pub fn step_index(&self, t: f64) -> Result<usize> {
        let local = self.local(t);
        let seg = self.com.segment_at(local)?;
        Ok(self.com.segments.iter().position(|s| s == seg).unwrap_or(0))
    }

    /// ZMP implied by the reference: the active support foot.
    pub fn zmp_ref(&self, t: f64) -> Result<Vec2> {
        Ok(self.footsteps[self.step_index(t)?].pos)
    }

    /// Swing-foot reference on flat ground during the active step.
    pub fn swing_ref(&self, t: f64) -> Result<Vec3> {
        let k = self.step_index(t)?;
        let to = match self.footsteps.get(k + 1) {
            Some(f) => f.pos,
            None => return Ok(flat(self.swing_start_of(k))),
        };
        let from = self.swing_start_of(k);
        let f = &self.footsteps[k];
        swing_trajectory(flat(from), flat(to), self.config.swing_height, f.t_0, f.t_f, self.local(t))
    }

    fn swing_start_of(&self, k: usize) -> Vec2 {
        if k == 0 {
            self.stance.swing
        } else {
            self.footsteps[k - 1].pos
        }
    }

    /// Next planned landing after the active support foot.
    pub fn next_footstep(&self, t: f64) -> Result<Option<Footstep>> {
        let k = self.step_index(t)?;
        Ok(self.footsteps.get(k + 1).copied())
    }
}

fn flat(v: Vec2) -> Vec3 {
    Vec3::new(v.x, v.y, 0.0)
}
