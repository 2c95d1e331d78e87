//! Linear inverted pendulum and divergent component of motion.
//!
//! The horizontal COM obeys `c'' = ω²(c − p)` for ZMP `p`. Splitting the
//! dynamics at the DCM `ζ = c + c'/ω` gives one stable mode (the COM is
//! attracted to the DCM) and one unstable mode (the DCM is repelled by the
//! ZMP). Everything here is closed form over `f64`.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub type Vec2 = Vector2<f64>;

pub const GRAVITY: f64 = 9.81;

/// Returns `sqrt(g / c_z)`.
pub fn natural_frequency(g: f64, c_z: f64) -> Result<f64> {
    if !(g > 0.0) || !(c_z > 0.0) || !g.is_finite() || !c_z.is_finite() {
        return Err(domain(format!(
            "natural frequency needs g > 0 and c_z > 0 (g = {g}, c_z = {c_z})"
        )));
    }
    Ok((g / c_z).sqrt())
}

fn check_omega(omega: f64) -> Result<()> {
    if omega > 0.0 && omega.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("omega must be positive, got {omega}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumModel {
    g: f64,
    c_z: f64,
    omega: f64,
}

impl PendulumModel {
    pub fn new(g: f64, c_z: f64) -> Result<Self> {
        let omega = natural_frequency(g, c_z)?;
        Ok(Self { g, c_z, omega })
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn com_height(&self) -> f64 {
        self.c_z
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Re-derives ω for a new COM height.
    pub fn set_com_height(&mut self, c_z: f64) -> Result<()> {
        self.omega = natural_frequency(self.g, c_z)?;
        self.c_z = c_z;
        Ok(())
    }

    pub fn with_com_height(mut self, c_z: f64) -> Result<Self> {
        self.set_com_height(c_z)?;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComState {
    pub c: Vec2,
    pub c_dot: Vec2,
}

impl ComState {
    pub fn new(c: Vec2, c_dot: Vec2) -> Self {
        Self { c, c_dot }
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().chain(self.c_dot.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcmPoint {
    pub zeta: Vec2,
}

impl DcmPoint {
    pub fn new(zeta: Vec2) -> Self {
        Self { zeta }
    }
}

/// `ω²(c − p)`.
pub fn lip_acceleration(c: Vec2, p: Vec2, omega: f64) -> Vec2 {
    (c - p) * (omega * omega)
}

/// `ζ = c + ċ/ω`.
pub fn dcm_of(state: &ComState, omega: f64) -> Result<DcmPoint> {
    check_omega(omega)?;
    Ok(DcmPoint::new(state.c + state.c_dot / omega))
}

/// Right-hand side of the `(c, ζ)` state-space form: returns `(ċ, ζ̇)`.
pub fn state_derivative(c: Vec2, zeta: DcmPoint, p: Vec2, omega: f64) -> Result<(Vec2, Vec2)> {
    check_omega(omega)?;
    let c_dot = -c * omega + zeta.zeta * omega;
    let zeta_dot = zeta.zeta * omega - p * omega;
    Ok((c_dot, zeta_dot))
}

/// One single-support COM segment solved as a two-point boundary value
/// problem: the COM starts at `c0` at `t0`, ends at `cf` at `tf`, and the ZMP
/// stays on the support foot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComSegment {
    pub foot: Vec2,
    pub c0: Vec2,
    pub cf: Vec2,
    pub t0: f64,
    pub tf: f64,
    pub omega: f64,
}

impl ComSegment {
    pub fn new(foot: Vec2, c0: Vec2, cf: Vec2, t0: f64, tf: f64, omega: f64) -> Result<Self> {
        check_omega(omega)?;
        if !(t0 < tf) {
            return Err(domain(format!(
                "segment needs t0 < tf (t0 = {t0}, tf = {tf}); a zero-length step is singular"
            )));
        }
        Ok(Self { foot, c0, cf, t0, tf, omega })
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t >= self.t0 && t <= self.tf {
            Ok(())
        } else {
            Err(Error::Range { what: "t", value: t, lo: self.t0, hi: self.tf })
        }
    }

    fn denom(&self) -> f64 {
        (self.omega * (self.t0 - self.tf)).sinh()
    }

    pub fn position(&self, t: f64) -> Result<Vec2> {
        self.check_time(t)?;
        let w = self.omega;
        let a = (self.foot - self.cf) * (w * (t - self.t0)).sinh();
        let b = (self.c0 - self.foot) * (w * (t - self.tf)).sinh();
        Ok(self.foot + (a + b) / self.denom())
    }

    pub fn velocity(&self, t: f64) -> Result<Vec2> {
        self.check_time(t)?;
        let w = self.omega;
        let a = (self.foot - self.cf) * (w * (t - self.t0)).cosh();
        let b = (self.c0 - self.foot) * (w * (t - self.tf)).cosh();
        Ok((a + b) * (w / self.denom()))
    }

    pub fn acceleration(&self, t: f64) -> Result<Vec2> {
        self.check_time(t)?;
        let w = self.omega;
        let a = (self.foot - self.cf) * (w * (t - self.t0)).sinh();
        let b = (self.c0 - self.foot) * (w * (t - self.tf)).sinh();
        Ok((a + b) * (w * w / self.denom()))
    }

    pub fn dcm(&self, t: f64) -> Result<Vec2> {
        Ok(self.position(t)? + self.velocity(t)? / self.omega)
    }

    pub fn dcm_rate(&self, t: f64) -> Result<Vec2> {
        Ok(self.velocity(t)? + self.acceleration(t)? / self.omega)
    }
}

/// Closed-form COM position on a boundary-value segment.
pub fn com_closed_form(
    f_i: Vec2,
    c_0: Vec2,
    c_f: Vec2,
    t_0: f64,
    t_f: f64,
    omega: f64,
    t: f64,
) -> Result<Vec2> {
    ComSegment::new(f_i, c_0, c_f, t_0, t_f, omega)?.position(t)
}

/// Propagates the DCM forward by `dt` with the ZMP held at `f_i`.
pub fn dcm_propagate(zeta_t: DcmPoint, f_i: Vec2, omega: f64, dt: f64) -> Result<DcmPoint> {
    if !(dt >= 0.0) {
        return Err(domain(format!("dt must be non-negative, got {dt}")));
    }
    if dt == 0.0 {
        return Ok(zeta_t);
    }
    Ok(DcmPoint::new(f_i + (zeta_t.zeta - f_i) * (omega * dt).exp()))
}

/// Foot placement that lands on the DCM predicted for the end of the step.
pub fn capture_step(f_i: Vec2, zeta_t: DcmPoint, omega: f64, t: f64, step_duration: f64) -> Result<Vec2> {
    if t > step_duration || t < 0.0 {
        return Err(Error::Range { what: "t", value: t, lo: 0.0, hi: step_duration });
    }
    Ok(dcm_propagate(zeta_t, f_i, omega, step_duration - t)?.zeta)
}
