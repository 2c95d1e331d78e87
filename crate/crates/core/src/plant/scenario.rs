//! Scenario descriptions and the random disturbances they generate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lip::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    /// Flat ground with pushes.
    L1,
    /// Uneven footholds with pushes.
    L2,
    /// Erratically tilting platform, no pushes.
    T1,
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(ScenarioKind::L1),
            "l2" => Ok(ScenarioKind::L2),
            "t1" => Ok(ScenarioKind::T1),
            other => Err(Error::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ScenarioKind::L1 => "l1",
            ScenarioKind::L2 => "l2",
            ScenarioKind::T1 => "t1",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PushConfig {
    pub enabled: bool,
    pub interval: [f64; 2],
    pub force: [f64; 2],
    pub duration: f64,
}

impl Default for PushConfig {
    fn default() -> Self {
        Self { enabled: true, interval: [2.5, 3.0], force: [500.0, 850.0], duration: 0.025 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TiltConfig {
    pub enabled: bool,
    pub random_range_deg: f64,
    /// Degrees of correction per metre of displacement.
    pub correction_gain: f64,
    pub limit_deg: f64,
    pub resample_period: f64,
}

impl Default for TiltConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            random_range_deg: 8.0,
            correction_gain: 0.35,
            limit_deg: 15.0,
            resample_period: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeCaps {
    pub train: f64,
    pub eval: f64,
}

impl Default for EpisodeCaps {
    fn default() -> Self {
        Self { train: 50.0, eval: 500.0 }
    }
}

/// Omitted fields take the defaults of the named kind, so `kind = "l2"`
/// alone yields uneven terrain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "ScenarioToml")]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub terrain_amplitude: f64,
    pub push: PushConfig,
    pub tilt: TiltConfig,
    pub caps: EpisodeCaps,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioToml {
    kind: ScenarioKind,
    terrain_amplitude: Option<f64>,
    push: Option<PushConfig>,
    tilt: Option<TiltConfig>,
    caps: Option<EpisodeCaps>,
}

impl From<ScenarioToml> for ScenarioSpec {
    fn from(t: ScenarioToml) -> Self {
        let base = Self::of_kind(t.kind);
        Self {
            kind: t.kind,
            terrain_amplitude: t.terrain_amplitude.unwrap_or(base.terrain_amplitude),
            push: t.push.unwrap_or(base.push),
            tilt: t.tilt.unwrap_or(base.tilt),
            caps: t.caps.unwrap_or(base.caps),
        }
    }
}

impl ScenarioSpec {
    pub fn l1() -> Self {
        Self {
            kind: ScenarioKind::L1,
            terrain_amplitude: 0.0,
            push: PushConfig::default(),
            tilt: TiltConfig::default(),
            caps: EpisodeCaps::default(),
        }
    }

    pub fn l2() -> Self {
        Self { kind: ScenarioKind::L2, terrain_amplitude: 0.02, ..Self::l1() }
    }

    pub fn t1() -> Self {
        Self {
            kind: ScenarioKind::T1,
            push: PushConfig { enabled: false, ..PushConfig::default() },
            tilt: TiltConfig { enabled: true, ..TiltConfig::default() },
            ..Self::l1()
        }
    }

    pub fn of_kind(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::L1 => Self::l1(),
            ScenarioKind::L2 => Self::l2(),
            ScenarioKind::T1 => Self::t1(),
        }
    }

    pub fn without_pushes(mut self) -> Self {
        self.push.enabled = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.push;
        let ok = self.terrain_amplitude >= 0.0
            && p.interval[0] > 0.0
            && p.interval[0] <= p.interval[1]
            && p.force[0] >= 0.0
            && p.force[0] <= p.force[1]
            && p.duration > 0.0
            && self.tilt.resample_period > 0.0
            && self.tilt.limit_deg >= 0.0
            && self.caps.train > 0.0
            && self.caps.eval > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid scenario {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushEvent {
    pub t_start: f64,
    pub duration: f64,
    pub force: f64,
    pub direction: Vec2,
}

impl PushEvent {
    pub fn active(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_start + self.duration
    }

    pub fn force_vector(&self) -> Vec2 {
        self.direction * self.force
    }
}

/// Push schedule with uniform inter-push intervals, magnitudes and planar
/// directions. Events start after the first interval.
pub fn schedule_pushes<R: Rng>(
    rng: &mut R,
    interval: [f64; 2],
    force: [f64; 2],
    duration: f64,
    horizon: f64,
) -> Vec<PushEvent> {
    let mut events = Vec::new();
    let mut t = 0.0;
    loop {
        t += uniform(rng, interval[0], interval[1]);
        if t > horizon {
            break;
        }
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        events.push(PushEvent {
            t_start: t,
            duration,
            force: uniform(rng, force[0], force[1]),
            direction: Vec2::new(angle.cos(), angle.sin()),
        });
    }
    events
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Foothold height offset for one landing.
pub fn sample_terrain<R: Rng>(rng: &mut R, amplitude: f64) -> Result<f64> {
    if !(amplitude >= 0.0) {
        return Err(domain(format!("terrain amplitude must be non-negative, got {amplitude}")));
    }
    Ok(uniform(rng, -amplitude, amplitude))
}

/// Target actuator angles in degrees: `[x-axis actuator, y-axis actuator]`.
/// Each actuator adds a random component to a correction proportional to the
/// robot position on the opposite axis.
pub fn platform_tilt<R: Rng>(rng: &mut R, robot_pos: Vec2, config: &TiltConfig) -> [f64; 2] {
    let r = config.random_range_deg;
    let lim = config.limit_deg;
    let x_act = uniform(rng, -r, r) + config.correction_gain * robot_pos.y;
    let y_act = uniform(rng, -r, r) + config.correction_gain * robot_pos.x;
    [x_act.clamp(-lim, lim), y_act.clamp(-lim, lim)]
}

/// Platform angle over time: targets resampled periodically, linearly
/// interpolated in between.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltProcess {
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub t_from: f64,
    pub period: f64,
}

impl TiltProcess {
    pub fn new(period: f64) -> Self {
        Self { from: [0.0; 2], to: [0.0; 2], t_from: 0.0, period }
    }

    /// Advances to `t`, drawing a new target whenever the current one is reached.
    pub fn update<R: Rng>(&mut self, rng: &mut R, t: f64, robot_pos: Vec2, config: &TiltConfig) {
        while t >= self.t_from + self.period {
            self.from = self.to;
            self.t_from += self.period;
            self.to = platform_tilt(rng, robot_pos, config);
        }
    }

    /// Current angles in degrees.
    pub fn angles(&self, t: f64) -> [f64; 2] {
        let s = ((t - self.t_from) / self.period).clamp(0.0, 1.0);
        [
            self.from[0] + (self.to[0] - self.from[0]) * s,
            self.from[1] + (self.to[1] - self.from[1]) * s,
        ]
    }
}
