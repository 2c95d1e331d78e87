//! Training and evaluation protocols with reproducible CSV output.

pub mod eval;
pub mod train;

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control::{ControllerConfig, ResidualAction, ACTION_DIM};
use crate::error::{Error, Result};
use crate::gait::GaitConfig;
use crate::plant::{PlantParams, ScenarioKind, ScenarioSpec, WalkingEnv, OBS_DIM};
use crate::ppo::checkpoint::Checkpoint;
use crate::ppo::{PolicyParams, TrainConfig};
use crate::symmetry::{MirrorSpec, SharedNormStats};

pub use eval::{
    evaluate, run_drift, run_eval, run_noise_sweep, run_radial, DriftReport, EvalOptions, EvalReport, RadialRow,
};
pub use train::{run_train, train, BatchReport, CurvePoint, TrainOutcome};

/// Evaluation protocol settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    pub episodes: usize,
    pub radial_directions: usize,
    pub radial_trials: usize,
    pub radial_threshold: f64,
    /// Force ramp increment and upper limit for the radial sweep, N.
    pub radial_force_step: f64,
    pub radial_force_max: f64,
    pub drift_duration: f64,
    pub drift_sample_period: f64,
    pub noise_levels: Vec<f64>,
    pub noise_episodes: usize,
    pub noise_push_interval: f64,
    /// Batches between deterministic evaluations during training; 0 disables.
    pub curve_eval_interval: usize,
    pub curve_eval_episodes: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            episodes: 1000,
            radial_directions: 24,
            radial_trials: 10,
            radial_threshold: 0.5,
            radial_force_step: 50.0,
            radial_force_max: 3000.0,
            drift_duration: 500.0,
            drift_sample_period: 5.0,
            noise_levels: vec![1.0, 1.1, 1.2, 1.3, 1.4],
            noise_episodes: 50,
            noise_push_interval: 3.5,
            curve_eval_interval: 0,
            curve_eval_episodes: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub scenario: ScenarioSpec,
    pub train: TrainConfig,
    pub gait: GaitConfig,
    pub controller: ControllerConfig,
    pub plant: PlantParams,
    pub mirror: MirrorSpec,
    pub eval: EvalSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            scenario: ScenarioSpec::l1(),
            train: TrainConfig::default(),
            gait: GaitConfig::default(),
            controller: ControllerConfig::default(),
            plant: PlantParams::default(),
            mirror: MirrorSpec::default(),
            eval: EvalSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.train.validate()?;
        self.gait.validate()?;
        self.controller.validate()?;
        self.plant.validate()?;
        self.mirror.validate()?;
        if self.mirror.obs_dim() != OBS_DIM || self.mirror.act_dim() != ACTION_DIM {
            return Err(Error::Config(format!(
                "mirror tables are {}/{}, the plant needs {OBS_DIM}/{ACTION_DIM}",
                self.mirror.obs_dim(),
                self.mirror.act_dim()
            )));
        }
        let e = &self.eval;
        let ok = e.radial_directions > 0
            && e.radial_trials > 0
            && (0.0..=1.0).contains(&e.radial_threshold)
            && e.radial_force_step > 0.0
            && e.radial_force_max >= e.radial_force_step
            && e.drift_duration > 0.0
            && e.drift_sample_period > 0.0
            && e.noise_levels.iter().all(|&n| n >= 1.0)
            && e.noise_push_interval > 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid evaluation settings {e:?}")));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
    }

    pub fn env(&self, scenario: ScenarioSpec, episode_cap: f64, seed: u64) -> Result<WalkingEnv> {
        WalkingEnv::new(self.plant, scenario, self.gait, self.controller, episode_cap, seed)
    }
}

/// Symmetry ratios of the training grid.
pub const SYMMETRY_RATIOS: [f64; 5] = [0.0, 0.125, 0.25, 0.5, 1.0];

/// Every symmetry ratio on the flat and uneven scenarios, each writing to
/// its own subdirectory of the base output directory.
pub fn config_matrix(base: &ExperimentConfig) -> Vec<ExperimentConfig> {
    let mut out = Vec::with_capacity(2 * SYMMETRY_RATIOS.len());
    for kind in [ScenarioKind::L1, ScenarioKind::L2] {
        for ratio in SYMMETRY_RATIOS {
            let mut cfg = base.clone();
            cfg.scenario = ScenarioSpec { caps: base.scenario.caps, ..ScenarioSpec::of_kind(kind) };
            cfg.train.symmetry_ratio = ratio;
            cfg.output_dir = base.output_dir.join(format!("{kind}_ratio_{ratio}"));
            out.push(cfg);
        }
    }
    out
}

/// Independent seed for stream `id` of a master seed.
pub fn derive_seed(master: u64, id: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(id);
    rng.random()
}

pub fn rng_stream(master: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(id);
    rng
}

/// A trained policy with its frozen normalization, acting deterministically.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub params: PolicyParams,
    pub stats: SharedNormStats,
    pub controller: ControllerConfig,
}

impl Agent {
    pub fn from_checkpoint(ckpt: &Checkpoint, controller: ControllerConfig) -> Result<Self> {
        ckpt.check_dims(OBS_DIM, ACTION_DIM)?;
        Ok(Self { params: ckpt.params.clone(), stats: ckpt.stats.clone(), controller })
    }

    pub fn normalize(&self, obs: &[f64]) -> Vec<f64> {
        self.stats.normalize(obs)
    }

    /// Action for an already normalized observation.
    pub fn act_normalized(&self, obs: &[f64]) -> Result<ResidualAction> {
        let out = self.params.forward(obs)?;
        ResidualAction::from_raw(&out.mean, &self.controller)
    }

    pub fn act(&self, obs: &[f64]) -> Result<ResidualAction> {
        self.act_normalized(&self.normalize(obs))
    }
}

/// CSV file whose first line is `# config_hash=<hash>,seed=<seed>`.
pub fn write_csv<P: AsRef<Path>>(
    path: P,
    config_hash: &str,
    seed: u64,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "# config_hash={config_hash},seed={seed}")?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
