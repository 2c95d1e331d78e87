//! Hybrid biped stabilizer: an analytical LIP/DCM walking controller on a
//! reduced-order biped, plus a PPO learner that adds symmetric residuals.

pub mod control;
pub mod error;
pub mod experiments;
pub mod gait;
pub mod lip;
pub mod plant;
pub mod ppo;
pub mod symmetry;

pub use error::{Error, Result};
pub use control::{ControllerConfig, ResidualAction};
pub use experiments::{Agent, EvalReport, ExperimentConfig};
pub use gait::GaitConfig;
pub use plant::{PlantParams, ScenarioKind, ScenarioSpec, WalkingEnv};
pub use ppo::checkpoint::Checkpoint;
pub use ppo::{PolicyParams, TrainConfig};
pub use symmetry::{MirrorSpec, SharedNormStats};
