//! Joint environment / co-player autocurricula.
//!
//! - [`buffer`]: score-prioritized environment replay buffers.
//! - [`samplers`]: co-player selection (uniform, outcome-prioritized,
//!   regret-prioritized) over a frozen population.
//! - [`train`]: the per-iteration engine tying both together, generic over a
//!   [`train::Domain`].
//! - [`domains`]: the tag-gridworld and matrix-game domain plugs.

pub mod buffer;
pub mod domains;
pub mod samplers;
pub mod train;

pub use buffer::{replay_distribution, EnvBuffer, InsertOutcome, ReplayEntry};
pub use domains::{BestResponder, LaserTagDomain, MatrixDomain, MatrixStudent};
pub use samplers::{
    fsp_weights, maestro_weights, pfsp_weights, Population, PopulationMember, WinHistory,
};
pub use train::{
    curriculum_step, Branch, Coplayer, CoplayerStrategy, CurriculumConfig, CurriculumError,
    Domain, EnvStrategy, EpisodeReport, Method, StepEvent, TrainState, SELF_PLAY_ID,
};
