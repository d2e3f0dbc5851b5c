//! The autocurriculum engine.
//!
//! One `curriculum_step` runs one iteration of the joint environment /
//! co-player loop:
//!
//! 1. Pick a co-player (self, uniform, outcome-prioritized, or
//!    regret-prioritized over the frozen population).
//! 2. Either **evaluate** a freshly generated environment — score it and file
//!    it into the active buffer *without touching the student* — or
//!    **replay** a buffered environment, which is the only branch where the
//!    student learns (domain-randomization builds skip the buffers and train
//!    on every episode).
//! 3. Refresh the replayed entry's score and staleness, update the win
//!    window against the chosen co-player, and periodically freeze the
//!    student into the population with an empty buffer.
//!
//! The engine is generic over a [`Domain`]: the tag gridworld trains a
//! clipped-surrogate policy-gradient student, while the matrix domain plugs
//! in a regret-matching student against best-responding co-players so the
//! whole loop can be checked against exact solvers.

use super::buffer::{replay_distribution, EnvBuffer};
use super::samplers::{fsp_weights, maestro_weights, pfsp_weights, Population};
use crate::learner::LearnerError;
use crate::matrix::MatrixError;
use crate::regret::{MaxReturnRegistry, RegretEstimator, RegretScore};
use crate::rng::RngHandle;
use crate::uposg::{EnvParams, UposgError};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CurriculumError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("learner: {0}")]
    Learner(#[from] LearnerError),
    #[error("trajectory: {0}")]
    Uposg(#[from] UposgError),
    #[error("matrix game: {0}")]
    Matrix(#[from] MatrixError),
}

/// Training method: how environments are curated × how co-players are picked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Joint regret curriculum: per-co-player buffers + regret-prioritized
    /// co-player selection.
    Maestro,
    /// Ablation: per-co-player buffers but uniform co-player selection.
    MaestroUniform,
    /// Ablation: per-co-player buffers with outcome-prioritized selection.
    MaestroPfsp,
    DrSp,
    DrFsp,
    DrPfsp,
    PlrSp,
    PlrFsp,
    PlrPfsp,
}

/// How environments are selected for training.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvStrategy {
    /// Fresh environment every episode, train on all of them.
    DomainRandomization,
    /// One shared replay buffer, student updates gated to replay.
    SharedBuffer,
    /// A buffer per frozen co-player, student updates gated to replay.
    PerCoplayerBuffers,
}

/// How the co-player is selected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoplayerStrategy {
    SelfPlay,
    Uniform,
    Prioritized,
    RegretPrioritized,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Maestro,
        Method::MaestroUniform,
        Method::MaestroPfsp,
        Method::DrSp,
        Method::DrFsp,
        Method::DrPfsp,
        Method::PlrSp,
        Method::PlrFsp,
        Method::PlrPfsp,
    ];

    pub fn env_strategy(self) -> EnvStrategy {
        match self {
            Method::Maestro | Method::MaestroUniform | Method::MaestroPfsp => {
                EnvStrategy::PerCoplayerBuffers
            }
            Method::DrSp | Method::DrFsp | Method::DrPfsp => EnvStrategy::DomainRandomization,
            Method::PlrSp | Method::PlrFsp | Method::PlrPfsp => EnvStrategy::SharedBuffer,
        }
    }

    pub fn coplayer_strategy(self) -> CoplayerStrategy {
        match self {
            Method::Maestro => CoplayerStrategy::RegretPrioritized,
            Method::MaestroUniform | Method::DrFsp | Method::PlrFsp => CoplayerStrategy::Uniform,
            Method::MaestroPfsp | Method::DrPfsp | Method::PlrPfsp => {
                CoplayerStrategy::Prioritized
            }
            Method::DrSp | Method::PlrSp => CoplayerStrategy::SelfPlay,
        }
    }

    /// Whether the method maintains a frozen-co-player population.
    pub fn uses_population(self) -> bool {
        self.coplayer_strategy() != CoplayerStrategy::SelfPlay
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Maestro => "maestro",
            Method::MaestroUniform => "maestro-uniform",
            Method::MaestroPfsp => "maestro-pfsp",
            Method::DrSp => "dr-sp",
            Method::DrFsp => "dr-fsp",
            Method::DrPfsp => "dr-pfsp",
            Method::PlrSp => "plr-sp",
            Method::PlrFsp => "plr-fsp",
            Method::PlrPfsp => "plr-pfsp",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurriculumConfig {
    pub method: Method,
    /// Probability of taking the replay branch when the buffer is non-empty.
    pub replay_probability: f64,
    /// Capacity of the shared buffer (PLR) or of each member buffer.
    pub buffer_capacity: usize,
    /// Rank temperature β of the replay distribution.
    pub score_beta: f64,
    /// Staleness mixing coefficient ρ of the replay distribution.
    pub staleness_coef: f64,
    /// Exploration weight λ of regret-prioritized co-player selection.
    pub mixing_lambda: f64,
    /// Student updates between population checkpoints.
    pub checkpoint_interval: u64,
    /// Hard-opponent exponent of outcome-prioritized selection.
    pub pfsp_power: f64,
    /// Additive smoothing of outcome-prioritized selection.
    pub pfsp_smoothing: f64,
    /// Sliding window (episodes) for per-member win rates.
    pub win_window: usize,
}

impl CurriculumConfig {
    /// Desk-scale defaults for the tag gridworld.
    pub fn lasertag_default(method: Method) -> CurriculumConfig {
        CurriculumConfig {
            method,
            replay_probability: 0.5,
            buffer_capacity: match method.env_strategy() {
                EnvStrategy::SharedBuffer => 4000,
                _ => 1000,
            },
            score_beta: 0.3,
            staleness_coef: 0.3,
            mixing_lambda: 0.1,
            checkpoint_interval: 8000,
            pfsp_power: 2.0,
            pfsp_smoothing: 0.1,
            win_window: 128,
        }
    }

    pub fn validate(&self) -> Result<(), CurriculumError> {
        let err = |m: String| Err(CurriculumError::Config(m));
        if !(0.0..=1.0).contains(&self.replay_probability) {
            return err(format!("replay_probability {} outside [0, 1]", self.replay_probability));
        }
        if self.buffer_capacity == 0 {
            return err("buffer_capacity must be at least 1".into());
        }
        if !(self.score_beta > 0.0) {
            return err(format!("score_beta {} must be positive", self.score_beta));
        }
        if !(0.0..=1.0).contains(&self.staleness_coef) {
            return err(format!("staleness_coef {} outside [0, 1]", self.staleness_coef));
        }
        if !(0.0..=1.0).contains(&self.mixing_lambda) {
            return err(format!("mixing_lambda {} outside [0, 1]", self.mixing_lambda));
        }
        if self.checkpoint_interval == 0 {
            return err("checkpoint_interval must be at least 1".into());
        }
        if !(self.pfsp_power > 0.0) {
            return err(format!("pfsp_power {} must be positive", self.pfsp_power));
        }
        if self.pfsp_smoothing < 0.0 {
            return err(format!("pfsp_smoothing {} must be non-negative", self.pfsp_smoothing));
        }
        if self.win_window == 0 {
            return err("win_window must be at least 1".into());
        }
        Ok(())
    }
}

/// The co-player handed to a domain for one episode.
pub enum Coplayer<'a, F> {
    /// The student plays a copy of itself.
    SelfPlay,
    Frozen(&'a F),
}

/// What one episode produced.
#[derive(Clone, Copy, Debug)]
pub struct EpisodeReport {
    pub score: RegretScore,
    /// Discounted return from the student's start state (the quantity the
    /// max-return registry folds).
    pub episode_return: f64,
    /// Raw zero-sum outcome for the student (+1 / 0 / −1 in the gridworld).
    pub raw_return: f64,
    pub steps: usize,
    pub trained: bool,
}

/// A two-player environment family the curriculum can drive.
pub trait Domain {
    type Payload: Clone + PartialEq + std::fmt::Debug + Serialize + DeserializeOwned;
    type Student;
    type Frozen: Clone;

    /// Draws a fresh environment from the generator distribution.
    fn generate(&self, rng: &mut RngHandle) -> EnvParams<Self::Payload>;

    /// Plays one episode on `params` against `coplayer`, scores it, and — on
    /// the training branch only — updates the student.
    fn play(
        &self,
        student: &mut Self::Student,
        coplayer: Coplayer<'_, Self::Frozen>,
        coplayer_id: u32,
        params: &EnvParams<Self::Payload>,
        registry: &mut MaxReturnRegistry,
        rng: &mut RngHandle,
        train: bool,
    ) -> Result<EpisodeReport, CurriculumError>;

    /// Snapshots the student into an immutable co-player.
    fn freeze(&self, student: &Self::Student) -> Self::Frozen;

    /// Named scalar descriptors of an environment (for curriculum metrics).
    fn payload_stats(&self, payload: &Self::Payload) -> Vec<(&'static str, f64)>;
}

/// Identifier the registry uses for "the student itself" in self-play.
pub const SELF_PLAY_ID: u32 = u32::MAX;

/// Which branch an iteration took.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Domain randomization: fresh environment, trained.
    DirectTrain,
    /// Fresh environment scored and buffered; student untouched.
    Eval,
    /// Buffered environment replayed; student trained.
    Replay,
}

/// Everything one iteration did — the audit record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepEvent<P> {
    pub iteration: u64,
    pub branch: Branch,
    /// Checkpoint id of the opposing policy (`SELF_PLAY_ID` for self-play).
    pub coplayer_id: u32,
    /// Population slot of the co-player, when one was selected.
    pub member_index: Option<usize>,
    pub env: EnvParams<P>,
    pub env_hash: u64,
    pub score: f64,
    pub estimator: RegretEstimator,
    pub trained: bool,
    pub episode_return: f64,
    pub raw_return: f64,
    pub steps: usize,
    /// A new frozen co-player was added after this iteration.
    pub checkpointed: bool,
    /// Sizes of all active buffers after the iteration (one entry for the
    /// shared buffer, one per member for per-co-player buffers).
    pub buffer_sizes: Vec<usize>,
}

/// Full mutable state of a training run.
#[derive(Serialize, Deserialize)]
#[serde(bound(
    serialize = "D::Payload: Serialize, D::Student: Serialize, D::Frozen: Serialize",
    deserialize = "D::Payload: DeserializeOwned, D::Student: DeserializeOwned, D::Frozen: DeserializeOwned"
))]
pub struct TrainState<D: Domain> {
    pub student: D::Student,
    pub population: Population<D::Payload, D::Frozen>,
    pub shared_buffer: EnvBuffer<D::Payload>,
    pub registry: MaxReturnRegistry,
    /// Episodes played (the staleness clock).
    pub episodes: u64,
    /// Student updates performed (the checkpoint clock).
    pub updates: u64,
    /// Curriculum iterations executed.
    pub iterations: u64,
    pub next_checkpoint_id: u32,
}

impl<D: Domain> TrainState<D> {
    /// Builds the initial state. Population methods seed the population with
    /// a frozen copy of the initial student (checkpoint 0) so selection is
    /// never over an empty set.
    pub fn new(
        domain: &D,
        student: D::Student,
        cfg: &CurriculumConfig,
    ) -> Result<TrainState<D>, CurriculumError> {
        cfg.validate()?;
        let mut state = TrainState {
            student,
            population: Population::new(),
            shared_buffer: EnvBuffer::new(cfg.buffer_capacity),
            registry: MaxReturnRegistry::new(),
            episodes: 0,
            updates: 0,
            iterations: 0,
            next_checkpoint_id: 0,
        };
        if cfg.method.uses_population() {
            let frozen = domain.freeze(&state.student);
            state.population.add_member(frozen, 0, 0, cfg.buffer_capacity, cfg.win_window);
            state.next_checkpoint_id = 1;
        }
        Ok(state)
    }
}

fn select_coplayer<D: Domain>(
    state: &TrainState<D>,
    cfg: &CurriculumConfig,
    rng: &mut RngHandle,
) -> Option<usize> {
    match cfg.method.coplayer_strategy() {
        CoplayerStrategy::SelfPlay => None,
        CoplayerStrategy::Uniform => {
            let w = fsp_weights(state.population.len());
            Some(rng.categorical(&w))
        }
        CoplayerStrategy::Prioritized => {
            let rates: Vec<Option<f64>> =
                state.population.members().iter().map(|m| m.wins.win_rate()).collect();
            let w = pfsp_weights(&rates, cfg.pfsp_power, cfg.pfsp_smoothing);
            Some(rng.categorical(&w))
        }
        CoplayerStrategy::RegretPrioritized => {
            let w = maestro_weights(&state.population, cfg.mixing_lambda);
            Some(rng.categorical(&w))
        }
    }
}

fn buffer_sizes<D: Domain>(state: &TrainState<D>, cfg: &CurriculumConfig) -> Vec<usize> {
    match cfg.method.env_strategy() {
        EnvStrategy::DomainRandomization => Vec::new(),
        EnvStrategy::SharedBuffer => vec![state.shared_buffer.len()],
        EnvStrategy::PerCoplayerBuffers => state.population.buffer_sizes(),
    }
}

/// Runs one curriculum iteration and reports what happened.
pub fn curriculum_step<D: Domain>(
    domain: &D,
    state: &mut TrainState<D>,
    cfg: &CurriculumConfig,
    rng: &mut RngHandle,
) -> Result<StepEvent<D::Payload>, CurriculumError> {
    let iteration = state.iterations;
    let member_index = select_coplayer(state, cfg, rng);
    let coplayer_id = match member_index {
        Some(i) => state.population.member(i).checkpoint_id,
        None => SELF_PLAY_ID,
    };
    let now = state.episodes;

    // Decide the branch before playing. Replay requires a non-empty buffer;
    // otherwise the iteration falls back to evaluation.
    let env_strategy = cfg.method.env_strategy();
    let (branch, replay_slot, params) = match env_strategy {
        EnvStrategy::DomainRandomization => (Branch::DirectTrain, None, domain.generate(rng)),
        EnvStrategy::SharedBuffer | EnvStrategy::PerCoplayerBuffers => {
            let buffer = match env_strategy {
                EnvStrategy::SharedBuffer => &state.shared_buffer,
                _ => {
                    &state
                        .population
                        .member(member_index.expect("buffered methods use a population"))
                        .buffer
                }
            };
            if !buffer.is_empty() && rng.chance(cfg.replay_probability) {
                let dist = replay_distribution(buffer, now, cfg.score_beta, cfg.staleness_coef);
                let slot = rng.categorical(&dist);
                (Branch::Replay, Some(slot), buffer.get(slot).params.clone())
            } else {
                (Branch::Eval, None, domain.generate(rng))
            }
        }
    };

    let train = branch != Branch::Eval;
    let report = {
        // Split borrows: the co-player policy is cloned out of the population
        // (frozen policies are immutable; the clone cost is a snapshot copy).
        let frozen = member_index.map(|i| state.population.member(i).policy.clone());
        let coplayer = match &frozen {
            Some(f) => Coplayer::Frozen(f),
            None => Coplayer::SelfPlay,
        };
        domain.play(
            &mut state.student,
            coplayer,
            coplayer_id,
            &params,
            &mut state.registry,
            rng,
            train,
        )?
    };
    debug_assert_eq!(report.trained, train);
    state.episodes += 1;
    if train {
        state.updates += 1;
    }

    // File the score.
    match (env_strategy, branch) {
        (EnvStrategy::DomainRandomization, _) => {}
        (EnvStrategy::SharedBuffer, Branch::Eval) => {
            state.shared_buffer.insert(params.clone(), report.score.value, now);
        }
        (EnvStrategy::SharedBuffer, Branch::Replay) => {
            state.shared_buffer.record_replay(
                replay_slot.expect("replay branch has a slot"),
                report.score.value,
                now,
            );
        }
        (EnvStrategy::SharedBuffer, Branch::DirectTrain) => {
            unreachable!("buffered methods never direct-train")
        }
        (EnvStrategy::PerCoplayerBuffers, b) => {
            let member = state
                .population
                .member_mut(member_index.expect("buffered methods use a population"));
            match b {
                Branch::Eval => {
                    member.buffer.insert(params.clone(), report.score.value, now);
                }
                Branch::Replay => {
                    member.buffer.record_replay(
                        replay_slot.expect("replay branch has a slot"),
                        report.score.value,
                        now,
                    );
                }
                Branch::DirectTrain => unreachable!("buffered methods never direct-train"),
            }
        }
    }

    // Outcome window for prioritized co-player selection.
    if let Some(i) = member_index {
        let outcome = if report.raw_return > 0.0 {
            1.0
        } else if report.raw_return < 0.0 {
            0.0
        } else {
            0.5
        };
        state.population.member_mut(i).wins.push(outcome);
    }

    // Periodic population checkpoint: a frozen copy with an empty buffer.
    let mut checkpointed = false;
    if cfg.method.uses_population() && train && state.updates % cfg.checkpoint_interval == 0 {
        let frozen = domain.freeze(&state.student);
        state.population.add_member(
            frozen,
            state.next_checkpoint_id,
            state.updates,
            cfg.buffer_capacity,
            cfg.win_window,
        );
        state.next_checkpoint_id += 1;
        checkpointed = true;
    }

    state.iterations += 1;
    let env_hash = params.content_hash();
    Ok(StepEvent {
        iteration,
        branch,
        coplayer_id,
        member_index,
        env: params,
        env_hash,
        score: report.score.value,
        estimator: report.score.estimator,
        trained: report.trained,
        episode_return: report.episode_return,
        raw_return: report.raw_return,
        steps: report.steps,
        checkpointed,
        buffer_sizes: buffer_sizes(state, cfg),
    })
}
