//! Domain plugs for the curriculum engine.
//!
//! [`LaserTagDomain`] is the deployment target: procedurally generated tag
//! gridworlds, a clipped-surrogate policy-gradient student, and trajectory
//! regret estimators.
//!
//! [`MatrixDomain`] is the analysis target: random zero-sum matrix games, a
//! regret-matching student keeping independent state per game, and an
//! *omniscient* co-player that best-responds to the student's current
//! strategy. Frozen snapshots of that co-player are behaviourally identical
//! (they all best-respond to the live student), which keeps the population
//! machinery exercised while making the learning dynamic provable: against
//! best-responding opponents a no-regret student's average strategy drives
//! its exploitability to zero, so the whole loop can be certified against
//! exact solvers. Regret scores here are exact, not estimated.

use super::train::{Coplayer, CurriculumError, Domain, EpisodeReport};
use crate::lasertag::{self, LaserTagParams};
use crate::learner::{
    collect_trajectory, ppo_update, PolicyParams, PpoConfig, Student,
};
use crate::matrix::{true_regret, MixedStrategy, ZeroSumGame};
use crate::regret::{score_trajectory, MaxReturnRegistry, RegretEstimator, RegretScore};
use crate::rng::RngHandle;
use crate::uposg::EnvParams;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Procedural tag-gridworld domain with a policy-gradient student.
#[derive(Clone, Debug)]
pub struct LaserTagDomain {
    pub ppo: PpoConfig,
    pub estimator: RegretEstimator,
    pub max_steps: usize,
}

impl LaserTagDomain {
    pub fn new(ppo: PpoConfig, estimator: RegretEstimator, max_steps: usize) -> LaserTagDomain {
        LaserTagDomain { ppo, estimator, max_steps }
    }

    pub fn desk_default() -> LaserTagDomain {
        LaserTagDomain {
            ppo: PpoConfig::lasertag_default(),
            estimator: RegretEstimator::MaxMc,
            max_steps: lasertag::DEFAULT_MAX_STEPS,
        }
    }
}

impl Domain for LaserTagDomain {
    type Payload = LaserTagParams;
    type Student = Student;
    type Frozen = PolicyParams;

    fn generate(&self, rng: &mut RngHandle) -> EnvParams<LaserTagParams> {
        lasertag::generate(rng.next_u64())
    }

    fn play(
        &self,
        student: &mut Student,
        coplayer: Coplayer<'_, PolicyParams>,
        coplayer_id: u32,
        params: &EnvParams<LaserTagParams>,
        registry: &mut MaxReturnRegistry,
        rng: &mut RngHandle,
        train: bool,
    ) -> Result<EpisodeReport, CurriculumError> {
        let gamma = self.ppo.gae.gamma();
        let (traj, outcome) = match coplayer {
            Coplayer::Frozen(f) => collect_trajectory(
                &params.payload,
                &mut student.policy,
                f,
                rng,
                self.max_steps,
                gamma,
            )?,
            Coplayer::SelfPlay => {
                let opponent = student.policy.clone();
                collect_trajectory(
                    &params.payload,
                    &mut student.policy,
                    &opponent,
                    rng,
                    self.max_steps,
                    gamma,
                )?
            }
        };
        let episode_return = traj.episode_return;
        let max_return = registry.observe(params.content_hash(), coplayer_id, episode_return);
        let score = score_trajectory(&traj, self.estimator, max_return, &self.ppo.gae)?;
        if train {
            ppo_update(student, &[traj], &self.ppo, rng)?;
        }
        Ok(EpisodeReport {
            score,
            episode_return,
            raw_return: outcome.raw_return,
            steps: outcome.steps,
            trained: train,
        })
    }

    fn freeze(&self, student: &Student) -> PolicyParams {
        student.policy.clone()
    }

    fn payload_stats(&self, payload: &LaserTagParams) -> Vec<(&'static str, f64)> {
        vec![
            ("wall_density", payload.board.wall_fraction()),
            ("grid_size", payload.grid_size()),
        ]
    }
}

/// Marker for the matrix domain's co-player: every snapshot best-responds to
/// the student's current strategy (an effectively omniscient opponent).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BestResponder;

/// Regret-matching student holding independent no-regret state per game,
/// keyed by environment content hash. The strategy it *answers* with is the
/// time average; the strategy it *plays* is the current regret-matching one.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixStudent {
    rm: crate::matrix::NoRegretStudent,
    slots: BTreeMap<u64, usize>,
}

impl MatrixStudent {
    pub fn new() -> MatrixStudent {
        MatrixStudent { rm: crate::matrix::NoRegretStudent::new(&[]), slots: BTreeMap::new() }
    }

    fn slot_for(&mut self, hash: u64, rows: usize) -> usize {
        if let Some(&s) = self.slots.get(&hash) {
            return s;
        }
        let s = self.rm.add_game(rows);
        self.slots.insert(hash, s);
        s
    }

    /// Current (regret-matching) strategy for a game.
    pub fn current_strategy(&mut self, env: &EnvParams<ZeroSumGame>) -> Vec<f64> {
        let slot = self.slot_for(env.content_hash(), env.payload.num_rows());
        self.rm.strategy(slot)
    }

    /// Time-averaged strategy — the student's committed answer. Uniform for
    /// games it has never trained on.
    pub fn average_strategy(&self, env: &EnvParams<ZeroSumGame>) -> MixedStrategy {
        match self.slots.get(&env.content_hash()) {
            Some(&slot) => self.rm.average_strategy(slot),
            None => MixedStrategy::uniform(env.payload.num_rows()),
        }
    }

    pub fn updates_on(&self, env: &EnvParams<ZeroSumGame>) -> u64 {
        self.slots.get(&env.content_hash()).map_or(0, |&s| self.rm.updates_in(s))
    }
}

impl Default for MatrixStudent {
    fn default() -> Self {
        MatrixStudent::new()
    }
}

/// Random zero-sum matrix games with exact regret scoring.
#[derive(Clone, Copy, Debug)]
pub struct MatrixDomain {
    pub rows: usize,
    pub cols: usize,
}

impl MatrixDomain {
    pub fn new(rows: usize, cols: usize) -> MatrixDomain {
        MatrixDomain { rows, cols }
    }
}

impl Domain for MatrixDomain {
    type Payload = ZeroSumGame;
    type Student = MatrixStudent;
    type Frozen = BestResponder;

    fn generate(&self, rng: &mut RngHandle) -> EnvParams<ZeroSumGame> {
        let seed = rng.next_u64();
        let mut sub = RngHandle::from_seed(seed);
        EnvParams::generated(seed, ZeroSumGame::random(self.rows, self.cols, &mut sub))
    }

    fn play(
        &self,
        student: &mut MatrixStudent,
        coplayer: Coplayer<'_, BestResponder>,
        coplayer_id: u32,
        params: &EnvParams<ZeroSumGame>,
        registry: &mut MaxReturnRegistry,
        _rng: &mut RngHandle,
        train: bool,
    ) -> Result<EpisodeReport, CurriculumError> {
        if matches!(coplayer, Coplayer::SelfPlay) {
            return Err(CurriculumError::Config(
                "self-play is not defined for the matrix domain".into(),
            ));
        }
        let game = &params.payload;
        let x = student.current_strategy(params);

        // Omniscient co-player: exact best response to the played strategy,
        // ties to the lowest column.
        let counters = game.col_payoffs(&x);
        let mut best_col = 0;
        for (j, u) in counters.iter().enumerate() {
            if *u < counters[best_col] {
                best_col = j;
            }
        }
        let payoff = counters[best_col];
        let y = MixedStrategy::point(game.num_cols(), best_col);
        let regret = true_regret(game, &MixedStrategy::new(x.clone())?, &y)?;

        if train {
            // Full-information update: the payoff of every row against the
            // co-player's response.
            let row_utilities = game.row_payoffs(y.probs());
            let slot = student.slot_for(params.content_hash(), game.num_rows());
            student.rm.observe(slot, &row_utilities);
        }
        registry.observe(params.content_hash(), coplayer_id, payoff);
        Ok(EpisodeReport {
            score: RegretScore { value: regret, estimator: RegretEstimator::Exact },
            episode_return: payoff,
            raw_return: payoff,
            steps: 1,
            trained: train,
        })
    }

    fn freeze(&self, _student: &MatrixStudent) -> BestResponder {
        BestResponder
    }

    fn payload_stats(&self, payload: &ZeroSumGame) -> Vec<(&'static str, f64)> {
        vec![
            ("rows", payload.num_rows() as f64),
            ("cols", payload.num_cols() as f64),
        ]
    }
}
