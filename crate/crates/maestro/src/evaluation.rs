//! Cross-play evaluation: round-robin tournaments on held-out levels,
//! specialist probes, emergent-curriculum statistics, and the student ×
//! co-player regret landscape.
//!
//! Tournaments are scheduled **before** execution: `build_schedule` enumerates
//! every episode into a manifest, matches run in parallel, and aggregation is
//! a deterministic reduction in manifest order — parallel and serial runs
//! produce identical tables.

use crate::curriculum::train::{Coplayer, StepEvent, SELF_PLAY_ID};
use crate::curriculum::{CurriculumError, Domain, LaserTagDomain};
use crate::lasertag::{self, LaserTagParams};
use crate::learner::{
    collect_trajectory, play_match, LearnerError, PolicyParams, Student,
};
use crate::matrix::{MatrixError, RegretMatrix};
use crate::regret::{score_trajectory, MaxReturnRegistry, RegretEstimator};
use crate::rng::{derive_seed, RngHandle};
use crate::uposg::{EnvParams, GaeConfig, UposgError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("learner: {0}")]
    Learner(#[from] LearnerError),
    #[error("matrix: {0}")]
    Matrix(#[from] MatrixError),
    #[error("trajectory: {0}")]
    Uposg(#[from] UposgError),
    #[error("curriculum: {0}")]
    Curriculum(#[from] CurriculumError),
}

/// A method label with one policy per training seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabeledPolicies {
    pub method: String,
    pub policies: Vec<(u64, PolicyParams)>,
}

/// One episode enumerated ahead of execution. The manifest row carries its
/// own rng seed, so the episode outcome is a pure function of the row plus
/// the referenced policies and level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduledMatch {
    pub index: usize,
    pub level: String,
    pub method_a: String,
    pub seed_a: u64,
    pub method_b: String,
    pub seed_b: u64,
    pub episode: usize,
    pub rng_seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    A,
    B,
    Draw,
}

impl Winner {
    pub fn from_return(return_a: f64) -> Winner {
        if return_a > 0.0 {
            Winner::A
        } else if return_a < 0.0 {
            Winner::B
        } else {
            Winner::Draw
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Winner::A => "a",
            Winner::B => "b",
            Winner::Draw => "draw",
        }
    }
}

/// One tournament cell: a finished episode.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatchResult {
    pub schedule_index: usize,
    pub level: String,
    pub method_a: String,
    pub seed_a: u64,
    pub method_b: String,
    pub seed_b: u64,
    pub episode: usize,
    /// Returns sum to zero; `winner` matches the sign of `return_a`.
    pub return_a: f64,
    pub return_b: f64,
    pub winner: Winner,
    pub steps: usize,
}

/// Documented header for the one-row-per-match CSV export.
pub const MATCH_CSV_HEADER: &str =
    "schedule_index,level,method_a,seed_a,method_b,seed_b,episode,return_a,return_b,winner,steps";

pub fn match_csv_row(r: &MatchResult) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.schedule_index,
        r.level,
        r.method_a,
        r.seed_a,
        r.method_b,
        r.seed_b,
        r.episode,
        r.return_a,
        r.return_b,
        r.winner.as_str(),
        r.steps
    )
}

/// Aggregated round-robin outcome. `mean_returns[a][b]` is method `a`'s mean
/// return over every episode it played against method `b` (both role orders
/// pooled), so the matrix is exactly antisymmetric before normalization and
/// complements to one after.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TournamentTable {
    pub methods: Vec<String>,
    pub mean_returns: Vec<Vec<f64>>,
    /// Episodes aggregated into each cell.
    pub counts: Vec<Vec<u64>>,
    /// Level id → same-shape mean-return matrix.
    pub per_level: BTreeMap<String, Vec<Vec<f64>>>,
    /// Human-readable description of the seed pairing that produced the table.
    pub seed_pairing: String,
    /// Whether returns have been mapped from [−1, 1] to [0, 1].
    pub normalized: bool,
}

impl TournamentTable {
    pub fn cell(&self, a: usize, b: usize) -> f64 {
        self.mean_returns[a][b]
    }

    /// Mean return of each method against the field (diagonal excluded).
    pub fn method_means(&self) -> Vec<f64> {
        let n = self.methods.len();
        (0..n)
            .map(|a| {
                let opponents: Vec<f64> =
                    (0..n).filter(|&b| b != a).map(|b| self.mean_returns[a][b]).collect();
                opponents.iter().sum::<f64>() / opponents.len() as f64
            })
            .collect()
    }
}

/// Enumerates every tournament episode before execution: every unordered
/// cross-method pair, every seed pair, every level, `episodes_per_pair`
/// episodes, both role orders.
pub fn build_schedule(
    policies: &[LabeledPolicies],
    levels: &[(String, EnvParams<LaserTagParams>)],
    episodes_per_pair: usize,
    base_seed: u64,
) -> Result<Vec<ScheduledMatch>, EvalError> {
    if policies.len() < 2 {
        return Err(EvalError::Parameter(format!(
            "round-robin needs at least 2 methods, got {}",
            policies.len()
        )));
    }
    if levels.is_empty() {
        return Err(EvalError::Parameter("round-robin needs at least 1 level".into()));
    }
    if episodes_per_pair == 0 {
        return Err(EvalError::Parameter("episodes_per_pair must be at least 1".into()));
    }
    for p in policies {
        if p.policies.is_empty() {
            return Err(EvalError::Parameter(format!("method {} has no seeds", p.method)));
        }
    }
    for i in 0..policies.len() {
        for j in i + 1..policies.len() {
            if policies[i].method == policies[j].method {
                return Err(EvalError::Parameter(format!(
                    "duplicate method label {}",
                    policies[i].method
                )));
            }
        }
    }

    let mut schedule = Vec::new();
    for i in 0..policies.len() {
        for j in i + 1..policies.len() {
            for (level, _) in levels {
                for &(seed_i, _) in &policies[i].policies {
                    for &(seed_j, _) in &policies[j].policies {
                        for episode in 0..episodes_per_pair {
                            for role_swap in [false, true] {
                                let (ma, sa, mb, sb) = if role_swap {
                                    (&policies[j].method, seed_j, &policies[i].method, seed_i)
                                } else {
                                    (&policies[i].method, seed_i, &policies[j].method, seed_j)
                                };
                                let index = schedule.len();
                                schedule.push(ScheduledMatch {
                                    index,
                                    level: level.clone(),
                                    method_a: ma.clone(),
                                    seed_a: sa,
                                    method_b: mb.clone(),
                                    seed_b: sb,
                                    episode,
                                    rng_seed: derive_seed(base_seed, index as u64),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(schedule)
}

fn find_policy<'a>(
    policies: &'a [LabeledPolicies],
    method: &str,
    seed: u64,
) -> Result<&'a PolicyParams, EvalError> {
    policies
        .iter()
        .find(|p| p.method == method)
        .and_then(|p| p.policies.iter().find(|(s, _)| *s == seed).map(|(_, pol)| pol))
        .ok_or_else(|| EvalError::Parameter(format!("no policy for method {method} seed {seed}")))
}

/// Plays one manifest row.
pub fn play_scheduled(
    row: &ScheduledMatch,
    agent_a: &PolicyParams,
    agent_b: &PolicyParams,
    level: &LaserTagParams,
    max_steps: usize,
) -> Result<MatchResult, EvalError> {
    let mut rng = RngHandle::from_seed(row.rng_seed);
    let outcome = play_match(level, agent_a, agent_b, &mut rng, max_steps)?;
    Ok(MatchResult {
        schedule_index: row.index,
        level: row.level.clone(),
        method_a: row.method_a.clone(),
        seed_a: row.seed_a,
        method_b: row.method_b.clone(),
        seed_b: row.seed_b,
        episode: row.episode,
        return_a: outcome.raw_return,
        return_b: -outcome.raw_return,
        winner: Winner::from_return(outcome.raw_return),
        steps: outcome.steps,
    })
}

/// Plays every cross-method seed pair on every level in both role orders and
/// aggregates mean returns per method pair. Matches run in parallel; the
/// reduction walks results in manifest order, so the table is deterministic.
pub fn run_round_robin(
    policies: &[LabeledPolicies],
    levels: &[(String, EnvParams<LaserTagParams>)],
    episodes_per_pair: usize,
    base_seed: u64,
    max_steps: usize,
) -> Result<(TournamentTable, Vec<MatchResult>, Vec<ScheduledMatch>), EvalError> {
    let encoding = &policies[0].policies.first().map(|(_, p)| p.encoding.clone());
    for p in policies {
        for (seed, pol) in &p.policies {
            if Some(pol.encoding.clone()) != *encoding {
                return Err(EvalError::Config(format!(
                    "method {} seed {seed}: observation shape differs from the first policy",
                    p.method
                )));
            }
        }
    }
    let schedule = build_schedule(policies, levels, episodes_per_pair, base_seed)?;
    let level_map: BTreeMap<&str, &LaserTagParams> =
        levels.iter().map(|(id, p)| (id.as_str(), &p.payload)).collect();

    let results: Vec<MatchResult> = schedule
        .par_iter()
        .map(|row| {
            let a = find_policy(policies, &row.method_a, row.seed_a)?;
            let b = find_policy(policies, &row.method_b, row.seed_b)?;
            let level = level_map
                .get(row.level.as_str())
                .ok_or_else(|| EvalError::Parameter(format!("unknown level {}", row.level)))?;
            play_scheduled(row, a, b, level, max_steps)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let n = policies.len();
    let idx: BTreeMap<&str, usize> =
        policies.iter().enumerate().map(|(i, p)| (p.method.as_str(), i)).collect();
    let mut sums = vec![vec![0.0; n]; n];
    let mut counts = vec![vec![0u64; n]; n];
    let mut level_sums: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    let mut level_counts: BTreeMap<String, Vec<Vec<u64>>> = BTreeMap::new();
    for r in &results {
        let a = idx[r.method_a.as_str()];
        let b = idx[r.method_b.as_str()];
        sums[a][b] += r.return_a;
        sums[b][a] += r.return_b;
        counts[a][b] += 1;
        counts[b][a] += 1;
        let ls = level_sums.entry(r.level.clone()).or_insert_with(|| vec![vec![0.0; n]; n]);
        let lc = level_counts.entry(r.level.clone()).or_insert_with(|| vec![vec![0u64; n]; n]);
        ls[a][b] += r.return_a;
        ls[b][a] += r.return_b;
        lc[a][b] += 1;
        lc[b][a] += 1;
    }
    let mean = |s: &Vec<Vec<f64>>, c: &Vec<Vec<u64>>| -> Vec<Vec<f64>> {
        (0..n)
            .map(|a| (0..n).map(|b| if c[a][b] == 0 { 0.0 } else { s[a][b] / c[a][b] as f64 }).collect())
            .collect()
    };
    let mean_returns = mean(&sums, &counts);
    let per_level = level_sums
        .iter()
        .map(|(id, s)| (id.clone(), mean(s, &level_counts[id])))
        .collect();

    let seeds: Vec<usize> = policies.iter().map(|p| p.policies.len()).collect();
    let table = TournamentTable {
        methods: policies.iter().map(|p| p.method.clone()).collect(),
        mean_returns,
        counts,
        per_level,
        seed_pairing: format!(
            "all cross-method seed pairs (seeds per method: {seeds:?}), {} levels, \
             {episodes_per_pair} episodes per pair, both role orders, base seed {base_seed}",
            levels.len()
        ),
        normalized: false,
    };
    Ok((table, results, schedule))
}

/// Maps mean returns from [−1, 1] to [0, 1] via (r+1)/2 — the artifact's
/// normalization choice, recorded in the table's `normalized` tag. Applying
/// it twice is a usage error.
pub fn normalize_returns(table: &TournamentTable) -> Result<TournamentTable, EvalError> {
    if table.normalized {
        return Err(EvalError::Parameter("tournament table is already normalized".into()));
    }
    let map = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        m.iter().map(|row| row.iter().map(|r| (r + 1.0) / 2.0).collect()).collect()
    };
    Ok(TournamentTable {
        methods: table.methods.clone(),
        mean_returns: map(&table.mean_returns),
        counts: table.counts.clone(),
        per_level: table.per_level.iter().map(|(k, v)| (k.clone(), map(v))).collect(),
        seed_pairing: table.seed_pairing.clone(),
        normalized: true,
    })
}

/// Specialist probe configuration: each target level gets one fresh student
/// trained on that level alone (self-play co-player — the minimal regime) for
/// `training_budget` updates.
#[derive(Clone, Debug)]
pub struct SpecialistConfig {
    pub domain: LaserTagDomain,
    pub training_budget: u64,
    /// Evaluation episodes per generalist seed per role order.
    pub eval_episodes: usize,
    /// Hidden width of the specialist network.
    pub hidden: usize,
    pub base_seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpecialistLevelReport {
    pub level: String,
    pub generalist_mean_return: f64,
    /// Draws count one half.
    pub generalist_win_rate: f64,
    pub specialist_mean_return: f64,
    pub episodes: usize,
}

/// Trains one specialist per target level, then cross-plays every generalist
/// seed against it on that level (both role orders).
pub fn run_specialist_eval(
    generalists: &[(u64, PolicyParams)],
    levels: &[(String, EnvParams<LaserTagParams>)],
    cfg: &SpecialistConfig,
) -> Result<Vec<SpecialistLevelReport>, EvalError> {
    if cfg.training_budget == 0 {
        return Err(EvalError::Parameter("specialist training budget must be at least 1".into()));
    }
    if cfg.eval_episodes == 0 {
        return Err(EvalError::Parameter("eval_episodes must be at least 1".into()));
    }
    if generalists.is_empty() {
        return Err(EvalError::Parameter("no generalist policies supplied".into()));
    }
    if levels.is_empty() {
        return Err(EvalError::Parameter("no target levels supplied".into()));
    }

    let mut report = Vec::with_capacity(levels.len());
    for (li, (level_id, params)) in levels.iter().enumerate() {
        let mut rng = RngHandle::derive(cfg.base_seed, li as u64);
        let mut specialist = Student::new(PolicyParams::mlp_init(
            crate::learner::ObsEncoding::lasertag(),
            lasertag::NUM_ACTIONS,
            cfg.hidden,
            &mut rng,
        ));
        let mut registry = MaxReturnRegistry::new();
        for _ in 0..cfg.training_budget {
            cfg.domain.play(
                &mut specialist,
                Coplayer::SelfPlay,
                SELF_PLAY_ID,
                params,
                &mut registry,
                &mut rng,
                true,
            )?;
        }

        let mut sum = 0.0;
        let mut wins = 0.0;
        let mut episodes = 0usize;
        for (_, generalist) in generalists {
            for ep in 0..cfg.eval_episodes {
                for swap in [false, true] {
                    let _ = ep;
                    let outcome = if swap {
                        let o = play_match(
                            &params.payload,
                            &specialist.policy,
                            generalist,
                            &mut rng,
                            cfg.domain.max_steps,
                        )?;
                        -o.raw_return
                    } else {
                        play_match(
                            &params.payload,
                            generalist,
                            &specialist.policy,
                            &mut rng,
                            cfg.domain.max_steps,
                        )?
                        .raw_return
                    };
                    sum += outcome;
                    wins += if outcome > 0.0 {
                        1.0
                    } else if outcome < 0.0 {
                        0.0
                    } else {
                        0.5
                    };
                    episodes += 1;
                }
            }
        }
        let generalist_mean = sum / episodes as f64;
        report.push(SpecialistLevelReport {
            level: level_id.clone(),
            generalist_mean_return: generalist_mean,
            generalist_win_rate: wins / episodes as f64,
            specialist_mean_return: -generalist_mean,
            episodes,
        });
    }
    Ok(report)
}

/// Emergent-curriculum statistics: windowed means of environment descriptors
/// over the *trained-on* episode sequence, plus score quartiles per window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurriculumStats {
    pub window: usize,
    /// Per-window mean wall density of trained-on environments, in [0, 0.5].
    pub wall_density: Vec<f64>,
    /// Per-window mean grid side length.
    pub grid_size: Vec<f64>,
    /// Per-window [25th, 50th, 75th] percentiles of regret scores.
    pub score_quartiles: Vec<[f64; 3]>,
    /// Trained-on episodes the series cover.
    pub episodes_counted: usize,
}

/// Linear-interpolated percentile of a sorted slice (the standard convention:
/// rank p·(n−1) interpolated between neighbours).
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Computes windowed curriculum statistics from a step-event log. Only
/// trained-on environments count (evaluation-branch episodes are curriculum
/// probes, not training data). The trailing partial window is included.
pub fn curriculum_stats(
    events: &[StepEvent<LaserTagParams>],
    window: usize,
) -> Result<CurriculumStats, EvalError> {
    if window == 0 {
        return Err(EvalError::Parameter("window must be at least 1".into()));
    }
    let trained: Vec<&StepEvent<LaserTagParams>> = events.iter().filter(|e| e.trained).collect();
    if trained.is_empty() {
        return Err(EvalError::Parameter("event log contains no trained episodes".into()));
    }
    let mut wall_density = Vec::new();
    let mut grid_size = Vec::new();
    let mut score_quartiles = Vec::new();
    for chunk in trained.chunks(window) {
        let n = chunk.len() as f64;
        wall_density
            .push(chunk.iter().map(|e| e.env.payload.board.wall_fraction()).sum::<f64>() / n);
        grid_size.push(chunk.iter().map(|e| e.env.payload.grid_size()).sum::<f64>() / n);
        let mut scores: Vec<f64> = chunk.iter().map(|e| e.score).collect();
        scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
        score_quartiles.push([
            percentile(&scores, 0.25),
            percentile(&scores, 0.50),
            percentile(&scores, 0.75),
        ]);
    }
    Ok(CurriculumStats {
        window,
        wall_density,
        grid_size,
        score_quartiles,
        episodes_counted: trained.len(),
    })
}

/// Scores the student against every population member on each of
/// `sample_envs` freshly generated environments. Row i, column j holds the
/// student's estimated regret against member i on environment j — the live
/// counterpart of the joint-selection demo matrix.
pub fn regret_landscape(
    student: &PolicyParams,
    population: &[(u32, PolicyParams)],
    sample_envs: usize,
    estimator: RegretEstimator,
    gae: &GaeConfig,
    max_steps: usize,
    rng: &mut RngHandle,
) -> Result<RegretMatrix, EvalError> {
    if population.is_empty() {
        return Err(EvalError::Parameter("regret landscape needs a non-empty population".into()));
    }
    if sample_envs == 0 {
        return Err(EvalError::Parameter("regret landscape needs at least one environment".into()));
    }
    let envs: Vec<EnvParams<LaserTagParams>> =
        (0..sample_envs).map(|_| lasertag::generate(rng.next_u64())).collect();
    let mut registry = MaxReturnRegistry::new();
    let mut rows = Vec::with_capacity(population.len());
    for (id, member) in population {
        let mut row = Vec::with_capacity(sample_envs);
        for env in &envs {
            // The probe must not mutate the student; trajectory collection
            // takes the student mutably (tabular slot growth), so probe a
            // scratch copy.
            let mut scratch = student.clone();
            let (traj, _) = collect_trajectory(
                &env.payload,
                &mut scratch,
                member,
                rng,
                max_steps,
                gae.gamma(),
            )?;
            let max_return = registry.observe(env.content_hash(), *id, traj.episode_return);
            let score = score_trajectory(&traj, estimator, max_return, gae)?;
            row.push(score.value);
        }
        rows.push(row);
    }
    let co_players: Vec<String> = population.iter().map(|(id, _)| format!("ckpt_{id}")).collect();
    let env_labels: Vec<String> = envs
        .iter()
        .map(|e| format!("env_{}", e.seed.map_or_else(|| "authored".into(), |s| s.to_string())))
        .collect();
    Ok(RegretMatrix::new(co_players, env_labels, rows)?)
}
