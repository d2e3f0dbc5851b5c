//! Regret estimators for prioritizing environments.
//!
//! True regret — the gap between the best attainable return and the
//! student's return — is unobservable in general, so the curriculum ranks
//! levels by proxies computed from rollout trajectories:
//!
//! - **MaxMC**: `(1/T) Σ_t (R_max − V(s_t))`, where `R_max` is the highest
//!   return ever achieved on this level against this co-player. No clipping:
//!   the score can go negative when the critic's predictions exceed the best
//!   known return.
//! - **Positive value loss**: `(1/T) Σ_t max(A_t, 0)` with `A_t` the
//!   generalized advantage estimate — the truncated-λ value-loss form that
//!   only counts steps where the realized return beat the critic.
//!
//! Small experiments can instead compute the exact score from a tabular best
//! response; that path carries the `Exact` tag.

use crate::uposg::{gae_advantages, GaeConfig, Trajectory, UposgError};
use serde::de::Deserializer;
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Which estimator produced a score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegretEstimator {
    MaxMc,
    Pvl,
    Exact,
}

/// A regret estimate tagged with its provenance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretScore {
    pub value: f64,
    pub estimator: RegretEstimator,
}

/// Highest return observed per (environment, co-player) pair. Keyed by the
/// environment's content hash and the co-player's checkpoint id, so the same
/// level keeps separate records against different opponents.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MaxReturnRegistry {
    entries: BTreeMap<(u64, u32), f64>,
}

impl MaxReturnRegistry {
    pub fn new() -> MaxReturnRegistry {
        MaxReturnRegistry::default()
    }

    /// Folds an observed episode return into the registry and returns the
    /// updated maximum for the pair.
    pub fn observe(&mut self, env_hash: u64, coplayer_id: u32, episode_return: f64) -> f64 {
        let entry = self
            .entries
            .entry((env_hash, coplayer_id))
            .and_modify(|m| *m = m.max(episode_return))
            .or_insert(episode_return);
        *entry
    }

    pub fn max_return(&self, env_hash: u64, coplayer_id: u32) -> Option<f64> {
        self.entries.get(&(env_hash, coplayer_id)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

// JSON objects key on strings, so the registry serializes as a sequence of
// (env_hash, coplayer_id, max_return) rows.
impl Serialize for MaxReturnRegistry {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.entries.len()))?;
        for ((env, cop), v) in &self.entries {
            seq.serialize_element(&(*env, *cop, *v))?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for MaxReturnRegistry {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows: Vec<(u64, u32, f64)> = Vec::deserialize(deserializer)?;
        let mut entries = BTreeMap::new();
        for (env, cop, v) in rows {
            entries.insert((env, cop), v);
        }
        Ok(MaxReturnRegistry { entries })
    }
}

/// MaxMC score: mean gap between the best known return and the critic's
/// predictions along the trajectory. Unclipped by design.
pub fn score_maxmc<O>(traj: &Trajectory<O>, max_return: f64) -> f64 {
    let t = traj.len() as f64;
    traj.values.iter().map(|v| max_return - v).sum::<f64>() / t
}

/// Positive value loss: mean clipped-at-zero generalized advantage.
pub fn score_pvl<O>(traj: &Trajectory<O>, gae: &GaeConfig) -> Result<f64, UposgError> {
    let adv = gae_advantages(traj, gae)?;
    let t = adv.len() as f64;
    Ok(adv.iter().map(|a| a.max(0.0)).sum::<f64>() / t)
}

/// Scores a trajectory with the configured estimator. `Exact` never scores
/// from a trajectory — oracles compute it directly — so asking for it here is
/// a usage error.
pub fn score_trajectory<O>(
    traj: &Trajectory<O>,
    estimator: RegretEstimator,
    max_return: f64,
    gae: &GaeConfig,
) -> Result<RegretScore, UposgError> {
    let value = match estimator {
        RegretEstimator::MaxMc => score_maxmc(traj, max_return),
        RegretEstimator::Pvl => score_pvl(traj, gae)?,
        RegretEstimator::Exact => {
            return Err(UposgError::Parameter(
                "the exact estimator is computed by a solver, not from trajectories".into(),
            ))
        }
    };
    Ok(RegretScore { value, estimator })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngHandle;

    fn traj_from(
        rewards: Vec<f64>,
        values: Vec<f64>,
        terminal: bool,
        bootstrap: f64,
    ) -> Trajectory<usize> {
        let t = rewards.len();
        let mut dones = vec![false; t];
        dones[t - 1] = true;
        let _ = terminal;
        Trajectory::new(
            (0..t).collect(),
            vec![0; t],
            rewards,
            values,
            dones,
            bootstrap,
            0.9,
            10_000,
        )
        .unwrap()
    }

    fn random_traj(rng: &mut RngHandle, t: usize) -> Trajectory<usize> {
        let rewards: Vec<f64> = (0..t).map(|_| rng.normal()).collect();
        let values: Vec<f64> = (0..t).map(|_| rng.normal()).collect();
        traj_from(rewards, values, true, 0.0)
    }

    #[test]
    fn maxmc_matches_the_hand_computed_example() {
        // values (0.5, 0.2, −0.1), R_max = 1.7:
        // mean(1.2, 1.5, 1.8) = 1.5
        let traj = traj_from(vec![1.0, -1.0, 2.0], vec![0.5, 0.2, -0.1], true, 0.0);
        assert!((score_maxmc(&traj, 1.7) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn pvl_matches_the_hand_computed_example() {
        // γ = 0.9, λ = 0.5, rewards (1, −1, 2), values (0.5, 0.2, −0.1),
        // terminal end. δ = (0.68, −1.29, 2.1); with γλ = 0.45 the advantages
        // are A₂ = 2.1, A₁ = −0.345, A₀ = 0.52475. The clipped mean is
        // (0.52475 + 0 + 2.1) / 3.
        let traj = traj_from(vec![1.0, -1.0, 2.0], vec![0.5, 0.2, -0.1], true, 0.0);
        let gae = GaeConfig::new(0.9, 0.5).unwrap();
        let expected = (0.52475 + 0.0 + 2.1) / 3.0;
        assert!((score_pvl(&traj, &gae).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn pvl_is_never_negative() {
        let mut rng = RngHandle::from_seed(14);
        let gae = GaeConfig::new(0.99, 0.95).unwrap();
        for _ in 0..500 {
            let t = 1 + rng.index(20);
            let traj = random_traj(&mut rng, t);
            let s = score_pvl(&traj, &gae).unwrap();
            assert!(s >= 0.0, "positive value loss went negative: {s}");
        }
    }

    #[test]
    fn pvl_is_zero_when_the_critic_never_underestimates() {
        // Constant reward 0 with an over-optimistic critic: all advantages
        // negative, so the clipped mean is exactly zero.
        let traj = traj_from(vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0], true, 0.0);
        let gae = GaeConfig::new(0.9, 0.5).unwrap();
        assert_eq!(score_pvl(&traj, &gae).unwrap(), 0.0);
    }

    #[test]
    fn maxmc_shifts_exactly_with_the_max_return() {
        let mut rng = RngHandle::from_seed(2);
        for _ in 0..100 {
            let t = 1 + rng.index(12);
            let traj = random_traj(&mut rng, t);
            let r = rng.normal();
            let c = rng.unit() * 3.0;
            let base = score_maxmc(&traj, r);
            let shifted = score_maxmc(&traj, r + c);
            assert!((shifted - base - c).abs() < 1e-9, "shift {c} moved score by {}", shifted - base);
        }
    }

    #[test]
    fn maxmc_can_go_negative_without_clipping() {
        let traj = traj_from(vec![0.0], vec![2.0], true, 0.0);
        assert!(score_maxmc(&traj, 1.0) < 0.0);
    }

    #[test]
    fn maxmc_is_invariant_to_value_order() {
        let a = traj_from(vec![0.0, 0.0, 0.0], vec![0.3, -0.9, 0.4], true, 0.0);
        let b = traj_from(vec![0.0, 0.0, 0.0], vec![0.4, 0.3, -0.9], true, 0.0);
        assert!((score_maxmc(&a, 1.0) - score_maxmc(&b, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn registry_folds_to_the_prefix_maximum() {
        let mut rng = RngHandle::from_seed(6);
        let mut registry = MaxReturnRegistry::new();
        let returns: Vec<f64> = (0..200).map(|_| rng.normal()).collect();
        let mut best = f64::NEG_INFINITY;
        for r in &returns {
            best = best.max(*r);
            let got = registry.observe(42, 7, *r);
            assert_eq!(got, best, "registry diverged from the running maximum");
        }
        assert_eq!(registry.max_return(42, 7), Some(best));
    }

    #[test]
    fn registry_keys_are_per_environment_and_coplayer() {
        let mut registry = MaxReturnRegistry::new();
        registry.observe(1, 0, 0.25);
        registry.observe(1, 1, -0.5);
        registry.observe(2, 0, 0.75);
        assert_eq!(registry.max_return(1, 0), Some(0.25));
        assert_eq!(registry.max_return(1, 1), Some(-0.5));
        assert_eq!(registry.max_return(2, 0), Some(0.75));
        assert_eq!(registry.max_return(3, 0), None);
        assert_eq!(registry.len(), 3);
    }

    #[test]
    fn registry_serializes_round_trip() {
        let mut registry = MaxReturnRegistry::new();
        registry.observe(9, 2, 0.125);
        registry.observe(u64::MAX, 0, -1.0);
        let json = serde_json::to_string(&registry).unwrap();
        let back: MaxReturnRegistry = serde_json::from_str(&json).unwrap();
        assert_eq!(back, registry);
    }

    #[test]
    fn estimator_dispatch_tags_scores_and_rejects_exact() {
        let traj = traj_from(vec![1.0], vec![0.5], true, 0.0);
        let gae = GaeConfig::new(0.9, 0.5).unwrap();
        let m = score_trajectory(&traj, RegretEstimator::MaxMc, 1.0, &gae).unwrap();
        assert_eq!(m.estimator, RegretEstimator::MaxMc);
        assert!((m.value - 0.5).abs() < 1e-15);
        let p = score_trajectory(&traj, RegretEstimator::Pvl, 1.0, &gae).unwrap();
        assert_eq!(p.estimator, RegretEstimator::Pvl);
        assert!(score_trajectory(&traj, RegretEstimator::Exact, 1.0, &gae).is_err());
    }

    #[test]
    fn estimators_rank_underestimated_levels_above_mastered_ones() {
        // A level where the critic badly underestimates (high regret proxy)
        // must outrank one the critic has nailed, under both estimators.
        let hard = traj_from(vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0], true, 0.0);
        let easy_values = vec![0.81, 0.9, 1.0]; // exact discounted critic, γ=0.9
        let easy = traj_from(vec![0.0, 0.0, 1.0], easy_values, true, 0.0);
        let gae = GaeConfig::new(0.9, 0.95).unwrap();
        assert!(score_pvl(&hard, &gae).unwrap() > score_pvl(&easy, &gae).unwrap() + 0.1);
        let r_max = 0.81; // discounted return of both episodes
        assert!(score_maxmc(&hard, r_max) > score_maxmc(&easy, r_max) + 0.1);
    }
}
