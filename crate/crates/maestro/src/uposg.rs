//! Core types for two-player zero-sum underspecified games plus the
//! return/advantage arithmetic shared by every learner in the crate.
//!
//! An *underspecified* game exposes a free parameter record θ ([`EnvParams`])
//! that picks one concrete environment instance; the curriculum machinery
//! searches over θ while training proceeds inside the chosen instance. The
//! trajectory type here is the student-side record of one episode and is the
//! contract between environments, regret estimators and the PPO learner.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Format tag written into serialized trajectories / env params so later
/// revisions can evolve the layout without silently misreading old files.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum UposgError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("malformed trajectory: {0}")]
    Shape(String),
    #[error("serialization: {0}")]
    Serde(String),
    #[error("unsupported format version {found} (this build reads version {expected})")]
    Version { found: u32, expected: u32 },
}

/// Static description of a two-player zero-sum game family: how many discrete
/// actions each player has, what an observation looks like, and the step cap
/// after which an episode is truncated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UposgSpec {
    pub num_actions: usize,
    pub observation: ObsSpace,
    pub max_episode_steps: usize,
}

/// Observation space descriptor. `Grid` is a small egocentric window of cell
/// codes; `Discrete` is a plain state index (tabular settings, matrix games).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObsSpace {
    Grid { rows: usize, cols: usize, num_codes: usize },
    Discrete { n: usize },
}

/// Environment parameter record θ. The payload is whatever the concrete
/// environment needs to rebuild the instance; `seed` remembers how the payload
/// was generated (absent for hand-authored instances loaded from files).
///
/// Equality and hashing look at the payload only: two records describing the
/// same instance collapse to one buffer entry even if they were minted from
/// different seeds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvParams<P> {
    pub version: u32,
    pub seed: Option<u64>,
    pub payload: P,
}

impl<P> EnvParams<P> {
    pub fn generated(seed: u64, payload: P) -> Self {
        EnvParams { version: FORMAT_VERSION, seed: Some(seed), payload }
    }

    pub fn authored(payload: P) -> Self {
        EnvParams { version: FORMAT_VERSION, seed: None, payload }
    }
}

impl<P: PartialEq> PartialEq for EnvParams<P> {
    fn eq(&self, other: &Self) -> bool {
        self.payload == other.payload
    }
}

impl<P: Eq> Eq for EnvParams<P> {}

impl<P: std::hash::Hash> std::hash::Hash for EnvParams<P> {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.payload.hash(state);
    }
}

impl<P: Serialize + DeserializeOwned> EnvParams<P> {
    pub fn to_json(&self) -> Result<String, UposgError> {
        serde_json::to_string(self).map_err(|e| UposgError::Serde(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self, UposgError> {
        let v: Self = serde_json::from_str(s).map_err(|e| UposgError::Serde(e.to_string()))?;
        if v.version != FORMAT_VERSION {
            return Err(UposgError::Version { found: v.version, expected: FORMAT_VERSION });
        }
        Ok(v)
    }

    /// Stable content hash of the record (FNV-1a over the canonical JSON
    /// bytes). Used as the environment identity in event logs and the
    /// max-return registry; deterministic across platforms and runs.
    pub fn content_hash(&self) -> u64 {
        let bytes = serde_json::to_vec(&(&self.payload,)).expect("payload serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

/// Discount/GAE coefficient pair, validated on construction: γ ∈ (0, 1],
/// λ ∈ [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaeConfig {
    gamma: f64,
    lambda: f64,
}

impl GaeConfig {
    pub fn new(gamma: f64, lambda: f64) -> Result<Self, UposgError> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(UposgError::Parameter(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(UposgError::Parameter(format!("lambda must lie in [0, 1], got {lambda}")));
        }
        Ok(GaeConfig { gamma, lambda })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// One episode as seen by the student: per-step observation, chosen action,
/// reward, critic value prediction and termination flag, all lists of equal
/// length. `bootstrap_value` is the critic's value of the state *after* the
/// final step; it is only consulted when the episode was cut off by the step
/// cap (final `done == false`), in which case the advantage math bootstraps
/// from it instead of from zero. True terminations bootstrap zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<O> {
    pub version: u32,
    pub observations: Vec<O>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub bootstrap_value: f64,
    /// Discounted return Σ_t γ^t r_t of this episode.
    pub episode_return: f64,
    /// This episode's realized return, recorded as a candidate for the
    /// per-(environment, co-player) max-return registry.
    pub max_return_candidate: f64,
}

impl<O> Trajectory<O> {
    /// Builds and validates a trajectory. All lists must share one length
    /// `T ≥ 1`, `T` must respect the step cap, and only the final step may be
    /// marked done.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        observations: Vec<O>,
        actions: Vec<usize>,
        rewards: Vec<f64>,
        values: Vec<f64>,
        dones: Vec<bool>,
        bootstrap_value: f64,
        gamma: f64,
        max_episode_steps: usize,
    ) -> Result<Self, UposgError> {
        let t = observations.len();
        if t == 0 {
            return Err(UposgError::Shape("trajectory must contain at least one step".into()));
        }
        if [actions.len(), rewards.len(), values.len(), dones.len()].iter().any(|&l| l != t) {
            return Err(UposgError::Shape(format!(
                "per-step lists disagree on length: obs {t}, actions {}, rewards {}, values {}, dones {}",
                actions.len(),
                rewards.len(),
                values.len(),
                dones.len()
            )));
        }
        if t > max_episode_steps {
            return Err(UposgError::Shape(format!(
                "trajectory length {t} exceeds the step cap {max_episode_steps}"
            )));
        }
        if dones[..t - 1].iter().any(|&d| d) {
            return Err(UposgError::Shape("done may only be set on the final step".into()));
        }
        let episode_return = discounted_return(&rewards, gamma)?;
        Ok(Trajectory {
            version: FORMAT_VERSION,
            observations,
            actions,
            rewards,
            values,
            dones,
            bootstrap_value,
            episode_return,
            max_return_candidate: episode_return,
        })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Sum of raw rewards (undiscounted outcome; ±1/0 in the tag game).
    pub fn raw_return(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

impl<O: Serialize + DeserializeOwned> Trajectory<O> {
    pub fn to_json(&self) -> Result<String, UposgError> {
        serde_json::to_string(self).map_err(|e| UposgError::Serde(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self, UposgError> {
        let v: Self = serde_json::from_str(s).map_err(|e| UposgError::Serde(e.to_string()))?;
        if v.version != FORMAT_VERSION {
            return Err(UposgError::Version { found: v.version, expected: FORMAT_VERSION });
        }
        Ok(v)
    }
}

/// Discounted return Σ_t γ^t r_t. Empty reward lists return 0.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> Result<f64, UposgError> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(UposgError::Parameter(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    // Horner form, summed back-to-front for accuracy.
    Ok(rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc))
}

/// One-step temporal-difference residuals
/// δ_t = r_t + γ·V(s_{t+1})·(1 − done_t) − V(s_t).
///
/// The value of the state after the final step is the trajectory's
/// `bootstrap_value` (zero when the episode truly terminated, since `done`
/// zeroes the term anyway; the critic's estimate when it was truncated).
pub fn td_errors<O>(traj: &Trajectory<O>, gamma: f64) -> Result<Vec<f64>, UposgError> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(UposgError::Parameter(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let t_max = traj.len();
    let mut out = Vec::with_capacity(t_max);
    for t in 0..t_max {
        let next_v = if t + 1 < t_max { traj.values[t + 1] } else { traj.bootstrap_value };
        let not_done = if traj.dones[t] { 0.0 } else { 1.0 };
        out.push(traj.rewards[t] + gamma * next_v * not_done - traj.values[t]);
    }
    Ok(out)
}

/// Generalized advantage estimates, single backward pass:
/// A_t = δ_t + γλ·(1 − done_t)·A_{t+1}.
pub fn gae_advantages<O>(traj: &Trajectory<O>, cfg: &GaeConfig) -> Result<Vec<f64>, UposgError> {
    let deltas = td_errors(traj, cfg.gamma())?;
    let gl = cfg.gamma() * cfg.lambda();
    let mut adv = vec![0.0; deltas.len()];
    let mut acc = 0.0;
    for t in (0..deltas.len()).rev() {
        let not_done = if traj.dones[t] { 0.0 } else { 1.0 };
        acc = deltas[t] + gl * not_done * acc;
        adv[t] = acc;
    }
    Ok(adv)
}

/// Critic regression targets: advantages plus the recorded value predictions.
pub fn value_targets<O>(traj: &Trajectory<O>, advantages: &[f64]) -> Vec<f64> {
    advantages.iter().zip(&traj.values).map(|(a, v)| a + v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(
        rewards: Vec<f64>,
        values: Vec<f64>,
        dones: Vec<bool>,
        bootstrap: f64,
        gamma: f64,
    ) -> Trajectory<usize> {
        let t = rewards.len();
        Trajectory::new(vec![0; t], vec![0; t], rewards, values, dones, bootstrap, gamma, 256)
            .unwrap()
    }

    #[test]
    fn discounted_return_undiscounted_sum() {
        assert_eq!(discounted_return(&[1.0, 1.0, 1.0], 1.0).unwrap(), 3.0);
    }

    #[test]
    fn discounted_return_weights_late_rewards_down() {
        // 0 + 0.5*(0 + 0.5*1) = 0.25
        assert!((discounted_return(&[0.0, 0.0, 1.0], 0.5).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn discounted_return_empty_is_zero() {
        assert_eq!(discounted_return(&[], 0.9).unwrap(), 0.0);
    }

    #[test]
    fn discounted_return_rejects_bad_gamma() {
        assert!(discounted_return(&[1.0], 0.0).is_err());
        assert!(discounted_return(&[1.0], 1.5).is_err());
        assert!(discounted_return(&[1.0], -0.1).is_err());
    }

    #[test]
    fn td_terminal_step_bootstraps_zero() {
        // Single terminal step: δ = 1 + γ·0 − 0 = 1.
        let t = traj(vec![1.0], vec![0.0], vec![true], 0.0, 1.0);
        assert_eq!(td_errors(&t, 1.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn td_mid_episode_uses_next_value() {
        // δ_0 = 0 + 1·0.5 − 0.5 = 0; δ_1 = 0 + 0 − 0.5 = −0.5 (done).
        let t = traj(vec![0.0, 0.0], vec![0.5, 0.5], vec![false, true], 0.0, 1.0);
        assert_eq!(td_errors(&t, 1.0).unwrap(), vec![0.0, -0.5]);
    }

    #[test]
    fn td_truncated_episode_bootstraps_critic_value() {
        // Final step not done: δ_1 = 0 + 0.5·2.0 − 1.0 = 0 with bootstrap 2.0.
        let t = traj(vec![0.0, 0.0], vec![1.0, 1.0], vec![false, false], 2.0, 0.5);
        let d = td_errors(&t, 0.5).unwrap();
        assert!((d[0] - (0.0 + 0.5 * 1.0 - 1.0)).abs() < 1e-12);
        assert!((d[1] - (0.0 + 0.5 * 2.0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn gae_matches_hand_computation() {
        // δ = [1, 1] (values zero, rewards 1 then terminal? no: keep both
        // non-terminal with zero bootstrap so δ_t = r_t). γλ = 0.5:
        // A_1 = 1, A_0 = 1 + 0.5·1 = 1.5.
        let t = traj(vec![1.0, 1.0], vec![0.0, 0.0], vec![false, false], 0.0, 1.0);
        let cfg = GaeConfig::new(1.0, 0.5).unwrap();
        let a = gae_advantages(&t, &cfg).unwrap();
        assert!((a[0] - 1.5).abs() < 1e-12);
        assert!((a[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gae_with_lambda_zero_is_td_error() {
        let t = traj(vec![0.3, -0.7, 1.1], vec![0.2, -0.1, 0.4], vec![false, false, true], 0.0, 0.9);
        let cfg = GaeConfig::new(0.9, 0.0).unwrap();
        assert_eq!(gae_advantages(&t, &cfg).unwrap(), td_errors(&t, 0.9).unwrap());
    }

    #[test]
    fn gae_with_lambda_one_is_discounted_return_minus_value() {
        // λ=1 telescopes to Σ γ^k r − V when the episode terminates.
        let t = traj(vec![1.0, 0.0, -1.0], vec![0.3, 0.1, -0.2], vec![false, false, true], 0.0, 0.5);
        let cfg = GaeConfig::new(0.5, 1.0).unwrap();
        let a = gae_advantages(&t, &cfg).unwrap();
        let g2 = -1.0;
        let g1 = 0.0 + 0.5 * g2;
        let g0 = 1.0 + 0.5 * g1;
        assert!((a[0] - (g0 - 0.3)).abs() < 1e-12);
        assert!((a[1] - (g1 - 0.1)).abs() < 1e-12);
        assert!((a[2] - (g2 + 0.2)).abs() < 1e-12);
    }

    /// Brute-force GAE oracle: A_t = Σ_{k=t}^{T−1} (γλ)^{k−t} δ_k, with the sum
    /// stopping at a done flag. Written as the obvious double loop so the fast
    /// backward pass has something independent to disagree with.
    fn gae_double_sum(deltas: &[f64], dones: &[bool], gl: f64) -> Vec<f64> {
        let t_max = deltas.len();
        let mut out = vec![0.0; t_max];
        for t in 0..t_max {
            let mut w = 1.0;
            for k in t..t_max {
                out[t] += w * deltas[k];
                if dones[k] {
                    break;
                }
                w *= gl;
            }
        }
        out
    }

    #[test]
    fn gae_agrees_with_double_sum_oracle_on_random_trajectories() {
        let mut rng = crate::rng::RngHandle::from_seed(0xA11CE);
        for _ in 0..500 {
            let t_max = rng.int_in(1, 64);
            let gamma = 0.5 + 0.5 * rng.unit();
            let lambda = rng.unit();
            let terminated = rng.chance(0.5);
            let rewards: Vec<f64> = (0..t_max).map(|_| rng.unit() * 2.0 - 1.0).collect();
            let values: Vec<f64> = (0..t_max).map(|_| rng.unit() * 2.0 - 1.0).collect();
            let mut dones = vec![false; t_max];
            if terminated {
                dones[t_max - 1] = true;
            }
            let bootstrap = if terminated { 0.0 } else { rng.unit() };
            let tr = traj(rewards, values, dones.clone(), bootstrap, gamma);
            let cfg = GaeConfig::new(gamma, lambda).unwrap();
            let fast = gae_advantages(&tr, &cfg).unwrap();
            let slow = gae_double_sum(&td_errors(&tr, gamma).unwrap(), &dones, gamma * lambda);
            for (f, s) in fast.iter().zip(&slow) {
                assert!((f - s).abs() < 1e-9, "backward pass {f} vs double sum {s}");
            }
        }
    }

    #[test]
    fn episode_return_field_matches_direct_sum() {
        let t = traj(vec![0.1, 0.2, 0.3], vec![0.0; 3], vec![false, false, true], 0.0, 0.9);
        let direct = 0.1 + 0.9 * (0.2 + 0.9 * 0.3);
        assert!((t.episode_return - direct).abs() < 1e-9);
        assert_eq!(t.episode_return, t.max_return_candidate);
    }

    #[test]
    fn trajectory_rejects_ragged_lists() {
        let r = Trajectory::new(vec![0usize; 2], vec![0; 3], vec![0.0; 2], vec![0.0; 2], vec![false; 2], 0.0, 1.0, 256);
        assert!(matches!(r, Err(UposgError::Shape(_))));
    }

    #[test]
    fn trajectory_rejects_mid_episode_done() {
        let r = Trajectory::new(
            vec![0usize; 3],
            vec![0; 3],
            vec![0.0; 3],
            vec![0.0; 3],
            vec![false, true, true],
            0.0,
            1.0,
            256,
        );
        assert!(matches!(r, Err(UposgError::Shape(_))));
    }

    #[test]
    fn trajectory_rejects_step_cap_violation() {
        let r = Trajectory::new(vec![0usize; 5], vec![0; 5], vec![0.0; 5], vec![0.0; 5], vec![false; 5], 0.0, 1.0, 4);
        assert!(matches!(r, Err(UposgError::Shape(_))));
    }

    #[test]
    fn trajectory_json_roundtrips_bit_exactly() {
        let mut rng = crate::rng::RngHandle::from_seed(77);
        for _ in 0..200 {
            let t_max = rng.int_in(1, 30);
            let rewards: Vec<f64> = (0..t_max).map(|_| rng.unit() * 2.0 - 1.0).collect();
            let values: Vec<f64> = (0..t_max).map(|_| rng.normal()).collect();
            let mut dones = vec![false; t_max];
            if rng.chance(0.5) {
                dones[t_max - 1] = true;
            }
            let tr = traj(rewards, values, dones, rng.unit(), 0.995);
            let back = Trajectory::<usize>::from_json(&tr.to_json().unwrap()).unwrap();
            // Bit-exact float fields, not just approximate.
            assert!(back == tr, "JSON round-trip changed the trajectory");
        }
    }

    #[test]
    fn env_params_equal_on_payload_ignoring_seed() {
        let a = EnvParams::generated(1, vec![1u8, 2, 3]);
        let b = EnvParams::generated(99, vec![1u8, 2, 3]);
        let c = EnvParams::authored(vec![1u8, 2, 4]);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), c.content_hash());
    }

    #[test]
    fn env_params_json_roundtrip() {
        let a = EnvParams::generated(123, vec![9u8, 8]);
        let back = EnvParams::<Vec<u8>>::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(back.seed, Some(123));
        assert_eq!(back.payload, vec![9, 8]);
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let a = EnvParams::generated(1, 7u32);
        let json = a.to_json().unwrap().replace("\"version\":1", "\"version\":9");
        assert!(matches!(EnvParams::<u32>::from_json(&json), Err(UposgError::Version { .. })));
    }

    #[test]
    fn gae_config_validates_ranges() {
        assert!(GaeConfig::new(0.0, 0.5).is_err());
        assert!(GaeConfig::new(1.01, 0.5).is_err());
        assert!(GaeConfig::new(0.9, -0.1).is_err());
        assert!(GaeConfig::new(0.9, 1.1).is_err());
        assert!(GaeConfig::new(1.0, 1.0).is_ok());
    }
}
