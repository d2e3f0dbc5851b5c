//! Learning agents: policy representations, the clipped-surrogate update,
//! episode rollouts, and exact tabular oracles.

pub mod adam;
pub mod policy;
pub mod ppo;
pub mod rollout;
pub mod tabular;

pub use adam::{AdamState, ADAM_DEFAULT_EPSILON};
pub use policy::{
    act, act_greedy, Arch, Encode, FrozenPolicy, LearnerError, ObsEncoding, PolicyParams,
};
pub use ppo::{ppo_update, PpoConfig, Student, UpdateDiagnostics};
pub use rollout::{collect_trajectory, play_match, MatchOutcome};
pub use tabular::{
    best_response, build_model, evaluate_pair, ActionSelect, TabularConfig, TabularModel,
    TabularSolution, DEFAULT_STATE_BOUND,
};
