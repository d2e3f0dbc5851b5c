//! Joint curricula over environments and co-players for two-player zero-sum
//! games, with regret-prioritized replay buffers, PPO and exact tabular
//! learners, a procedural tag gridworld, and a cross-play evaluation harness.
//!
//! Module map:
//! - [`uposg`]: core episode/parameter types and return/advantage arithmetic
//! - [`matrix`]: matrix-game lab — selection demo, exact solver, equilibrium checks
//! - [`lasertag`]: the procedural two-player tag gridworld
//! - [`learner`]: policies, PPO, and the tabular best-response oracle
//! - [`regret`]: trajectory-level regret estimators and the max-return registry
//! - [`curriculum`]: replay buffers, co-player samplers, and the training loop
//! - [`evaluation`]: round-robin cross-play, specialist probes, run statistics
//! - [`rng`]: explicit seeded random streams (no global RNG anywhere)

pub mod curriculum;
pub mod evaluation;
pub mod lasertag;
pub mod learner;
pub mod matrix;
pub mod regret;
pub mod rng;
pub mod uposg;
