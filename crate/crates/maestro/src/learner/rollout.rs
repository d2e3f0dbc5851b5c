//! Episode execution: policies driving the tag gridworld.
//!
//! The student is always agent 0; to play the other start, swap the starts in
//! the level parameters. Each step draws the student action first and the
//! co-player action second from the shared stream, which pins the RNG call
//! sequence for reproducibility.

use super::policy::{act, LearnerError, PolicyParams};
use crate::lasertag::{observe, reset, step, Action, LaserTagParams, Observation};
use crate::rng::RngHandle;
use crate::uposg::Trajectory;

/// Raw result of one episode from agent 0's perspective.
#[derive(Clone, Copy, Debug)]
pub struct MatchOutcome {
    /// Undiscounted return for agent 0: +1 tagged, −1 got tagged, 0 otherwise.
    pub raw_return: f64,
    pub steps: usize,
    /// True when the episode ended in a tag rather than the step cap.
    pub terminal: bool,
}

/// Plays one episode and records the student's trajectory (observations,
/// actions, rewards, value predictions). On truncation the student's value
/// estimate of the final state becomes the bootstrap; termination bootstraps
/// zero. The student must be mutable so tabular students can allocate slots
/// for new observations; frozen co-players never mutate.
pub fn collect_trajectory(
    params: &LaserTagParams,
    student: &mut PolicyParams,
    coplayer: &PolicyParams,
    rng: &mut RngHandle,
    max_steps: usize,
    gamma: f64,
) -> Result<(Trajectory<Observation>, MatchOutcome), LearnerError> {
    let mut state = reset(params);
    let mut observations = Vec::new();
    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    let mut values = Vec::new();
    let mut dones = Vec::new();
    loop {
        let obs0 = observe(&state.board, &state.poses, 0);
        student.ensure_slot(&obs0);
        let (a0, _, v0) = act(student, &obs0, rng)?;
        let obs1 = observe(&state.board, &state.poses, 1);
        let (a1, _, _) = act(coplayer, &obs1, rng)?;
        let outcome = step(&mut state, [Action::from_index(a0), Action::from_index(a1)], max_steps);
        observations.push(obs0);
        actions.push(a0);
        rewards.push(outcome.rewards[0]);
        values.push(v0);
        dones.push(outcome.done);
        if outcome.done {
            let bootstrap = if outcome.terminal {
                0.0
            } else {
                let last = observe(&state.board, &state.poses, 0);
                student.forward(&last)?.value
            };
            let raw: f64 = rewards.iter().sum();
            let steps = rewards.len();
            let traj = Trajectory::new(
                observations,
                actions,
                rewards,
                values,
                dones,
                bootstrap,
                gamma,
                max_steps,
            )
            .map_err(|e| LearnerError::Parameter(e.to_string()))?;
            return Ok((traj, MatchOutcome { raw_return: raw, steps, terminal: outcome.terminal }));
        }
    }
}

/// Plays one episode without recording a trajectory (both policies immutable;
/// tabular lookups fall back to uniform on unseen observations).
pub fn play_match(
    params: &LaserTagParams,
    agent0: &PolicyParams,
    agent1: &PolicyParams,
    rng: &mut RngHandle,
    max_steps: usize,
) -> Result<MatchOutcome, LearnerError> {
    let mut state = reset(params);
    let mut raw = 0.0;
    let mut steps = 0usize;
    loop {
        let obs0 = observe(&state.board, &state.poses, 0);
        let (a0, _, _) = act(agent0, &obs0, rng)?;
        let obs1 = observe(&state.board, &state.poses, 1);
        let (a1, _, _) = act(agent1, &obs1, rng)?;
        let outcome = step(&mut state, [Action::from_index(a0), Action::from_index(a1)], max_steps);
        raw += outcome.rewards[0];
        steps += 1;
        if outcome.done {
            return Ok(MatchOutcome { raw_return: raw, steps, terminal: outcome.terminal });
        }
    }
}
