//! Co-player population and selection distributions.
//!
//! The population holds frozen snapshots of the student, each carrying its
//! own environment buffer (the joint environment/co-player prioritization)
//! and a sliding window of recent outcomes for the prioritized-fictitious
//! variants. Selection rules all come as explicit probability vectors so
//! tests can compare Monte-Carlo draws against the closed form.

use super::buffer::EnvBuffer;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Sliding window of episode outcomes from the student's perspective:
/// 1 for a win, 0.5 for a draw, 0 for a loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinHistory {
    window: usize,
    outcomes: VecDeque<f64>,
}

impl WinHistory {
    pub fn new(window: usize) -> WinHistory {
        assert!(window >= 1, "win-history window must be at least 1");
        WinHistory { window, outcomes: VecDeque::new() }
    }

    pub fn push(&mut self, outcome: f64) {
        if self.outcomes.len() == self.window {
            self.outcomes.pop_front();
        }
        self.outcomes.push_back(outcome);
    }

    /// Mean outcome over the window; `None` before any episode.
    pub fn win_rate(&self) -> Option<f64> {
        if self.outcomes.is_empty() {
            None
        } else {
            Some(self.outcomes.iter().sum::<f64>() / self.outcomes.len() as f64)
        }
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }
}

/// One frozen co-player with its environment buffer and outcome window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationMember<P, F> {
    pub policy: F,
    pub checkpoint_id: u32,
    /// Student update count when this snapshot was frozen.
    pub creation_update: u64,
    pub buffer: EnvBuffer<P>,
    pub wins: WinHistory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Population<P, F> {
    members: Vec<PopulationMember<P, F>>,
}

impl<P: PartialEq, F> Population<P, F> {
    pub fn new() -> Population<P, F> {
        Population { members: Vec::new() }
    }

    /// Adds a freshly frozen snapshot with an empty buffer and no history.
    pub fn add_member(
        &mut self,
        policy: F,
        checkpoint_id: u32,
        creation_update: u64,
        buffer_capacity: usize,
        win_window: usize,
    ) {
        self.members.push(PopulationMember {
            policy,
            checkpoint_id,
            creation_update,
            buffer: EnvBuffer::new(buffer_capacity),
            wins: WinHistory::new(win_window),
        });
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[PopulationMember<P, F>] {
        &self.members
    }

    pub fn member(&self, index: usize) -> &PopulationMember<P, F> {
        &self.members[index]
    }

    pub fn member_mut(&mut self, index: usize) -> &mut PopulationMember<P, F> {
        &mut self.members[index]
    }

    pub fn buffer_sizes(&self) -> Vec<usize> {
        self.members.iter().map(|m| m.buffer.len()).collect()
    }
}

impl<P: PartialEq, F> Default for Population<P, F> {
    fn default() -> Self {
        Population::new()
    }
}

/// Regret-prioritized co-player distribution: the member whose buffer holds
/// the highest regret score receives probability `(N − λ(N−1))/N` and every
/// other member `λ/N`. Members with empty buffers count as −∞; ties go to the
/// lowest checkpoint id. With λ = 1 this degenerates to uniform; with one
/// member it is the point mass.
pub fn maestro_weights<P: PartialEq, F>(population: &Population<P, F>, lambda: f64) -> Vec<f64> {
    let n = population.len();
    assert!(n >= 1, "cannot select from an empty population");
    assert!((0.0..=1.0).contains(&lambda), "mixing weight must lie in [0, 1]");
    let mut winner = 0usize;
    let mut best = f64::NEG_INFINITY;
    for (i, m) in population.members().iter().enumerate() {
        let score = m.buffer.max_score().unwrap_or(f64::NEG_INFINITY);
        let better = score > best
            || (score == best
                && m.checkpoint_id < population.member(winner).checkpoint_id);
        if i == 0 || better {
            winner = i;
            best = score;
        }
    }
    let nf = n as f64;
    let floor = lambda / nf;
    let mut w = vec![floor; n];
    w[winner] = (nf - lambda * (nf - 1.0)) / nf;
    w
}

/// Hard prioritized-fictitious weighting `(1 − winrate)^p + smoothing`,
/// normalized. Unplayed members count as win rate 0.5.
pub fn pfsp_weights(win_rates: &[Option<f64>], power: f64, smoothing: f64) -> Vec<f64> {
    assert!(!win_rates.is_empty(), "cannot select from an empty population");
    let raw: Vec<f64> = win_rates
        .iter()
        .map(|wr| (1.0 - wr.unwrap_or(0.5)).powf(power) + smoothing)
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// Plain fictitious play: uniform over the population.
pub fn fsp_weights(n: usize) -> Vec<f64> {
    assert!(n >= 1, "cannot select from an empty population");
    vec![1.0 / n as f64; n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngHandle;
    use crate::uposg::EnvParams;

    fn pop_with_scores(scores: &[Option<f64>]) -> Population<u32, ()> {
        let mut pop = Population::new();
        for (i, s) in scores.iter().enumerate() {
            pop.add_member((), i as u32, i as u64 * 10, 4, 8);
            if let Some(score) = s {
                let m = pop.member_mut(i);
                m.buffer.insert(EnvParams::authored(i as u32), *score, 0);
            }
        }
        pop
    }

    #[test]
    fn winner_take_most_distribution_matches_the_formula() {
        // N = 4, λ = 0.1: winner (4 − 0.3)/4 = 0.925, the rest 0.025.
        let pop = pop_with_scores(&[Some(0.1), Some(0.7), Some(0.3), None]);
        let w = maestro_weights(&pop, 0.1);
        assert!((w[1] - 0.925).abs() < 1e-12, "{w:?}");
        for i in [0, 2, 3] {
            assert!((w[i] - 0.025).abs() < 1e-12);
        }
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_one_is_uniform_and_single_member_is_certain() {
        let pop = pop_with_scores(&[Some(0.9), Some(0.1), None]);
        let w = maestro_weights(&pop, 1.0);
        for wi in &w {
            assert!((wi - 1.0 / 3.0).abs() < 1e-12);
        }
        let solo = pop_with_scores(&[None]);
        assert_eq!(maestro_weights(&solo, 0.1), vec![1.0]);
    }

    #[test]
    fn regret_ties_and_empty_buffers_resolve_deterministically() {
        // Equal max scores: the lower checkpoint id wins.
        let pop = pop_with_scores(&[Some(0.5), Some(0.5)]);
        let w = maestro_weights(&pop, 0.2);
        assert!(w[0] > w[1]);
        // All buffers empty: member 0 is the argmax by convention.
        let empty = pop_with_scores(&[None, None, None]);
        let we = maestro_weights(&empty, 0.2);
        assert!(we[0] > we[1]);
    }

    #[test]
    fn pfsp_matches_the_hand_example_and_handles_unplayed() {
        // Win rates (0.2, 0.8), p = 2, smoothing 0.1:
        // raw (0.74, 0.14) → (0.8409…, 0.1590…).
        let w = pfsp_weights(&[Some(0.2), Some(0.8)], 2.0, 0.1);
        assert!((w[0] - 0.74 / 0.88).abs() < 1e-12);
        assert!((w[1] - 0.14 / 0.88).abs() < 1e-12);
        // Unplayed member counts as 0.5.
        let u = pfsp_weights(&[Some(0.5), None], 2.0, 0.1);
        assert!((u[0] - u[1]).abs() < 1e-12);
    }

    #[test]
    fn pfsp_prefers_opponents_the_student_loses_to() {
        let w = pfsp_weights(&[Some(0.9), Some(0.1), Some(0.5)], 2.0, 0.1);
        assert!(w[1] > w[2] && w[2] > w[0], "{w:?}");
    }

    #[test]
    fn win_history_is_a_sliding_window() {
        let mut h = WinHistory::new(3);
        assert_eq!(h.win_rate(), None);
        h.push(1.0);
        h.push(0.0);
        assert_eq!(h.win_rate(), Some(0.5));
        h.push(1.0);
        h.push(1.0); // evicts the first 1.0
        assert_eq!(h.len(), 3);
        assert!((h.win_rate().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_draws_match_the_closed_forms() {
        let mut rng = RngHandle::from_seed(12);
        let pop = pop_with_scores(&[Some(0.1), Some(0.7), Some(0.3)]);
        let w = maestro_weights(&pop, 0.1);
        let mut counts = vec![0usize; 3];
        let draws = 200_000;
        for _ in 0..draws {
            counts[rng.categorical(&w)] += 1;
        }
        for (c, wi) in counts.iter().zip(&w) {
            let freq = *c as f64 / draws as f64;
            assert!(
                (freq - wi).abs() < 0.005,
                "frequency {freq} strayed from probability {wi}"
            );
        }
    }

    #[test]
    fn population_serializes_round_trip() {
        let mut pop: Population<u32, String> = Population::new();
        pop.add_member("snapshot".into(), 0, 0, 4, 8);
        pop.member_mut(0).buffer.insert(EnvParams::authored(3), 0.5, 1);
        pop.member_mut(0).wins.push(1.0);
        let json = serde_json::to_string(&pop).unwrap();
        let back: Population<u32, String> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pop);
    }
}
