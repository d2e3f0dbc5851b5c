//! Bounded top-K environment buffer with rank/staleness replay priorities.
//!
//! Insertion semantics:
//! - An environment already present (payload equality) is *refreshed*: its
//!   score and insertion time are overwritten in place.
//! - Otherwise, a buffer below capacity appends.
//! - A full buffer evicts its minimum entry — ordered by (score, insertion
//!   time, slot index) — but only when the candidate's score is strictly
//!   greater; equal or lower candidates are rejected, so the buffer's minimum
//!   never decreases from an insert.
//!
//! Replay sampling mixes a rank-based score distribution with a staleness
//! distribution: `P = (1 − ρ) · P_score + ρ · P_stale`, where `P_score` puts
//! weight `rank^(−1/β)` on the rank-1 (highest-score) entry downwards and
//! `P_stale` is proportional to the episodes elapsed since an entry was last
//! touched.

use crate::uposg::EnvParams;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry<P> {
    pub params: EnvParams<P>,
    pub score: f64,
    /// Episode clock at insertion or refresh.
    pub insert_at: u64,
    /// Episode clock when last replayed; `None` until first replay.
    pub last_sampled_at: Option<u64>,
}

impl<P> ReplayEntry<P> {
    /// Episodes since this entry was inserted or replayed.
    pub fn staleness(&self, now: u64) -> u64 {
        now.saturating_sub(self.last_sampled_at.unwrap_or(self.insert_at).max(self.insert_at))
    }
}

/// What an insert did to the buffer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    /// Payload already present; its entry was overwritten.
    Refreshed(usize),
    /// Appended below capacity.
    Inserted(usize),
    /// Evicted the minimum entry and took its slot.
    Replaced(usize),
    /// Full and not strictly better than the minimum.
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvBuffer<P> {
    capacity: usize,
    entries: Vec<ReplayEntry<P>>,
}

impl<P: PartialEq> EnvBuffer<P> {
    pub fn new(capacity: usize) -> EnvBuffer<P> {
        assert!(capacity >= 1, "buffer capacity must be at least 1");
        EnvBuffer { capacity, entries: Vec::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn entries(&self) -> &[ReplayEntry<P>] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> &ReplayEntry<P> {
        &self.entries[index]
    }

    /// Slot of the minimum entry by (score, insert_at, index).
    fn min_slot(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, e) in self.entries.iter().enumerate() {
            let better = match best {
                None => true,
                Some(b) => {
                    let eb = &self.entries[b];
                    (e.score, e.insert_at, i) < (eb.score, eb.insert_at, b)
                }
            };
            if better {
                best = Some(i);
            }
        }
        best
    }

    pub fn min_score(&self) -> Option<f64> {
        self.min_slot().map(|i| self.entries[i].score)
    }

    pub fn max_score(&self) -> Option<f64> {
        self.entries.iter().map(|e| e.score).fold(None, |acc, s| match acc {
            None => Some(s),
            Some(a) => Some(a.max(s)),
        })
    }

    pub fn insert(&mut self, params: EnvParams<P>, score: f64, now: u64) -> InsertOutcome {
        if let Some(i) = self.entries.iter().position(|e| e.params == params) {
            self.entries[i].score = score;
            self.entries[i].insert_at = now;
            return InsertOutcome::Refreshed(i);
        }
        if self.entries.len() < self.capacity {
            self.entries.push(ReplayEntry { params, score, insert_at: now, last_sampled_at: None });
            return InsertOutcome::Inserted(self.entries.len() - 1);
        }
        let slot = self.min_slot().expect("full buffer has a minimum");
        if score > self.entries[slot].score {
            self.entries[slot] =
                ReplayEntry { params, score, insert_at: now, last_sampled_at: None };
            InsertOutcome::Replaced(slot)
        } else {
            InsertOutcome::Rejected
        }
    }

    /// Records that `index` was replayed now and stores its fresh score.
    pub fn record_replay(&mut self, index: usize, score: f64, now: u64) {
        let e = &mut self.entries[index];
        e.score = score;
        e.last_sampled_at = Some(now);
    }
}

/// Replay distribution over the buffer's slots. Empty buffers give an empty
/// vector. `beta` is the rank temperature, `staleness_coef` the mixing
/// weight ρ of the staleness term.
pub fn replay_distribution<P: PartialEq>(
    buffer: &EnvBuffer<P>,
    now: u64,
    beta: f64,
    staleness_coef: f64,
) -> Vec<f64> {
    let n = buffer.len();
    if n == 0 {
        return Vec::new();
    }
    // Rank entries: highest score first; ties go to the older insert, then
    // the lower slot.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (buffer.get(a), buffer.get(b));
        eb.score
            .partial_cmp(&ea.score)
            .expect("scores are finite")
            .then(ea.insert_at.cmp(&eb.insert_at))
            .then(a.cmp(&b))
    });
    let mut p_score = vec![0.0; n];
    let mut total = 0.0;
    for (pos, &slot) in order.iter().enumerate() {
        let w = ((pos + 1) as f64).powf(-1.0 / beta);
        p_score[slot] = w;
        total += w;
    }
    for w in &mut p_score {
        *w /= total;
    }
    let stale: Vec<f64> = (0..n).map(|i| buffer.get(i).staleness(now) as f64).collect();
    let stale_total: f64 = stale.iter().sum();
    let p_stale: Vec<f64> = if stale_total == 0.0 {
        vec![1.0 / n as f64; n]
    } else {
        stale.iter().map(|s| s / stale_total).collect()
    };
    (0..n)
        .map(|i| (1.0 - staleness_coef) * p_score[i] + staleness_coef * p_stale[i])
        .collect()
}
