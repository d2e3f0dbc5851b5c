//! Zero-sum solving via regret-matching dynamics.
//!
//! The solver runs alternating regret-matching-plus self-play with linearly
//! weighted strategy averages and stops on an *exact* exploitability
//! certificate: max over pure rows of the payoff against the average column
//! strategy, minus min over pure columns against the average row strategy.
//! The certificate is computed by direct enumeration, so a claimed tolerance
//! is a proof, not an estimate. Games with a pure saddle point short-circuit
//! (the certificate is zero at the saddle).

use super::{MatrixError, MixedStrategy, ZeroSumGame};
use serde::{Deserialize, Serialize};

/// Converged solution of a zero-sum game.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Solution {
    /// Game value from the row player's perspective, accurate to within the
    /// certified exploitability.
    pub value: f64,
    pub row_strategy: MixedStrategy,
    pub col_strategy: MixedStrategy,
    /// Certified duality gap of the returned strategy pair.
    pub exploitability: f64,
    pub iterations: u64,
}

fn rm_strategy(cum_regret: &[f64]) -> Vec<f64> {
    let total: f64 = cum_regret.iter().map(|q| q.max(0.0)).sum();
    if total <= 0.0 {
        vec![1.0 / cum_regret.len() as f64; cum_regret.len()]
    } else {
        cum_regret.iter().map(|q| q.max(0.0) / total).collect()
    }
}

fn normalized(weights: &[f64]) -> Vec<f64> {
    let s: f64 = weights.iter().sum();
    if s <= 0.0 {
        vec![1.0 / weights.len() as f64; weights.len()]
    } else {
        weights.iter().map(|w| w / s).collect()
    }
}

/// Exact duality gap of a strategy pair: how much a best-responding opponent
/// gains over the pair's value, summed for both sides. Enumerates pure
/// strategies, so it is exact up to f64 arithmetic.
pub fn duality_gap(game: &ZeroSumGame, row: &[f64], col: &[f64]) -> (f64, f64, f64) {
    let upper = game.row_payoffs(col).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lower = game.col_payoffs(row).iter().cloned().fold(f64::INFINITY, f64::min);
    (upper - lower, lower, upper)
}

/// Looks for a pure saddle point: an entry that is simultaneously a row-wise
/// minimum and column-wise maximum. Returns the exact solution when found.
fn pure_saddle(game: &ZeroSumGame) -> Option<Solution> {
    let m = game.num_rows();
    let n = game.num_cols();
    let row_min: Vec<f64> =
        (0..m).map(|i| (0..n).map(|j| game.get(i, j)).fold(f64::INFINITY, f64::min)).collect();
    let col_max: Vec<f64> =
        (0..n).map(|j| (0..m).map(|i| game.get(i, j)).fold(f64::NEG_INFINITY, f64::max)).collect();
    let maxmin = row_min.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let minmax = col_max.iter().cloned().fold(f64::INFINITY, f64::min);
    if maxmin == minmax {
        let i = row_min.iter().position(|v| *v == maxmin).unwrap();
        let j = col_max.iter().position(|v| *v == minmax).unwrap();
        Some(Solution {
            value: maxmin,
            row_strategy: MixedStrategy::point(m, i),
            col_strategy: MixedStrategy::point(n, j),
            exploitability: 0.0,
            iterations: 0,
        })
    } else {
        None
    }
}

/// Solves a zero-sum game to a certified `tolerance` on the duality gap.
/// Errors with the achieved gap if `max_iterations` runs out first.
pub fn solve_zero_sum(
    game: &ZeroSumGame,
    tolerance: f64,
    max_iterations: u64,
) -> Result<Solution, MatrixError> {
    if let Some(sol) = pure_saddle(game) {
        return Ok(sol);
    }
    let m = game.num_rows();
    let n = game.num_cols();
    let mut q_row = vec![0.0; m];
    let mut q_col = vec![0.0; n];
    let mut x_sum = vec![0.0; m];
    let mut y_sum = vec![0.0; n];
    let mut y = vec![1.0 / n as f64; n];
    let mut best: Option<Solution> = None;
    let check_every = 128u64;

    for t in 1..=max_iterations {
        // Row regret-matching update against the column's current strategy.
        let u_row = game.row_payoffs(&y);
        let x_old = rm_strategy(&q_row);
        let v_row: f64 = x_old.iter().zip(&u_row).map(|(a, b)| a * b).sum();
        for i in 0..m {
            q_row[i] = (q_row[i] + u_row[i] - v_row).max(0.0);
        }
        let x = rm_strategy(&q_row);
        // Column update sees the row's refreshed strategy (alternation).
        let u_col: Vec<f64> = game.col_payoffs(&x).iter().map(|v| -v).collect();
        let v_col: f64 = y.iter().zip(&u_col).map(|(a, b)| a * b).sum();
        for j in 0..n {
            q_col[j] = (q_col[j] + u_col[j] - v_col).max(0.0);
        }
        y = rm_strategy(&q_col);

        // Linearly weighted averages concentrate mass on late iterates.
        let w = t as f64;
        for i in 0..m {
            x_sum[i] += w * x[i];
        }
        for j in 0..n {
            y_sum[j] += w * y[j];
        }

        if t % check_every == 0 || t == max_iterations {
            let xb = normalized(&x_sum);
            let yb = normalized(&y_sum);
            let (gap, lower, upper) = duality_gap(game, &xb, &yb);
            let sol = Solution {
                value: 0.5 * (lower + upper),
                row_strategy: MixedStrategy::new(xb).expect("average strategy is a distribution"),
                col_strategy: MixedStrategy::new(yb).expect("average strategy is a distribution"),
                exploitability: gap,
                iterations: t,
            };
            if best.as_ref().map_or(true, |b| gap < b.exploitability) {
                best = Some(sol);
            }
            if gap <= tolerance {
                return Ok(best.unwrap());
            }
        }
    }
    let achieved = best.map(|b| b.exploitability).unwrap_or(f64::INFINITY);
    Err(MatrixError::Convergence {
        exploitability: achieved,
        iterations: max_iterations,
        tolerance,
    })
}

/// Online regret-matching-plus learner over a family of games, used as the
/// tabular student in toy curriculum runs. The per-game *average* strategy is
/// the learner's answer: played strategies may cycle, averages converge.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoRegretStudent {
    cum_regret: Vec<Vec<f64>>,
    strategy_sum: Vec<Vec<f64>>,
    observations: Vec<u64>,
}

impl NoRegretStudent {
    /// `row_counts[g]` is the number of rows the student can play in game `g`.
    pub fn new(row_counts: &[usize]) -> Self {
        NoRegretStudent {
            cum_regret: row_counts.iter().map(|&n| vec![0.0; n]).collect(),
            strategy_sum: row_counts.iter().map(|&n| vec![0.0; n]).collect(),
            observations: vec![0; row_counts.len()],
        }
    }

    pub fn num_games(&self) -> usize {
        self.cum_regret.len()
    }

    /// Registers a new game with `rows` playable rows; returns its index.
    pub fn add_game(&mut self, rows: usize) -> usize {
        self.cum_regret.push(vec![0.0; rows]);
        self.strategy_sum.push(vec![0.0; rows]);
        self.observations.push(0);
        self.cum_regret.len() - 1
    }

    /// Strategy the student plays *now* in game `g`.
    pub fn strategy(&self, g: usize) -> Vec<f64> {
        rm_strategy(&self.cum_regret[g])
    }

    /// Time-averaged strategy in game `g`; uniform before any update.
    pub fn average_strategy(&self, g: usize) -> MixedStrategy {
        MixedStrategy::new(normalized(&self.strategy_sum[g]))
            .expect("normalized sums form a distribution")
    }

    /// Regret-matching-plus update from the full payoff vector `u = A·y`
    /// experienced in game `g` (one payoff per available row).
    pub fn observe(&mut self, g: usize, u: &[f64]) {
        let x = self.strategy(g);
        let v: f64 = x.iter().zip(u).map(|(a, b)| a * b).sum();
        for (i, q) in self.cum_regret[g].iter_mut().enumerate() {
            *q = (*q + u[i] - v).max(0.0);
        }
        for (i, s) in self.strategy_sum[g].iter_mut().enumerate() {
            *s += x[i];
        }
        self.observations[g] += 1;
    }

    pub fn updates_in(&self, g: usize) -> u64 {
        self.observations[g]
    }
}
