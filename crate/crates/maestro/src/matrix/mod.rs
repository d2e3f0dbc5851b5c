//! Matrix-game laboratory: the joint-vs-independent selection demonstration,
//! an exact zero-sum solver with an enumerated exploitability certificate, and
//! the equilibrium check used to validate curriculum runs at toy scale.
//!
//! Everything here is small and exact on purpose — these are the oracles the
//! rest of the crate is tested against.

mod solve;
mod text;

pub use solve::{solve_zero_sum, NoRegretStudent, Solution};
pub use text::{parse_matrix_text, render_matrix_text};

use crate::rng::RngHandle;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bundled demonstration fixture: student regret for each (co-player,
/// environment) pair, reproduced by `maestro table1`.
pub const SELECTION_FIXTURE: &str = include_str!("../../fixtures/joint_selection.txt");

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid strategy: {0}")]
    Strategy(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("solver did not converge: exploitability {exploitability} after {iterations} iterations (tolerance {tolerance})")]
    Convergence { exploitability: f64, iterations: u64, tolerance: f64 },
}

/// A probability vector. Construction validates non-negativity and unit mass
/// (within 1e-9), so downstream code can assume a well-formed distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self, MatrixError> {
        if probs.is_empty() {
            return Err(MatrixError::Strategy("empty probability vector".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < -1e-12) {
            return Err(MatrixError::Strategy(format!("negative or non-finite entry in {probs:?}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(MatrixError::Strategy(format!("probabilities sum to {sum}, expected 1")));
        }
        Ok(MixedStrategy(probs.iter().map(|p| p.max(0.0)).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        MixedStrategy(vec![1.0 / n as f64; n])
    }

    pub fn point(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        MixedStrategy(v)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Indices carrying strictly positive probability.
    pub fn support(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(i, _)| i).collect()
    }
}

/// Dense row-major matrix of student regret values: rows are co-players, which
/// the curriculum selects over, and columns are environments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretMatrix {
    pub co_players: Vec<String>,
    pub environments: Vec<String>,
    data: Vec<f64>,
}

impl RegretMatrix {
    pub fn new(
        co_players: Vec<String>,
        environments: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, MatrixError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(MatrixError::Dimension("matrix must be non-empty".into()));
        }
        if rows.len() != co_players.len() {
            return Err(MatrixError::Dimension(format!(
                "{} rows but {} co-player labels",
                rows.len(),
                co_players.len()
            )));
        }
        let cols = rows[0].len();
        if cols != environments.len() {
            return Err(MatrixError::Dimension(format!(
                "{} columns but {} environment labels",
                cols,
                environments.len()
            )));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(MatrixError::Dimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(RegretMatrix { co_players, environments, data })
    }

    /// Parses the plain-text matrix format, synthesizing labels if the file
    /// carries none.
    pub fn from_text(text: &str) -> Result<Self, MatrixError> {
        let parsed = parse_matrix_text(text)?;
        let rows = parsed.rows;
        let nr = rows.len();
        let nc = rows[0].len();
        let row_labels = parsed
            .row_labels
            .unwrap_or_else(|| (0..nr).map(|i| format!("row_{i}")).collect());
        let col_labels = parsed
            .col_labels
            .unwrap_or_else(|| (0..nc).map(|j| format!("col_{j}")).collect());
        RegretMatrix::new(row_labels, col_labels, rows)
    }

    pub fn to_text(&self) -> String {
        render_matrix_text(&self.rows_vec(), Some(&self.co_players), Some(&self.environments))
    }

    pub fn num_rows(&self) -> usize {
        self.co_players.len()
    }

    pub fn num_cols(&self) -> usize {
        self.environments.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.num_cols() + col]
    }

    fn rows_vec(&self) -> Vec<Vec<f64>> {
        (0..self.num_rows())
            .map(|i| (0..self.num_cols()).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Maximizes over (co-player, environment) pairs jointly. Ties resolve to
    /// the lexicographically smallest (row, col) index pair.
    pub fn joint_argmax(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, self.get(0, 0));
        for i in 0..self.num_rows() {
            for j in 0..self.num_cols() {
                let v = self.get(i, j);
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        best
    }

    /// Picks the row with the best mean over columns and, independently, the
    /// column with the best mean over rows — the factorized selection a
    /// single-dimension curriculum would make. Ties resolve to the lowest
    /// index; the returned value is the matrix entry at that (row, col).
    pub fn independent_argmax(&self) -> (usize, usize, f64) {
        let row_means: Vec<f64> =
            (0..self.num_rows()).map(|i| (0..self.num_cols()).map(|j| self.get(i, j)).sum::<f64>() / self.num_cols() as f64).collect();
        let col_means: Vec<f64> =
            (0..self.num_cols()).map(|j| (0..self.num_rows()).map(|i| self.get(i, j)).sum::<f64>() / self.num_rows() as f64).collect();
        let row = argmax_lowest_tie(&row_means);
        let col = argmax_lowest_tie(&col_means);
        (row, col, self.get(row, col))
    }
}

fn argmax_lowest_tie(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// A finite two-player zero-sum game in normal form. `payoff[i][j]` is the row
/// player's (student's) payoff when the row player picks `i` and the column
/// player picks `j`; the column player receives the negation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroSumGame {
    payoff: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl ZeroSumGame {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, MatrixError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(MatrixError::Dimension("payoff matrix must be non-empty".into()));
        }
        let cols = rows[0].len();
        let mut payoff = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(MatrixError::Dimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            payoff.extend_from_slice(row);
        }
        Ok(ZeroSumGame { payoff, rows: rows.len(), cols })
    }

    pub fn from_text(text: &str) -> Result<Self, MatrixError> {
        ZeroSumGame::new(parse_matrix_text(text)?.rows)
    }

    /// Entries drawn uniformly from [−1, 1].
    pub fn random(rows: usize, cols: usize, rng: &mut RngHandle) -> Self {
        let payoff = (0..rows * cols).map(|_| rng.unit() * 2.0 - 1.0).collect();
        ZeroSumGame { payoff, rows, cols }
    }

    pub fn matching_pennies() -> Self {
        ZeroSumGame::new(vec![vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap()
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.payoff[i * self.cols + j]
    }

    /// Row player's payoff vector A·y against a column strategy.
    pub fn row_payoffs(&self, col_strategy: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * col_strategy[j]).sum())
            .collect()
    }

    /// Column payoffs xᵀA seen from the row player's side (the column player
    /// receives the negation of these).
    pub fn col_payoffs(&self, row_strategy: &[f64]) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j) * row_strategy[i]).sum())
            .collect()
    }

    pub fn expected_payoff(&self, row: &[f64], col: &[f64]) -> f64 {
        self.row_payoffs(col).iter().zip(row).map(|(u, x)| u * x).sum()
    }

    /// The swapped-role game −Aᵀ (column player of `self` becomes the row
    /// player). Used by the duality check on the solver.
    pub fn role_swapped(&self) -> ZeroSumGame {
        let rows = (0..self.cols)
            .map(|j| (0..self.rows).map(|i| -self.get(i, j)).collect())
            .collect();
        ZeroSumGame::new(rows).unwrap()
    }
}

/// Regret of the student's strategy against a fixed opponent: best achievable
/// payoff over pure rows minus the achieved payoff. Always ≥ 0.
pub fn true_regret(
    game: &ZeroSumGame,
    student: &MixedStrategy,
    opponent: &MixedStrategy,
) -> Result<f64, MatrixError> {
    if student.len() != game.num_rows() {
        return Err(MatrixError::Dimension(format!(
            "student strategy has {} entries, game has {} rows",
            student.len(),
            game.num_rows()
        )));
    }
    if opponent.len() != game.num_cols() {
        return Err(MatrixError::Dimension(format!(
            "opponent strategy has {} entries, game has {} columns",
            opponent.len(),
            game.num_cols()
        )));
    }
    let u = game.row_payoffs(opponent.probs());
    let best = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let achieved: f64 = u.iter().zip(student.probs()).map(|(a, b)| a * b).sum();
    Ok(best - achieved)
}

/// How much the student leaves on the table against a worst-case opponent:
/// game value minus the payoff the strategy guarantees. Zero exactly at a
/// minimax strategy. The game value is obtained from the internal solver at a
/// tolerance well below the one being certified.
pub fn student_exploitability(
    game: &ZeroSumGame,
    student: &MixedStrategy,
    value_tolerance: f64,
) -> Result<f64, MatrixError> {
    let sol = solve_zero_sum(game, value_tolerance, 50_000_000)?;
    let guaranteed = game
        .col_payoffs(student.probs())
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    Ok(sol.value - guaranteed)
}

/// Per-game outcome of the equilibrium check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GameCheck {
    pub game_index: usize,
    pub support_probability: f64,
    pub exploitability: f64,
    pub pass: bool,
}

/// Report of the toy-scale equilibrium claim: on every environment the final
/// curriculum distribution supports, the student's strategy must be within
/// `tolerance` of minimax.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Corollary1Report {
    pub checks: Vec<GameCheck>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks that the student is an approximate equilibrium strategy on every
/// game in the support of `env_distribution`. Games with zero probability are
/// skipped — the claim is only about environments the curriculum kept alive.
pub fn verify_corollary1(
    games: &[ZeroSumGame],
    env_distribution: &MixedStrategy,
    students: &[MixedStrategy],
    tolerance: f64,
) -> Result<Corollary1Report, MatrixError> {
    if env_distribution.len() != games.len() {
        return Err(MatrixError::Dimension(format!(
            "distribution over {} games but {} games supplied",
            env_distribution.len(),
            games.len()
        )));
    }
    if students.len() != games.len() {
        return Err(MatrixError::Dimension(format!(
            "{} student strategies for {} games",
            students.len(),
            games.len()
        )));
    }
    let mut checks = Vec::new();
    for (idx, game) in games.iter().enumerate() {
        let p = env_distribution.probs()[idx];
        if p <= 0.0 {
            continue;
        }
        let exploitability = student_exploitability(game, &students[idx], (tolerance * 1e-3).max(1e-9))?;
        checks.push(GameCheck {
            game_index: idx,
            support_probability: p,
            exploitability,
            pass: exploitability <= tolerance,
        });
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(Corollary1Report { checks, tolerance, pass })
}
