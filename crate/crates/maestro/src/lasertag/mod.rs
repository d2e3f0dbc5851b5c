//! Two-player tag in a procedurally generated gridworld.
//!
//! Both agents act simultaneously with five discrete actions: turn right,
//! turn left, move forward, tag (fire a beam), no-op. A beam travels along
//! the shooter's facing until it hits a wall or the opponent; a hit ends the
//! episode at +1/−1, a mutual hit ends it at 0/0, and hitting the step cap
//! truncates at 0/0. The grid is surrounded by an implicit wall border.
//!
//! Movement and tagging resolve in two phases each step: rotations and moves
//! first (conflicting moves — both entering one cell, or swapping cells —
//! leave both agents in place), then beams are traced from the post-move
//! poses. Observations are egocentric 5×5 windows extending forward from the
//! agent, with the observer anchored at the window's bottom-centre cell and
//! no line-of-sight occlusion.

mod level;

pub use level::{held_out_levels, parse_level, render_level, LevelError, HELD_OUT_LEVEL_NAMES};

use crate::rng::RngHandle;
use crate::uposg::{EnvParams, ObsSpace, UposgSpec};
use serde::{Deserialize, Serialize};

pub const NUM_ACTIONS: usize = 5;
pub const OBS_SIDE: usize = 5;
pub const NUM_CELL_CODES: usize = 5;
pub const DEFAULT_MAX_STEPS: usize = 256;
pub const MIN_SIDE: usize = 5;
pub const MAX_SIDE: usize = 15;
pub const MAX_WALL_FRACTION: f64 = 0.5;

/// Static game description for this environment family.
pub fn uposg_spec(max_episode_steps: usize) -> UposgSpec {
    UposgSpec {
        num_actions: NUM_ACTIONS,
        observation: ObsSpace::Grid { rows: OBS_SIDE, cols: OBS_SIDE, num_codes: NUM_CELL_CODES },
        max_episode_steps,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    TurnRight = 0,
    TurnLeft = 1,
    Forward = 2,
    Tag = 3,
    Noop = 4,
}

impl Action {
    pub fn from_index(i: usize) -> Action {
        match i {
            0 => Action::TurnRight,
            1 => Action::TurnLeft,
            2 => Action::Forward,
            3 => Action::Tag,
            4 => Action::Noop,
            other => panic!("action index {other} out of range (0..{NUM_ACTIONS})"),
        }
    }
}

/// Compass facing. `y` grows downward, so north is −y.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dir {
    North = 0,
    East = 1,
    South = 2,
    West = 3,
}

impl Dir {
    pub fn from_index(i: usize) -> Dir {
        match i {
            0 => Dir::North,
            1 => Dir::East,
            2 => Dir::South,
            3 => Dir::West,
            other => panic!("direction index {other} out of range"),
        }
    }

    pub fn vector(self) -> (i32, i32) {
        match self {
            Dir::North => (0, -1),
            Dir::East => (1, 0),
            Dir::South => (0, 1),
            Dir::West => (-1, 0),
        }
    }

    /// Unit vector to the agent's right when facing this way.
    pub fn right_vector(self) -> (i32, i32) {
        self.clockwise().vector()
    }

    pub fn clockwise(self) -> Dir {
        Dir::from_index((self as usize + 1) % 4)
    }

    pub fn counter_clockwise(self) -> Dir {
        Dir::from_index((self as usize + 3) % 4)
    }
}

/// Position plus facing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pose {
    pub x: i32,
    pub y: i32,
    pub dir: Dir,
}

/// Grid geometry. Cells outside the stored rectangle count as walls.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Board {
    pub width: usize,
    pub height: usize,
    walls: Vec<bool>,
}

impl Board {
    pub fn new(width: usize, height: usize, walls: Vec<bool>) -> Board {
        assert_eq!(walls.len(), width * height, "wall grid does not match dimensions");
        Board { width, height, walls }
    }

    pub fn open(width: usize, height: usize) -> Board {
        Board::new(width, height, vec![false; width * height])
    }

    pub fn in_bounds(&self, x: i32, y: i32) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn is_wall(&self, x: i32, y: i32) -> bool {
        !self.in_bounds(x, y) || self.walls[y as usize * self.width + x as usize]
    }

    pub fn set_wall(&mut self, x: usize, y: usize, wall: bool) {
        self.walls[y * self.width + x] = wall;
    }

    pub fn wall_count(&self) -> usize {
        self.walls.iter().filter(|w| **w).count()
    }

    pub fn wall_fraction(&self) -> f64 {
        self.wall_count() as f64 / (self.width * self.height) as f64
    }

    /// All non-wall cells in row-major order.
    pub fn free_cells(&self) -> Vec<(i32, i32)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.walls[y * self.width + x] {
                    out.push((x as i32, y as i32));
                }
            }
        }
        out
    }
}

/// The parameter record θ for one tag-game instance.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LaserTagParams {
    pub board: Board,
    pub starts: [Pose; 2],
}

impl LaserTagParams {
    /// Mean of width and height; the curriculum statistics track this.
    pub fn grid_size(&self) -> f64 {
        0.5 * (self.board.width + self.board.height) as f64
    }
}

/// What one cell of the egocentric window contains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellCode {
    Empty = 0,
    Wall = 1,
    SelfAgent = 2,
    Opponent = 3,
    OutOfBounds = 4,
}

/// Egocentric 5×5 observation, rows far-to-near, columns left-to-right in the
/// agent's own frame. The observer sits at row 4, column 2.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation(pub [CellCode; OBS_SIDE * OBS_SIDE]);

impl Observation {
    pub fn code_indices(&self) -> [usize; OBS_SIDE * OBS_SIDE] {
        let mut out = [0usize; OBS_SIDE * OBS_SIDE];
        for (i, c) in self.0.iter().enumerate() {
            out[i] = *c as usize;
        }
        out
    }
}

/// Live episode state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaserTagState {
    pub board: Board,
    pub poses: [Pose; 2],
    pub steps: usize,
    pub terminated: bool,
}

/// Result of one simultaneous step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    /// (agent 0, agent 1); always sums to zero.
    pub rewards: [f64; 2],
    pub done: bool,
    /// True when the episode ended by tagging rather than the step cap.
    pub terminal: bool,
}

pub fn reset(params: &LaserTagParams) -> LaserTagState {
    debug_assert!(!params.board.is_wall(params.starts[0].x, params.starts[0].y));
    debug_assert!(!params.board.is_wall(params.starts[1].x, params.starts[1].y));
    debug_assert!(
        (params.starts[0].x, params.starts[0].y) != (params.starts[1].x, params.starts[1].y)
    );
    LaserTagState { board: params.board.clone(), poses: params.starts, steps: 0, terminated: false }
}

/// Movement-and-tag resolution on bare poses. Exposed separately from
/// [`step`] so the tabular solvers can sweep the transition function without
/// cloning episode state.
pub fn resolve(
    board: &Board,
    poses: [Pose; 2],
    actions: [Action; 2],
) -> ([Pose; 2], [f64; 2], bool) {
    let mut next = poses;

    // Phase 1: rotations and movement proposals.
    let mut proposals = [(next[0].x, next[0].y), (next[1].x, next[1].y)];
    for i in 0..2 {
        match actions[i] {
            Action::TurnRight => next[i].dir = next[i].dir.clockwise(),
            Action::TurnLeft => next[i].dir = next[i].dir.counter_clockwise(),
            Action::Forward => {
                let (dx, dy) = next[i].dir.vector();
                let (nx, ny) = (next[i].x + dx, next[i].y + dy);
                if !board.is_wall(nx, ny) {
                    proposals[i] = (nx, ny);
                }
            }
            Action::Tag | Action::Noop => {}
        }
    }
    let old = [(poses[0].x, poses[0].y), (poses[1].x, poses[1].y)];
    let same_target = proposals[0] == proposals[1];
    let swap = proposals[0] == old[1] && proposals[1] == old[0];
    if same_target || swap {
        proposals = old;
    }
    for i in 0..2 {
        next[i].x = proposals[i].0;
        next[i].y = proposals[i].1;
    }

    // Phase 2: beams, traced simultaneously from the post-move poses.
    let mut hit = [false; 2];
    for i in 0..2 {
        if actions[i] == Action::Tag {
            hit[i] = beam_hits(board, next[i], (next[1 - i].x, next[1 - i].y));
        }
    }
    let (rewards, terminal) = match (hit[0], hit[1]) {
        (true, true) => ([0.0, 0.0], true),
        (true, false) => ([1.0, -1.0], true),
        (false, true) => ([-1.0, 1.0], true),
        (false, false) => ([0.0, 0.0], false),
    };
    (next, rewards, terminal)
}

/// Whether a beam fired from `shooter` reaches `target` before any wall.
fn beam_hits(board: &Board, shooter: Pose, target: (i32, i32)) -> bool {
    let (dx, dy) = shooter.dir.vector();
    let (mut x, mut y) = (shooter.x + dx, shooter.y + dy);
    while !board.is_wall(x, y) {
        if (x, y) == target {
            return true;
        }
        x += dx;
        y += dy;
    }
    false
}

/// Advances the episode by one simultaneous step.
pub fn step(state: &mut LaserTagState, actions: [Action; 2], max_steps: usize) -> StepOutcome {
    assert!(!state.terminated, "step() called on a finished episode");
    let (next, rewards, terminal) = resolve(&state.board, state.poses, actions);
    state.poses = next;
    state.steps += 1;
    let truncated = !terminal && state.steps >= max_steps;
    if terminal || truncated {
        state.terminated = true;
    }
    StepOutcome { rewards, done: terminal || truncated, terminal }
}

/// Egocentric 5×5 window for one agent.
pub fn observe(board: &Board, poses: &[Pose; 2], agent: usize) -> Observation {
    let me = poses[agent];
    let other = poses[1 - agent];
    let (fx, fy) = me.dir.vector();
    let (rx, ry) = me.dir.right_vector();
    let mut cells = [CellCode::Empty; OBS_SIDE * OBS_SIDE];
    for wr in 0..OBS_SIDE {
        for wc in 0..OBS_SIDE {
            let ahead = (OBS_SIDE - 1 - wr) as i32;
            let side = wc as i32 - (OBS_SIDE as i32 / 2);
            let x = me.x + ahead * fx + side * rx;
            let y = me.y + ahead * fy + side * ry;
            let code = if !board.in_bounds(x, y) {
                CellCode::OutOfBounds
            } else if board.is_wall(x, y) {
                CellCode::Wall
            } else if (x, y) == (me.x, me.y) {
                CellCode::SelfAgent
            } else if (x, y) == (other.x, other.y) {
                CellCode::Opponent
            } else {
                CellCode::Empty
            };
            cells[wr * OBS_SIDE + wc] = code;
        }
    }
    Observation(cells)
}

/// Samples a fresh instance: square side uniform in [5, 15], wall percentage
/// uniform in [0, 50%) rounded down to a whole cell count, wall cells uniform
/// without replacement, then two distinct free start cells with uniform
/// facings. Unreachable layouts are permitted by design — unsolvable
/// instances are exactly what regret-based scoring must learn to avoid.
pub fn generate(seed: u64) -> EnvParams<LaserTagParams> {
    let mut rng = RngHandle::from_seed(seed);
    let side = rng.int_in(MIN_SIDE, MAX_SIDE);
    let cells = side * side;
    let wall_fraction = rng.unit() * MAX_WALL_FRACTION;
    let num_walls = (wall_fraction * cells as f64).floor() as usize;

    // Partial Fisher-Yates: the first `num_walls` entries are a uniform
    // sample without replacement.
    let mut idx: Vec<usize> = (0..cells).collect();
    for i in 0..num_walls {
        let j = i + rng.index(cells - i);
        idx.swap(i, j);
    }
    let mut board = Board::open(side, side);
    for &cell in &idx[..num_walls] {
        board.set_wall(cell % side, cell / side, true);
    }

    let free = board.free_cells();
    let first = rng.index(free.len());
    let mut second = rng.index(free.len() - 1);
    if second >= first {
        second += 1;
    }
    let starts = [
        Pose { x: free[first].0, y: free[first].1, dir: Dir::from_index(rng.index(4)) },
        Pose { x: free[second].0, y: free[second].1, dir: Dir::from_index(rng.index(4)) },
    ];
    EnvParams::generated(seed, LaserTagParams { board, starts })
}
