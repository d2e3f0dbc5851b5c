//! Exact tabular solvers for the tag gridworld.
//!
//! Against a *fixed* co-player the two-player game collapses to a
//! single-agent MDP over joint poses. This module enumerates that MDP —
//! states are (free cell × facing) pairs for both agents — and solves it by
//! value iteration to a certified Bellman residual. It is the ground-truth
//! oracle for regret scores and critic targets on small boards; the dynamics
//! come from the same `resolve` the environment steps with, so the oracle and
//! the playout can never drift apart.
//!
//! The solved objective is the infinite-horizon discounted return with no
//! step cap. Playouts that truncate at a cap stay consistent with it because
//! truncation bootstraps the solved value of the final state.

use super::policy::{LearnerError, PolicyParams};
use crate::lasertag::{observe, resolve, Action, Dir, LaserTagParams, Observation, Pose, NUM_ACTIONS};
use crate::uposg::Trajectory;

/// Refuse to enumerate beyond this many joint states (~a 15×15 open board).
pub const DEFAULT_STATE_BOUND: usize = 2_000_000;

#[derive(Clone, Copy, Debug)]
pub struct TabularConfig {
    pub gamma: f64,
    /// Target Bellman residual (infinity norm) of the returned values.
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub state_bound: usize,
}

impl Default for TabularConfig {
    fn default() -> TabularConfig {
        TabularConfig { gamma: 0.95, tolerance: 1e-8, max_sweeps: 20_000, state_bound: DEFAULT_STATE_BOUND }
    }
}

/// How a cached action distribution reads a policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionSelect {
    /// The policy's softmax distribution.
    Stochastic,
    /// Point mass on the argmax logit (ties to the lowest index) — the mode
    /// the deterministic-opponent oracle experiments use.
    Greedy,
}

/// Enumerated joint-pose MDP with precomputed transitions.
#[derive(Clone, Debug)]
pub struct TabularModel {
    params: LaserTagParams,
    free: Vec<(i32, i32)>,
    /// cell (y * width + x) → index into `free`, or usize::MAX for walls.
    cell_slot: Vec<usize>,
    poses_per_agent: usize,
    /// next[(s * 5 + a0) * 5 + a1] = successor state.
    next: Vec<u32>,
    /// tag[...]: 0 non-terminal, ±1 terminal with that reward for agent 0,
    /// 2 terminal with zero reward (mutual tag).
    tag: Vec<i8>,
    start: usize,
}

impl TabularModel {
    pub fn num_states(&self) -> usize {
        self.poses_per_agent * self.poses_per_agent
    }

    pub fn start_state(&self) -> usize {
        self.start
    }

    fn pose_index(&self, p: &Pose) -> usize {
        let slot = self.cell_slot[p.y as usize * self.params.board.width + p.x as usize];
        debug_assert!(slot != usize::MAX, "pose on a wall");
        slot * 4 + p.dir as usize
    }

    pub fn state_of(&self, poses: &[Pose; 2]) -> usize {
        self.pose_index(&poses[0]) * self.poses_per_agent + self.pose_index(&poses[1])
    }

    pub fn poses_of(&self, s: usize) -> [Pose; 2] {
        let p0 = s / self.poses_per_agent;
        let p1 = s % self.poses_per_agent;
        [self.pose_of(p0), self.pose_of(p1)]
    }

    fn pose_of(&self, idx: usize) -> Pose {
        let (x, y) = self.free[idx / 4];
        Pose { x, y, dir: Dir::from_index(idx % 4) }
    }

    pub fn observation(&self, s: usize, agent: usize) -> Observation {
        let poses = self.poses_of(s);
        observe(&self.params.board, &poses, agent)
    }

    pub fn transition(&self, s: usize, a0: usize, a1: usize) -> (usize, f64, bool) {
        let t = (s * NUM_ACTIONS + a0) * NUM_ACTIONS + a1;
        let tag = self.tag[t];
        let reward = match tag {
            2 => 0.0,
            other => other as f64,
        };
        (self.next[t] as usize, reward, tag != 0)
    }

    /// Cached per-state action distribution for a policy playing `agent`.
    pub fn policy_distribution(
        &self,
        policy: &PolicyParams,
        s: usize,
        agent: usize,
        select: ActionSelect,
    ) -> Result<[f64; NUM_ACTIONS], LearnerError> {
        let obs = self.observation(s, agent);
        let (probs, _) = policy.action_distribution(&obs)?;
        let mut dist = [0.0; NUM_ACTIONS];
        match select {
            ActionSelect::Stochastic => dist.copy_from_slice(&probs),
            ActionSelect::Greedy => {
                let mut best = 0;
                for (i, p) in probs.iter().enumerate() {
                    if *p > probs[best] {
                        best = i;
                    }
                }
                dist[best] = 1.0;
            }
        }
        Ok(dist)
    }
}

/// Enumerates the joint-pose MDP for a level. Errors with `Capacity` when the
/// state count would exceed `state_bound`.
pub fn build_model(params: &LaserTagParams, state_bound: usize) -> Result<TabularModel, LearnerError> {
    let board = &params.board;
    let free = board.free_cells();
    let poses_per_agent = free.len() * 4;
    let n = poses_per_agent * poses_per_agent;
    if n > state_bound {
        return Err(LearnerError::Capacity { states: n, bound: state_bound });
    }
    let mut cell_slot = vec![usize::MAX; board.width * board.height];
    for (i, (x, y)) in free.iter().enumerate() {
        cell_slot[*y as usize * board.width + *x as usize] = i;
    }
    for p in &params.starts {
        if board.is_wall(p.x, p.y) {
            return Err(LearnerError::Parameter(format!(
                "start pose ({}, {}) is on a wall",
                p.x, p.y
            )));
        }
    }
    let mut model = TabularModel {
        params: params.clone(),
        free,
        cell_slot,
        poses_per_agent,
        next: vec![0; n * NUM_ACTIONS * NUM_ACTIONS],
        tag: vec![0; n * NUM_ACTIONS * NUM_ACTIONS],
        start: 0,
    };
    for s in 0..n {
        let poses = model.poses_of(s);
        for a0 in 0..NUM_ACTIONS {
            for a1 in 0..NUM_ACTIONS {
                let (next_poses, rewards, terminal) =
                    resolve(&model.params.board, poses, [Action::from_index(a0), Action::from_index(a1)]);
                let t = (s * NUM_ACTIONS + a0) * NUM_ACTIONS + a1;
                model.next[t] = model.state_of(&next_poses) as u32;
                model.tag[t] = if !terminal {
                    0
                } else if rewards[0] == 0.0 {
                    2
                } else {
                    rewards[0] as i8
                };
            }
        }
    }
    model.start = model.state_of(&params.starts);
    Ok(model)
}

/// Best-response values against a fixed co-player distribution.
#[derive(Clone, Debug)]
pub struct TabularSolution {
    pub values: Vec<f64>,
    /// Greedy action per state, ties to the lowest index.
    pub greedy: Vec<u8>,
    /// Bellman residual of `values`, measured by one extra backup.
    pub residual: f64,
    pub start_value: f64,
    pub sweeps: usize,
}

/// Exact evaluation of a fixed student/co-player pair.
#[derive(Clone, Debug)]
pub struct TabularEval {
    pub values: Vec<f64>,
    pub residual: f64,
    pub start_value: f64,
    pub sweeps: usize,
}

fn backup_max(model: &TabularModel, dist1: &[f64], gamma: f64, v: &[f64], out: &mut [f64], greedy: Option<&mut [u8]>) -> f64 {
    let n = model.num_states();
    let mut residual = 0.0f64;
    let mut greedy = greedy;
    for s in 0..n {
        let d1 = &dist1[s * NUM_ACTIONS..(s + 1) * NUM_ACTIONS];
        let mut best = f64::NEG_INFINITY;
        let mut best_a = 0u8;
        for a0 in 0..NUM_ACTIONS {
            let mut q = 0.0;
            for (a1, p) in d1.iter().enumerate() {
                if *p == 0.0 {
                    continue;
                }
                let (next, r, terminal) = model.transition(s, a0, a1);
                let cont = if terminal { 0.0 } else { v[next] };
                q += p * (r + gamma * cont);
            }
            if q > best {
                best = q;
                best_a = a0 as u8;
            }
        }
        out[s] = best;
        if let Some(g) = greedy.as_deref_mut() {
            g[s] = best_a;
        }
        residual = residual.max((out[s] - v[s]).abs());
    }
    residual
}

fn backup_expect(
    model: &TabularModel,
    dist0: &[f64],
    dist1: &[f64],
    gamma: f64,
    v: &[f64],
    out: &mut [f64],
) -> f64 {
    let n = model.num_states();
    let mut residual = 0.0f64;
    for s in 0..n {
        let d0 = &dist0[s * NUM_ACTIONS..(s + 1) * NUM_ACTIONS];
        let d1 = &dist1[s * NUM_ACTIONS..(s + 1) * NUM_ACTIONS];
        let mut total = 0.0;
        for (a0, p0) in d0.iter().enumerate() {
            if *p0 == 0.0 {
                continue;
            }
            let mut q = 0.0;
            for (a1, p1) in d1.iter().enumerate() {
                if *p1 == 0.0 {
                    continue;
                }
                let (next, r, terminal) = model.transition(s, a0, a1);
                let cont = if terminal { 0.0 } else { v[next] };
                q += p1 * (r + gamma * cont);
            }
            total += p0 * q;
        }
        out[s] = total;
        residual = residual.max((out[s] - v[s]).abs());
    }
    residual
}

fn cache_distribution(
    model: &TabularModel,
    dist: impl Fn(usize) -> Result<[f64; NUM_ACTIONS], LearnerError>,
) -> Result<Vec<f64>, LearnerError> {
    let n = model.num_states();
    let mut out = vec![0.0; n * NUM_ACTIONS];
    for s in 0..n {
        let d = dist(s)?;
        out[s * NUM_ACTIONS..(s + 1) * NUM_ACTIONS].copy_from_slice(&d);
    }
    Ok(out)
}

/// Value iteration for the best response of agent 0 against a fixed co-player
/// distribution (`dist1(state) → action probabilities for agent 1`).
pub fn best_response_indexed(
    model: &TabularModel,
    dist1: impl Fn(usize) -> Result<[f64; NUM_ACTIONS], LearnerError>,
    cfg: &TabularConfig,
) -> Result<TabularSolution, LearnerError> {
    let d1 = cache_distribution(model, dist1)?;
    let n = model.num_states();
    let mut v = vec![0.0; n];
    let mut v2 = vec![0.0; n];
    let mut sweeps = 0usize;
    loop {
        let residual = backup_max(model, &d1, cfg.gamma, &v, &mut v2, None);
        std::mem::swap(&mut v, &mut v2);
        sweeps += 1;
        if residual <= cfg.tolerance {
            break;
        }
        if sweeps >= cfg.max_sweeps {
            return Err(LearnerError::Convergence { residual, sweeps });
        }
    }
    // Certify the returned values with one extra (non-destructive) backup and
    // extract the greedy policy from it.
    let mut greedy = vec![0u8; n];
    let residual = backup_max(model, &d1, cfg.gamma, &v, &mut v2, Some(&mut greedy));
    Ok(TabularSolution { start_value: v[model.start], values: v, greedy, residual, sweeps })
}

/// Best response against a frozen policy.
pub fn best_response(
    model: &TabularModel,
    coplayer: &PolicyParams,
    select: ActionSelect,
    cfg: &TabularConfig,
) -> Result<TabularSolution, LearnerError> {
    best_response_indexed(model, |s| model.policy_distribution(coplayer, s, 1, select), cfg)
}

/// Exact policy evaluation for a fixed pair of per-state distributions.
pub fn evaluate_indexed(
    model: &TabularModel,
    dist0: impl Fn(usize) -> Result<[f64; NUM_ACTIONS], LearnerError>,
    dist1: impl Fn(usize) -> Result<[f64; NUM_ACTIONS], LearnerError>,
    cfg: &TabularConfig,
) -> Result<TabularEval, LearnerError> {
    let d0 = cache_distribution(model, dist0)?;
    let d1 = cache_distribution(model, dist1)?;
    let n = model.num_states();
    let mut v = vec![0.0; n];
    let mut v2 = vec![0.0; n];
    let mut sweeps = 0usize;
    loop {
        let residual = backup_expect(model, &d0, &d1, cfg.gamma, &v, &mut v2);
        std::mem::swap(&mut v, &mut v2);
        sweeps += 1;
        if residual <= cfg.tolerance {
            break;
        }
        if sweeps >= cfg.max_sweeps {
            return Err(LearnerError::Convergence { residual, sweeps });
        }
    }
    let residual = backup_expect(model, &d0, &d1, cfg.gamma, &v, &mut v2);
    Ok(TabularEval { start_value: v[model.start], values: v, residual, sweeps })
}

/// Exact evaluation of two frozen policies.
pub fn evaluate_pair(
    model: &TabularModel,
    student: &PolicyParams,
    coplayer: &PolicyParams,
    select: [ActionSelect; 2],
    cfg: &TabularConfig,
) -> Result<TabularEval, LearnerError> {
    evaluate_indexed(
        model,
        |s| model.policy_distribution(student, s, 0, select[0]),
        |s| model.policy_distribution(coplayer, s, 1, select[1]),
        cfg,
    )
}

/// Plays the indexed MDP with deterministic action rules, recording a
/// trajectory whose observations are state indices and whose value
/// predictions come from `values` (the exact critic). Truncation at `cap`
/// bootstraps `values` of the final state.
pub fn play_indexed(
    model: &TabularModel,
    act0: impl Fn(usize) -> usize,
    act1: impl Fn(usize) -> usize,
    values: &[f64],
    gamma: f64,
    cap: usize,
) -> Trajectory<usize> {
    let mut s = model.start_state();
    let mut observations = Vec::new();
    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    let mut vals = Vec::new();
    let mut dones = Vec::new();
    let mut bootstrap = 0.0;
    for t in 0..cap {
        let a0 = act0(s);
        let a1 = act1(s);
        let (next, r, terminal) = model.transition(s, a0, a1);
        observations.push(s);
        actions.push(a0);
        rewards.push(r);
        vals.push(values[s]);
        let done = terminal || t + 1 == cap;
        dones.push(done);
        if done {
            if !terminal {
                bootstrap = values[next];
            }
            break;
        }
        s = next;
    }
    Trajectory::new(observations, actions, rewards, vals, dones, bootstrap, gamma, cap)
        .expect("indexed playout produces a valid trajectory")
}
