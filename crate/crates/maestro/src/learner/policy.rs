//! Policy representations.
//!
//! A policy is a flat parameter vector plus an architecture tag and an
//! observation encoding. Three architectures cover every experiment in the
//! crate: `Linear` (logits and value linear in the one-hot features — the
//! ten-parameter policies the gradient checks use), `Mlp` (one tanh hidden
//! layer, the desk-scale gridworld student), and `Tabular` (independent
//! logits/value per distinct observation, allocated on first sight, for
//! oracle experiments).
//!
//! Observations enter as *active feature indices* — the positions of the ones
//! in the one-hot encoding — so forward/backward passes touch only live
//! inputs.

use crate::lasertag::{Observation, NUM_CELL_CODES, OBS_SIDE};
use crate::rng::RngHandle;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

pub const POLICY_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("observation does not match the policy's encoding: {0}")]
    Encoding(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("non-finite loss or gradient; update aborted, parameters unchanged")]
    NonFinite,
    #[error("state space too large: {states} states exceeds the bound {bound}")]
    Capacity { states: usize, bound: usize },
    #[error("value iteration did not converge: residual {residual} after {sweeps} sweeps")]
    Convergence { residual: f64, sweeps: usize },
    #[error("serialization: {0}")]
    Serde(String),
    #[error("unsupported policy format version {found} (this build reads {expected})")]
    Version { found: u32, expected: u32 },
}

/// How raw observations map onto one-hot feature vectors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObsEncoding {
    /// Egocentric code grid, one-hot per cell: feature `cell * num_codes + code`.
    GridOneHot { rows: usize, cols: usize, num_codes: usize },
    /// Plain state index, one-hot over `n` states.
    StateIndex { n: usize },
}

impl ObsEncoding {
    pub fn feature_dim(&self) -> usize {
        match self {
            ObsEncoding::GridOneHot { rows, cols, num_codes } => rows * cols * num_codes,
            ObsEncoding::StateIndex { n } => *n,
        }
    }

    pub fn lasertag() -> ObsEncoding {
        ObsEncoding::GridOneHot { rows: OBS_SIDE, cols: OBS_SIDE, num_codes: NUM_CELL_CODES }
    }
}

/// Anything a policy can look at. Yields the active one-hot feature indices
/// and a stable byte key for tabular dictionaries.
pub trait Encode: Clone {
    fn active_features(&self, enc: &ObsEncoding, out: &mut Vec<usize>) -> Result<(), LearnerError>;
    fn table_key(&self) -> Vec<u8>;
}

impl Encode for Observation {
    fn active_features(&self, enc: &ObsEncoding, out: &mut Vec<usize>) -> Result<(), LearnerError> {
        match enc {
            ObsEncoding::GridOneHot { rows, cols, num_codes } => {
                if rows * cols != self.0.len() || *num_codes != NUM_CELL_CODES {
                    return Err(LearnerError::Encoding(format!(
                        "grid window is {}x{} with {NUM_CELL_CODES} codes, encoding expects {rows}x{cols}x{num_codes}",
                        OBS_SIDE, OBS_SIDE
                    )));
                }
                out.clear();
                for (cell, code) in self.0.iter().enumerate() {
                    out.push(cell * num_codes + *code as usize);
                }
                Ok(())
            }
            ObsEncoding::StateIndex { .. } => Err(LearnerError::Encoding(
                "grid observation fed to a state-index policy".into(),
            )),
        }
    }

    fn table_key(&self) -> Vec<u8> {
        self.0.iter().map(|c| *c as u8).collect()
    }
}

impl Encode for usize {
    fn active_features(&self, enc: &ObsEncoding, out: &mut Vec<usize>) -> Result<(), LearnerError> {
        match enc {
            ObsEncoding::StateIndex { n } => {
                if self >= n {
                    return Err(LearnerError::Encoding(format!(
                        "state index {self} out of range 0..{n}"
                    )));
                }
                out.clear();
                out.push(*self);
                Ok(())
            }
            ObsEncoding::GridOneHot { .. } => Err(LearnerError::Encoding(
                "state index fed to a grid policy".into(),
            )),
        }
    }

    fn table_key(&self) -> Vec<u8> {
        self.to_le_bytes().to_vec()
    }
}

/// Architecture tag. Parameter layouts (flat, in `theta`):
/// - `Linear`: `[w_pi (A×F row-major) | w_v (F)]`
/// - `Mlp`:    `[w1 (H×F) | b1 (H) | w2 (A×H) | b2 (A) | w_v (H) | b_v (1)]`
/// - `Tabular`: per allocated slot `[logits (A) | value (1)]`, slots in
///   first-seen order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arch {
    Linear,
    Mlp { hidden: usize },
    Tabular,
}

/// A policy-and-critic parameter bundle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolicyParams {
    pub version: u32,
    pub encoding: ObsEncoding,
    pub num_actions: usize,
    pub arch: Arch,
    pub theta: Vec<f64>,
    /// Tabular dictionary keys in slot order (empty for other architectures).
    table_keys: Vec<Vec<u8>>,
    #[serde(skip)]
    table_index: HashMap<Vec<u8>, usize>,
}

// The lookup index is derived state; rebuild it on every deserialization so
// resumed tabular policies answer queries immediately.
impl<'de> serde::Deserialize<'de> for PolicyParams {
    fn deserialize<De: serde::Deserializer<'de>>(d: De) -> Result<PolicyParams, De::Error> {
        #[derive(Deserialize)]
        struct Wire {
            version: u32,
            encoding: ObsEncoding,
            num_actions: usize,
            arch: Arch,
            theta: Vec<f64>,
            table_keys: Vec<Vec<u8>>,
        }
        let w = Wire::deserialize(d)?;
        let table_index =
            w.table_keys.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        Ok(PolicyParams {
            version: w.version,
            encoding: w.encoding,
            num_actions: w.num_actions,
            arch: w.arch,
            theta: w.theta,
            table_keys: w.table_keys,
            table_index,
        })
    }
}

impl PolicyParams {
    /// Zero-initialized policy: action distribution is exactly uniform and the
    /// value prediction is exactly zero everywhere.
    pub fn zeros(encoding: ObsEncoding, num_actions: usize, arch: Arch) -> PolicyParams {
        let f = encoding.feature_dim();
        let n = match &arch {
            Arch::Linear => num_actions * f + f,
            Arch::Mlp { hidden } => hidden * f + hidden + num_actions * hidden + num_actions + hidden + 1,
            Arch::Tabular => 0,
        };
        PolicyParams {
            version: POLICY_FORMAT_VERSION,
            encoding,
            num_actions,
            arch,
            theta: vec![0.0; n],
            table_keys: Vec::new(),
            table_index: HashMap::new(),
        }
    }

    /// MLP with a small random trunk and zeroed output heads, so the initial
    /// behaviour is still exactly uniform with zero values, but hidden units
    /// are decorrelated from the start.
    pub fn mlp_init(
        encoding: ObsEncoding,
        num_actions: usize,
        hidden: usize,
        rng: &mut RngHandle,
    ) -> PolicyParams {
        let mut p = PolicyParams::zeros(encoding, num_actions, Arch::Mlp { hidden });
        let f = p.encoding.feature_dim();
        let scale = 1.0 / (f as f64).sqrt();
        for i in 0..hidden * f {
            p.theta[i] = rng.normal() * scale;
        }
        p
    }

    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    /// Deserializes with a format-version check.
    pub fn from_json(s: &str) -> Result<PolicyParams, LearnerError> {
        let p: PolicyParams =
            serde_json::from_str(s).map_err(|e| LearnerError::Serde(e.to_string()))?;
        if p.version != POLICY_FORMAT_VERSION {
            return Err(LearnerError::Version { found: p.version, expected: POLICY_FORMAT_VERSION });
        }
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String, LearnerError> {
        serde_json::to_string(self).map_err(|e| LearnerError::Serde(e.to_string()))
    }

    fn mlp_dims(&self) -> (usize, usize, usize) {
        let f = self.encoding.feature_dim();
        let a = self.num_actions;
        let h = match self.arch {
            Arch::Mlp { hidden } => hidden,
            _ => 0,
        };
        (f, h, a)
    }

    /// Allocates the tabular slot for an observation if absent. No-op for
    /// non-tabular architectures. Learning code calls this on every student
    /// observation; frozen opponents never do, so they stay immutable.
    pub fn ensure_slot<O: Encode>(&mut self, obs: &O) {
        if self.arch != Arch::Tabular {
            return;
        }
        let key = obs.table_key();
        if !self.table_index.contains_key(&key) {
            let slot = self.table_keys.len();
            self.table_index.insert(key.clone(), slot);
            self.table_keys.push(key);
            self.theta.extend(std::iter::repeat(0.0).take(self.num_actions + 1));
        }
    }

    fn tabular_slot<O: Encode>(&self, obs: &O) -> Option<usize> {
        self.table_index.get(&obs.table_key()).copied()
    }

    /// Forward pass: action logits, value prediction, and the hidden
    /// activations backward passes need.
    pub fn forward<O: Encode>(&self, obs: &O) -> Result<NetOutput, LearnerError> {
        let a = self.num_actions;
        match &self.arch {
            Arch::Linear => {
                let mut active = Vec::new();
                obs.active_features(&self.encoding, &mut active)?;
                let f = self.encoding.feature_dim();
                let mut logits = vec![0.0; a];
                for &i in &active {
                    for (act, logit) in logits.iter_mut().enumerate() {
                        *logit += self.theta[act * f + i];
                    }
                }
                let value = active.iter().map(|&i| self.theta[a * f + i]).sum();
                Ok(NetOutput { logits, value, hidden: Vec::new(), active })
            }
            Arch::Mlp { hidden } => {
                let mut active = Vec::new();
                obs.active_features(&self.encoding, &mut active)?;
                let (f, h, _) = self.mlp_dims();
                let _ = hidden;
                let (o_w1, o_b1, o_w2, o_b2, o_wv, o_bv) = mlp_offsets(f, h, a);
                let mut hid = vec![0.0; h];
                for (j, hj) in hid.iter_mut().enumerate() {
                    let mut pre = self.theta[o_b1 + j];
                    for &i in &active {
                        pre += self.theta[o_w1 + j * f + i];
                    }
                    *hj = pre.tanh();
                }
                let mut logits = vec![0.0; a];
                for (act, logit) in logits.iter_mut().enumerate() {
                    let mut z = self.theta[o_b2 + act];
                    for (j, hj) in hid.iter().enumerate() {
                        z += self.theta[o_w2 + act * h + j] * hj;
                    }
                    *logit = z;
                }
                let mut value = self.theta[o_bv];
                for (j, hj) in hid.iter().enumerate() {
                    value += self.theta[o_wv + j] * hj;
                }
                Ok(NetOutput { logits, value, hidden: hid, active })
            }
            Arch::Tabular => {
                // Unseen observations read as a fresh slot: uniform policy,
                // zero value. Only `ensure_slot` may allocate.
                match self.tabular_slot(obs) {
                    Some(slot) => {
                        let base = slot * (a + 1);
                        Ok(NetOutput {
                            logits: self.theta[base..base + a].to_vec(),
                            value: self.theta[base + a],
                            hidden: Vec::new(),
                            active: vec![slot],
                        })
                    }
                    None => Ok(NetOutput {
                        logits: vec![0.0; a],
                        value: 0.0,
                        hidden: Vec::new(),
                        active: Vec::new(),
                    }),
                }
            }
        }
    }

    /// Accumulates ∂L/∂θ into `grad` given the loss gradients with respect to
    /// the logits and the value output, reusing the forward cache.
    pub fn backward(
        &self,
        cache: &NetOutput,
        dlogits: &[f64],
        dvalue: f64,
        grad: &mut [f64],
    ) {
        let a = self.num_actions;
        match &self.arch {
            Arch::Linear => {
                let f = self.encoding.feature_dim();
                for &i in &cache.active {
                    for (act, dl) in dlogits.iter().enumerate() {
                        grad[act * f + i] += dl;
                    }
                    grad[a * f + i] += dvalue;
                }
            }
            Arch::Mlp { hidden } => {
                let (f, h, _) = self.mlp_dims();
                let _ = hidden;
                let (o_w1, o_b1, o_w2, o_b2, o_wv, o_bv) = mlp_offsets(f, h, a);
                let mut dh = vec![0.0; h];
                for (act, dl) in dlogits.iter().enumerate() {
                    grad[o_b2 + act] += dl;
                    for (j, hj) in cache.hidden.iter().enumerate() {
                        grad[o_w2 + act * h + j] += dl * hj;
                        dh[j] += dl * self.theta[o_w2 + act * h + j];
                    }
                }
                grad[o_bv] += dvalue;
                for (j, hj) in cache.hidden.iter().enumerate() {
                    grad[o_wv + j] += dvalue * hj;
                    dh[j] += dvalue * self.theta[o_wv + j];
                }
                for j in 0..h {
                    let dpre = dh[j] * (1.0 - cache.hidden[j] * cache.hidden[j]);
                    grad[o_b1 + j] += dpre;
                    for &i in &cache.active {
                        grad[o_w1 + j * f + i] += dpre;
                    }
                }
            }
            Arch::Tabular => {
                if let Some(&slot) = cache.active.first() {
                    let base = slot * (a + 1);
                    for (act, dl) in dlogits.iter().enumerate() {
                        grad[base + act] += dl;
                    }
                    grad[base + a] += dvalue;
                }
            }
        }
    }

    /// Action distribution and value prediction for an observation.
    pub fn action_distribution<O: Encode>(&self, obs: &O) -> Result<(Vec<f64>, f64), LearnerError> {
        let out = self.forward(obs)?;
        Ok((softmax(&out.logits), out.value))
    }
}

fn mlp_offsets(f: usize, h: usize, a: usize) -> (usize, usize, usize, usize, usize, usize) {
    let o_w1 = 0;
    let o_b1 = o_w1 + h * f;
    let o_w2 = o_b1 + h;
    let o_b2 = o_w2 + a * h;
    let o_wv = o_b2 + a;
    let o_bv = o_wv + h;
    (o_w1, o_b1, o_w2, o_b2, o_wv, o_bv)
}

/// Forward-pass result plus the caches backward needs.
#[derive(Clone, Debug)]
pub struct NetOutput {
    pub logits: Vec<f64>,
    pub value: f64,
    pub hidden: Vec<f64>,
    /// Active feature indices (Linear/Mlp) or the tabular slot.
    pub active: Vec<usize>,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.iter().map(|e| e / s).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln() + m;
    logits.iter().map(|z| z - lse).collect()
}

/// Samples an action; returns (action, log π(action), value).
pub fn act<O: Encode>(
    policy: &PolicyParams,
    obs: &O,
    rng: &mut RngHandle,
) -> Result<(usize, f64, f64), LearnerError> {
    let out = policy.forward(obs)?;
    let probs = softmax(&out.logits);
    let action = rng.categorical(&probs);
    let logp = log_softmax(&out.logits)[action];
    Ok((action, logp, out.value))
}

/// Greedy evaluation mode: the argmax action, ties to the lowest index.
pub fn act_greedy<O: Encode>(policy: &PolicyParams, obs: &O) -> Result<usize, LearnerError> {
    let out = policy.forward(obs)?;
    let mut best = 0;
    for (i, z) in out.logits.iter().enumerate() {
        if *z > out.logits[best] {
            best = i;
        }
    }
    Ok(best)
}

/// An immutable policy snapshot entered into the co-player population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenPolicy {
    pub params: PolicyParams,
    pub checkpoint_id: u32,
    /// Student update count at which this snapshot was taken.
    pub creation_update: u64,
}

impl FrozenPolicy {
    pub fn freeze(params: &PolicyParams, checkpoint_id: u32, creation_update: u64) -> FrozenPolicy {
        FrozenPolicy { params: params.clone(), checkpoint_id, creation_update }
    }
}
