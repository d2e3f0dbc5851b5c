//! Adam optimizer with bias correction.
//!
//! Written in-repo (rather than pulled from an ML framework) so the update
//! arithmetic is bit-reproducible across builds and the moment buffers can be
//! serialized into training snapshots. The epsilon sits inside the
//! denominator as `sqrt(v̂) + ε` with a default of 1e-5.

use serde::{Deserialize, Serialize};

pub const ADAM_DEFAULT_EPSILON: f64 = 1e-5;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    epsilon: f64,
}

impl AdamState {
    pub fn new(num_params: usize) -> AdamState {
        AdamState { m: vec![0.0; num_params], v: vec![0.0; num_params], t: 0, epsilon: ADAM_DEFAULT_EPSILON }
    }

    pub fn with_epsilon(num_params: usize, epsilon: f64) -> AdamState {
        AdamState { epsilon, ..AdamState::new(num_params) }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Grows the moment buffers with zeros when the parameter vector has
    /// gained entries (tabular policies allocate slots during rollouts).
    pub fn resize_to(&mut self, num_params: usize) {
        if self.m.len() < num_params {
            self.m.resize(num_params, 0.0);
            self.v.resize(num_params, 0.0);
        }
    }

    /// One Adam step: updates `theta` in place from `grad`.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], learning_rate: f64) {
        assert_eq!(theta.len(), grad.len(), "gradient/parameter length mismatch");
        self.resize_to(theta.len());
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for i in 0..theta.len() {
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * grad[i];
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}
