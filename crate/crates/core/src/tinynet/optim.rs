//! Adam optimizer over a flow network's parameter list.

use super::net::FlowNetwork;
use super::{NetError, Result};

const BETA1: f32 = 0.9;
const BETA2: f32 = 0.999;
const EPS: f32 = 1e-8;

/// First/second-moment state, aligned with [`FlowNetwork::param_tensors`].
pub struct AdamState {
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    t: u64,
}

impl AdamState {
    pub fn new(net: &FlowNetwork) -> Self {
        let sizes: Vec<usize> = net.param_tensors().iter().map(|t| t.len()).collect();
        Self {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One Adam update (beta1 0.9, beta2 0.999, eps 1e-8) with bias
    /// correction. Gradients must align with the network's parameter list;
    /// a non-finite gradient rejects the whole step and reports which
    /// parameter produced it.
    pub fn step(&mut self, net: &mut FlowNetwork, grads: &[Vec<f32>], lr: f32) -> Result<()> {
        let names = net.param_names();
        let mut params = net.param_tensors_mut();
        if grads.len() != params.len() || grads.len() != self.m.len() {
            return Err(NetError::StateMismatch {
                expected: self.m.len(),
                got: grads.len(),
            });
        }
        for (i, g) in grads.iter().enumerate() {
            if g.len() != params[i].len() {
                return Err(NetError::StateMismatch {
                    expected: params[i].len(),
                    got: g.len(),
                });
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(NetError::NonFiniteGradient(names[i].clone()));
            }
        }
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        for (i, g) in grads.iter().enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let p = params[i].data_mut();
            for j in 0..g.len() {
                m[j] = BETA1 * m[j] + (1.0 - BETA1) * g[j];
                v[j] = BETA2 * v[j] + (1.0 - BETA2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + EPS);
            }
        }
        Ok(())
    }
}
