//! Adam with L2 weight decay folded into the gradient.

use alloc::vec;
use alloc::vec::Vec;

use crate::params::{Gradients, ParameterStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, store: &ParameterStore) -> Self {
        let zeros: Vec<Vec<f64>> = store.iter().map(|(_, p)| vec![0.0; p.tensor.numel()]).collect();
        AdamState {
            config,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    /// One bias-corrected Adam update of every parameter in `store`.
    pub fn step(&mut self, store: &mut ParameterStore, grads: &Gradients) {
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - libm::pow(c.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(c.beta2, self.t as f64);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let (m, v) = (&mut self.m[id.index()], &mut self.v[id.index()]);
            let g = grads.get(id);
            let theta = store.tensor_mut(id).data_mut();
            for i in 0..theta.len() {
                let gi = g[i] + c.weight_decay * theta[i];
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                theta[i] -= c.lr * m_hat / (libm::sqrt(v_hat) + c.eps);
            }
        }
    }
}
