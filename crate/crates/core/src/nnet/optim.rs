use serde::{Deserialize, Serialize};

use super::{Gradients, ParamId, ParamStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.9,
            eps: 1e-8,
            weight_decay: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGroup {
    pub name: String,
    pub lr: f64,
    pub params: Vec<ParamId>,
    pub frozen: bool,
}

/// Adam with bias correction and decoupled weight decay, over parameter
/// groups with separate learning rates.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub groups: Vec<ParamGroup>,
    m: Vec<Option<Tensor>>,
    v: Vec<Option<Tensor>>,
    step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, groups: Vec<ParamGroup>) -> Adam {
        Adam {
            config,
            groups,
            m: Vec::new(),
            v: Vec::new(),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. Parameters without a gradient and frozen groups
    /// are left untouched.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) {
        self.step += 1;
        if self.m.len() < store.len() {
            self.m.resize(store.len(), None);
            self.v.resize(store.len(), None);
        }
        let AdamConfig {
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for group in self.groups.iter().filter(|g| !g.frozen) {
            for &id in &group.params {
                let Some(g) = grads.get(id) else { continue };
                let shape = g.shape().to_vec();
                let m = self.m[id.index()].get_or_insert_with(|| Tensor::zeros(&shape));
                let v = self.v[id.index()].get_or_insert_with(|| Tensor::zeros(&shape));
                let p = store.get_mut(id);
                for (((p, &g), m), v) in p
                    .data_mut()
                    .iter_mut()
                    .zip(g.data())
                    .zip(m.data_mut().iter_mut())
                    .zip(v.data_mut().iter_mut())
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= group.lr * (m_hat / (v_hat.sqrt() + eps) + weight_decay * *p);
                }
            }
        }
    }
}
