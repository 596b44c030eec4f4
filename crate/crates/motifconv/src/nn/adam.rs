//! Adam with bias correction. Moments live in model-shaped containers so the
//! update walks the same named traversal as everything else.

use crate::error::{Error, Result};
use crate::nn::model::Model;

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Model,
    v: Model,
}

impl Adam {
    pub fn new(model: &Model, lr: f64) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: model.zeros_like(),
            v: model.zeros_like(),
        }
    }

    /// One update. `grads` must be shaped exactly like `model`.
    pub fn step(&mut self, model: &mut Model, grads: &Model) -> Result<()> {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let params = model.param_groups_mut();
        let gs = grads.param_groups();
        let ms = self.m.param_groups_mut();
        let vs = self.v.param_groups_mut();
        if params.len() != gs.len() {
            return Err(Error::shape("adam_step", "gradient layout differs from model"));
        }
        for (((p, g), m), v) in params.into_iter().zip(gs).zip(ms).zip(vs) {
            if p.1.len() != g.1.len() || p.0 != g.0 {
                return Err(Error::shape(
                    "adam_step",
                    format!("group {} does not match gradient group {}", p.0, g.0),
                ));
            }
            for i in 0..p.1.len() {
                let grad = g.1[i];
                m.1[i] = self.beta1 * m.1[i] + (1.0 - self.beta1) * grad;
                v.1[i] = self.beta2 * v.1[i] + (1.0 - self.beta2) * grad * grad;
                let m_hat = m.1[i] / bc1;
                let v_hat = v.1[i] / bc2;
                p.1[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }
}
