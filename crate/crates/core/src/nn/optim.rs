use alloc::vec::Vec;

use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 penalty folded into the gradient.
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl OptimizerConfig {
    pub fn sgd(lr: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            lr,
            ..Self::default()
        }
    }

    pub fn adam(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// First-order optimizer state: step counter and per-parameter moments.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, params: &ModelParams) -> Self {
        let zeros = || -> Vec<Matrix> {
            params
                .ids()
                .map(|id| {
                    let (r, c) = params.value(id).shape();
                    Matrix::zeros(r, c)
                })
                .collect()
        };
        let (first, second) = match config.kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam => (zeros(), zeros()),
        };
        Self {
            config,
            step: 0,
            first,
            second,
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update from the populated gradients, then clears them.
    /// Every parameter must have a gradient.
    pub fn step(&mut self, params: &mut ModelParams) -> Result<()> {
        if let Some(id) = params.ids().find(|id| params.grad(*id).is_none()) {
            return Err(Error::Autodiff(alloc::format!(
                "missing gradient for parameter {:?}",
                params.name(id)
            )));
        }
        if self.config.kind == OptimizerKind::Adam && self.first.len() != params.len() {
            return Err(Error::shape(
                "optimizer state",
                self.first.len(),
                params.len(),
            ));
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - libm::pow(c.beta1, t as f64);
        let bias2 = 1.0 - libm::pow(c.beta2, t as f64);
        let ids: Vec<_> = params.ids().collect();
        for (k, id) in ids.into_iter().enumerate() {
            let grad = params.grad(id).expect("checked above").clone();
            let value = params.value_mut(id);
            match c.kind {
                OptimizerKind::Sgd => {
                    for (p, g) in value.as_mut_slice().iter_mut().zip(grad.as_slice()) {
                        let g = g + c.weight_decay * *p;
                        *p -= c.lr * g;
                    }
                }
                OptimizerKind::Adam => {
                    let m = self.first[k].as_mut_slice();
                    let v = self.second[k].as_mut_slice();
                    for (((p, g), m), v) in value
                        .as_mut_slice()
                        .iter_mut()
                        .zip(grad.as_slice())
                        .zip(m.iter_mut())
                        .zip(v.iter_mut())
                    {
                        let g = g + c.weight_decay * *p;
                        *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                        *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                        let m_hat = *m / bias1;
                        let v_hat = *v / bias2;
                        *p -= c.lr * m_hat / (math::sqrt(v_hat) + c.eps);
                    }
                }
            }
        }
        params.zero_grads();
        params.check_finite()
    }
}
