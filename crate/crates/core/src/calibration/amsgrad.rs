use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmsGradConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Weight of the consistency penalty in the ML3 cost.
    pub penalty_weight: f64,
}

impl Default for AmsGradConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 100,
            batch_size: 32,
            seed: 0,
            penalty_weight: 0.5,
        }
    }
}

impl AmsGradConfig {
    pub fn validate(&self) -> Result<()> {
        let open = |b: f64| b > 0.0 && b < 1.0;
        if !open(self.beta1) || !open(self.beta2) {
            return Err(Error::config("AMSGrad betas must lie in (0, 1)"));
        }
        if !(self.learning_rate > 0.0) || !(self.epsilon > 0.0) {
            return Err(Error::config("learning rate and epsilon must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        if !(self.penalty_weight >= 0.0) {
            return Err(Error::config("penalty weight must be nonnegative"));
        }
        Ok(())
    }
}

/// AMSGrad state. Updates follow
/// `m <- b1 m + (1-b1) g`, `v <- b2 v + (1-b2) g^2`, `vhat <- max(vhat, v)`,
/// `x <- x - lr m / (sqrt(vhat) + eps)`.
#[derive(Debug, Clone)]
pub struct AmsGrad {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    vhat: Vec<f64>,
}

impl AmsGrad {
    pub fn new(config: &AmsGradConfig, size: usize) -> Self {
        Self {
            learning_rate: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            m: vec![0.0; size],
            v: vec![0.0; size],
            vhat: vec![0.0; size],
        }
    }

    pub fn max_second_moment(&self) -> &[f64] {
        &self.vhat
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), self.m.len());
        debug_assert_eq!(grad.len(), self.m.len());
        let (b1, b2) = (self.beta1, self.beta2);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            self.vhat[i] = self.vhat[i].max(self.v[i]);
            params[i] -= self.learning_rate * self.m[i] / (self.vhat[i].sqrt() + self.epsilon);
        }
    }
}
