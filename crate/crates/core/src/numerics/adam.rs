//! Adam with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A set of named, flat parameter tensors in a fixed order.
pub trait Parameters {
    fn tensors(&self) -> Vec<(&'static str, &[f64])>;
    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])>;

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

impl Parameters for Vec<f64> {
    fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![("param", self.as_slice())]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![("param", self.as_mut_slice())]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            weight_decay: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "adam needs learning_rate > 0 and weight_decay >= 0, got {} / {}",
                self.learning_rate, self.weight_decay
            )));
        }
        Ok(())
    }
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One descent step along `grads`. Rejects non-finite gradients before
    /// touching any parameter.
    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let grad_tensors = grads.tensors();
        for (name, g) in &grad_tensors {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    param: (*name).to_string(),
                });
            }
        }
        let mut param_tensors = params.tensors_mut();
        if param_tensors.len() != grad_tensors.len()
            || param_tensors
                .iter()
                .zip(&grad_tensors)
                .any(|((_, p), (_, g))| p.len() != g.len())
        {
            return Err(Error::dims(
                "adam_step",
                "gradient shaped like parameters",
                "different layout",
            ));
        }
        if self.first_moment.is_empty() {
            self.first_moment = grad_tensors.iter().map(|(_, g)| vec![0.0; g.len()]).collect();
            self.second_moment = self.first_moment.clone();
        }
        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            weight_decay,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let bias1 = 1.0 - beta1.powi(self.step as i32);
        let bias2 = 1.0 - beta2.powi(self.step as i32);
        for (ti, ((_, p), (_, g))) in param_tensors.iter_mut().zip(&grad_tensors).enumerate() {
            let m = &mut self.first_moment[ti];
            let v = &mut self.second_moment[ti];
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                p[i] -= lr * weight_decay * p[i] + lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
