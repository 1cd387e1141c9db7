use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Plain gradient descent: `p <- p - lr * g`.
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl Optimizer {
    /// `learning_rate` may be zero (a frozen run) but not negative.
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        if !(learning_rate >= 0.0) || !learning_rate.is_finite() {
            return Err(Error::Config(format!("learning rate must be finite and >= 0, got {learning_rate}")));
        }
        Ok(Self { kind, learning_rate, m: Vec::new(), v: Vec::new(), step: 0 })
    }

    pub fn sgd(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, learning_rate)
    }

    pub fn adam(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::adam(), learning_rate)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. Rejects the whole update, leaving `params`
    /// untouched, if any gradient entry is non-finite.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() || params.iter().zip(grads).any(|(p, g)| p.len() != g.len()) {
            return Err(Error::Dimension("parameter and gradient shapes differ".into()));
        }
        for (t, g) in grads.iter().enumerate() {
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient tensor {t} entry {i} is {}", g[i])));
            }
        }
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (x, d) in p.iter_mut().zip(g.iter()) {
                        *x -= lr * d;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if self.m.is_empty() {
                    self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
                    self.v = self.m.clone();
                } else if self.m.len() != grads.len() || self.m.iter().zip(grads).any(|(m, g)| m.len() != g.len()) {
                    return Err(Error::Dimension("moment buffers do not match parameter shapes".into()));
                }
                self.step += 1;
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
                    for i in 0..p.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                    }
                }
                return Ok(());
            }
        }
        self.step += 1;
        Ok(())
    }
}
