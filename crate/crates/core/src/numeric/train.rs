use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::Classifier;
use super::optim::Optimizer;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::rng;

/// Supervised training with Adam and seeded mini-batch shuffling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 300, learning_rate: 1e-3, batch_size: 32, seed: 0 }
    }
}

/// Trains in place and returns the mean loss of each epoch.
pub fn train(model: &mut Classifier, inputs: &Tensor, labels: &[usize], cfg: &TrainConfig) -> Result<Vec<f64>> {
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::Config("epochs and batch size must be >= 1".into()));
    }
    if inputs.rows() != labels.len() || labels.is_empty() {
        return Err(Error::Dimension(format!("{} rows, {} labels", inputs.rows(), labels.len())));
    }
    let mut opt = Optimizer::adam(cfg.learning_rate)?;
    let mut rng = rng::seeded(cfg.seed);
    let mut order: Vec<usize> = (0..labels.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let x = inputs.select_rows(chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, grads) = model.loss_and_grad_with(&x, &y, Exec::default())?;
            opt.step(&mut model.param_slices_mut(), &grads.slices())?;
            sum += loss;
            batches += 1;
        }
        trace.push(sum / batches as f64);
    }
    Ok(trace)
}
