//! Input-space noise synthesized against a frozen classifier.
//!
//! A noise batch starts from a seeded standard normal and runs plain
//! gradient descent on `±L(f(N), target) + λ‖N‖₂` per noise row, with the
//! model parameters held fixed. `Toward` minimizes the loss for the target
//! label (positive noise); `Away` maximizes it (negative and
//! error-maximizing noise).

use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guidance::PerturbMap;
use crate::io_util::{atomic_write, put_f64s, read, ByteReader};
use crate::numeric::{Classifier, GradSign, Optimizer, Tensor};
use crate::par::Exec;
use crate::rng;

pub const NOISE_MAGIC: &[u8; 9] = b"MEGU-NOIZ";
pub const NOISE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub lambda_reg: f64,
    /// Noise rows trained jointly per key.
    pub batch: usize,
    /// Taken from the run config, not from this section.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { steps: 200, learning_rate: 0.1, lambda_reg: 2.0, batch: 32, seed: 0 }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = self.violations();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if self.steps == 0 {
            bad.push("noise steps must be >= 1".to_string());
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            bad.push(format!("noise learning rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.lambda_reg >= 0.0) || !self.lambda_reg.is_finite() {
            bad.push(format!("lambda_reg must be >= 0, got {}", self.lambda_reg));
        }
        if self.batch == 0 {
            bad.push("noise batch must be >= 1".to_string());
        }
        bad
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Toward,
    Away,
}

/// Outcome of one noise optimization, with loss audit values.
#[derive(Clone, Debug)]
pub struct NoiseRun {
    pub noise: Tensor,
    /// Mean cross-entropy w.r.t. the target before and after optimization.
    pub initial_ce: f64,
    pub final_ce: f64,
    /// Mean optimized objective before and after optimization.
    pub initial_objective: f64,
    pub final_objective: f64,
}

pub fn init_noise(rows: usize, dim: usize, seed: u64) -> Tensor {
    let mut rng = rng::seeded(seed);
    let data = (0..rows * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    Tensor::new(vec![rows, dim], data).expect("finite normal draws")
}

fn objective(ce: &[f64], noise: &Tensor, direction: Direction, lambda: f64) -> f64 {
    let sign = if direction == Direction::Toward { 1.0 } else { -1.0 };
    let n = ce.len();
    (0..n).map(|i| sign * ce[i] + lambda * l2(noise.row(i))).sum::<f64>() / n as f64
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn train_noise(model: &Classifier, target: usize, direction: Direction, cfg: &NoiseConfig) -> Result<Tensor> {
    Ok(train_noise_traced(model, target, direction, cfg, Exec::default())?.noise)
}

pub fn train_noise_traced(
    model: &Classifier,
    target: usize,
    direction: Direction,
    cfg: &NoiseConfig,
    exec: Exec,
) -> Result<NoiseRun> {
    cfg.validate()?;
    if target >= model.num_classes() {
        return Err(Error::Domain(format!("target {target} out of range for {} classes", model.num_classes())));
    }
    let d = model.input_dim();
    let mut noise = init_noise(cfg.batch, d, cfg.seed);
    let labels = vec![target; cfg.batch];
    let sign = match direction {
        Direction::Toward => GradSign::Descent,
        Direction::Away => GradSign::Ascent,
    };
    let mut opt = Optimizer::sgd(cfg.learning_rate)?;
    let mut initial = None;
    for step in 0..cfg.steps {
        let (ce, mut grad) = model.input_loss_and_grad_with(&noise, &labels, sign, exec)?;
        if ce.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("noise loss diverged at step {step}")));
        }
        if initial.is_none() {
            initial = Some((mean(&ce), objective(&ce, &noise, direction, cfg.lambda_reg)));
        }
        if cfg.lambda_reg > 0.0 {
            for i in 0..cfg.batch {
                let norm = l2(noise.row(i));
                if norm > 0.0 {
                    let scale = cfg.lambda_reg / norm;
                    let src: Vec<f64> = noise.row(i).to_vec();
                    for (g, v) in grad.row_mut(i).iter_mut().zip(src) {
                        *g += scale * v;
                    }
                }
            }
        }
        opt.step(&mut [noise.data_mut()], &[grad.data()])
            .map_err(|e| Error::NonFinite(format!("noise update failed at step {step}: {e}")))?;
    }
    let ce = model.per_sample_losses(&noise, &labels)?;
    if ce.iter().any(|v| !v.is_finite()) || !noise.all_finite() {
        return Err(Error::NonFinite(format!("noise loss diverged at step {}", cfg.steps)));
    }
    let (initial_ce, initial_objective) = initial.expect("steps >= 1");
    Ok(NoiseRun {
        final_ce: mean(&ce),
        final_objective: objective(&ce, &noise, direction, cfg.lambda_reg),
        noise,
        initial_ce,
        initial_objective,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `α·pos + (1-α)·neg`.
pub fn combine(pos: &Tensor, neg: &Tensor, alpha: f64) -> Result<Tensor> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    if pos.shape() != neg.shape() {
        return Err(Error::Dimension(format!("noise shapes {:?} and {:?} differ", pos.shape(), neg.shape())));
    }
    let data = pos.data().iter().zip(neg.data()).map(|(p, n)| blend(*p, *n, alpha)).collect();
    Tensor::new(pos.shape().to_vec(), data)
}

#[inline]
pub(crate) fn blend(p: f64, n: f64, alpha: f64) -> f64 {
    alpha * p + (1.0 - alpha) * n
}

/// Positive/negative noise batches for one `(label, perturbing label)` key.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisePair {
    pub label: usize,
    pub perturbing: usize,
    /// Trained toward `perturbing`.
    pub pos: Tensor,
    /// Trained away from `label`.
    pub neg: Tensor,
}

/// A set of noise pairs plus the provenance needed to reuse them safely.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSet {
    pub model_hash: [u8; 32],
    pub config: NoiseConfig,
    pub dim: usize,
    pub pairs: Vec<NoisePair>,
}

impl NoiseSet {
    pub fn get(&self, label: usize, perturbing: usize) -> Option<&NoisePair> {
        self.pairs.iter().find(|p| p.label == label && p.perturbing == perturbing)
    }
}

fn key_seed(base: u64, label: usize, perturbing: usize, role: u64) -> u64 {
    rng::derive(base, ((label as u64) << 32 | perturbing as u64).wrapping_mul(4).wrapping_add(role))
}

/// One pair per distinct key of `map`, keys trained in parallel.
pub fn forge_pairs(model: &Classifier, map: &PerturbMap, cfg: &NoiseConfig) -> Result<NoiseSet> {
    forge_pairs_with(model, map, cfg, Exec::default())
}

pub fn forge_pairs_with(model: &Classifier, map: &PerturbMap, cfg: &NoiseConfig, exec: Exec) -> Result<NoiseSet> {
    cfg.validate()?;
    let keys = map.keys();
    if keys.is_empty() {
        return Err(Error::Config("perturb map is empty".into()));
    }
    let pairs = exec
        .map(&keys, |&(label, perturbing)| {
            let pos_cfg = NoiseConfig { seed: key_seed(cfg.seed, label, perturbing, 0), ..cfg.clone() };
            let neg_cfg = NoiseConfig { seed: key_seed(cfg.seed, label, perturbing, 1), ..cfg.clone() };
            // Keys already run in parallel; each key's steps stay sequential.
            let pos = train_noise_traced(model, perturbing, Direction::Toward, &pos_cfg, Exec::Sequential)?.noise;
            let neg = train_noise_traced(model, label, Direction::Away, &neg_cfg, Exec::Sequential)?.noise;
            Ok(NoisePair { label, perturbing, pos, neg })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(NoiseSet { model_hash: model.checksum(), config: cfg.clone(), dim: model.input_dim(), pairs })
}

/// Error-maximizing noise for each class in `classes`, trained away from it.
pub fn forge_error_maximizing(model: &Classifier, classes: &[usize], cfg: &NoiseConfig) -> Result<Vec<(usize, Tensor)>> {
    Exec::default()
        .map(classes, |&c| {
            let cfg = NoiseConfig { seed: key_seed(cfg.seed, c, c, 2), ..cfg.clone() };
            Ok((c, train_noise_traced(model, c, Direction::Away, &cfg, Exec::Sequential)?.noise))
        })
        .into_iter()
        .collect()
}

pub fn encode_noise_set(set: &NoiseSet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(NOISE_MAGIC);
    out.extend_from_slice(&NOISE_VERSION.to_le_bytes());
    out.extend_from_slice(&set.model_hash);
    let c = &set.config;
    out.extend_from_slice(&(c.steps as u64).to_le_bytes());
    out.extend_from_slice(&c.learning_rate.to_le_bytes());
    out.extend_from_slice(&c.lambda_reg.to_le_bytes());
    out.extend_from_slice(&(c.batch as u32).to_le_bytes());
    out.extend_from_slice(&c.seed.to_le_bytes());
    out.extend_from_slice(&(set.dim as u32).to_le_bytes());
    out.extend_from_slice(&(set.pairs.len() as u32).to_le_bytes());
    for p in &set.pairs {
        out.extend_from_slice(&(p.label as u16).to_le_bytes());
        out.extend_from_slice(&(p.perturbing as u16).to_le_bytes());
        out.extend_from_slice(&(p.pos.rows() as u32).to_le_bytes());
        put_f64s(&mut out, p.pos.data());
        put_f64s(&mut out, p.neg.data());
    }
    out
}

pub fn decode_noise_set(bytes: &[u8]) -> Result<NoiseSet> {
    let corrupt = |e: Error| Error::Cache(format!("corrupt noise cache: {e}"));
    let mut r = ByteReader::new(bytes);
    r.magic(NOISE_MAGIC).map_err(corrupt)?;
    let version = r.u32("version").map_err(corrupt)?;
    if version != NOISE_VERSION {
        return Err(Error::Cache(format!("unsupported noise cache version {version}")));
    }
    let mut model_hash = [0u8; 32];
    model_hash.copy_from_slice(r.take(32, "model hash").map_err(corrupt)?);
    let config = NoiseConfig {
        steps: r.u64("steps").map_err(corrupt)? as usize,
        learning_rate: r.f64("learning rate").map_err(corrupt)?,
        lambda_reg: r.f64("lambda").map_err(corrupt)?,
        batch: r.u32("batch").map_err(corrupt)? as usize,
        seed: r.u64("seed").map_err(corrupt)?,
    };
    let dim = r.u32("dim").map_err(corrupt)? as usize;
    let count = r.u32("key count").map_err(corrupt)? as usize;
    let mut pairs = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let label = r.u16("label").map_err(corrupt)? as usize;
        let perturbing = r.u16("perturbing label").map_err(corrupt)? as usize;
        let rows = r.u32("batch count").map_err(corrupt)? as usize;
        let pos = r.f64s(rows * dim, "positive noise").map_err(corrupt)?;
        let neg = r.f64s(rows * dim, "negative noise").map_err(corrupt)?;
        pairs.push(NoisePair {
            label,
            perturbing,
            pos: Tensor::new(vec![rows, dim], pos).map_err(corrupt)?,
            neg: Tensor::new(vec![rows, dim], neg).map_err(corrupt)?,
        });
    }
    r.finish().map_err(corrupt)?;
    Ok(NoiseSet { model_hash, config, dim, pairs })
}

pub fn cache_store(path: &Path, set: &NoiseSet) -> Result<()> {
    atomic_write(path, &encode_noise_set(set))
}

/// Loaded noise plus a warning when a provenance mismatch was overridden.
#[derive(Debug)]
pub struct LoadedNoise {
    pub set: NoiseSet,
    pub warning: Option<String>,
}

/// Restores a cache, refusing it when it was forged against a different
/// model unless `allow_mismatch` is set.
pub fn cache_load(path: &Path, model_hash: &[u8; 32], allow_mismatch: bool) -> Result<LoadedNoise> {
    let set = decode_noise_set(&read(path)?)?;
    if &set.model_hash == model_hash {
        return Ok(LoadedNoise { set, warning: None });
    }
    let msg = format!(
        "noise cache {} was forged against model {} but the current model is {}",
        path.display(),
        hex(&set.model_hash),
        hex(model_hash)
    );
    if allow_mismatch {
        log::warn!("{msg}; continuing because the override flag is set");
        Ok(LoadedNoise { set, warning: Some(msg) })
    } else {
        Err(Error::Cache(msg))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
