//! Unlearning engines: noise-guided realignment, UNSIR impair/repair,
//! retain-only fine-tuning and retraining from scratch.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{sample_finetune_retain, Dataset, SplitResult};
use crate::error::{Error, Result};
use crate::guidance::{PerturbEntry, PerturbMap};
use crate::noise::{blend, forge_error_maximizing, hex, NoiseConfig, NoiseSet};
use crate::io_util::atomic_write;
use crate::numeric::{save_checkpoint, train, Classifier, Optimizer, Tensor, TrainConfig};
use crate::par::Exec;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Megu,
    Unsir,
    Ft,
    Retrain,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Megu => "megu",
            Method::Unsir => "unsir",
            Method::Ft => "ft",
            Method::Retrain => "retrain",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnlearnConfig {
    pub method: Method,
    /// Fine-tuning epochs for `megu` and `ft`.
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub alpha: f64,
    /// Taken from the run config, not from this section.
    #[serde(skip)]
    pub tau: f64,
    /// Upper bound on retain samples used for fine-tuning.
    pub finetune_retain_count: usize,
    /// Replace perturbing labels with seeded uniform labels `!= y`.
    pub random_labels: bool,
    /// Fine-tune on perturbed labels without feature noise.
    pub no_feature_noise: bool,
    pub impair_epochs: usize,
    pub repair_epochs: usize,
    /// UNSIR impair-phase rate; the repair phase uses `learning_rate`.
    pub impair_learning_rate: f64,
    /// Taken from the run config, not from this section.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for UnlearnConfig {
    fn default() -> Self {
        Self {
            method: Method::Megu,
            epochs: 5,
            learning_rate: 5e-3,
            batch_size: 32,
            alpha: 0.7,
            tau: 0.3,
            finetune_retain_count: 10_000,
            random_labels: false,
            no_feature_noise: false,
            impair_epochs: 1,
            repair_epochs: 1,
            impair_learning_rate: 3e-2,
            seed: 0,
        }
    }
}

impl UnlearnConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if matches!(self.method, Method::Megu | Method::Ft) && self.epochs == 0 {
            bad.push("unlearn epochs must be >= 1".into());
        }
        if self.method == Method::Unsir && self.impair_epochs + self.repair_epochs == 0 {
            bad.push("unsir needs at least one impair or repair epoch".into());
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            bad.push(format!("unlearn learning rate must be >= 0, got {}", self.learning_rate));
        }
        if !(self.impair_learning_rate >= 0.0) || !self.impair_learning_rate.is_finite() {
            bad.push(format!("impair learning rate must be >= 0, got {}", self.impair_learning_rate));
        }
        if self.batch_size == 0 {
            bad.push("unlearn batch size must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            bad.push(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            bad.push(format!("tau must lie in (0, 1), got {}", self.tau));
        }
        bad
    }

    pub fn validate(&self) -> Result<()> {
        let bad = self.violations();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }
}

/// Directory name for a run: the method tag plus any ablation suffix.
pub fn run_name(cfg: &UnlearnConfig) -> String {
    let mut name = cfg.method.tag().to_string();
    if cfg.method == Method::Megu {
        if cfg.random_labels {
            name.push_str("-rnd");
        }
        if cfg.no_feature_noise {
            name.push_str("-wofn");
        }
    }
    name
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub stream: String,
    pub mean_loss: f64,
}

#[derive(Clone, Debug)]
pub struct UnlearnRun {
    pub method: Method,
    pub initial_hash: [u8; 32],
    pub model: Classifier,
    pub traces: Vec<TraceRow>,
    /// Wall-clock seconds per phase, in execution order.
    pub timings: Vec<(String, f64)>,
    /// Mean forget-set loss under the original labels after each phase.
    pub forget_loss: Vec<(String, f64)>,
}

impl UnlearnRun {
    pub fn initial_hash_hex(&self) -> String {
        hex(&self.initial_hash)
    }

    pub fn timings_json(&self) -> Result<String> {
        let phases: serde_json::Map<String, serde_json::Value> =
            self.timings.iter().map(|(k, v)| (k.clone(), serde_json::json!(v))).collect();
        Ok(serde_json::to_string_pretty(&serde_json::json!({ "method": self.method.tag(), "phases": phases }))? + "\n")
    }

    /// Writes `config.json`, `initial.ckpt`, `final.ckpt`, `traces.csv` and
    /// `timing.json` into `dir`.
    pub fn write_dir(&self, dir: &Path, config_json: &str, initial: &Classifier) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        atomic_write(&dir.join("config.json"), config_json.as_bytes())?;
        save_checkpoint(initial, &dir.join("initial.ckpt"))?;
        save_checkpoint(&self.model, &dir.join("final.ckpt"))?;
        atomic_write(&dir.join("traces.csv"), self.traces_csv().as_bytes())?;
        atomic_write(&dir.join("timing.json"), self.timings_json()?.as_bytes())
    }

    pub fn traces_csv(&self) -> String {
        let mut out = String::from("epoch,stream,mean_loss\n");
        for r in &self.traces {
            let _ = writeln!(out, "{},{},{:?}", r.epoch, r.stream, r.mean_loss);
        }
        out
    }
}

/// Seeded uniform labels `!= y` for every forget sample.
pub fn random_perturb_map(ds: &Dataset, forget: &[usize], tau: f64, seed: u64) -> Result<PerturbMap> {
    let k = ds.num_classes();
    if k < 2 {
        return Err(Error::Config("random labels need at least two classes".into()));
    }
    let mut rng = rng::seeded(seed);
    let entries: Vec<PerturbEntry> = forget
        .iter()
        .map(|&index| {
            let label = ds.labels[index];
            let mut p = rng.gen_range(0..k - 1);
            if p >= label {
                p += 1;
            }
            PerturbEntry { index, label, perturbing: p, relevance: Vec::new() }
        })
        .collect();
    let mut histogram = vec![0; k];
    for e in &entries {
        histogram[e.perturbing] += 1;
    }
    Ok(PerturbMap { tau, entries, histogram })
}

/// The map a run actually trains on: the guided map, or its random-label
/// replacement when the `random_labels` ablation is on.
pub fn effective_perturb_map(map: &PerturbMap, ds: &Dataset, split: &SplitResult, cfg: &UnlearnConfig) -> Result<PerturbMap> {
    if cfg.random_labels {
        random_perturb_map(ds, &split.forget, map.tau, rng::derive(cfg.seed, 0xA11))
    } else {
        Ok(map.clone())
    }
}

/// `D_f^p`: noisy forget inputs paired with their perturbing labels.
#[derive(Clone, Debug)]
pub struct PerturbedSet {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
    pub originals: Vec<usize>,
    pub indices: Vec<usize>,
    /// Selected noise rows `(pos_row, neg_row)` per sample; `None` without noise.
    pub noise_rows: Vec<Option<(usize, usize)>>,
}

pub fn build_perturbed_set(
    ds: &Dataset,
    map: &PerturbMap,
    noise: Option<&NoiseSet>,
    alpha: f64,
    seed: u64,
) -> Result<PerturbedSet> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let d = ds.dim();
    if let Some(n) = noise {
        if n.dim != d {
            return Err(Error::Config(format!("noise dim {} does not match data dim {d}", n.dim)));
        }
        for (label, perturbing) in map.keys() {
            if n.get(label, perturbing).is_none() {
                return Err(Error::Config(format!(
                    "no noise pair for key ({label}, {perturbing}); run forge-noise for this perturb map"
                )));
            }
        }
    }
    let mut rng = rng::seeded(seed);
    let mut data = Vec::with_capacity(map.entries.len() * d);
    let mut noise_rows = Vec::with_capacity(map.entries.len());
    for e in &map.entries {
        if e.perturbing == e.label {
            return Err(Error::Domain(format!("sample {} keeps its own label", e.index)));
        }
        let x = ds.inputs.row(e.index);
        match noise {
            Some(n) => {
                let pair = n.get(e.label, e.perturbing).expect("checked above");
                let (pi, ni) = (rng.gen_range(0..pair.pos.rows()), rng.gen_range(0..pair.neg.rows()));
                let (p, q) = (pair.pos.row(pi), pair.neg.row(ni));
                data.extend((0..d).map(|j| x[j] + blend(p[j], q[j], alpha)));
                noise_rows.push(Some((pi, ni)));
            }
            None => {
                data.extend_from_slice(x);
                noise_rows.push(None);
            }
        }
    }
    Ok(PerturbedSet {
        inputs: Tensor::new(vec![map.entries.len(), d], data)?,
        labels: map.entries.iter().map(|e| e.perturbing).collect(),
        originals: map.entries.iter().map(|e| e.label).collect(),
        indices: map.entries.iter().map(|e| e.index).collect(),
        noise_rows,
    })
}

struct Stream<'a> {
    inputs: &'a Tensor,
    labels: &'a [usize],
    order: Vec<usize>,
    batch: usize,
}

impl<'a> Stream<'a> {
    fn new(inputs: &'a Tensor, labels: &'a [usize], batch: usize) -> Self {
        Self { inputs, labels, order: (0..labels.len()).collect(), batch }
    }

    fn batches(&self) -> usize {
        self.order.len().div_ceil(self.batch)
    }

    fn get(&self, b: usize) -> (Tensor, Vec<usize>) {
        let idx = &self.order[b * self.batch..((b + 1) * self.batch).min(self.order.len())];
        (self.inputs.select_rows(idx), idx.iter().map(|&i| self.labels[i]).collect())
    }
}

fn step(model: &mut Classifier, opt: &mut Optimizer, x: &Tensor, y: &[usize]) -> Result<f64> {
    let (loss, grads) = model.loss_and_grad_with(x, y, Exec::default())?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("training loss".into()));
    }
    opt.step(&mut model.param_slices_mut(), &grads.slices())?;
    Ok(loss)
}

/// Alternates one batch from each stream per step; the shorter stream
/// cycles. Returns the mean loss of each stream.
fn interleaved_epoch(
    model: &mut Classifier,
    opt: &mut Optimizer,
    streams: &mut [Stream<'_>],
    rng: &mut rng::Rng,
) -> Result<Vec<f64>> {
    for s in streams.iter_mut() {
        s.order.shuffle(rng);
    }
    let steps = streams.iter().map(Stream::batches).max().unwrap_or(0);
    let mut sums = vec![0.0; streams.len()];
    let mut counts = vec![0usize; streams.len()];
    for i in 0..steps {
        for (k, s) in streams.iter().enumerate() {
            if s.batches() == 0 {
                continue;
            }
            let (x, y) = s.get(i % s.batches());
            sums[k] += step(model, opt, &x, &y)?;
            counts[k] += 1;
        }
    }
    Ok(sums.iter().zip(&counts).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect())
}

fn forget_loss(model: &Classifier, ds: &Dataset, split: &SplitResult) -> Result<f64> {
    let (x, y) = ds.subset(&split.forget);
    model.loss(&x, &y)
}

fn retain_sample(split: &SplitResult, cfg: &UnlearnConfig) -> Result<Vec<usize>> {
    let n = cfg.finetune_retain_count.min(split.retain.len());
    sample_finetune_retain(&split.retain, n, rng::derive(cfg.seed, 0x5E7A1))
}

/// Joint fine-tuning on `D_f^p` (noisy forget samples, perturbing labels)
/// and a retain subsample (true labels).
pub fn megu_unlearn(
    model: &Classifier,
    ds: &Dataset,
    split: &SplitResult,
    map: &PerturbMap,
    noise: Option<&NoiseSet>,
    cfg: &UnlearnConfig,
) -> Result<UnlearnRun> {
    cfg.validate()?;
    let t0 = Instant::now();
    let covered: BTreeSet<usize> = map.entries.iter().map(|e| e.index).collect();
    if let Some(missing) = split.forget.iter().find(|i| !covered.contains(i)) {
        return Err(Error::Config(format!("perturb map does not cover forget sample {missing}")));
    }
    let map = effective_perturb_map(map, ds, split, cfg)?;
    let noise = if cfg.no_feature_noise {
        None
    } else {
        Some(noise.ok_or_else(|| Error::Config("megu needs a noise set unless no_feature_noise is set; run forge-noise".into()))?)
    };
    let perturbed = build_perturbed_set(ds, &map, noise, cfg.alpha, rng::derive(cfg.seed, 0xF0))?;
    let retain_idx = retain_sample(split, cfg)?;
    let (rx, ry) = ds.subset(&retain_idx);
    let prepare = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let initial_hash = model.checksum();
    let mut m = model.clone();
    let mut opt = Optimizer::adam(cfg.learning_rate)?;
    let mut rng = rng::seeded(rng::derive(cfg.seed, 0xE9));
    let mut traces = Vec::new();
    let mut streams = [
        Stream::new(&perturbed.inputs, &perturbed.labels, cfg.batch_size),
        Stream::new(&rx, &ry, cfg.batch_size),
    ];
    for epoch in 0..cfg.epochs {
        let means = interleaved_epoch(&mut m, &mut opt, &mut streams, &mut rng)?;
        traces.push(TraceRow { epoch, stream: "forget_perturbed".into(), mean_loss: means[0] });
        traces.push(TraceRow { epoch, stream: "retain".into(), mean_loss: means[1] });
    }
    let finetune = t1.elapsed().as_secs_f64();
    let fl = forget_loss(&m, ds, split)?;
    Ok(UnlearnRun {
        method: Method::Megu,
        initial_hash,
        model: m,
        traces,
        timings: vec![("prepare".into(), prepare), ("finetune".into(), finetune)],
        forget_loss: vec![("initial".into(), forget_loss(model, ds, split)?), ("final".into(), fl)],
    })
}

/// Retain-only fine-tuning.
pub fn ft_baseline(model: &Classifier, ds: &Dataset, split: &SplitResult, cfg: &UnlearnConfig) -> Result<UnlearnRun> {
    cfg.validate()?;
    let t0 = Instant::now();
    let retain_idx = retain_sample(split, cfg)?;
    let (rx, ry) = ds.subset(&retain_idx);
    let initial_hash = model.checksum();
    let mut m = model.clone();
    let mut opt = Optimizer::adam(cfg.learning_rate)?;
    let mut rng = rng::seeded(rng::derive(cfg.seed, 0xE9));
    let mut streams = [Stream::new(&rx, &ry, cfg.batch_size)];
    let mut traces = Vec::new();
    for epoch in 0..cfg.epochs {
        let means = interleaved_epoch(&mut m, &mut opt, &mut streams, &mut rng)?;
        traces.push(TraceRow { epoch, stream: "retain".into(), mean_loss: means[0] });
    }
    Ok(UnlearnRun {
        method: Method::Ft,
        initial_hash,
        forget_loss: vec![("initial".into(), forget_loss(model, ds, split)?), ("final".into(), forget_loss(&m, ds, split)?)],
        model: m,
        traces,
        timings: vec![("finetune".into(), t0.elapsed().as_secs_f64())],
    })
}

/// Impair on retain samples shifted by error-maximizing noise of the
/// forget classes, then repair on clean retain samples.
pub fn unsir_unlearn(
    model: &Classifier,
    ds: &Dataset,
    split: &SplitResult,
    noise_cfg: &NoiseConfig,
    cfg: &UnlearnConfig,
) -> Result<UnlearnRun> {
    cfg.validate()?;
    let t0 = Instant::now();
    let classes: Vec<usize> =
        split.forget.iter().map(|&i| ds.labels[i]).collect::<BTreeSet<_>>().into_iter().collect();
    let noises = if cfg.impair_epochs > 0 { forge_error_maximizing(model, &classes, noise_cfg)? } else { Vec::new() };
    let retain_idx = retain_sample(split, cfg)?;
    let (rx, ry) = ds.subset(&retain_idx);
    let noise_time = t0.elapsed().as_secs_f64();

    let initial_hash = model.checksum();
    let mut m = model.clone();
    let mut rng = rng::seeded(rng::derive(cfg.seed, 0xE9));
    let mut traces = Vec::new();
    let mut audit = vec![("initial".to_string(), forget_loss(model, ds, split)?)];

    let t1 = Instant::now();
    if cfg.impair_epochs > 0 {
        let d = ds.dim();
        let mut noisy = rx.clone();
        for i in 0..noisy.rows() {
            let (_, n) = &noises[rng.gen_range(0..noises.len())];
            let row = n.row(rng.gen_range(0..n.rows())).to_vec();
            for (v, e) in noisy.row_mut(i).iter_mut().zip(row.iter().take(d)) {
                *v += e;
            }
        }
        let mut streams = [Stream::new(&noisy, &ry, cfg.batch_size)];
        let mut opt = Optimizer::adam(cfg.impair_learning_rate)?;
        for epoch in 0..cfg.impair_epochs {
            let means = interleaved_epoch(&mut m, &mut opt, &mut streams, &mut rng)?;
            traces.push(TraceRow { epoch, stream: "impair".into(), mean_loss: means[0] });
        }
        audit.push(("impair".into(), forget_loss(&m, ds, split)?));
    }
    let impair = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let mut streams = [Stream::new(&rx, &ry, cfg.batch_size)];
    let mut opt = Optimizer::adam(cfg.learning_rate)?;
    for epoch in 0..cfg.repair_epochs {
        let means = interleaved_epoch(&mut m, &mut opt, &mut streams, &mut rng)?;
        traces.push(TraceRow { epoch, stream: "repair".into(), mean_loss: means[0] });
    }
    if cfg.repair_epochs > 0 {
        audit.push(("repair".into(), forget_loss(&m, ds, split)?));
    }
    Ok(UnlearnRun {
        method: Method::Unsir,
        initial_hash,
        model: m,
        traces,
        timings: vec![("noise".into(), noise_time), ("impair".into(), impair), ("repair".into(), t2.elapsed().as_secs_f64())],
        forget_loss: audit,
    })
}

/// Trains a fresh model with `template`'s architecture and init seed on the
/// retain set; `train_cfg.seed` drives batch shuffling.
pub fn retrain_gold(template: &Classifier, ds: &Dataset, split: &SplitResult, train_cfg: &TrainConfig) -> Result<UnlearnRun> {
    let t0 = Instant::now();
    let mut m = Classifier::new(template.layer_dims().to_vec(), template.activation(), template.seed())?;
    let initial_hash = m.checksum();
    let (x, y) = ds.subset(&split.retain);
    let losses = train(&mut m, &x, &y, train_cfg)?;
    Ok(UnlearnRun {
        method: Method::Retrain,
        initial_hash,
        traces: losses
            .into_iter()
            .enumerate()
            .map(|(epoch, mean_loss)| TraceRow { epoch, stream: "retain".into(), mean_loss })
            .collect(),
        forget_loss: vec![("final".into(), forget_loss(&m, ds, split)?)],
        model: m,
        timings: vec![("train".into(), t0.elapsed().as_secs_f64())],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, split_task, SyntheticSpec, TaskSpec};
    use crate::guidance::{assign_all, TransitionMatrix};
    use crate::noise::forge_pairs;

    fn setup() -> (Dataset, SplitResult, Classifier) {
        let mut spec = SyntheticSpec::default();
        spec.per_class = 12;
        let ds = gen_synthetic(&spec, 3).unwrap();
        let split = split_task(&ds, &TaskSpec::ClassWise { target: 1 }).unwrap();
        let mut m = Classifier::mlp(ds.dim(), &[16], 8, crate::Activation::Tanh, 2).unwrap();
        train(&mut m, &ds.inputs, &ds.labels, &TrainConfig { epochs: 5, ..Default::default() }).unwrap();
        (ds, split, m)
    }

    fn guided_map(ds: &Dataset, split: &SplitResult, m: &Classifier) -> PerturbMap {
        let t = TransitionMatrix::from_similarity(&ds.overlap_truth.clone().unwrap(), 1, "truth").unwrap();
        assign_all(m, &t, ds, &split.forget, 0.3).unwrap()
    }

    #[test]
    fn zero_learning_rate_leaves_model_unchanged() {
        let (ds, split, m) = setup();
        let map = guided_map(&ds, &split, &m);
        let cfg = UnlearnConfig { epochs: 1, learning_rate: 0.0, no_feature_noise: true, ..Default::default() };
        let run = megu_unlearn(&m, &ds, &split, &map, None, &cfg).unwrap();
        assert_eq!(run.model, m);
        let ft = ft_baseline(&m, &ds, &split, &UnlearnConfig { method: Method::Ft, ..cfg }).unwrap();
        assert_eq!(ft.model, m);
    }

    #[test]
    fn zero_epochs_rejected() {
        let (ds, split, m) = setup();
        let map = guided_map(&ds, &split, &m);
        let cfg = UnlearnConfig { epochs: 0, no_feature_noise: true, ..Default::default() };
        assert!(matches!(megu_unlearn(&m, &ds, &split, &map, None, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn missing_noise_key_fails_before_training() {
        let (ds, split, m) = setup();
        let map = guided_map(&ds, &split, &m);
        let mut noise = forge_pairs(&m, &map, &NoiseConfig { steps: 2, batch: 2, ..Default::default() }).unwrap();
        noise.pairs.pop();
        let err = megu_unlearn(&m, &ds, &split, &map, Some(&noise), &UnlearnConfig::default()).unwrap_err();
        assert!(err.to_string().contains("no noise pair"), "{err}");
        let err = megu_unlearn(&m, &ds, &split, &map, None, &UnlearnConfig::default()).unwrap_err();
        assert!(err.to_string().contains("forge-noise"), "{err}");
    }

    #[test]
    fn perturbed_set_is_exact_blend() {
        let (ds, split, m) = setup();
        let map = guided_map(&ds, &split, &m);
        let noise = forge_pairs(&m, &map, &NoiseConfig { steps: 3, batch: 4, ..Default::default() }).unwrap();
        let set = build_perturbed_set(&ds, &map, Some(&noise), 0.7, 11).unwrap();
        for (i, e) in map.entries.iter().enumerate() {
            assert_ne!(set.labels[i], set.originals[i]);
            let (pi, ni) = set.noise_rows[i].unwrap();
            let pair = noise.get(e.label, e.perturbing).unwrap();
            for j in 0..ds.dim() {
                let expected = ds.inputs.row(e.index)[j] + (0.7 * pair.pos.row(pi)[j] + (1.0 - 0.7) * pair.neg.row(ni)[j]);
                assert_eq!(set.inputs.row(i)[j].to_bits(), expected.to_bits());
            }
        }
    }

    #[test]
    fn random_labels_never_self() {
        let (ds, split, _) = setup();
        let map = random_perturb_map(&ds, &split.forget, 0.3, 4).unwrap();
        assert!(map.entries.iter().all(|e| e.perturbing != e.label));
        assert!(map.distinct_labels() > 1);
    }

    #[test]
    fn unsir_repair_only_equals_ft() {
        let (ds, split, m) = setup();
        let cfg = UnlearnConfig { impair_epochs: 0, repair_epochs: 2, epochs: 2, ..Default::default() };
        let unsir = unsir_unlearn(&m, &ds, &split, &NoiseConfig::default(), &cfg).unwrap();
        let ft = ft_baseline(&m, &ds, &split, &cfg).unwrap();
        assert_eq!(unsir.model, ft.model);
    }

    #[test]
    fn gold_is_deterministic() {
        let (ds, split, m) = setup();
        let cfg = TrainConfig { epochs: 3, seed: 8, ..Default::default() };
        let a = retrain_gold(&m, &ds, &split, &cfg).unwrap();
        let b = retrain_gold(&m, &ds, &split, &cfg).unwrap();
        assert_eq!(a.model, b.model);
    }
}
