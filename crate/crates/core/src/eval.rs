//! Retain/forget accuracy, a loss-threshold membership-inference attacker,
//! report assembly and logit export.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{sample_finetune_retain, Dataset, SplitResult, TaskKind, TaskSpec};
use crate::error::{Error, Result};
use crate::io_util::{atomic_write, read};
use crate::numeric::{argmax, Classifier, Tensor};
use crate::rng;

/// Balanced-accuracy margin over chance below which the attacker is
/// flagged as low-power.
pub const LOW_POWER_MARGIN: f64 = 0.05;

#[derive(Clone, Copy, Debug)]
pub enum LabelSpace<'a> {
    Fine,
    /// Labels are coarse; predictions are mapped through `fine -> coarse`.
    Coarse(&'a [usize]),
}

pub fn accuracy(model: &Classifier, inputs: &Tensor, labels: &[usize], space: LabelSpace<'_>) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Eval("accuracy over an empty set".into()));
    }
    let preds = model.predict(inputs)?;
    let hits = match space {
        LabelSpace::Fine => preds.iter().zip(labels).filter(|(p, y)| p == y).count(),
        LabelSpace::Coarse(map) => {
            if let Some(&p) = preds.iter().find(|&&p| p >= map.len()) {
                return Err(Error::Eval(format!("prediction {p} has no coarse mapping")));
            }
            preds.iter().zip(labels).filter(|(&p, &y)| map[p] == y).count()
        }
    };
    Ok(100.0 * hits as f64 / labels.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl LossSummary {
    fn of(v: &[f64]) -> Self {
        Self {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Predicts "member" when a sample's cross-entropy is `<= threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiaAttacker {
    pub threshold: f64,
    pub balanced_accuracy: f64,
    /// Fraction of non-members (calibration set) on the member side.
    pub nonmember_fpr: f64,
    /// Fraction of members on the member side.
    pub member_tpr: f64,
    pub low_power: bool,
    pub members: LossSummary,
    pub nonmembers: LossSummary,
}

impl MiaAttacker {
    /// Threshold search over raw loss vectors. Candidates are midpoints of
    /// consecutive distinct losses plus one point beyond each end; the first
    /// candidate with the highest balanced accuracy wins.
    pub fn calibrate_losses(members: &[f64], nonmembers: &[f64]) -> Result<Self> {
        if members.is_empty() || nonmembers.is_empty() {
            return Err(Error::Eval("MIA calibration needs members and non-members".into()));
        }
        if members.iter().chain(nonmembers).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("MIA calibration loss".into()));
        }
        let mut all: Vec<(f64, bool)> =
            members.iter().map(|&v| (v, true)).chain(nonmembers.iter().map(|&v| (v, false))).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nm, nn) = (members.len() as f64, nonmembers.len() as f64);

        let lowest = all[0].0 - 1.0;
        let mut best = (lowest, 0.5, 0usize, 0usize);
        let (mut m_le, mut n_le) = (0usize, 0usize);
        let mut i = 0;
        while i < all.len() {
            let v = all[i].0;
            while i < all.len() && all[i].0 == v {
                if all[i].1 {
                    m_le += 1;
                } else {
                    n_le += 1;
                }
                i += 1;
            }
            let t = if i < all.len() { v + (all[i].0 - v) / 2.0 } else { v + 1.0 };
            let ba = 0.5 * (m_le as f64 / nm + (nn - n_le as f64) / nn);
            if ba > best.1 {
                best = (t, ba, m_le, n_le);
            }
        }
        let (threshold, balanced_accuracy, m_le, n_le) = best;
        Ok(Self {
            threshold,
            balanced_accuracy,
            nonmember_fpr: n_le as f64 / nn,
            member_tpr: m_le as f64 / nm,
            low_power: balanced_accuracy - 0.5 < LOW_POWER_MARGIN,
            members: LossSummary::of(members),
            nonmembers: LossSummary::of(nonmembers),
        })
    }

    /// Percent of `losses` on the member side.
    pub fn score_losses(&self, losses: &[f64]) -> Result<f64> {
        if losses.is_empty() {
            return Err(Error::Eval("MIA score over an empty forget set".into()));
        }
        Ok(100.0 * losses.iter().filter(|&&l| l <= self.threshold).count() as f64 / losses.len() as f64)
    }
}

pub fn calibrate_mia(
    model: &Classifier,
    members: (&Tensor, &[usize]),
    nonmembers: (&Tensor, &[usize]),
) -> Result<MiaAttacker> {
    if members.1.is_empty() || nonmembers.1.is_empty() {
        return Err(Error::Eval("MIA calibration needs members and non-members".into()));
    }
    MiaAttacker::calibrate_losses(
        &model.per_sample_losses(members.0, members.1)?,
        &model.per_sample_losses(nonmembers.0, nonmembers.1)?,
    )
}

pub fn mia_score(attacker: &MiaAttacker, model: &Classifier, inputs: &Tensor, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Eval("MIA score over an empty forget set".into()));
    }
    attacker.score_losses(&model.per_sample_losses(inputs, labels)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Retain-train samples used as MIA members.
    pub mia_members: usize,
    /// Include wall-clock timings in reports. Off by default so reports
    /// stay byte-identical across reruns.
    pub timings: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { mia_members: 1000, timings: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskDescriptor {
    pub kind: TaskKind,
    pub target: Option<usize>,
}

impl From<&TaskSpec> for TaskDescriptor {
    fn from(t: &TaskSpec) -> Self {
        Self { kind: t.kind(), target: t.target_class() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub task: TaskDescriptor,
    pub seed: u64,
    pub a_r: f64,
    pub a_f: f64,
    pub mia: f64,
    pub timings: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackerSummary {
    pub method: String,
    pub threshold: f64,
    pub balanced_accuracy: f64,
    pub nonmember_fpr: f64,
    pub low_power: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSet {
    pub reports: Vec<EvalReport>,
    pub attackers: Vec<AttackerSummary>,
}

impl ReportSet {
    pub fn get(&self, method: &str) -> Option<&EvalReport> {
        self.reports.iter().find(|r| r.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: Self = serde_json::from_str(text)?;
        for r in &set.reports {
            for (name, v) in [("a_r", r.a_r), ("a_f", r.a_f), ("mia", r.mia)] {
                if !(0.0..=100.0).contains(&v) {
                    return Err(Error::Eval(format!("{}: {name} = {v} outside [0, 100]", r.method)));
                }
            }
        }
        Ok(set)
    }

    pub fn table(&self) -> String {
        let w = self.reports.iter().map(|r| r.method.len()).max().unwrap_or(0).max("method".len());
        let mut out = format!("{:<w$}  {:>7}  {:>7}  {:>7}\n", "method", "A_r", "A_f", "MIA");
        for r in &self.reports {
            let _ = writeln!(out, "{:<w$}  {:>7.2}  {:>7.2}  {:>7.2}", r.method, r.a_r, r.a_f, r.mia);
        }
        out
    }
}

pub struct ModelEntry<'a> {
    pub method: String,
    pub model: &'a Classifier,
    pub timings: BTreeMap<String, f64>,
}

impl<'a> ModelEntry<'a> {
    pub fn new(method: impl Into<String>, model: &'a Classifier) -> Self {
        Self { method: method.into(), model, timings: BTreeMap::new() }
    }
}

/// Index sets a report is computed on.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalSets {
    /// Test indices for A_r (empty for random tasks: the whole test set).
    pub retain_test: Vec<usize>,
    pub forget_test: Vec<usize>,
    pub members: Vec<usize>,
}

pub fn eval_sets(train: &Dataset, test: &Dataset, split: &SplitResult, task: &TaskSpec, cfg: &EvalConfig, seed: u64) -> Result<EvalSets> {
    let (retain_test, forget_test) = match task.target_class() {
        Some(target) => (0..test.len()).partition(|&i| test.labels[i] != target),
        None => ((0..test.len()).collect(), Vec::new()),
    };
    let n = cfg.mia_members.min(split.retain.len());
    let members = sample_finetune_retain(&split.retain, n, rng::derive(seed, 0x31A))?;
    if train.dim() != test.dim() {
        return Err(Error::Dimension("train and test dims differ".into()));
    }
    Ok(EvalSets { retain_test, forget_test, members })
}

/// Evaluates every model on the same retain/forget/calibration sets.
/// Class-level tasks measure A_f on forget-class test samples; random tasks
/// on the forgotten training samples. Sub-class tasks score A_r on coarse
/// labels. MIA is always measured on the forgotten training samples.
pub fn full_report(
    models: &[ModelEntry<'_>],
    train: &Dataset,
    test: &Dataset,
    split: &SplitResult,
    task: &TaskSpec,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<ReportSet> {
    let sets = eval_sets(train, test, split, task, cfg, seed)?;
    let (rx, ry) = test.subset(&sets.retain_test);
    let coarse = if task.kind() == TaskKind::SubClass {
        let map = test.coarse_map().ok_or_else(|| Error::Eval("sub-class task without coarse labels".into()))?;
        Some((map, test.coarse_subset(&sets.retain_test).expect("coarse labels checked")))
    } else {
        None
    };
    let (fx, fy) = if task.target_class().is_some() { test.subset(&sets.forget_test) } else { train.subset(&split.forget) };
    let (mx, my) = train.subset(&sets.members);
    let (nx, ny) = (&test.inputs, &test.labels);
    let (ftx, fty) = train.subset(&split.forget);

    let mut reports = Vec::with_capacity(models.len());
    let mut attackers = Vec::with_capacity(models.len());
    for entry in models {
        let m = entry.model;
        let a_r = match &coarse {
            Some((map, cy)) => accuracy(m, &rx, cy, LabelSpace::Coarse(map))?,
            None => accuracy(m, &rx, &ry, LabelSpace::Fine)?,
        };
        let a_f = accuracy(m, &fx, &fy, LabelSpace::Fine)?;
        let attacker = calibrate_mia(m, (&mx, &my), (nx, ny))?;
        let mia = mia_score(&attacker, m, &ftx, &fty)?;
        reports.push(EvalReport {
            method: entry.method.clone(),
            task: task.into(),
            seed,
            a_r,
            a_f,
            mia,
            timings: if cfg.timings { entry.timings.clone() } else { BTreeMap::new() },
        });
        attackers.push(AttackerSummary {
            method: entry.method.clone(),
            threshold: attacker.threshold,
            balanced_accuracy: attacker.balanced_accuracy,
            nonmember_fpr: attacker.nonmember_fpr,
            low_power: attacker.low_power,
        });
    }
    Ok(ReportSet { reports, attackers })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRow {
    pub id: usize,
    pub label: usize,
    pub logits: Vec<f64>,
}

impl PredictionRow {
    pub fn argmax(&self) -> usize {
        argmax(&self.logits)
    }
}

pub fn predictions_csv(model: &Classifier, ds: &Dataset) -> Result<String> {
    let logits = model.forward(&ds.inputs)?;
    let k = logits.cols();
    let mut out = String::from("id,label");
    for c in 0..k {
        let _ = write!(out, ",logit_{c}");
    }
    out.push('\n');
    for i in 0..ds.len() {
        let _ = write!(out, "{i},{}", ds.labels[i]);
        for v in logits.row(i) {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn export_predictions(model: &Classifier, ds: &Dataset, path: &Path) -> Result<()> {
    atomic_write(path, predictions_csv(model, ds)?.as_bytes())
}

pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRow>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::parse(0, "empty predictions file"))?;
    let k = header.split(',').count().checked_sub(2).filter(|&k| k > 0).ok_or_else(|| Error::parse(0, "header has no logit columns"))?;
    let mut offset = header.len() + 1;
    let mut rows = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != k + 2 {
            return Err(Error::parse(offset, format!("expected {} fields, found {}", k + 2, fields.len())));
        }
        let bad = |what: &str| Error::parse(offset, format!("invalid {what}"));
        rows.push(PredictionRow {
            id: fields[0].parse().map_err(|_| bad("id"))?,
            label: fields[1].parse().map_err(|_| bad("label"))?,
            logits: fields[2..].iter().map(|f| f.parse::<f64>().map_err(|_| bad("logit"))).collect::<Result<_>>()?,
        });
        offset += line.len() + 1;
    }
    Ok(rows)
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    parse_predictions(&String::from_utf8_lossy(&read(path)?))
}
