//! Transition-matrix estimation from oracle queries and per-instance
//! perturbing-label assignment.
//!
//! For each class `k`, `n` seeded exemplars are scored against every
//! concept `l`; the mean score `S[k][l]` becomes column `k` of `T` after
//! normalizing `S[k][..]` to unit sum. A forget sample `x` with label `y`
//! gets the relevance vector `R = T · mask_y(softmax(f(x)))` and its
//! perturbing label is the `⌊Kτ⌋`-th largest entry of `R` among the
//! indices other than `y`.

use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::io_util::{atomic_write, read};
use crate::numeric::{softmax, Classifier};
use crate::oracle::Oracle;
use crate::par::Exec;
use crate::rng;

pub const DEFAULT_TAU: f64 = 0.3;
pub const DEFAULT_EXEMPLARS: usize = 10;

/// Column-stochastic `K×K` matrix; `columns[k]` holds class `k`'s
/// transition possibilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub k: usize,
    pub columns: Vec<Vec<f64>>,
    pub exemplars_per_class: usize,
    pub oracle: String,
}

impl TransitionMatrix {
    /// Normalizes each row `S[k][..]` of a concept-similarity matrix into
    /// column `k`.
    pub fn from_similarity(similarity: &[Vec<f64>], exemplars_per_class: usize, oracle: &str) -> Result<Self> {
        let k = similarity.len();
        if k == 0 || similarity.iter().any(|r| r.len() != k) {
            return Err(Error::Dimension("similarity matrix must be square and non-empty".into()));
        }
        let mut columns = Vec::with_capacity(k);
        for (c, row) in similarity.iter().enumerate() {
            if row.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::Domain(format!("similarity row {c} has negative or non-finite entries")));
            }
            let total: f64 = row.iter().sum();
            if !(total > 0.0) {
                return Err(Error::Normalization(format!("class {c} has zero total similarity mass")));
            }
            columns.push(row.iter().map(|v| v / total).collect());
        }
        let t = Self { k, columns, exemplars_per_class, oracle: oracle.to_string() };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.len() != self.k || self.columns.iter().any(|c| c.len() != self.k) {
            return Err(Error::Dimension(format!("transition matrix must be {0}x{0}", self.k)));
        }
        for (c, col) in self.columns.iter().enumerate() {
            if col.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Domain(format!("column {c} has negative entries")));
            }
            let s: f64 = col.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!("column {c} sums to {s}")));
            }
        }
        Ok(())
    }

    /// `T[row][col]`.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.columns[col][row]
    }

    pub fn identity(k: usize) -> Self {
        let columns = (0..k).map(|c| (0..k).map(|r| if r == c { 1.0 } else { 0.0 }).collect()).collect();
        Self { k, columns, exemplars_per_class: 0, oracle: "identity".into() }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read(path)?;
        Self::from_json(&String::from_utf8_lossy(&bytes))
    }
}

/// Seeded exemplar indices, `n` per class.
pub fn select_exemplars(ds: &Dataset, n: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n == 0 {
        return Err(Error::Config("need at least one exemplar per class".into()));
    }
    let mut rng = rng::seeded(seed);
    (0..ds.num_classes())
        .map(|c| {
            let members = ds.indices_of_class(c);
            if members.len() < n {
                return Err(Error::Task(format!("class {c} has {} samples, {n} exemplars requested", members.len())));
            }
            Ok(index::sample(&mut rng, members.len(), n).into_iter().map(|j| members[j]).collect())
        })
        .collect()
}

/// Mean oracle score of class-`class` exemplars against `concept`.
pub fn estimate_concept_similarity<O: Oracle + ?Sized>(
    oracle: &O,
    ds: &Dataset,
    exemplars: &[usize],
    class: usize,
    concept: usize,
) -> Result<f64> {
    if exemplars.is_empty() {
        return Err(Error::Config("need at least one exemplar".into()));
    }
    let mut total = 0.0;
    for (pos, &i) in exemplars.iter().enumerate() {
        if ds.labels[i] != class {
            return Err(Error::Task(format!("exemplar {i} has label {}, expected {class}", ds.labels[i])));
        }
        let v = oracle.query(ds.inputs.row(i), i as u64, concept).map_err(|source| Error::OracleQuery {
            class,
            exemplar: pos,
            instance_id: i as u64,
            concept,
            source,
        })?;
        total += v;
    }
    Ok(total / exemplars.len() as f64)
}

pub fn build_transition_matrix<O: Oracle + ?Sized>(oracle: &O, ds: &Dataset, n: usize, seed: u64) -> Result<TransitionMatrix> {
    build_transition_matrix_with(oracle, ds, n, seed, Exec::default())
}

/// Queries for different `(class, concept)` cells may run concurrently;
/// the first failing cell in row-major order is reported.
pub fn build_transition_matrix_with<O: Oracle + ?Sized>(
    oracle: &O,
    ds: &Dataset,
    n: usize,
    seed: u64,
    exec: Exec,
) -> Result<TransitionMatrix> {
    let k = ds.num_classes();
    let exemplars = select_exemplars(ds, n, seed)?;
    let cells = exec.map_range(k * k, |cell| {
        let (class, concept) = (cell / k, cell % k);
        estimate_concept_similarity(oracle, ds, &exemplars[class], class, concept)
    });
    let mut sim = vec![vec![0.0; k]; k];
    for (cell, v) in cells.into_iter().enumerate() {
        sim[cell / k][cell % k] = v?;
    }
    TransitionMatrix::from_similarity(&sim, n, oracle.kind())
}

/// `T · (softmax with entry `label` zeroed)`.
pub fn relevance_vector(t: &TransitionMatrix, probs: &[f64], label: usize) -> Result<Vec<f64>> {
    if probs.len() != t.k || label >= t.k {
        return Err(Error::Dimension(format!("{} probabilities, label {label}, K = {}", probs.len(), t.k)));
    }
    let mut r = vec![0.0; t.k];
    for (j, col) in t.columns.iter().enumerate() {
        if j == label {
            continue;
        }
        let m = probs[j];
        for (dst, &tv) in r.iter_mut().zip(col) {
            *dst += tv * m;
        }
    }
    Ok(r)
}

/// `⌊Kτ⌋`, validated to lie in `[1, K-1]`. A `1e-9` guard absorbs decimal
/// round-off such as `100 * 0.29 = 28.999…`.
pub fn perturb_rank(k: usize, tau: f64) -> Result<usize> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Config(format!("tau must lie in (0, 1), got {tau}")));
    }
    let rank = (k as f64 * tau + 1e-9).floor() as usize;
    if rank < 1 || rank >= k {
        return Err(Error::Config(format!("floor(K * tau) = floor({k} * {tau}) = {rank}, must lie in [1, {}]", k.saturating_sub(1))));
    }
    Ok(rank)
}

/// Index of the `⌊Kτ⌋`-th largest entry of `r` among indices `!= label`;
/// ties go to the lower index.
pub fn assign_perturbing_label(r: &[f64], tau: f64, label: usize) -> Result<usize> {
    let k = r.len();
    let rank = perturb_rank(k, tau)?;
    if label >= k {
        return Err(Error::Domain(format!("label {label} out of range for K = {k}")));
    }
    if r.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("relevance vector contains NaN".into()));
    }
    let mut candidates: Vec<usize> = (0..k).filter(|&i| i != label).collect();
    candidates.sort_by(|&a, &b| r[b].partial_cmp(&r[a]).unwrap().then(a.cmp(&b)));
    Ok(candidates[rank - 1])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbEntry {
    pub index: usize,
    pub label: usize,
    pub perturbing: usize,
    pub relevance: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbMap {
    pub tau: f64,
    pub entries: Vec<PerturbEntry>,
    /// Number of forget samples assigned to each perturbing label.
    pub histogram: Vec<usize>,
}

impl PerturbMap {
    pub fn distinct_labels(&self) -> usize {
        self.histogram.iter().filter(|&&c| c > 0).count()
    }

    /// Distinct `(label, perturbing)` pairs, sorted.
    pub fn keys(&self) -> Vec<(usize, usize)> {
        let mut keys: Vec<_> = self.entries.iter().map(|e| (e.label, e.perturbing)).collect();
        keys.sort_unstable();
        keys.dedup();
        keys
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, serde_json::to_string_pretty(self)?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&read(path)?)?)
    }
}

pub fn assign_all(model: &Classifier, t: &TransitionMatrix, ds: &Dataset, forget: &[usize], tau: f64) -> Result<PerturbMap> {
    if t.k != model.num_classes() || t.k != ds.num_classes() {
        return Err(Error::Dimension(format!("transition matrix K = {} does not match model/dataset", t.k)));
    }
    perturb_rank(t.k, tau)?;
    let (x, _) = ds.subset(forget);
    let logits = model.forward(&x)?;
    let entries = Exec::default()
        .map_range(forget.len(), |i| {
            let index = forget[i];
            let label = ds.labels[index];
            let relevance = relevance_vector(t, &softmax(logits.row(i)), label)?;
            let perturbing = assign_perturbing_label(&relevance, tau, label)?;
            Ok(PerturbEntry { index, label, perturbing, relevance })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut histogram = vec![0; t.k];
    for e in &entries {
        histogram[e.perturbing] += 1;
    }
    Ok(PerturbMap { tau, entries, histogram })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_relevance() {
        let r = relevance_vector(&TransitionMatrix::identity(4), &[0.1, 0.2, 0.6, 0.1], 2).unwrap();
        assert_eq!(r, vec![0.1, 0.2, 0.0, 0.1]);
    }

    #[test]
    fn uniform_mixing() {
        let k = 5;
        let t = TransitionMatrix::from_similarity(&vec![vec![0.3; k]; k], 1, "const").unwrap();
        let probs = [0.1, 0.3, 0.2, 0.25, 0.15];
        let r = relevance_vector(&t, &probs, 1).unwrap();
        for v in r {
            assert!((v - 0.7 / 5.0).abs() < 1e-15);
        }
    }

    #[test]
    fn four_class_matrix_vector_product() {
        let cols = vec![
            vec![0.4, 0.3, 0.2, 0.1],
            vec![0.1, 0.4, 0.3, 0.2],
            vec![0.2, 0.1, 0.4, 0.3],
            vec![0.3, 0.2, 0.1, 0.4],
        ];
        let t = TransitionMatrix { k: 4, columns: cols.clone(), exemplars_per_class: 0, oracle: "fixed".into() };
        let r = relevance_vector(&t, &[0.7, 0.1, 0.1, 0.1], 0).unwrap();
        // Hand-computed: T · (0, .1, .1, .1).
        let expected = [0.06, 0.07, 0.08, 0.09];
        for (a, b) in r.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{r:?}");
        }
    }

    #[test]
    fn third_largest_non_original() {
        let r = [0.05, 0.20, 0.15, 0.10, 0.08, 0.12, 0.06, 0.09, 0.07, 0.08];
        assert_eq!(assign_perturbing_label(&r, 0.3, 0).unwrap(), 5);
        assert_eq!(assign_perturbing_label(&r, 0.1, 0).unwrap(), 1);
    }

    #[test]
    fn ties_break_to_lower_index() {
        assert_eq!(assign_perturbing_label(&[0.1; 10], 0.3, 0).unwrap(), 3);
    }

    #[test]
    fn rank_bounds() {
        assert_eq!(perturb_rank(8, 0.95).unwrap(), 7);
        assert_eq!(perturb_rank(8, 0.99).unwrap(), 7);
        assert_eq!(perturb_rank(8, 0.3).unwrap(), 2);
        let msg = perturb_rank(8, 0.1).unwrap_err().to_string();
        assert!(msg.contains("= 0"), "{msg}");
        assert!(perturb_rank(8, 1.0).is_err());
    }

    #[test]
    fn constant_similarity_gives_uniform_columns() {
        let t = TransitionMatrix::from_similarity(&vec![vec![0.8; 6]; 6], 10, "c").unwrap();
        assert!(t.columns.iter().flatten().all(|&v| (v - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn zero_mass_column_rejected() {
        let s = vec![vec![0.5, 0.5], vec![0.0, 0.0]];
        assert!(matches!(TransitionMatrix::from_similarity(&s, 1, "x"), Err(Error::Normalization(_))));
    }

    #[test]
    fn already_normalized_column_kept() {
        let s = vec![vec![0.5, 0.3, 0.2], vec![0.2, 0.2, 0.6], vec![0.1, 0.1, 0.8]];
        let t = TransitionMatrix::from_similarity(&s, 1, "x").unwrap();
        assert_eq!(t.columns[0], vec![0.5, 0.3, 0.2]);
    }

    #[test]
    fn json_round_trip() {
        let s = vec![vec![0.31, 0.17, 0.2], vec![0.2, 0.9, 0.6], vec![1.0 / 3.0, 0.1, 0.8]];
        let t = TransitionMatrix::from_similarity(&s, 4, "prototype").unwrap();
        assert_eq!(TransitionMatrix::from_json(&t.to_json().unwrap()).unwrap(), t);
    }
}
