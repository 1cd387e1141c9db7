use crate::error::{Error, Result};
use crate::numeric::Tensor;

/// Labeled vectors with an optional coarse hierarchy and, for generated
/// data, the ground-truth concept-overlap matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
    pub coarse_labels: Option<Vec<usize>>,
    pub class_names: Vec<String>,
    pub overlap_truth: Option<Vec<Vec<f64>>>,
}

impl Dataset {
    pub fn new(
        inputs: Tensor,
        labels: Vec<usize>,
        coarse_labels: Option<Vec<usize>>,
        class_names: Vec<String>,
        overlap_truth: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let ds = Self { inputs, labels, coarse_labels, class_names, overlap_truth };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        let k = self.class_names.len();
        if k == 0 {
            return Err(Error::Domain("dataset has no classes".into()));
        }
        if self.inputs.shape().len() != 2 || self.inputs.rows() != n {
            return Err(Error::Dimension(format!("inputs {:?} for {n} labels", self.inputs.shape())));
        }
        if let Some((i, y)) = self.labels.iter().enumerate().find(|(_, &y)| y >= k) {
            return Err(Error::Domain(format!("sample {i} has label {y}, but K = {k}")));
        }
        if let Some(coarse) = &self.coarse_labels {
            if coarse.len() != n {
                return Err(Error::Dimension(format!("{} coarse labels for {n} samples", coarse.len())));
            }
            let mut map: Vec<Option<usize>> = vec![None; k];
            for (i, (&f, &c)) in self.labels.iter().zip(coarse).enumerate() {
                match map[f] {
                    None => map[f] = Some(c),
                    Some(prev) if prev != c => {
                        return Err(Error::Domain(format!(
                            "sample {i}: fine class {f} mapped to coarse {c} and {prev}"
                        )))
                    }
                    _ => {}
                }
            }
        }
        if let Some(m) = &self.overlap_truth {
            if m.len() != k || m.iter().any(|r| r.len() != k) {
                return Err(Error::Dimension(format!("overlap matrix must be {k}x{k}")));
            }
            for a in 0..k {
                if (m[a][a] - 1.0).abs() > 1e-12 {
                    return Err(Error::Domain(format!("overlap diagonal entry {a} is {}", m[a][a])));
                }
                for b in 0..a {
                    if (m[a][b] - m[b][a]).abs() > 1e-12 {
                        return Err(Error::Domain(format!("overlap matrix not symmetric at ({a},{b})")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn indices_of_class(&self, class: usize) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, &y)| y == class).map(|(i, _)| i).collect()
    }

    /// Fine-to-coarse lookup, when a hierarchy is present.
    pub fn coarse_map(&self) -> Option<Vec<usize>> {
        let coarse = self.coarse_labels.as_ref()?;
        let mut map = vec![usize::MAX; self.num_classes()];
        for (&f, &c) in self.labels.iter().zip(coarse) {
            map[f] = c;
        }
        Some(map)
    }

    pub fn subset(&self, idx: &[usize]) -> (Tensor, Vec<usize>) {
        (self.inputs.select_rows(idx), idx.iter().map(|&i| self.labels[i]).collect())
    }

    pub fn coarse_subset(&self, idx: &[usize]) -> Option<Vec<usize>> {
        self.coarse_labels.as_ref().map(|c| idx.iter().map(|&i| c[i]).collect())
    }
}
