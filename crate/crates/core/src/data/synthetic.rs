//! Entangled-concept generator.
//!
//! Every class owns a set of orthonormal basis directions (its feature
//! patterns). Some directions are private to one class; others are shared
//! by the classes of a [`SharedGroup`]. A class prototype is the scaled sum
//! of its directions and samples are prototype plus isotropic Gaussian
//! noise. The overlap between classes `a` and `b` is
//! `|P_a ∩ P_b| / sqrt(|P_a| |P_b|)`, i.e. the cosine between prototypes.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numeric::Tensor;
use crate::rng;

/// `count` basis directions shared by every class in `classes`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharedGroup {
    pub classes: Vec<usize>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub test_per_class: usize,
    pub unique_per_class: usize,
    pub shared: Vec<SharedGroup>,
    pub noise_std: f64,
    pub amplitude: f64,
    /// `G` coarse groups of `classes / G` consecutive fine classes.
    pub coarse_groups: Option<usize>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self::ring(8)
    }
}

impl SyntheticSpec {
    /// `k` classes on a ring: neighbours share two directions, classes two
    /// steps apart share one.
    pub fn ring(k: usize) -> Self {
        let mut shared = Vec::new();
        for c in 0..k {
            shared.push(SharedGroup { classes: vec![c, (c + 1) % k], count: 2 });
        }
        for c in 0..k {
            shared.push(SharedGroup { classes: vec![c, (c + 2) % k], count: 1 });
        }
        Self {
            classes: k,
            dim: 256,
            per_class: 20,
            test_per_class: 60,
            unique_per_class: 3,
            shared,
            noise_std: 0.4,
            amplitude: 1.5,
            coarse_groups: None,
        }
    }

    /// `groups` coarse groups of `fine_per_group` classes; siblings share
    /// `sibling_shared` directions and neighbouring groups are linked by one
    /// shared direction between their first members.
    pub fn grouped(groups: usize, fine_per_group: usize, sibling_shared: usize) -> Self {
        let k = groups * fine_per_group;
        let mut shared = Vec::new();
        for g in 0..groups {
            let members: Vec<usize> = (g * fine_per_group..(g + 1) * fine_per_group).collect();
            shared.push(SharedGroup { classes: members, count: sibling_shared });
        }
        for g in 0..groups {
            let a = g * fine_per_group;
            let b = ((g + 1) % groups) * fine_per_group + fine_per_group - 1;
            if a != b {
                shared.push(SharedGroup { classes: vec![a, b], count: 1 });
            }
        }
        Self { classes: k, coarse_groups: Some(groups), ..Self::ring(k) }.with_shared(shared)
    }

    fn with_shared(mut self, shared: Vec<SharedGroup>) -> Self {
        self.shared = shared;
        self
    }

    pub fn shared_patterns(&self) -> usize {
        self.shared.iter().map(|g| g.count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.classes;
        if k < 2 {
            return Err(Error::Config("need at least 2 classes".into()));
        }
        if self.per_class == 0 {
            return Err(Error::Config("per_class must be >= 1".into()));
        }
        let needed = k * self.unique_per_class + self.shared_patterns();
        if needed > self.dim {
            return Err(Error::Config(format!(
                "infeasible plan: {needed} basis directions do not fit in dimension {}",
                self.dim
            )));
        }
        for g in &self.shared {
            let mut c = g.classes.clone();
            c.sort_unstable();
            c.dedup();
            if c.len() != g.classes.len() || c.len() < 2 || c.iter().any(|&x| x >= k) {
                return Err(Error::Config(format!("invalid shared group {:?}", g.classes)));
            }
        }
        if self.patterns().iter().any(Vec::is_empty) {
            return Err(Error::Config("every class needs at least one pattern".into()));
        }
        if !(self.noise_std >= 0.0) || !(self.amplitude > 0.0) {
            return Err(Error::Config("noise_std must be >= 0 and amplitude > 0".into()));
        }
        if let Some(g) = self.coarse_groups {
            if g == 0 || k % g != 0 {
                return Err(Error::Config(format!("{k} classes cannot form {g} equal coarse groups")));
            }
        }
        Ok(())
    }

    /// Basis indices owned by each class.
    pub fn patterns(&self) -> Vec<Vec<usize>> {
        let mut pats = vec![Vec::new(); self.classes];
        let mut next = 0;
        for p in pats.iter_mut() {
            p.extend(next..next + self.unique_per_class);
            next += self.unique_per_class;
        }
        for g in &self.shared {
            for &c in &g.classes {
                if let Some(p) = pats.get_mut(c) {
                    p.extend(next..next + g.count);
                }
            }
            next += g.count;
        }
        pats
    }

    pub fn overlap_truth(&self) -> Vec<Vec<f64>> {
        let pats = self.patterns();
        let k = self.classes;
        let mut m = vec![vec![0.0; k]; k];
        for a in 0..k {
            for b in 0..k {
                if a == b {
                    m[a][b] = 1.0;
                    continue;
                }
                let common = pats[a].iter().filter(|x| pats[b].contains(x)).count() as f64;
                m[a][b] = common / ((pats[a].len() * pats[b].len()) as f64).sqrt();
            }
        }
        m
    }

    /// Noise-free class prototypes, `[K, d]`.
    pub fn prototypes(&self) -> Tensor {
        let mut t = Tensor::zeros(vec![self.classes, self.dim]);
        for (c, pat) in self.patterns().iter().enumerate() {
            let row = t.row_mut(c);
            for &j in pat {
                row[j] = self.amplitude;
            }
        }
        t
    }

    fn coarse_of(&self, class: usize) -> Option<usize> {
        self.coarse_groups.map(|g| class / (self.classes / g))
    }
}

/// Draws `per_class` samples of every class. Prototypes depend only on the
/// spec; `seed` drives the sample noise.
pub fn gen_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    generate(spec, spec.per_class, seed)
}

/// Train and test sets drawn around the same prototypes.
pub fn gen_train_test(spec: &SyntheticSpec, seed: u64) -> Result<(Dataset, Dataset)> {
    let train = generate(spec, spec.per_class, rng::derive(seed, 1))?;
    let test = generate(spec, spec.test_per_class.max(1), rng::derive(seed, 2))?;
    Ok((train, test))
}

fn generate(spec: &SyntheticSpec, per_class: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let k = spec.classes;
    let d = spec.dim;
    let protos = spec.prototypes();
    let mut rng = rng::seeded(seed);
    let normal = Normal::new(0.0, spec.noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let n = k * per_class;
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for c in 0..k {
        for _ in 0..per_class {
            data.extend(protos.row(c).iter().map(|&p| p + normal.sample(&mut rng)));
            labels.push(c);
        }
    }
    let coarse = spec.coarse_groups.map(|_| labels.iter().map(|&c| spec.coarse_of(c).unwrap()).collect());
    Dataset::new(
        Tensor::new(vec![n, d], data)?,
        labels,
        coarse,
        (0..k).map(|c| format!("class_{c}")).collect(),
        Some(spec.overlap_truth()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(k: usize, d: usize, unique: usize, shared: Vec<SharedGroup>) -> SyntheticSpec {
        SyntheticSpec {
            classes: k,
            dim: d,
            per_class: 5,
            test_per_class: 5,
            unique_per_class: unique,
            shared,
            noise_std: 0.3,
            amplitude: 1.0,
            coarse_groups: None,
        }
    }

    #[test]
    fn no_sharing_gives_identity() {
        let ds = gen_synthetic(&plain(5, 20, 3, vec![]), 1).unwrap();
        let m = ds.overlap_truth.unwrap();
        for a in 0..5 {
            for b in 0..5 {
                assert_eq!(m[a][b], if a == b { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn full_sharing_gives_unit_overlap() {
        let spec = plain(2, 10, 0, vec![SharedGroup { classes: vec![0, 1], count: 4 }]);
        let m = gen_synthetic(&spec, 1).unwrap().overlap_truth.unwrap();
        assert_eq!(m[0][1], 1.0);
        assert_eq!(m[1][0], 1.0);
    }

    #[test]
    fn half_shared_pair() {
        // Classes 0 and 1 each own 3 private directions and share 3 more,
        // so each has 6 patterns of which 3 are common.
        let spec = plain(8, 32, 3, vec![SharedGroup { classes: vec![0, 1], count: 3 }]);
        let pats = spec.patterns();
        let common = pats[0].iter().filter(|x| pats[1].contains(x)).count();
        assert_eq!((common, pats[0].len(), pats[1].len()), (3, 6, 6));
        let m = gen_synthetic(&spec, 3).unwrap().overlap_truth.unwrap();
        assert_eq!(m[0][1], 0.5);
    }

    #[test]
    fn infeasible_plan_rejected() {
        let spec = plain(8, 20, 3, vec![]);
        assert!(matches!(gen_synthetic(&spec, 0), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SyntheticSpec::default();
        assert_eq!(gen_synthetic(&spec, 9).unwrap(), gen_synthetic(&spec, 9).unwrap());
        assert_ne!(gen_synthetic(&spec, 9).unwrap(), gen_synthetic(&spec, 10).unwrap());
    }

    #[test]
    fn grouped_spec_has_consistent_coarse_labels() {
        let spec = SyntheticSpec::grouped(4, 2, 3);
        let ds = gen_synthetic(&spec, 2).unwrap();
        let map = ds.coarse_map().unwrap();
        assert_eq!(map, vec![0, 0, 1, 1, 2, 2, 3, 3]);
        let m = ds.overlap_truth.unwrap();
        assert!(m[0][1] > m[0][2]);
    }

    #[test]
    fn prototype_cosine_equals_overlap() {
        let spec = SyntheticSpec::default();
        let p = spec.prototypes();
        let m = spec.overlap_truth();
        let cos = |a: &[f64], b: &[f64]| {
            let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            d / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
        };
        for a in 0..8 {
            for b in 0..8 {
                assert!((cos(p.row(a), p.row(b)) - m[a][b]).abs() < 1e-12);
            }
        }
    }
}
