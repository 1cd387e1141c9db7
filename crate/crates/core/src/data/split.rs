use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    ClassWise,
    SubClass,
    Random,
}

/// Which training samples to forget.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskSpec {
    /// Every sample of one class.
    ClassWise { target: usize },
    /// Every sample of one fine class; retained performance is judged on
    /// coarse labels.
    SubClass { target: usize },
    /// A seeded uniform sample of `count` training indices.
    Random { count: usize, seed: u64 },
}

impl TaskSpec {
    pub fn kind(&self) -> TaskKind {
        match self {
            TaskSpec::ClassWise { .. } => TaskKind::ClassWise,
            TaskSpec::SubClass { .. } => TaskKind::SubClass,
            TaskSpec::Random { .. } => TaskKind::Random,
        }
    }

    /// Forgotten class, for class-level tasks.
    pub fn target_class(&self) -> Option<usize> {
        match *self {
            TaskSpec::ClassWise { target } | TaskSpec::SubClass { target } => Some(target),
            TaskSpec::Random { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitResult {
    pub forget: Vec<usize>,
    pub retain: Vec<usize>,
}

pub fn split_task(ds: &Dataset, task: &TaskSpec) -> Result<SplitResult> {
    let n = ds.len();
    let forget = match *task {
        TaskSpec::ClassWise { target } | TaskSpec::SubClass { target } => {
            if target >= ds.num_classes() {
                return Err(Error::Task(format!("target class {target} out of range")));
            }
            if matches!(task, TaskSpec::SubClass { .. }) && ds.coarse_labels.is_none() {
                return Err(Error::Task("sub-class task needs coarse labels".into()));
            }
            ds.indices_of_class(target)
        }
        TaskSpec::Random { count, seed } => {
            if count > n {
                return Err(Error::Task(format!("cannot forget {count} of {n} samples")));
            }
            let mut idx = index::sample(&mut rng::seeded(seed), n, count).into_vec();
            idx.sort_unstable();
            idx
        }
    };
    if forget.is_empty() {
        return Err(Error::Task(format!("{task:?} selects no samples")));
    }
    let mut is_forget = vec![false; n];
    for &i in &forget {
        is_forget[i] = true;
    }
    let retain = (0..n).filter(|&i| !is_forget[i]).collect();
    Ok(SplitResult { forget, retain })
}

/// Seeded subsample of the retain set, without replacement.
pub fn sample_finetune_retain(retain: &[usize], n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > retain.len() {
        return Err(Error::Task(format!("requested {n} retain samples, only {} available", retain.len())));
    }
    let mut out = retain.to_vec();
    out.shuffle(&mut rng::seeded(seed));
    out.truncate(n);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SyntheticSpec};

    fn balanced() -> Dataset {
        let mut spec = SyntheticSpec::ring(10);
        spec.dim = 80;
        spec.per_class = 100;
        gen_synthetic(&spec, 0).unwrap()
    }

    #[test]
    fn class_wise_counts() {
        let s = split_task(&balanced(), &TaskSpec::ClassWise { target: 2 }).unwrap();
        assert_eq!((s.forget.len(), s.retain.len()), (100, 900));
    }

    #[test]
    fn random_is_deterministic() {
        let ds = balanced();
        let t = TaskSpec::Random { count: 100, seed: 77 };
        let a = split_task(&ds, &t).unwrap();
        assert_eq!(a, split_task(&ds, &t).unwrap());
        assert_eq!(a.forget.len(), 100);
    }

    #[test]
    fn sub_class_stays_inside_coarse_group() {
        let ds = gen_synthetic(&SyntheticSpec::grouped(4, 2, 3), 1).unwrap();
        let coarse = ds.coarse_labels.clone().unwrap();
        for target in 0..8 {
            let s = split_task(&ds, &TaskSpec::SubClass { target }).unwrap();
            let group = coarse[s.forget[0]];
            assert!(s.forget.iter().all(|&i| coarse[i] == group && ds.labels[i] == target));
            assert!(s.retain.iter().all(|&i| ds.labels[i] != target));
        }
    }

    #[test]
    fn sub_class_without_hierarchy_rejected() {
        assert!(split_task(&balanced(), &TaskSpec::SubClass { target: 0 }).is_err());
    }

    #[test]
    fn empty_class_rejected() {
        let mut ds = balanced();
        ds.class_names.push("ghost".into());
        assert!(matches!(split_task(&ds, &TaskSpec::ClassWise { target: 10 }), Err(Error::Task(_))));
    }

    #[test]
    fn finetune_sampling() {
        let retain: Vec<usize> = (10..60).collect();
        let all = sample_finetune_retain(&retain, 50, 3).unwrap();
        let mut sorted = all.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, retain);
        assert!(sample_finetune_retain(&retain, 0, 3).unwrap().is_empty());
        assert_eq!(sample_finetune_retain(&retain, 20, 9).unwrap(), sample_finetune_retain(&retain, 20, 9).unwrap());
        assert!(sample_finetune_retain(&retain, 51, 3).is_err());
    }
}
