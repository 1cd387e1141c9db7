mod common;

use megu_core::eval::{accuracy, LabelSpace};
use megu_core::guidance::{assign_all, build_transition_matrix, PerturbEntry, PerturbMap};
use megu_core::noise::{cache_load, cache_store, forge_pairs, NoiseConfig};
use megu_core::pipeline::{self, Prepared, RunConfig};
use megu_core::unlearn::{ft_baseline, megu_unlearn, unsir_unlearn, Method, UnlearnConfig};
use megu_core::Error;

struct Setup {
    cfg: RunConfig,
    p: Prepared,
    map: PerturbMap,
}

fn setup(seed: u64) -> Setup {
    let cfg = common::quick_cfg(seed);
    let p = pipeline::prepare(&cfg).unwrap();
    let oracle = pipeline::make_oracle(&cfg, &p.train).unwrap();
    let t = build_transition_matrix(&oracle, &p.train, cfg.guidance.exemplars, seed).unwrap();
    let map = assign_all(&p.baseline, &t, &p.train, &p.split.forget, cfg.guidance.tau).unwrap();
    Setup { cfg, p, map }
}

fn forget_acc(s: &Setup, model: &megu_core::Classifier) -> f64 {
    let (x, y) = s.p.train.subset(&s.p.split.forget);
    accuracy(model, &x, &y, LabelSpace::Fine).unwrap()
}

fn retain_acc(s: &Setup, model: &megu_core::Classifier) -> f64 {
    let (x, y) = s.p.train.subset(&s.p.split.retain);
    accuracy(model, &x, &y, LabelSpace::Fine).unwrap()
}

fn single_key_map(indices: &[usize], label: usize, perturbing: usize, k: usize) -> PerturbMap {
    let mut histogram = vec![0; k];
    histogram[perturbing] = indices.len();
    PerturbMap {
        tau: 0.3,
        entries: indices.iter().map(|&index| PerturbEntry { index, label, perturbing, relevance: vec![0.0; k] }).collect(),
        histogram,
    }
}

fn small_noise() -> NoiseConfig {
    NoiseConfig { steps: 5, batch: 4, seed: 3, ..NoiseConfig::default() }
}

#[test]
fn hundred_samples_sharing_a_key_forge_one_pair() {
    let s = setup(0);
    let map = single_key_map(&(0..100).collect::<Vec<_>>(), 1, 2, 10);
    let set = forge_pairs(&s.p.baseline, &map, &small_noise()).unwrap();
    assert_eq!(set.pairs.len(), 1);
    assert_eq!((set.pairs[0].label, set.pairs[0].perturbing), (1, 2));
}

#[test]
fn distinct_keys_forge_distinct_pairs() {
    let s = setup(0);
    let mut map = single_key_map(&[0, 1], 0, 1, 10);
    for (index, perturbing) in [(2, 2), (3, 3)] {
        map.entries.push(PerturbEntry { index, label: 0, perturbing, relevance: vec![0.0; 10] });
    }
    let set = forge_pairs(&s.p.baseline, &map, &small_noise()).unwrap();
    assert_eq!(set.pairs.len(), 3);
    assert!(set.get(0, 3).is_some() && set.get(0, 4).is_none());
}

#[test]
fn cache_rejects_foreign_model_unless_overridden() {
    let s = setup(0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("n.megu-noiz");
    let set = forge_pairs(&s.p.baseline, &single_key_map(&[0], 0, 1, 10), &small_noise()).unwrap();
    cache_store(&path, &set).unwrap();
    assert_eq!(cache_load(&path, &s.p.baseline.checksum(), false).unwrap().set, set);
    let other = s.p.gold.checksum();
    assert!(matches!(cache_load(&path, &other, false), Err(Error::Cache(_))));
    let loaded = cache_load(&path, &other, true).unwrap();
    assert!(loaded.warning.unwrap().contains("forged against"));
}

#[test]
fn forging_leaves_the_model_untouched() {
    let s = setup(1);
    let before = s.p.baseline.checksum();
    forge_pairs(&s.p.baseline, &s.map, &small_noise()).unwrap();
    assert_eq!(s.p.baseline.checksum(), before);
}

#[test]
fn assignment_spreads_over_several_labels() {
    let s = setup(2);
    assert!(s.map.distinct_labels() > 1, "{:?}", s.map.histogram);
    assert!(s.map.entries.iter().all(|e| e.perturbing != e.label));
}

#[test]
fn megu_requires_noise_unless_disabled() {
    let s = setup(0);
    let ucfg = s.cfg.unlearn_config();
    let err = megu_unlearn(&s.p.baseline, &s.p.train, &s.p.split, &s.map, None, &ucfg).unwrap_err();
    assert!(err.to_string().contains("forge-noise"), "{err}");
    let wofn = UnlearnConfig { no_feature_noise: true, ..ucfg };
    let run = megu_unlearn(&s.p.baseline, &s.p.train, &s.p.split, &s.map, None, &wofn).unwrap();
    assert_eq!(run.initial_hash, s.p.baseline.checksum());
}

#[test]
fn alpha_changes_the_unlearned_model() {
    let s = setup(0);
    let noise = forge_pairs(&s.p.baseline, &s.map, &s.cfg.noise_config()).unwrap();
    let run = |alpha| {
        let ucfg = UnlearnConfig { alpha, ..s.cfg.unlearn_config() };
        megu_unlearn(&s.p.baseline, &s.p.train, &s.p.split, &s.map, Some(&noise), &ucfg).unwrap().model.checksum()
    };
    assert_ne!(run(0.1), run(0.9));
}

#[test]
fn megu_lowers_forget_accuracy() {
    let s = setup(0);
    let noise = forge_pairs(&s.p.baseline, &s.map, &s.cfg.noise_config()).unwrap();
    let run = megu_unlearn(&s.p.baseline, &s.p.train, &s.p.split, &s.map, Some(&noise), &s.cfg.unlearn_config()).unwrap();
    assert!(forget_acc(&s, &run.model) < forget_acc(&s, &s.p.baseline));
}

#[test]
fn unsir_impair_raises_forget_loss() {
    let s = setup(0);
    let ucfg = UnlearnConfig { method: Method::Unsir, ..s.cfg.unlearn_config() };
    let run = unsir_unlearn(&s.p.baseline, &s.p.train, &s.p.split, &s.cfg.noise_config(), &ucfg).unwrap();
    let loss = |phase: &str| run.forget_loss.iter().find(|(p, _)| p == phase).unwrap().1;
    assert!(loss("impair") > loss("initial"), "{:?}", run.forget_loss);
}

#[test]
fn ft_does_not_raise_forget_accuracy() {
    let s = setup(0);
    let ucfg = UnlearnConfig { method: Method::Ft, epochs: 10, ..s.cfg.unlearn_config() };
    let run = ft_baseline(&s.p.baseline, &s.p.train, &s.p.split, &ucfg).unwrap();
    assert!(forget_acc(&s, &run.model) <= forget_acc(&s, &s.p.baseline));
}

#[test]
fn gold_forgets_and_keeps_retain_accuracy() {
    let s = setup(0);
    assert!(forget_acc(&s, &s.p.gold) <= 1.0, "gold forget accuracy {}", forget_acc(&s, &s.p.gold));
    assert!((retain_acc(&s, &s.p.gold) - retain_acc(&s, &s.p.baseline)).abs() <= 3.0);
}
