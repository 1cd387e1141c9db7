#![allow(dead_code)]

use std::path::Path;

use megu_core::pipeline::{self, Prepared, RunConfig, Workspace};

pub fn cfg(seed: u64, overrides: &[&str]) -> RunConfig {
    let mut all: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    all.push(format!("seed={seed}"));
    RunConfig::load(None, &all).unwrap()
}

/// Small, fast variant of the default run for tests that only need the
/// plumbing, not the tuned outcome.
pub fn quick_cfg(seed: u64) -> RunConfig {
    cfg(
        seed,
        &["data.dim=48", "data.per_class=12", "data.test_per_class=12", "model.hidden=[16]", "model.epochs=60", "noise.steps=40", "eval.mia_members=50"],
    )
}

pub fn prepared(seed: u64) -> Prepared {
    pipeline::prepare(&cfg(seed, &[])).unwrap()
}

pub fn workspace(cfg: RunConfig, dir: &Path) -> Workspace {
    Workspace::open(cfg, dir).unwrap()
}
