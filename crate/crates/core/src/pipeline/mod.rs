//! Stage plumbing: each stage reads named artifacts from an output
//! directory, writes its own atomically and reports a one-line summary.

mod config;
mod stages;

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

pub use config::{
    apply_override, DataConfig, DataSource, GuidanceConfig, ModelConfig, OracleConfig, OracleKind, Plan, RunConfig,
    SweepConfig, ALIASES, DEFAULT_CONFIG,
};
pub use stages::{
    ablate, assign_labels, build_matrix, build_matrix_with, evaluate, export_preds, forge_noise, load_data, make_oracle, pipeline,
    prepare, pretrain, sweep, sweep_plan, unlearn, Prepared, EVAL_ORDER,
};

use crate::error::{Error, Result};

pub const TRAIN_DATA: &str = "train.megu-data";
pub const TEST_DATA: &str = "test.megu-data";
pub const BASELINE: &str = "baseline.ckpt";
pub const GOLD: &str = "gold.ckpt";
pub const MATRIX: &str = "transition.json";
pub const PROMPTS: &str = "prompts.tsv";
pub const PERTURB_MAP: &str = "perturb_map.json";
pub const NOISE: &str = "noise.megu-noiz";
pub const RUNS: &str = "runs";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const PREDICTIONS: &str = "predictions";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const ABLATION_CSV: &str = "ablation.csv";
pub const ABLATION_JSON: &str = "ablation.json";
const LOCK: &str = ".megu.lock";

/// Independent RNG streams drawn from the run seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeedStream {
    Data = 0,
    Init = 1,
    Shuffle = 2,
    Exemplars = 3,
    Noise = 4,
    Unlearn = 5,
}

pub fn stage_seed(seed: u64, stream: SeedStream) -> u64 {
    crate::rng::derive(seed, stream as u64)
}

/// Exclusive handle on an output directory. Dropping it releases the lock.
#[derive(Debug)]
pub struct Workspace {
    pub cfg: RunConfig,
    pub out: PathBuf,
    lock: PathBuf,
}

impl Workspace {
    /// Validates `cfg`, creates `out` and takes the lock file.
    pub fn open(cfg: RunConfig, out: impl Into<PathBuf>) -> Result<Self> {
        cfg.validate()?;
        let out = out.into();
        fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        let lock = out.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(_) => Ok(Self { cfg, out, lock }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(lock)),
            Err(e) => Err(Error::io(&lock, e)),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn run_dir(&self, run: &str) -> PathBuf {
        self.out.join(RUNS).join(run)
    }

    /// Path of an upstream artifact, or an error naming its producer.
    pub fn require(&self, name: &str, producer: &'static str) -> Result<PathBuf> {
        require(&self.path(name), producer)
    }
}

impl Drop for Workspace {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

pub(crate) fn require(path: &Path, producer: &'static str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path.to_path_buf())
    } else {
        Err(Error::MissingArtifact { path: path.to_path_buf(), producer })
    }
}
