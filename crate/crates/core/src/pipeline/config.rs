use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::data::{SyntheticSpec, TaskSpec};
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::guidance::{perturb_rank, DEFAULT_EXEMPLARS, DEFAULT_TAU};
use crate::io_util::read;
use crate::noise::NoiseConfig;
use crate::numeric::{Activation, TrainConfig};
use crate::oracle::HttpOracleConfig;
use crate::unlearn::UnlearnConfig;

/// The bundled desk-scale configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../../../../configs/default.toml");

/// Short keys accepted by [`apply_override`].
pub const ALIASES: &[(&str, &str)] = &[
    ("tau", "guidance.tau"),
    ("alpha", "unlearn.alpha"),
    ("method", "unlearn.method"),
    ("lambda", "noise.lambda_reg"),
    ("target", "task.target"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic,
    File,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plan {
    /// Classes on a ring; neighbours share two directions, next-neighbours one.
    Ring,
    /// Coarse groups of sibling classes.
    Grouped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    pub plan: Plan,
    pub classes: usize,
    /// Grouped plan only.
    pub groups: usize,
    pub sibling_shared: usize,
    pub dim: usize,
    pub per_class: usize,
    pub test_per_class: usize,
    pub unique_per_class: usize,
    pub noise_std: f64,
    pub amplitude: f64,
    /// File source only.
    pub train_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        let s = SyntheticSpec::default();
        Self {
            source: DataSource::Synthetic,
            plan: Plan::Ring,
            classes: s.classes,
            groups: 4,
            sibling_shared: 2,
            dim: s.dim,
            per_class: s.per_class,
            test_per_class: s.test_per_class,
            unique_per_class: s.unique_per_class,
            noise_std: s.noise_std,
            amplitude: s.amplitude,
            train_path: None,
            test_path: None,
        }
    }
}

impl DataConfig {
    pub fn synthetic_spec(&self) -> Result<SyntheticSpec> {
        let base = match self.plan {
            Plan::Ring => SyntheticSpec::ring(self.classes),
            Plan::Grouped => {
                if self.groups == 0 || self.classes % self.groups != 0 {
                    return Err(Error::Config(format!(
                        "{} classes cannot be split into {} coarse groups",
                        self.classes, self.groups
                    )));
                }
                SyntheticSpec::grouped(self.groups, self.classes / self.groups, self.sibling_shared)
            }
        };
        Ok(SyntheticSpec {
            dim: self.dim,
            per_class: self.per_class,
            test_per_class: self.test_per_class,
            unique_per_class: self.unique_per_class,
            noise_std: self.noise_std,
            amplitude: self.amplitude,
            ..base
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
        }
    }
}

impl ModelConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig { epochs: self.epochs, learning_rate: self.learning_rate, batch_size: self.batch_size, seed }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Prototype,
    File,
    Http,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub kind: OracleKind,
    pub temperature: f64,
    pub bias: f64,
    pub score_file: Option<PathBuf>,
    pub http: HttpOracleConfig,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            kind: OracleKind::Prototype,
            temperature: crate::oracle::PrototypeOracle::DEFAULT_TEMPERATURE,
            bias: crate::oracle::PrototypeOracle::DEFAULT_BIAS,
            score_file: None,
            http: HttpOracleConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceConfig {
    pub tau: f64,
    pub exemplars: usize,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self { tau: DEFAULT_TAU, exemplars: DEFAULT_EXEMPLARS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub taus: Vec<f64>,
    pub alphas: Vec<f64>,
    pub seeds: usize,
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { taus: vec![0.2, 0.3, 0.4], alphas: vec![0.5, 0.7, 0.9], seeds: 3, workers: 2 }
    }
}

/// Everything a stage needs besides its input artifacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Mandatory; there is no wall-clock fallback.
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub task: TaskSpec,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub guidance: GuidanceConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub unlearn: UnlearnConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Accept a noise cache forged against a different checkpoint.
    #[serde(default)]
    pub allow_noise_hash_mismatch: bool,
}

impl Default for TaskSpec {
    fn default() -> Self {
        TaskSpec::ClassWise { target: 0 }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_toml(DEFAULT_CONFIG).expect("bundled config parses")
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_value(parse_document(text)?)
    }

    pub fn from_value(doc: Value) -> Result<Self> {
        doc.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string().trim().to_string()))
    }

    /// Loads `path`, or the bundled default when `path` is `None`, then
    /// applies `key=value` overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => String::from_utf8(read(p)?)
                .map_err(|_| Error::Config(format!("{} is not UTF-8", p.display())))?,
            None => DEFAULT_CONFIG.to_string(),
        };
        let mut doc = parse_document(&text)?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        Self::from_value(doc)
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated config has a seed")
    }

    /// Number of classes, when known without loading data.
    pub fn declared_classes(&self) -> Option<usize> {
        match self.data.source {
            DataSource::Synthetic => Some(self.data.classes),
            DataSource::File => None,
        }
    }

    /// Every violation, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if self.seed.is_none() {
            bad.push("seed is required (set `seed = N` or pass --seed)".into());
        }
        match self.data.source {
            DataSource::Synthetic => match self.data.synthetic_spec() {
                Ok(spec) => {
                    if let Err(e) = spec.validate() {
                        bad.push(e.to_string());
                    }
                }
                Err(e) => bad.push(e.to_string()),
            },
            DataSource::File => {
                for (name, p) in [("data.train_path", &self.data.train_path), ("data.test_path", &self.data.test_path)] {
                    match p {
                        None => bad.push(format!("{name} is required for file data")),
                        Some(p) if !p.exists() => bad.push(format!("{name} {} does not exist", p.display())),
                        _ => {}
                    }
                }
            }
        }
        if self.model.epochs == 0 {
            bad.push("model.epochs must be >= 1".into());
        }
        if self.model.batch_size == 0 {
            bad.push("model.batch_size must be >= 1".into());
        }
        if !(self.model.learning_rate > 0.0 && self.model.learning_rate.is_finite()) {
            bad.push(format!("model.learning_rate must be > 0, got {}", self.model.learning_rate));
        }
        if self.model.hidden.contains(&0) {
            bad.push("model.hidden widths must be >= 1".into());
        }
        match self.oracle.kind {
            OracleKind::Prototype => {
                if !(self.oracle.temperature > 0.0 && self.oracle.temperature.is_finite()) {
                    bad.push(format!("oracle.temperature must be > 0, got {}", self.oracle.temperature));
                }
                if !self.oracle.bias.is_finite() {
                    bad.push("oracle.bias must be finite".into());
                }
            }
            OracleKind::File => match &self.oracle.score_file {
                None => bad.push("oracle.score_file is required for the file oracle".into()),
                Some(p) if !p.exists() => bad.push(format!("oracle.score_file {} does not exist", p.display())),
                _ => {}
            },
            OracleKind::Http => {
                if self.oracle.http.endpoint.is_empty() {
                    bad.push("oracle.http.endpoint is required for the http oracle".into());
                }
                if self.oracle.http.max_in_flight == 0 {
                    bad.push("oracle.http.max_in_flight must be >= 1".into());
                }
            }
        }
        if self.guidance.exemplars == 0 {
            bad.push("guidance.exemplars must be >= 1".into());
        }
        let k = self.declared_classes();
        bad.extend(tau_violation(k, self.guidance.tau));
        bad.extend(self.noise.violations());
        bad.extend(self.unlearn.violations().into_iter().filter(|v| !v.starts_with("tau")));
        if let (Some(k), Some(t)) = (k, self.task.target_class()) {
            if t >= k {
                bad.push(format!("task.target {t} out of range for {k} classes"));
            }
        }
        if let TaskSpec::SubClass { .. } = self.task {
            if self.data.source == DataSource::Synthetic && self.data.plan != Plan::Grouped {
                bad.push("sub_class tasks need data.plan = \"grouped\"".into());
            }
        }
        if self.eval.mia_members == 0 {
            bad.push("eval.mia_members must be >= 1".into());
        }
        if self.sweep.taus.is_empty() || self.sweep.alphas.is_empty() {
            bad.push("sweep grid must be nonempty".into());
        }
        if self.sweep.seeds == 0 {
            bad.push("sweep.seeds must be >= 1".into());
        }
        if self.sweep.workers == 0 {
            bad.push("sweep.workers must be >= 1".into());
        }
        for &t in &self.sweep.taus {
            bad.extend(tau_violation(k, t).into_iter().map(|v| format!("sweep: {v}")));
        }
        for &a in &self.sweep.alphas {
            if !(0.0..=1.0).contains(&a) {
                bad.push(format!("sweep: alpha must lie in [0, 1], got {a}"));
            }
        }
        bad
    }

    pub fn validate(&self) -> Result<()> {
        let bad = self.violations();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("\n")))
        }
    }

    /// Unlearning config with `tau` and `seed` taken from the run.
    pub fn unlearn_config(&self) -> UnlearnConfig {
        UnlearnConfig { tau: self.guidance.tau, seed: crate::rng::derive(self.seed(), 5), ..self.unlearn.clone() }
    }

    pub fn noise_config(&self) -> NoiseConfig {
        NoiseConfig { seed: crate::rng::derive(self.seed(), 4), ..self.noise.clone() }
    }
}

fn tau_violation(k: Option<usize>, tau: f64) -> Option<String> {
    if !(tau > 0.0 && tau < 1.0) {
        return Some(format!("tau must lie in (0, 1), got {tau}"));
    }
    let k = k?;
    perturb_rank(k, tau).err().map(|e| match e {
        Error::Config(m) => m,
        other => other.to_string(),
    })
}

fn parse_document(text: &str) -> Result<Value> {
    text.parse::<toml::Table>()
        .map(Value::Table)
        .map_err(|e| Error::Config(format!("config is not valid TOML: {}", e.to_string().trim())))
}

/// Sets a dotted `key=value` in a TOML document. The value is parsed as a
/// TOML literal when possible and kept as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not of the form key=value")))?;
    let key = key.trim();
    let key = ALIASES.iter().find(|(a, _)| *a == key).map_or(key, |(_, full)| full);
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key {key:?} is malformed")));
    }
    let mut cur = doc;
    for part in &parts[..parts.len() - 1] {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: {part} is not a table")))?;
        cur = table.entry(part.to_string()).or_insert_with(|| Value::Table(Default::default()));
    }
    cur.as_table_mut()
        .ok_or_else(|| Error::Config(format!("override {key:?}: parent is not a table")))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_is_valid() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.guidance.tau, 0.3);
        assert_eq!(cfg.unlearn.alpha, 0.7);
        assert_eq!(cfg.noise.learning_rate, 0.1);
        assert_eq!(cfg.guidance.exemplars, 10);
    }

    #[test]
    fn alias_overrides() {
        let cfg = RunConfig::load(None, &["tau=0.95".into(), "alpha=0.5".into(), "method=ft".into()]).unwrap();
        assert_eq!(cfg.guidance.tau, 0.95);
        assert_eq!(cfg.unlearn.alpha, 0.5);
        assert_eq!(cfg.unlearn.method, crate::unlearn::Method::Ft);
        cfg.validate().unwrap();
    }

    #[test]
    fn tau_below_first_rank_shows_rank() {
        let cfg = RunConfig::load(None, &["tau=0.1".into()]).unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("= 0"), "{err}");
    }

    #[test]
    fn every_violation_listed() {
        let cfg = RunConfig::load(None, &["model.epochs=0".into(), "noise.steps=0".into(), "alpha=2.0".into()]).unwrap();
        let bad = cfg.violations();
        assert_eq!(bad.len(), 3, "{bad:?}");
    }

    #[test]
    fn missing_seed_rejected() {
        let mut doc = parse_document(DEFAULT_CONFIG).unwrap();
        doc.as_table_mut().unwrap().remove("seed");
        let cfg = RunConfig::from_value(doc).unwrap();
        assert!(cfg.violations().iter().any(|v| v.contains("seed")));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::load(None, &["guidance.tua=0.3".into()]).is_err());
    }

    #[test]
    fn string_fallback_and_nested_tables() {
        let mut doc = parse_document("").unwrap();
        apply_override(&mut doc, "a.b.c=hello world").unwrap();
        apply_override(&mut doc, "a.n=3").unwrap();
        assert_eq!(doc["a"]["b"]["c"].as_str(), Some("hello world"));
        assert_eq!(doc["a"]["n"].as_integer(), Some(3));
        assert!(apply_override(&mut doc, "novalue").is_err());
    }
}
