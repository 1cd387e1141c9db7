//! Sensitivity grids over `(tau, alpha)` and paired ablation runs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SplitResult, TaskSpec};
use crate::error::{Error, Result};
use crate::eval::{full_report, EvalConfig, EvalReport, ModelEntry, ReportSet};
use crate::guidance::{assign_all, perturb_rank, TransitionMatrix};
use crate::noise::{forge_pairs, hex, NoiseConfig};
use crate::numeric::Classifier;
use crate::par::Exec;
use crate::rng;
use crate::unlearn::{effective_perturb_map, megu_unlearn, UnlearnConfig};

/// Shared, read-only inputs of every cell.
pub struct SweepContext<'a> {
    pub model: &'a Classifier,
    pub gold: Option<&'a Classifier>,
    pub matrix: &'a TransitionMatrix,
    pub train: &'a Dataset,
    pub test: &'a Dataset,
    pub split: &'a SplitResult,
    pub task: &'a TaskSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPlan {
    pub taus: Vec<f64>,
    pub alphas: Vec<f64>,
    pub seeds: usize,
    /// Seed of the first run in each cell; later runs use `base_seed + i`.
    pub base_seed: u64,
    pub workers: usize,
    pub unlearn: UnlearnConfig,
    pub noise: NoiseConfig,
    pub eval: EvalConfig,
}

impl SweepPlan {
    pub fn validate(&self, k: usize) -> Result<()> {
        let mut bad = Vec::new();
        if self.taus.is_empty() || self.alphas.is_empty() {
            bad.push("sweep grid is empty".to_string());
        }
        if self.seeds == 0 {
            bad.push("sweep needs at least one seed per cell".to_string());
        }
        for &t in &self.taus {
            match perturb_rank(k, t) {
                Err(Error::Config(m)) => bad.push(m),
                Err(e) => bad.push(e.to_string()),
                Ok(_) => {}
            }
        }
        for &a in &self.alphas {
            if !(0.0..=1.0).contains(&a) {
                bad.push(format!("alpha must lie in [0, 1], got {a}"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    /// Unlearning and noise configs of run `seed` in cell `(tau, alpha)`;
    /// seeds are derived exactly as a single pipeline run derives them.
    pub fn run_configs(&self, tau: f64, alpha: f64, seed: u64) -> (UnlearnConfig, NoiseConfig) {
        (
            UnlearnConfig { tau, alpha, seed: rng::derive(seed, 5), ..self.unlearn.clone() },
            NoiseConfig { seed: rng::derive(seed, 4), ..self.noise.clone() },
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Self {
        Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: f64,
    pub alpha: f64,
    pub seed_count: usize,
    pub a_r: Option<Spread>,
    pub a_f: Option<Spread>,
    pub mia: Option<Spread>,
    pub reports: Vec<EvalReport>,
    /// `ok`, or the first error of the cell.
    pub status: String,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

/// One seeded MeGU run scored on its own: assign, forge, unlearn, evaluate.
pub fn run_cell_seed(ctx: &SweepContext<'_>, plan: &SweepPlan, tau: f64, alpha: f64, seed: u64) -> Result<EvalReport> {
    let (ucfg, ncfg) = plan.run_configs(tau, alpha, seed);
    let map = assign_all(ctx.model, ctx.matrix, ctx.train, &ctx.split.forget, tau)?;
    let noise = if ucfg.no_feature_noise {
        None
    } else {
        let effective = effective_perturb_map(&map, ctx.train, ctx.split, &ucfg)?;
        Some(forge_pairs(ctx.model, &effective, &ncfg)?)
    };
    let run = megu_unlearn(ctx.model, ctx.train, ctx.split, &map, noise.as_ref(), &ucfg)?;
    let set = full_report(&[ModelEntry::new("megu", &run.model)], ctx.train, ctx.test, ctx.split, ctx.task, &plan.eval, seed)?;
    Ok(set.reports.into_iter().next().expect("one model in, one report out"))
}

/// Runs every `(tau, alpha, seed)` on a bounded pool. A failing cell is
/// recorded in its row and never affects other cells.
pub fn run_sweep(plan: &SweepPlan, ctx: &SweepContext<'_>) -> Result<Vec<SweepRow>> {
    run_sweep_with(plan, ctx, run_cell_seed)
}

/// [`run_sweep`] with a custom per-seed runner.
pub fn run_sweep_with<F>(plan: &SweepPlan, ctx: &SweepContext<'_>, cell: F) -> Result<Vec<SweepRow>>
where
    F: Fn(&SweepContext<'_>, &SweepPlan, f64, f64, u64) -> Result<EvalReport> + Sync,
{
    plan.validate(ctx.train.num_classes())?;
    let cells: Vec<(f64, f64)> = plan.taus.iter().flat_map(|&t| plan.alphas.iter().map(move |&a| (t, a))).collect();
    let jobs: Vec<(usize, u64)> =
        (0..cells.len()).flat_map(|c| (0..plan.seeds as u64).map(move |s| (c, plan.base_seed + s))).collect();
    let results = Exec::default().map_bounded(&jobs, plan.workers, |&(c, seed)| {
        let (tau, alpha) = cells[c];
        cell(ctx, plan, tau, alpha, seed)
    });
    let mut rows = Vec::with_capacity(cells.len());
    for (c, &(tau, alpha)) in cells.iter().enumerate() {
        let mine = &results[c * plan.seeds..(c + 1) * plan.seeds];
        let status = match mine.iter().find_map(|r| r.as_ref().err()) {
            Some(e) => e.to_string().replace(['\n', ','], " "),
            None => "ok".to_string(),
        };
        let reports: Vec<EvalReport> = mine.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
        let spread = |f: fn(&EvalReport) -> f64| {
            (status == "ok").then(|| Spread::of(&reports.iter().map(f).collect::<Vec<_>>()))
        };
        rows.push(SweepRow {
            tau,
            alpha,
            seed_count: plan.seeds,
            a_r: spread(|r| r.a_r),
            a_f: spread(|r| r.a_f),
            mia: spread(|r| r.mia),
            reports,
            status,
        });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "tau,alpha,seed_count,a_r_mean,a_r_min,a_r_max,a_f_mean,a_f_min,a_f_max,mia_mean,mia_min,mia_max,status\n",
    );
    for r in rows {
        let _ = write!(out, "{:?},{:?},{}", r.tau, r.alpha, r.seed_count);
        for s in [r.a_r, r.a_f, r.mia] {
            match s {
                Some(s) => {
                    let _ = write!(out, ",{:?},{:?},{:?}", s.mean, s.min, s.max);
                }
                None => out.push_str(",,,"),
            }
        }
        let _ = writeln!(out, ",{}", r.status);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub report: ReportSet,
    /// Checkpoint hash each unlearning variant started from.
    pub initial_hashes: Vec<(String, String)>,
}

impl AblationTable {
    pub fn csv(&self) -> String {
        let mut out = String::from("method,a_r,a_f,mia,initial_hash\n");
        for r in &self.report.reports {
            let hash = self.initial_hashes.iter().find(|(m, _)| *m == r.method).map_or("", |(_, h)| h.as_str());
            let _ = writeln!(out, "{},{:?},{:?},{:?},{hash}", r.method, r.a_r, r.a_f, r.mia);
        }
        out
    }
}

/// Full MeGU, random perturbing labels (RND) and no feature noise
/// (w.o.F.N), all from the same checkpoint, plus baseline and gold rows.
pub fn run_ablations(
    ctx: &SweepContext<'_>,
    base: &UnlearnConfig,
    noise: &NoiseConfig,
    eval: &EvalConfig,
    seed: u64,
) -> Result<AblationTable> {
    let map = assign_all(ctx.model, ctx.matrix, ctx.train, &ctx.split.forget, base.tau)?;
    let variants = [
        ("full", UnlearnConfig { random_labels: false, no_feature_noise: false, ..base.clone() }),
        ("rnd", UnlearnConfig { random_labels: true, no_feature_noise: false, ..base.clone() }),
        ("wofn", UnlearnConfig { random_labels: false, no_feature_noise: true, ..base.clone() }),
    ];
    let runs = variants
        .iter()
        .map(|(name, cfg)| {
            let pairs = if cfg.no_feature_noise {
                None
            } else {
                Some(forge_pairs(ctx.model, &effective_perturb_map(&map, ctx.train, ctx.split, cfg)?, noise)?)
            };
            Ok((*name, megu_unlearn(ctx.model, ctx.train, ctx.split, &map, pairs.as_ref(), cfg)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut models = vec![ModelEntry::new("baseline", ctx.model)];
    if let Some(g) = ctx.gold {
        models.push(ModelEntry::new("gold", g));
    }
    models.extend(runs.iter().map(|(name, run)| ModelEntry::new(*name, &run.model)));
    let report = full_report(&models, ctx.train, ctx.test, ctx.split, ctx.task, eval, seed)?;
    Ok(AblationTable {
        report,
        initial_hashes: runs.iter().map(|(n, r)| (n.to_string(), hex(&r.initial_hash))).collect(),
    })
}
