use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use super::{
    stage_seed, RunConfig, SeedStream, Workspace, ABLATION_CSV, ABLATION_JSON, BASELINE, GOLD, MATRIX,
    NOISE, PERTURB_MAP, PREDICTIONS, PROMPTS, REPORT_JSON, REPORT_TXT, SWEEP_CSV, TEST_DATA, TRAIN_DATA,
};
use crate::data::{gen_train_test, load_dataset, save_dataset, split_task, Dataset, SplitResult};
use crate::error::{Error, Result};
use crate::eval::{export_predictions, full_report, ModelEntry, ReportSet};
use crate::guidance::{assign_all, build_transition_matrix, PerturbMap, TransitionMatrix};
use crate::io_util::{atomic_write, read};
use crate::noise::{cache_load, cache_store, forge_pairs, NoiseSet};
use crate::numeric::{load_checkpoint, save_checkpoint, train, Classifier};
use crate::oracle::{HttpOracle, OracleHandle, PrototypeOracle, ScoreTable};
use crate::pipeline::config::{DataSource, OracleKind};
use crate::sweep::{run_ablations, run_sweep, sweep_csv, SweepContext, SweepPlan};
use crate::unlearn::{
    effective_perturb_map, ft_baseline, megu_unlearn, retrain_gold, run_name, unsir_unlearn, Method, UnlearnRun,
};

/// Runs `evaluate` and `export-preds` pick up, in report order.
pub const EVAL_ORDER: &[&str] = &["megu", "megu-rnd", "megu-wofn", "megu-rnd-wofn", "unsir", "ft", "retrain"];

pub fn load_data(cfg: &RunConfig) -> Result<(Dataset, Dataset)> {
    match cfg.data.source {
        DataSource::Synthetic => gen_train_test(&cfg.data.synthetic_spec()?, stage_seed(cfg.seed(), SeedStream::Data)),
        DataSource::File => {
            let path = |p: &Option<std::path::PathBuf>, name: &str| {
                p.clone().ok_or_else(|| Error::Config(format!("data.{name} is required for file data")))
            };
            let train = load_dataset(&path(&cfg.data.train_path, "train_path")?)?;
            let test = load_dataset(&path(&cfg.data.test_path, "test_path")?)?;
            if train.dim() != test.dim() || train.num_classes() != test.num_classes() {
                return Err(Error::Dimension(format!(
                    "train is {}-d with {} classes, test is {}-d with {} classes",
                    train.dim(),
                    train.num_classes(),
                    test.dim(),
                    test.num_classes()
                )));
            }
            Ok((train, test))
        }
    }
}

/// Data, split and the two reference models, built in memory.
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub split: SplitResult,
    pub baseline: Classifier,
    pub gold: Classifier,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    let (train_ds, test) = load_data(cfg)?;
    let split = split_task(&train_ds, &cfg.task)?;
    let seed = cfg.seed();
    let mut baseline = Classifier::mlp(
        train_ds.dim(),
        &cfg.model.hidden,
        train_ds.num_classes(),
        cfg.model.activation,
        stage_seed(seed, SeedStream::Init),
    )?;
    let tc = cfg.model.train_config(stage_seed(seed, SeedStream::Shuffle));
    train(&mut baseline, &train_ds.inputs, &train_ds.labels, &tc)?;
    let gold = retrain_gold(&baseline, &train_ds, &split, &tc)?.model;
    Ok(Prepared { train: train_ds, test, split, baseline, gold })
}

pub fn make_oracle(cfg: &RunConfig, train: &Dataset) -> Result<OracleHandle> {
    Ok(match cfg.oracle.kind {
        OracleKind::Prototype => {
            OracleHandle::Prototype(PrototypeOracle::from_class_means(train, cfg.oracle.temperature, cfg.oracle.bias)?)
        }
        OracleKind::File => {
            let path = cfg.oracle.score_file.as_ref().ok_or_else(|| Error::Config("oracle.score_file is required".into()))?;
            OracleHandle::File(ScoreTable::load(path)?)
        }
        OracleKind::Http => OracleHandle::Http(HttpOracle::new(cfg.oracle.http.clone(), train.class_names.clone())?),
    })
}

struct Loaded {
    train: Dataset,
    split: SplitResult,
    baseline: Classifier,
}

fn load_core(ws: &Workspace) -> Result<Loaded> {
    let train = load_dataset(&ws.require(TRAIN_DATA, "pretrain")?)?;
    let baseline = load_checkpoint(&ws.require(BASELINE, "pretrain")?)?;
    let split = split_task(&train, &ws.cfg.task)?;
    Ok(Loaded { train, split, baseline })
}

fn pct(model: &Classifier, ds: &Dataset) -> Result<f64> {
    crate::eval::accuracy(model, &ds.inputs, &ds.labels, crate::eval::LabelSpace::Fine)
}

pub fn pretrain(ws: &Workspace) -> Result<String> {
    let p = prepare(&ws.cfg)?;
    save_dataset(&p.train, &ws.path(TRAIN_DATA))?;
    save_dataset(&p.test, &ws.path(TEST_DATA))?;
    save_checkpoint(&p.baseline, &ws.path(BASELINE))?;
    save_checkpoint(&p.gold, &ws.path(GOLD))?;
    Ok(format!(
        "pretrain: {} train / {} test samples, baseline test accuracy {:.2}%, gold retrained on {} retain samples",
        p.train.len(),
        p.test.len(),
        pct(&p.baseline, &p.test)?,
        p.split.retain.len()
    ))
}

pub fn build_matrix(ws: &Workspace) -> Result<String> {
    let train = load_dataset(&ws.require(TRAIN_DATA, "pretrain")?)?;
    build_matrix_with(ws, &make_oracle(&ws.cfg, &train)?)
}

/// `build-matrix` against a caller-supplied oracle. Nothing is written
/// unless every query succeeds.
pub fn build_matrix_with(ws: &Workspace, oracle: &OracleHandle) -> Result<String> {
    let train = load_dataset(&ws.require(TRAIN_DATA, "pretrain")?)?;
    let n = ws.cfg.guidance.exemplars;
    let t = build_transition_matrix(oracle, &train, n, stage_seed(ws.cfg.seed(), SeedStream::Exemplars))?;
    if let OracleHandle::Http(h) = oracle {
        ScoreTable::from_records(&h.records())?.save(&ws.path(PROMPTS))?;
    }
    t.save(&ws.path(MATRIX))?;
    Ok(format!("build-matrix: {0}x{0} transition matrix from {n} exemplars per class via {1} oracle", t.k, oracle_kind(oracle)))
}

fn oracle_kind(o: &OracleHandle) -> String {
    crate::oracle::Oracle::kind(o).to_string()
}

pub fn assign_labels(ws: &Workspace) -> Result<String> {
    let l = load_core(ws)?;
    let t = TransitionMatrix::load(&ws.require(MATRIX, "build-matrix")?)?;
    let map = assign_all(&l.baseline, &t, &l.train, &l.split.forget, ws.cfg.guidance.tau)?;
    map.save(&ws.path(PERTURB_MAP))?;
    Ok(format!(
        "assign-labels: {} forget samples mapped onto {} perturbing labels (tau {})",
        map.entries.len(),
        map.distinct_labels(),
        map.tau
    ))
}

pub fn forge_noise(ws: &Workspace) -> Result<String> {
    let l = load_core(ws)?;
    let map = PerturbMap::load(&ws.require(PERTURB_MAP, "assign-labels")?)?;
    let effective = effective_perturb_map(&map, &l.train, &l.split, &ws.cfg.unlearn_config())?;
    let set = forge_pairs(&l.baseline, &effective, &ws.cfg.noise_config())?;
    cache_store(&ws.path(NOISE), &set)?;
    Ok(format!("forge-noise: {} noise pairs, {} steps each", set.pairs.len(), set.config.steps))
}

fn load_noise(ws: &Workspace, baseline: &Classifier) -> Result<NoiseSet> {
    let loaded = cache_load(&ws.require(NOISE, "forge-noise")?, &baseline.checksum(), ws.cfg.allow_noise_hash_mismatch)?;
    if let Some(w) = loaded.warning {
        log::warn!("{w}");
    }
    Ok(loaded.set)
}

pub fn unlearn(ws: &Workspace) -> Result<String> {
    let l = load_core(ws)?;
    let ucfg = ws.cfg.unlearn_config();
    let run: UnlearnRun = match ucfg.method {
        Method::Megu => {
            let map = PerturbMap::load(&ws.require(PERTURB_MAP, "assign-labels")?)?;
            let noise = if ucfg.no_feature_noise { None } else { Some(load_noise(ws, &l.baseline)?) };
            megu_unlearn(&l.baseline, &l.train, &l.split, &map, noise.as_ref(), &ucfg)?
        }
        Method::Unsir => unsir_unlearn(&l.baseline, &l.train, &l.split, &ws.cfg.noise_config(), &ucfg)?,
        Method::Ft => ft_baseline(&l.baseline, &l.train, &l.split, &ucfg)?,
        Method::Retrain => retrain_gold(
            &l.baseline,
            &l.train,
            &l.split,
            &ws.cfg.model.train_config(stage_seed(ws.cfg.seed(), SeedStream::Shuffle)),
        )?,
    };
    let name = run_name(&ucfg);
    let dir = ws.run_dir(&name);
    run.write_dir(&dir, &(serde_json::to_string_pretty(&ws.cfg)? + "\n"), &l.baseline)?;
    let secs: f64 = run.timings.iter().map(|(_, s)| s).sum();
    Ok(format!("unlearn: {name} finished in {secs:.2}s, forget accuracy {:.2}% on training forget set", forget_acc(&run.model, &l)?))
}

fn forget_acc(model: &Classifier, l: &Loaded) -> Result<f64> {
    let (x, y) = l.train.subset(&l.split.forget);
    crate::eval::accuracy(model, &x, &y, crate::eval::LabelSpace::Fine)
}

/// Completed runs under `runs/`, in report order.
fn finished_runs(ws: &Workspace) -> Vec<(String, std::path::PathBuf)> {
    EVAL_ORDER
        .iter()
        .map(|n| (n.to_string(), ws.run_dir(n)))
        .filter(|(_, d)| d.join("final.ckpt").exists())
        .collect()
}

fn read_timings(dir: &std::path::Path) -> Result<BTreeMap<String, f64>> {
    let v: serde_json::Value = serde_json::from_slice(&read(&dir.join("timing.json"))?)?;
    Ok(v["phases"]
        .as_object()
        .map(|m| m.iter().filter_map(|(k, v)| v.as_f64().map(|v| (k.clone(), v))).collect())
        .unwrap_or_default())
}

pub fn evaluate(ws: &Workspace) -> Result<String> {
    let set = evaluate_set(ws)?;
    atomic_write(&ws.path(REPORT_JSON), set.to_json()?.as_bytes())?;
    atomic_write(&ws.path(REPORT_TXT), set.table().as_bytes())?;
    let mut line = String::from("evaluate:");
    for r in &set.reports {
        let _ = write!(line, " {} A_r {:.2} A_f {:.2} MIA {:.2};", r.method, r.a_r, r.a_f, r.mia);
    }
    line.pop();
    Ok(line)
}

fn evaluate_set(ws: &Workspace) -> Result<ReportSet> {
    let l = load_core(ws)?;
    let test = load_dataset(&ws.require(TEST_DATA, "pretrain")?)?;
    let gold = load_checkpoint(&ws.require(GOLD, "pretrain")?)?;
    let runs = finished_runs(ws);
    let mut models = Vec::with_capacity(runs.len());
    for (name, dir) in &runs {
        let timings = if ws.cfg.eval.timings { read_timings(dir)? } else { BTreeMap::new() };
        models.push((name.clone(), load_checkpoint(&dir.join("final.ckpt"))?, timings));
    }
    let mut entries = vec![ModelEntry::new("baseline", &l.baseline), ModelEntry::new("gold", &gold)];
    for (name, model, timings) in &models {
        entries.push(ModelEntry { method: name.clone(), model, timings: timings.clone() });
    }
    full_report(&entries, &l.train, &test, &l.split, &ws.cfg.task, &ws.cfg.eval, ws.cfg.seed())
}

pub fn export_preds(ws: &Workspace) -> Result<String> {
    let test = load_dataset(&ws.require(TEST_DATA, "pretrain")?)?;
    let mut models = vec![
        ("baseline".to_string(), ws.require(BASELINE, "pretrain")?),
        ("gold".to_string(), ws.require(GOLD, "pretrain")?),
    ];
    models.extend(finished_runs(ws).into_iter().map(|(n, d)| (n, d.join("final.ckpt"))));
    let dir = ws.path(PREDICTIONS);
    for (name, ckpt) in &models {
        export_predictions(&load_checkpoint(ckpt)?, &test, &dir.join(format!("{name}.csv")))?;
    }
    Ok(format!("export-preds: {} prediction files for {} test samples", models.len(), test.len()))
}

pub fn sweep_plan(cfg: &RunConfig) -> SweepPlan {
    SweepPlan {
        taus: cfg.sweep.taus.clone(),
        alphas: cfg.sweep.alphas.clone(),
        seeds: cfg.sweep.seeds,
        base_seed: cfg.seed(),
        workers: cfg.sweep.workers,
        unlearn: cfg.unlearn.clone(),
        noise: cfg.noise.clone(),
        eval: cfg.eval.clone(),
    }
}

pub fn sweep(ws: &Workspace) -> Result<String> {
    let l = load_core(ws)?;
    let test = load_dataset(&ws.require(TEST_DATA, "pretrain")?)?;
    let t = TransitionMatrix::load(&ws.require(MATRIX, "build-matrix")?)?;
    let ctx = SweepContext {
        model: &l.baseline,
        gold: None,
        matrix: &t,
        train: &l.train,
        test: &test,
        split: &l.split,
        task: &ws.cfg.task,
    };
    let rows = run_sweep(&sweep_plan(&ws.cfg), &ctx)?;
    let path = ws.path(SWEEP_CSV);
    atomic_write(&path, sweep_csv(&rows).as_bytes())?;
    let failed = rows.iter().filter(|r| !r.ok()).count();
    if failed > 0 {
        return Err(Error::Eval(format!("{failed} of {} sweep cells failed; see {}", rows.len(), path.display())));
    }
    Ok(format!("sweep: {} cells x {} seeds", rows.len(), ws.cfg.sweep.seeds))
}

pub fn ablate(ws: &Workspace) -> Result<String> {
    let l = load_core(ws)?;
    let test = load_dataset(&ws.require(TEST_DATA, "pretrain")?)?;
    let gold = load_checkpoint(&ws.require(GOLD, "pretrain")?)?;
    let t = TransitionMatrix::load(&ws.require(MATRIX, "build-matrix")?)?;
    let ctx = SweepContext {
        model: &l.baseline,
        gold: Some(&gold),
        matrix: &t,
        train: &l.train,
        test: &test,
        split: &l.split,
        task: &ws.cfg.task,
    };
    let table = run_ablations(&ctx, &ws.cfg.unlearn_config(), &ws.cfg.noise_config(), &ws.cfg.eval, ws.cfg.seed())?;
    atomic_write(&ws.path(ABLATION_CSV), table.csv().as_bytes())?;
    atomic_write(&ws.path(ABLATION_JSON), (serde_json::to_string_pretty(&table)? + "\n").as_bytes())?;
    let mut line = String::from("ablate:");
    for r in &table.report.reports {
        let _ = write!(line, " {} A_f {:.2};", r.method, r.a_f);
    }
    line.pop();
    Ok(line)
}

/// Every stage from data to report; `on_stage` sees each summary line as
/// soon as its stage finishes.
pub fn pipeline(ws: &Workspace, mut on_stage: impl FnMut(&str)) -> Result<ReportSet> {
    let started = Instant::now();
    let ucfg = ws.cfg.unlearn_config();
    let needs_noise = ucfg.method == Method::Megu && !ucfg.no_feature_noise;
    let needs_map = ucfg.method == Method::Megu;
    let stages: [(bool, fn(&Workspace) -> Result<String>); 6] = [
        (true, pretrain),
        (needs_map, build_matrix),
        (needs_map, assign_labels),
        (needs_noise, forge_noise),
        (true, unlearn),
        (true, evaluate),
    ];
    for (enabled, stage) in stages {
        if enabled {
            on_stage(&stage(ws)?);
        }
    }
    log::info!("pipeline finished in {:.1}s", started.elapsed().as_secs_f64());
    ReportSet::from_json(&String::from_utf8_lossy(&read(&ws.path(REPORT_JSON))?))
}
