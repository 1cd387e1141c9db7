mod common;

use megu_core::guidance::TransitionMatrix;
use megu_core::pipeline::{self, Prepared, RunConfig};
use megu_core::sweep::{run_ablations, run_cell_seed, run_sweep, run_sweep_with, sweep_csv, SweepContext, SweepPlan};
use megu_core::Error;

struct Fixture {
    cfg: RunConfig,
    p: Prepared,
    t: TransitionMatrix,
}

fn fixture() -> Fixture {
    let cfg = common::quick_cfg(0);
    let p = pipeline::prepare(&cfg).unwrap();
    let oracle = pipeline::make_oracle(&cfg, &p.train).unwrap();
    let t = megu_core::guidance::build_transition_matrix(&oracle, &p.train, cfg.guidance.exemplars, 0).unwrap();
    Fixture { cfg, p, t }
}

impl Fixture {
    fn ctx(&self) -> SweepContext<'_> {
        SweepContext {
            model: &self.p.baseline,
            gold: Some(&self.p.gold),
            matrix: &self.t,
            train: &self.p.train,
            test: &self.p.test,
            split: &self.p.split,
            task: &self.cfg.task,
        }
    }

    fn plan(&self, taus: &[f64], alphas: &[f64], seeds: usize) -> SweepPlan {
        let mut plan = pipeline::sweep_plan(&self.cfg);
        plan.taus = taus.to_vec();
        plan.alphas = alphas.to_vec();
        plan.seeds = seeds;
        plan
    }
}

#[test]
fn single_cell_matches_direct_run() {
    let f = fixture();
    let plan = f.plan(&[0.3], &[0.7], 1);
    let rows = run_sweep(&plan, &f.ctx()).unwrap();
    let direct = run_cell_seed(&f.ctx(), &plan, 0.3, 0.7, plan.base_seed).unwrap();
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert!(row.ok());
    assert_eq!(row.a_r.unwrap().mean, direct.a_r);
    assert_eq!(row.a_f.unwrap().mean, direct.a_f);
    assert_eq!(row.mia.unwrap().mean, direct.mia);
}

#[test]
fn seed_spread_is_mean_min_max_of_runs() {
    let f = fixture();
    let rows = run_sweep(&f.plan(&[0.3], &[0.5], 3), &f.ctx()).unwrap();
    let row = &rows[0];
    assert_eq!(row.reports.len(), 3);
    let vals: Vec<f64> = row.reports.iter().map(|r| r.a_r).collect();
    let s = row.a_r.unwrap();
    assert!((s.mean - vals.iter().sum::<f64>() / 3.0).abs() < 1e-12);
    assert_eq!(s.min, vals.iter().cloned().fold(f64::INFINITY, f64::min));
    assert_eq!(s.max, vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
}

#[test]
fn csv_is_reproducible() {
    let f = fixture();
    let plan = f.plan(&[0.3, 0.6], &[0.2], 2);
    let a = sweep_csv(&run_sweep(&plan, &f.ctx()).unwrap());
    let b = sweep_csv(&run_sweep(&plan, &f.ctx()).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 3);
    assert!(a.starts_with("tau,alpha,seed_count,"));
}

#[test]
fn failing_cell_is_isolated() {
    let f = fixture();
    let plan = f.plan(&[0.3, 0.6], &[0.5], 1);
    let rows = run_sweep_with(&plan, &f.ctx(), |ctx, plan, tau, alpha, seed| {
        if tau == 0.6 {
            Err(Error::Eval("synthetic failure".into()))
        } else {
            run_cell_seed(ctx, plan, tau, alpha, seed)
        }
    })
    .unwrap();
    assert!(rows[0].ok());
    assert!(!rows[1].ok());
    assert!(rows[1].status.contains("synthetic failure"));
    assert!(rows[1].a_r.is_none());
    let csv = sweep_csv(&rows);
    assert!(csv.lines().nth(2).unwrap().contains(",,"), "{csv}");
}

#[test]
fn invalid_grid_is_rejected_up_front() {
    let f = fixture();
    let err = run_sweep(&f.plan(&[0.05], &[0.5], 1), &f.ctx()).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
    assert!(!err.to_string().contains("config error: config error"));
}

#[test]
fn ablation_variants_share_a_checkpoint() {
    let f = fixture();
    let table = run_ablations(&f.ctx(), &f.cfg.unlearn_config(), &f.cfg.noise_config(), &f.cfg.eval, 0).unwrap();
    assert_eq!(table.report.reports.len(), 5);
    assert_eq!(table.initial_hashes.len(), 3);
    assert!(table.initial_hashes.iter().all(|(_, h)| *h == table.initial_hashes[0].1));
    assert_eq!(table.csv().lines().count(), 6);
}

#[test]
fn missing_artifacts_name_their_producer() {
    let dir = tempfile::tempdir().unwrap();
    let ws = common::workspace(common::quick_cfg(0), dir.path());
    let err = pipeline::build_matrix(&ws).unwrap_err();
    assert!(matches!(err, Error::MissingArtifact { .. }), "{err}");
    assert!(err.to_string().contains("pretrain"), "{err}");
    pipeline::pretrain(&ws).unwrap();
    assert!(pipeline::assign_labels(&ws).unwrap_err().to_string().contains("build-matrix"));
    pipeline::build_matrix(&ws).unwrap();
    pipeline::assign_labels(&ws).unwrap();
    let err = pipeline::unlearn(&ws).unwrap_err();
    assert!(err.to_string().contains("forge-noise"), "{err}");
}

#[test]
fn pretrain_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let ws = common::workspace(common::quick_cfg(4), dir.path());
    pipeline::pretrain(&ws).unwrap();
    let snap = |name| std::fs::read(ws.path(name)).unwrap();
    let first = [pipeline::TRAIN_DATA, pipeline::BASELINE, pipeline::GOLD].map(snap);
    pipeline::pretrain(&ws).unwrap();
    assert_eq!(first, [pipeline::TRAIN_DATA, pipeline::BASELINE, pipeline::GOLD].map(snap));
}

#[test]
fn second_workspace_on_same_dir_is_locked() {
    let dir = tempfile::tempdir().unwrap();
    let _held = common::workspace(common::quick_cfg(0), dir.path());
    let err = pipeline::Workspace::open(common::quick_cfg(0), dir.path()).unwrap_err();
    assert!(matches!(err, Error::Locked(_)), "{err}");
}
