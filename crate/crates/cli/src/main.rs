use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use megu_core::pipeline::{self, RunConfig, Workspace};
use megu_core::Error;

/// Concept-guided machine unlearning pipeline.
#[derive(Parser, Debug)]
#[command(name = "megu", version)]
struct Cli {
    /// TOML run config; the bundled default is used when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Dotted override such as `unlearn.alpha=0.5` or `tau=0.4`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory. Falls back to $MEGU_OUT, then `out` in the config, then ./megu-out.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Generate or load data, train the baseline and the retrain-from-scratch gold model.
    Pretrain,
    /// Query the concept oracle and write the transition matrix.
    BuildMatrix,
    /// Assign a perturbing label to every forget sample.
    AssignLabels,
    /// Optimize toward/away noise pairs for the perturb map.
    ForgeNoise,
    /// Run the configured unlearning method.
    Unlearn,
    /// Score baseline, gold and every finished run.
    Evaluate,
    /// Write per-model test-set logits as CSV.
    ExportPreds,
    /// Run the tau x alpha sensitivity grid.
    Sweep,
    /// Compare full MeGU against random labels and no feature noise.
    Ablate,
    /// Run every stage up to the report.
    Pipeline,
    /// Validate the resolved config and print it as TOML.
    Config,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_MISSING: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::MissingArtifact { .. } => EXIT_MISSING,
        _ => EXIT_RUNTIME,
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, Error> {
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os("MEGU_OUT").filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("megu-out"))
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = resolve(cli)?;
    if cli.command == Command::Config {
        let text = toml::to_string(&cfg).map_err(|e| Error::Config(e.to_string()))?;
        print!("{text}");
        return Ok(());
    }
    let out = out_dir(cli, &cfg);
    let ws = Workspace::open(cfg, out)?;
    let stage = match cli.command {
        Command::Pretrain => pipeline::pretrain,
        Command::BuildMatrix => pipeline::build_matrix,
        Command::AssignLabels => pipeline::assign_labels,
        Command::ForgeNoise => pipeline::forge_noise,
        Command::Unlearn => pipeline::unlearn,
        Command::Evaluate => pipeline::evaluate,
        Command::ExportPreds => pipeline::export_preds,
        Command::Sweep => pipeline::sweep,
        Command::Ablate => pipeline::ablate,
        Command::Pipeline => {
            let report = pipeline::pipeline(&ws, |line| println!("{line}"))?;
            print!("{}", report.table());
            return Ok(());
        }
        Command::Config => unreachable!("handled above"),
    };
    println!("{}", stage(&ws)?);
    if cli.command == Command::Evaluate {
        print!("{}", String::from_utf8_lossy(&std::fs::read(ws.path(pipeline::REPORT_TXT)).unwrap_or_default()));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
