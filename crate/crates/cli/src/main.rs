//! `xgbias` — expected-goals training, finishing-skill simulations and
//! multi-calibrated baselines from the command line.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 data error,
//! 4 numerical non-convergence (outputs written and flagged), 1 replay
//! mismatch. Errors are printed to stderr as one JSON object.

mod commands;
mod config;
mod error;
mod figure;
mod manifest;
mod run;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use commands::*;
use config::ConfigFile;
use error::{CliError, CliResult};
use figure::FigureArgs;
use manifest::RunManifest;
use run::{execute, Completed, Invocation, Step};

#[derive(Debug, Parser)]
#[command(name = "xgbias", version, about = "Expected-goals bias analysis pipeline")]
struct Cli {
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving every output file and the run manifest.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse StatsBomb open data into a shot cache.
    Ingest(IngestArgs),
    /// Fit the standard xG model on a stratified training split.
    Train(TrainArgs),
    /// AUROC and Brier score of a model on a cache.
    Evaluate(EvaluateArgs),
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Exact goal distribution and tail probabilities for one player.
    Finishing(FinishingArgs),
    /// Calibration curves per subgroup and conversion by distance.
    Calibration(CalibrationArgs),
    #[command(subcommand)]
    Multicalib(MulticalibCommand),
    /// Emit plot-ready data for a figure.
    Figure(FigureArgs),
    /// Re-run a recorded command and compare its outputs byte for byte.
    Replay(ReplayArgs),
}

#[derive(Debug, Subcommand)]
enum SimulateCommand {
    /// Overperformance probability over a skill × shot-count grid.
    H1(H1Args),
    /// Player-specific shot maps against the global map.
    Profiles(ProfilesArgs),
    /// Training-data augmentation with skilled synthetic finishers.
    H3a(H3aArgs),
    /// Training on mixtures of finishing skill levels.
    H3b(H3bArgs),
}

#[derive(Debug, Subcommand)]
enum MulticalibCommand {
    /// Fit group × bin calibration updates on top of a standard model.
    Fit(McFitArgs),
    /// Score shots with a multi-calibrated model.
    Predict(McPredictArgs),
    /// Position × volume baselines and the weighted average player.
    Baselines(BaselinesArgs),
    /// GAX leaderboard under the standard and multi-calibrated models.
    Leaderboard(LeaderboardArgs),
}

#[derive(Debug, clap::Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
}

/// Merges flags over the config section and runs the step.
fn dispatch<S: Step + clap::Args>(
    flags: S,
    section: &[&str],
    cfg: &ConfigFile,
    inv: Invocation<'_>,
) -> CliResult<Completed> {
    let flags = serde_json::to_value(&flags).expect("flags serialise");
    let step: S = config::merge(cfg.section(section)?, flags)?;
    execute(step, inv)
}

/// Runs a recorded configuration without consulting flags or config files.
fn run_recorded(name: &str, config: Value, inv: Invocation<'_>) -> CliResult<Completed> {
    fn go<S: Step>(config: Value, inv: Invocation<'_>) -> CliResult<Completed> {
        execute(config::from_value::<S>(config)?, inv)
    }
    match name {
        IngestArgs::NAME => go::<IngestArgs>(config, inv),
        TrainArgs::NAME => go::<TrainArgs>(config, inv),
        EvaluateArgs::NAME => go::<EvaluateArgs>(config, inv),
        H1Args::NAME => go::<H1Args>(config, inv),
        ProfilesArgs::NAME => go::<ProfilesArgs>(config, inv),
        H3aArgs::NAME => go::<H3aArgs>(config, inv),
        H3bArgs::NAME => go::<H3bArgs>(config, inv),
        FinishingArgs::NAME => go::<FinishingArgs>(config, inv),
        CalibrationArgs::NAME => go::<CalibrationArgs>(config, inv),
        McFitArgs::NAME => go::<McFitArgs>(config, inv),
        McPredictArgs::NAME => go::<McPredictArgs>(config, inv),
        BaselinesArgs::NAME => go::<BaselinesArgs>(config, inv),
        LeaderboardArgs::NAME => go::<LeaderboardArgs>(config, inv),
        FigureArgs::NAME => go::<FigureArgs>(config, inv),
        other => Err(CliError::config("manifest", format!("unknown recorded command '{other}'"))),
    }
}

fn replay(args: &ReplayArgs, out_dir: Option<PathBuf>, threads: usize) -> CliResult<Value> {
    let recorded = RunManifest::load(&args.manifest)?;
    let tampered: Vec<String> = recorded.inputs.iter().filter_map(|i| i.verify()).collect();
    if !tampered.is_empty() {
        return Err(CliError::Data(format!("inputs differ from the manifest: {}", tampered.join("; "))));
    }
    let out_dir = out_dir.unwrap_or_else(|| recorded.out_dir.join("replay"));
    if out_dir == recorded.out_dir {
        return Err(CliError::config("out_dir", "replay must write to a different directory"));
    }
    let done = run_recorded(
        &recorded.command,
        recorded.config.clone(),
        Invocation {
            command: &recorded.command,
            argv: std::env::args().collect(),
            out_dir,
            threads,
        },
    )?;
    let mismatched: Vec<&str> = recorded
        .outputs
        .iter()
        .filter(|o| !done.manifest.outputs.contains(o))
        .map(|o| o.path.as_str())
        .collect();
    if !mismatched.is_empty() || done.manifest.outputs.len() != recorded.outputs.len() {
        return Err(CliError::Replay(format!(
            "replayed outputs differ from the recorded run: {}",
            mismatched.join(", ")
        )));
    }
    Ok(json!({
        "status": "identical",
        "command": recorded.command,
        "outputs": done.manifest.outputs.len(),
        "manifest": done.manifest_path,
    }))
}

fn real_main() -> CliResult<Value> {
    let cli = Cli::parse();
    let cfg = ConfigFile::load(cli.config.as_deref())?;
    let threads = match cli.threads {
        Some(t) => Some(t),
        None => cfg
            .global("threads")
            .map(|v| {
                v.as_integer()
                    .filter(|t| *t > 0)
                    .map(|t| t as usize)
                    .ok_or_else(|| CliError::config("threads", "must be a positive integer"))
            })
            .transpose()?,
    };
    if threads == Some(0) {
        return Err(CliError::config("threads", "must be at least 1"));
    }
    let out_dir = match cli.out_dir.clone() {
        Some(d) => Some(d),
        None => cfg
            .global("out_dir")
            .map(|v| {
                v.as_str()
                    .map(PathBuf::from)
                    .ok_or_else(|| CliError::config("out_dir", "must be a string"))
            })
            .transpose()?,
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::config("threads", e.to_string()))?;
    let n_threads = pool.current_num_threads();

    pool.install(|| {
        if let Command::Replay(args) = &cli.command {
            return replay(args, out_dir, n_threads);
        }
        let out_dir = out_dir.unwrap_or_else(|| PathBuf::from("."));
        let out_dir = if out_dir.is_absolute() {
            out_dir
        } else {
            std::env::current_dir()
                .map_err(|e| CliError::Data(e.to_string()))?
                .join(out_dir)
        };
        let argv: Vec<String> = std::env::args().collect();
        macro_rules! inv {
            ($name:expr) => {
                Invocation {
                    command: $name,
                    argv: argv.clone(),
                    out_dir: out_dir.clone(),
                    threads: n_threads,
                }
            };
        }
        let done = match cli.command {
            Command::Ingest(a) => dispatch(a, &["ingest"], &cfg, inv!(IngestArgs::NAME)),
            Command::Train(a) => dispatch(a, &["train"], &cfg, inv!(TrainArgs::NAME)),
            Command::Evaluate(a) => dispatch(a, &["evaluate"], &cfg, inv!(EvaluateArgs::NAME)),
            Command::Simulate(SimulateCommand::H1(a)) => dispatch(a, &["simulate", "h1"], &cfg, inv!(H1Args::NAME)),
            Command::Simulate(SimulateCommand::Profiles(a)) => {
                dispatch(a, &["simulate", "profiles"], &cfg, inv!(ProfilesArgs::NAME))
            }
            Command::Simulate(SimulateCommand::H3a(a)) => dispatch(a, &["simulate", "h3a"], &cfg, inv!(H3aArgs::NAME)),
            Command::Simulate(SimulateCommand::H3b(a)) => dispatch(a, &["simulate", "h3b"], &cfg, inv!(H3bArgs::NAME)),
            Command::Finishing(a) => dispatch(a, &["finishing"], &cfg, inv!(FinishingArgs::NAME)),
            Command::Calibration(a) => dispatch(a, &["calibration"], &cfg, inv!(CalibrationArgs::NAME)),
            Command::Multicalib(MulticalibCommand::Fit(a)) => {
                dispatch(a, &["multicalib", "fit"], &cfg, inv!(McFitArgs::NAME))
            }
            Command::Multicalib(MulticalibCommand::Predict(a)) => {
                dispatch(a, &["multicalib", "predict"], &cfg, inv!(McPredictArgs::NAME))
            }
            Command::Multicalib(MulticalibCommand::Baselines(a)) => {
                dispatch(a, &["multicalib", "baselines"], &cfg, inv!(BaselinesArgs::NAME))
            }
            Command::Multicalib(MulticalibCommand::Leaderboard(a)) => {
                dispatch(a, &["multicalib", "leaderboard"], &cfg, inv!(LeaderboardArgs::NAME))
            }
            Command::Figure(a) => dispatch(a, &["figure"], &cfg, inv!(FigureArgs::NAME)),
            Command::Replay(_) => unreachable!("handled above"),
        }?;
        Ok(json!({
            "status": done.manifest.status,
            "command": done.manifest.command,
            "manifest": done.manifest_path,
            "outputs": done.manifest.outputs.iter().map(|o| &o.path).collect::<Vec<_>>(),
        }))
    })
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(v) => println!("{v}"),
        Err(e) => {
            eprintln!("{}", e.record());
            std::process::exit(e.exit_code());
        }
    }
}
