//! `mtjsim`: transient runs, ensembles, WER sweeps, calibration, solver
//! validation and compact-model emission from one TOML scenario file.

mod commands;

use clap::{Parser, Subcommand};
use mtj_core::MtjError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Single trajectory: trajectory.csv and events.csv.
    Transient,
    /// Monte Carlo ensemble: summary.csv and runs.csv.
    Ensemble,
    /// One ensemble per pulse width or amplitude: wer.csv.
    WerSweep,
    /// Ensemble plus surrogate fits: runs.csv and corners.toml.
    Calibrate,
    /// RMSE(m_z) and step counts of each solver against a reference.
    Validate,
    /// Verilog-A compact model: model.va.
    EmitModel,
}

#[derive(Parser, Debug)]
#[command(name = "mtjsim", version, about = "Macrospin MTJ simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (TOML).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Dotted-path override applied after parsing, e.g. `solver.rel_tol=1e-4`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Master seed for noise and initial-state draws.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Ensemble worker threads (0 = all cores).
    #[arg(long, global = true, env = "MTJ_WORKERS")]
    workers: Option<usize>,
    /// Calibrated corner to simulate or select in the emitted model.
    #[arg(long, global = true)]
    corner: Option<String>,
}

pub struct Invocation {
    pub command: &'static str,
    pub config: PathBuf,
    pub out: PathBuf,
    pub overrides: Vec<String>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub corner: Option<String>,
}

fn exit_code(e: &MtjError) -> u8 {
    if e.is_io() {
        4
    } else if e.is_numerical() {
        3
    } else {
        2
    }
}

fn kind_name(e: &MtjError) -> &'static str {
    if e.is_io() {
        "io"
    } else if e.is_numerical() {
        "numerical"
    } else {
        "config"
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let args = Cli::parse();
    let command = match args.command {
        Command::Transient => "transient",
        Command::Ensemble => "ensemble",
        Command::WerSweep => "wer-sweep",
        Command::Calibrate => "calibrate",
        Command::Validate => "validate",
        Command::EmitModel => "emit-model",
    };
    let Some(config) = args.config else {
        let e = MtjError::Config("--config is required".into());
        report(command, &e);
        return ExitCode::from(2);
    };
    let inv = Invocation {
        command,
        config,
        out: args.out,
        overrides: args.set,
        seed: args.seed,
        workers: args.workers,
        corner: args.corner,
    };
    match commands::run(&inv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(command, &e);
            ExitCode::from(exit_code(&e))
        }
    }
}

fn report(command: &str, e: &MtjError) {
    let msg = serde_json::json!({
        "command": command,
        "error": kind_name(e),
        "exit_code": exit_code(e),
        "message": e.to_string(),
    });
    eprintln!("{msg}");
}
