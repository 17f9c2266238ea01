//! Command-line front end.
//!
//! Every command reads one JSON run configuration (`--config`), applies
//! `--set key.path=value` overrides, computes its results in memory and only
//! then writes its artifacts, each through a temporary file and a rename. A
//! JSON summary goes to standard output.
//!
//! Exit codes: 0 on success, 2 for invalid configuration or input, 3 when the
//! numerics fail.

pub mod artifacts;
mod commands;
pub mod config;
pub mod figures;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

pub use commands::{execute, Outcome, Staged};
pub use config::{apply_override, load_config, RunConfig};
pub use figures::{emit_figure_data, render_figure, Figure};

use crate::error::Error;
use crate::io::SCHEMA_VERSION;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CAVLOSS_OUT_DIR";
const FALLBACK_OUT_DIR: &str = "cavloss-out";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulate a ringdown shot ensemble.
    Simulate,
    /// Fit decay rates (and the coupling) to a stored ensemble.
    FitRingdown,
    /// Fit the TLS model to power sweeps.
    FitPower,
    /// Invert position sweeps for the loss factors.
    Invert,
    /// Map the expected substrate-loss resolution.
    Sensitivity,
    /// Separate bulk and surface loss and derive coherence limits.
    Separate,
    /// Run every configured stage in order.
    Pipeline,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::FitRingdown => "fit-ringdown",
            Command::FitPower => "fit-power",
            Command::Invert => "invert",
            Command::Sensitivity => "sensitivity",
            Command::Separate => "separate",
            Command::Pipeline => "pipeline",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cavloss", version, about = "Cavity ringdown and dielectric loss analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration; relative paths inside it resolve against its directory.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: config `output_dir`, then $CAVLOSS_OUT_DIR, then ./cavloss-out).
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for stochastic stages.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override a configuration key, e.g. `--set simulate.shots=50`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_VALIDATION
    }
}

fn output_dir(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
}

/// Run a parsed invocation and return the summary document and exit code.
pub fn run(cli: &Cli) -> (Value, i32) {
    let name = cli.command.name();
    let result = load_config(cli.config.as_deref(), &cli.overrides).and_then(|mut cfg| {
        if cli.seed.is_some() {
            cfg.seed = cli.seed;
        }
        let dir = output_dir(cli, &cfg);
        let outcome = execute(cli.command, &cfg, &dir)?;
        outcome.staged.commit(&dir)?;
        Ok((dir, outcome))
    });
    match result {
        Ok((dir, outcome)) => (summary(name, &dir, &outcome), EXIT_OK),
        Err(e) => {
            let code = exit_code(&e);
            let doc = json!({
                "schema": SCHEMA_VERSION,
                "command": name,
                "status": "error",
                "exit_code": code,
                "error": e.to_string(),
            });
            (doc, code)
        }
    }
}

fn summary(name: &str, dir: &Path, outcome: &Outcome) -> Value {
    json!({
        "schema": SCHEMA_VERSION,
        "command": name,
        "status": "ok",
        "output_dir": dir.display().to_string(),
        "artifacts": outcome.staged.names(),
        "results": outcome.results,
    })
}

/// Parse arguments and run without printing. Argument errors and help
/// requests come back as documents with `status` "error" or "help".
pub fn run_args<I, T>(args: I) -> (Value, i32)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let status = if code == EXIT_OK { "help" } else { "error" };
            let doc = json!({
                "schema": SCHEMA_VERSION,
                "command": Value::Null,
                "status": status,
                "exit_code": code,
                "message": e.to_string(),
            });
            (doc, code)
        }
    }
}

/// Parse arguments, run, print the summary, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (doc, code) = run(&cli);
    if code != EXIT_OK {
        if let Some(msg) = doc.get("error").and_then(Value::as_str) {
            eprintln!("error: {msg}");
        }
    }
    println!("{}", serde_json::to_string_pretty(&doc).unwrap_or_default());
    code
}
