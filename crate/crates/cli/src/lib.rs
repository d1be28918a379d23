//! `qpos` command-line front end.
//!
//! Every flag can also be set through an environment variable with the
//! `QPOS_` prefix (`QPOS_CONFIG`, `QPOS_GRID`, `QPOS_Q`, `QPOS_K_MAX`,
//! `QPOS_TOL`, `QPOS_OUT`, `QPOS_WORKERS`). Explicit flags win over the
//! environment, which wins over the config file.

pub mod config;
pub mod report;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

use crate::config::{parse_config, Command, Overrides, RunConfig};
use crate::report::RunReport;
use crate::run::{input_error_report, EXIT_INPUT};

#[derive(Debug, Parser)]
#[command(name = "qpos", version, about = "Numerical q-positivity certificates on flat complex tori")]
pub struct Cli {
    /// Subcommand to run.
    #[arg(value_enum)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, env = "QPOS_CONFIG")]
    pub config: PathBuf,
    /// Grid points per active real axis (power of two).
    #[arg(long, env = "QPOS_GRID")]
    pub grid: Option<usize>,
    /// Target positivity index q.
    #[arg(long, env = "QPOS_Q")]
    pub q: Option<usize>,
    /// Upper bound of the tensor-power search.
    #[arg(long = "k-max", env = "QPOS_K_MAX")]
    pub k_max: Option<u32>,
    /// Newton residual tolerance.
    #[arg(long, env = "QPOS_TOL")]
    pub tol: Option<f64>,
    /// Directory for report.json and field artifacts.
    #[arg(long, env = "QPOS_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads for data-parallel kernels.
    #[arg(long, env = "QPOS_WORKERS")]
    pub workers: Option<usize>,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides { grid: self.grid, q: self.q, k_max: self.k_max, tol: self.tol }
    }
}

/// Parses the config and runs it inside a pool of `workers` threads.
pub fn execute(cli: &Cli) -> RunReport {
    if let Some(dir) = &cli.out {
        if let Err(e) = std::fs::create_dir_all(dir) {
            return input_error_report(cli.command, &format!("cannot create {}: {e}", dir.display()));
        }
    }
    let config: RunConfig = match parse_config(&cli.config, cli.command, &cli.overrides()) {
        Ok(c) => c,
        Err(e) => return input_error_report(cli.command, &e.to_string()),
    };
    let go = || run::run(&config, cli.out.as_deref());
    match cli.workers {
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build() {
            Ok(pool) => pool.install(go),
            Err(e) => input_error_report(cli.command, &format!("cannot start {w} workers: {e}")),
        },
        None => go(),
    }
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_INPUT,
            };
        }
    };
    let report = execute(&cli);
    println!("{}", report.to_json());
    if report.exit_code == EXIT_INPUT {
        if let Some(msg) = report.verdict.get("message").and_then(|m| m.as_str()) {
            eprintln!("error: {msg}");
        }
    }
    report.exit_code
}
