//! Command-line harness: data generation, fitting, prediction, sampling,
//! the particle-bank simulation and numerical diagnostics.
//!
//! Every command resolves its settings from built-in defaults, an optional
//! `--config` file, `--set key=value` overrides and per-command flags, in
//! that order, and writes the resolved table next to its outputs.

pub mod commands;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod model;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_override, KeySpec, Resolved};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "gmje", version, about = "Gaussian mixture joint embeddings: experiment harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-branch dataset.
    GenData {
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        noise: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Fit one model variant to a dataset.
    Fit {
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        data: Option<String>,
        #[arg(long)]
        epochs: Option<String>,
        #[arg(long)]
        k: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a fitted model on a grid of contexts.
    Predict {
        #[arg(long)]
        model_file: Option<String>,
        #[arg(long)]
        grid: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Draw joint samples from a fitted generative model.
    Sample {
        #[arg(long)]
        model_file: Option<String>,
        #[arg(long)]
        n: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the particle-bank versus FIFO simulation.
    SmcSim {
        #[arg(long)]
        steps: Option<String>,
        #[arg(long)]
        m: Option<String>,
        #[arg(long)]
        tau: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the numerical self-checks.
    Diagnostics {
        #[arg(long)]
        inject: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

fn resolve(specs: &'static [KeySpec], common: &Common, flags: &[(&str, &Option<String>)]) -> Result<Resolved, CliError> {
    let mut overrides = common.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>, _>>()?;
    let all = flags.iter().copied().chain([("out", &common.out), ("seed", &common.seed)]);
    overrides.extend(all.filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))));
    Resolved::resolve(specs, common.config.as_deref(), &overrides)
}

/// Runs one parsed command and returns its JSON summary.
pub fn execute(command: Command) -> Result<serde_json::Value, CliError> {
    use commands::*;
    match command {
        Command::GenData { kind, n, noise, common } => {
            gen_data(&resolve(GEN_DATA_KEYS, &common, &[("kind", &kind), ("n", &n), ("noise", &noise)])?)
        }
        Command::Fit { model, data, epochs, k, common } => fit(&resolve(
            FIT_KEYS,
            &common,
            &[("model", &model), ("data", &data), ("epochs", &epochs), ("k", &k)],
        )?),
        Command::Predict { model_file, grid, common } => {
            predict(&resolve(PREDICT_KEYS, &common, &[("model_file", &model_file), ("grid", &grid)])?)
        }
        Command::Sample { model_file, n, common } => {
            sample(&resolve(SAMPLE_KEYS, &common, &[("model_file", &model_file), ("n", &n)])?)
        }
        Command::SmcSim { steps, m, tau, common } => {
            smc_sim(&resolve(SMC_KEYS, &common, &[("steps", &steps), ("m", &m), ("tau", &tau)])?)
        }
        Command::Diagnostics { inject, common } => {
            let report = diagnostics(&resolve(DIAGNOSTICS_KEYS, &common, &[("inject", &inject)])?)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            let failed = report["checks"].as_array().map_or(0, |c| c.iter().filter(|c| c["pass"] != true).count());
            if failed > 0 {
                for c in report["checks"].as_array().into_iter().flatten().filter(|c| c["pass"] != true) {
                    eprintln!("check {} failed: {}", c["name"], c["detail"]);
                }
                return Err(CliError::ChecksFailed(failed));
            }
            Ok(serde_json::Value::Null)
        }
    }
}

/// Parses `args` (including the program name) and returns the exit code:
/// 0 on success, 1 for usage and I/O errors, 2 for numerical contract
/// failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(serde_json::Value::Null) => 0,
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("JSON value"));
            0
        }
        Err(e) => {
            eprintln!("gmje: {e}");
            e.exit_code()
        }
    }
}
