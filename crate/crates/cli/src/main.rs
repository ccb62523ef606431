//! `afssen`: simulate, fit, cross-validate and diagnose sparse
//! function-on-scalar regressions from the command line.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use settings::{Flags, Settings};

#[derive(Parser)]
#[command(name = "afssen", version, about)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON settings file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset: x.csv, y.csv, beta_star.csv, truth.json.
    Simulate(Flags),
    /// Fit at one (λ_K, λ_H): beta_hat.csv, fit.json.
    Fit(Flags),
    /// Warm-started λ_H paths for every λ_K: path.json.
    Path(Flags),
    /// Cross-validated two-stage fit: cv.json, beta_hat.csv, fit.json.
    Cv(Flags),
    /// Design diagnostics on a known support: diagnostics.json.
    Diagnose(Flags),
    /// Replicated simulate/fit/score runs: report.json, replications.csv.
    Experiment(Flags),
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let (name, flags, action): (&str, &Flags, fn(&Settings) -> Result<()>) = match &cli.command {
        Command::Simulate(f) => ("simulate", f, commands::simulate),
        Command::Fit(f) => ("fit", f, commands::fit_cmd),
        Command::Path(f) => ("path", f, commands::path),
        Command::Cv(f) => ("cv", f, commands::cv),
        Command::Diagnose(f) => ("diagnose", f, commands::diagnose_cmd),
        Command::Experiment(f) => ("experiment", f, commands::experiment),
    };
    let settings = Settings::resolve(name, cli.config.as_deref(), flags)?;
    std::fs::create_dir_all(&settings.out)
        .with_context(|| format!("creating {}", settings.out.display()))?;
    afssen::io::write_json(&settings.out.join("resolved-config.json"), &settings)?;
    action(&settings)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => return fail(&e.to_string(), "usage"),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = match e.downcast_ref::<afssen::AfssenError>() {
                Some(afssen::AfssenError::Io(_)) => "io",
                Some(afssen::AfssenError::Parse { .. } | afssen::AfssenError::Format { .. }) => "input",
                Some(afssen::AfssenError::InvalidParameter(_)) => "usage",
                Some(_) => "numerical",
                None => "usage",
            };
            fail(&format!("{e:#}"), kind)
        }
    }
}

/// Reports an error on stderr as one JSON object.
fn fail(error: &str, kind: &str) -> ExitCode {
    let msg = serde_json::json!({ "error": error.trim_end(), "kind": kind });
    eprintln!("{msg}");
    ExitCode::FAILURE
}
