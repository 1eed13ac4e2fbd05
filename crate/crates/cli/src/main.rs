use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use sqm_cli::{execute, Experiment, ExperimentConfig, Status};

/// Runs one named experiment from a JSON config and writes its outputs and
/// a manifest. Exit status: 0 when every check passes, 2 when a check fails,
/// 1 on any error.
#[derive(Debug, Parser)]
#[command(name = "sqm", version)]
struct Cli {
    #[arg(value_enum)]
    experiment: Experiment,
    /// JSON config: {"experiment", "seed", "output_dir", "workers", "params"}.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Progress and every check on stderr.
    #[arg(short, long)]
    verbose: bool,
}

fn main_inner(cli: Cli) -> Result<u8> {
    let config = ExperimentConfig::load(&cli.config)?;
    let experiment = config.resolve_experiment(cli.experiment)?;
    let seed = cli.seed.unwrap_or(config.seed);
    let out = cli
        .out
        .or(config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("sqm-out").join(experiment.name()));
    if let Some(n) = cli.workers.or(config.workers) {
        anyhow::ensure!(n > 0, "--workers must be at least 1");
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot size the worker pool")?;
    }
    let manifest = execute(experiment, &config.params, seed, &out, cli.verbose)?;
    let passed = manifest.checks.iter().filter(|c| c.pass).count();
    match manifest.status {
        Status::Error => eprintln!("sqm {experiment}: error: {}", manifest.error.as_deref().unwrap_or("unknown")),
        _ => {
            for c in manifest.failed() {
                eprintln!("{}", c.summary());
            }
        }
    }
    println!(
        "{experiment}: {} ({passed}/{} checks passed), outputs in {}",
        serde_json::to_value(manifest.status)?.as_str().unwrap_or("?"),
        manifest.checks.len(),
        out.display()
    );
    Ok(manifest.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("sqm: error: {e:#}");
            ExitCode::from(1)
        }
    }
}
