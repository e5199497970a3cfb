use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use spinboard_cli::config::{suite, RunConfig};
use spinboard_cli::error::CliError;
use spinboard_cli::{run, RunOptions};

/// Runs a spinboard verification suite and writes CSV tables plus a
/// JSON-lines ledger of every check.
#[derive(Debug, Parser)]
#[command(name = "spinboard", version)]
struct Args {
    /// TOML run configuration.
    #[arg(long, required_unless_present = "suite")]
    config: Option<PathBuf>,
    /// Suite to run: the predefined configuration, or with `--config`,
    /// the suite that configuration is applied to.
    #[arg(long)]
    suite: Option<String>,
    /// Run with this single seed instead of the configured ones.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config file and SPINBOARD_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Multiplies every tolerance magnitude.
    #[arg(long)]
    tolerance_scale: Option<f64>,
}

fn execute(args: Args) -> Result<bool, CliError> {
    let (config, source) = match (&args.config, &args.suite) {
        (Some(path), name) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let mut c = RunConfig::from_toml(&text)?;
            if let Some(name) = name {
                c.suite = name.clone();
            }
            (c, text)
        }
        (None, Some(name)) => {
            let c = suite(name)?;
            let text = c.to_toml();
            (c, text)
        }
        (None, None) => unreachable!("clap requires one of --config or --suite"),
    };
    let opts = RunOptions {
        seed: args.seed,
        out: args.out,
        jobs: args.jobs,
        tolerance_scale: args.tolerance_scale,
    };
    let summary = run(&config, &source, &opts)?;
    for r in &summary.records {
        if !r.check.pass {
            let kind = if r.check.hard { "FAIL" } else { "warn" };
            eprintln!(
                "{kind} {} value={:e} tolerance={:e} inputs={}",
                r.check.check, r.check.value, r.check.tolerance, r.check.inputs
            );
        }
    }
    let hard = summary.hard_failures();
    println!(
        "{}: {} checks, {} hard failures, {} soft failures; output in {}",
        config.suite,
        summary.records.len(),
        hard,
        summary.soft_failures(),
        summary.out_dir.display()
    );
    Ok(hard == 0)
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
