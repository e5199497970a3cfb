//! Library side of the `spinboard` runner: configuration, suites and the
//! ledger/CSV writers, so integration tests can drive runs in-process.

// Negated comparisons such as `!(x > 0.0)` are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod suites;

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::{content_id, hex, RunConfig};
use crate::error::CliError;
use crate::output::{io_err, write_ledger, CheckRecord};
use crate::suites::{run_suite, Tolerances};

/// Environment variable consulted for the output directory.
pub const OUT_ENV: &str = "SPINBOARD_OUT";
pub const DEFAULT_OUT: &str = "spinboard-out";

/// Command-line overrides applied on top of a configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces the configured seed list with this single seed.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Worker threads; `None` uses every available core.
    pub jobs: Option<usize>,
    pub tolerance_scale: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub records: Vec<CheckRecord>,
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    pub fn hard_failures(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.check.hard && !r.check.pass)
            .count()
    }

    pub fn soft_failures(&self) -> usize {
        self.records
            .iter()
            .filter(|r| !r.check.hard && !r.check.pass)
            .count()
    }
}

/// Flag, then config file, then environment, then the default.
pub fn resolve_out_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .or_else(|| {
            std::env::var_os(OUT_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        })
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Runs one suite and writes its tables and ledger. `source` is the exact
/// configuration text the run was started from; its blob id goes into
/// every ledger line.
pub fn run(config: &RunConfig, source: &str, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let mut cfg = config.clone();
    if let Some(seed) = opts.seed {
        cfg.seeds = vec![seed];
    }
    let scale = opts.tolerance_scale.unwrap_or(1.0);
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(CliError::InvalidConfig(format!(
            "tolerance scale {scale} must be positive"
        )));
    }
    cfg.validate()?;
    let out_dir = resolve_out_dir(opts.out.as_deref(), cfg.out.as_deref());
    std::fs::create_dir_all(&out_dir).map_err(|e| io_err(&out_dir, e))?;

    let tolerances = Tolerances {
        scale,
        overrides: cfg.tolerances.clone(),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| CliError::Pool(e.to_string()))?;
    let output = pool.install(|| run_suite(&cfg, &tolerances))?;

    let effective = serde_json::json!({ "config": cfg, "tolerance_scale": scale });
    let config_hash = hex(&Sha256::digest(
        serde_json::to_vec(&effective).expect("serializable"),
    ));
    let content = content_id(source.as_bytes());
    let records: Vec<CheckRecord> = output
        .checks
        .into_iter()
        .map(|(seed, check)| CheckRecord {
            suite: cfg.suite.clone(),
            check,
            seed,
            config_hash: config_hash.clone(),
            content_id: content.clone(),
        })
        .collect();
    let mut files = Vec::new();
    for t in &output.tables {
        files.push(t.write_csv(&out_dir)?);
    }
    files.push(write_ledger(&out_dir, &records)?);
    Ok(RunSummary {
        out_dir,
        records,
        files,
    })
}
