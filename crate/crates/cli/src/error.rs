use crate::config::SUITES;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("unknown suite `{0}`; available suites: {list}", list = SUITES.join(", "))]
    UnknownSuite(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Core(#[from] spinboard_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}
