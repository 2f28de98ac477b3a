//! File formats, configuration, model caching, experiment orchestration and
//! reports on top of `duck-core`. The `duck` binary is a thin command-line
//! front end over [`experiment`] and [`report`].

pub mod cache;
pub mod config;
pub mod experiment;
pub mod formats;
pub mod report;

pub use config::{load_config, parse_config, ExperimentConfig, Method, ReportFormat};
pub use experiment::{prepare, run_experiment, run_stage, ExperimentReport, Stage};

/// Toolkit version written into every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] duck_core::Error),
    #[error(transparent)]
    Format(#[from] formats::FormatError),
    #[error(transparent)]
    Cache(#[from] cache::CacheError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("report: {0}")]
    Report(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
