//! Run orchestration for the wave and chain pipelines: config ingestion,
//! deterministic execution on a worker pool, sweeps and manifests.

use std::path::PathBuf;

pub mod config;
pub mod manifest;
pub mod oracle;
pub mod pipeline;
pub mod sweep;

pub use config::{Pipeline, RunConfig};
pub use manifest::{verify, RunManifest};
pub use pipeline::{run, Check, RunOutcome};
pub use sweep::{run_sweep, SweepReport};

/// Environment variable read for the default worker count.
pub const WORKERS_ENV: &str = "WAVECHAIN_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("numerical failure: {source}{}", last_good.as_ref().map(|p| format!(" (last good state: {})", p.display())).unwrap_or_default())]
    Numerical {
        source: wavechain_core::Error,
        last_good: Option<PathBuf>,
    },

    #[error("{0}")]
    Io(String),

    #[error("acceptance check failed: {0}")]
    Acceptance(String),
}

impl HarnessError {
    /// Process exit status: 1 config, 2 numerical or i/o, 3 acceptance.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } => 1,
            HarnessError::Numerical { .. } | HarnessError::Io(_) => 2,
            HarnessError::Acceptance(_) => 3,
        }
    }

    pub(crate) fn io(what: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        HarnessError::Io(format!("{what}: {e}"))
    }
}

impl From<wavechain_core::Error> for HarnessError {
    fn from(e: wavechain_core::Error) -> Self {
        use wavechain_core::Error as E;
        match e {
            e if e.is_numerical() => HarnessError::Numerical {
                source: e,
                last_good: None,
            },
            E::InvalidParameter { name, reason } => HarnessError::Config {
                field: name.to_string(),
                reason,
            },
            E::Io { .. } | E::Format { .. } => HarnessError::Io(e.to_string()),
            other => HarnessError::Config {
                field: "<parameters>".into(),
                reason: other.to_string(),
            },
        }
    }
}

/// Worker count: explicit value, else [`WORKERS_ENV`], else all cores.
pub fn resolve_workers(explicit: Option<usize>) -> Result<usize, HarnessError> {
    if let Some(n) = explicit {
        return if n == 0 {
            Err(HarnessError::Config {
                field: "--workers".into(),
                reason: "must be at least 1".into(),
            })
        } else {
            Ok(n)
        };
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| HarnessError::Config {
            field: WORKERS_ENV.into(),
            reason: format!("expected a positive integer, got {v:?}"),
        }),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::io("worker pool", e))?;
    Ok(pool.install(f))
}
