//! Presets, sweeps, CSV emission and the self-test suite behind the
//! `echoform` binary.

pub mod acceptance;
pub mod output;
pub mod presets;
pub mod run;
pub mod sweep;

use std::fmt;
use std::path::PathBuf;

use echoform::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration:\n{}", ErrorList(.0))]
    Config(Vec<ConfigError>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Sim(#[from] echoform::Error),
}

struct ErrorList<'a>(&'a [ConfigError]);

impl fmt::Display for ErrorList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  {e}")?;
        }
        Ok(())
    }
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 usage or config, 3 I/O, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Sim(echoform::Error::InvalidArgument(_))
            | CliError::Sim(echoform::Error::Overlap { .. })
            | CliError::Sim(echoform::Error::NotApplicable(_)) => 2,
            CliError::Sim(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Parses and validates a config document.
pub fn load_spec(text: &str) -> Result<echoform::ExperimentSpec> {
    echoform::parse_config(text).map_err(CliError::Config)
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_workers<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} workers: {e}")))?;
    Ok(pool.install(f))
}
