use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("mode `{mode}` requires a [{section}] section")]
    MissingSection { mode: String, section: String },
    #[error("{}{field}: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Range { field: String, line: Option<usize>, message: String },
    #[error("{path}: {message}")]
    Rve { path: PathBuf, message: String },
    #[error("invalid generator: {0}")]
    Generator(String),
    #[error("phase {phase} has no material{}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    UnknownPhase { phase: u32, line: Option<usize> },
    #[error("{path}: malformed output file: {message}")]
    Format { path: PathBuf, message: String },
    #[error("cannot compare runs: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Core(#[from] crom_core::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
