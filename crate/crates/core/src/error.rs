use crate::{ClusterId, PhaseId};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("index {index:?} out of range for grid {dims:?}")]
    IndexOutOfRange { index: Vec<usize>, dims: Vec<usize> },
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("unsupported dimension {0}: only 2D plane strain is implemented")]
    UnsupportedDimension(usize),
    #[error("invalid reference material (lambda = {lambda}, mu = {mu})")]
    InvalidReference { lambda: f64, mu: f64 },
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("unknown phase {0}")]
    UnknownPhase(PhaseId),
    #[error("unknown cluster {0}")]
    UnknownCluster(ClusterId),
    #[error("empty cluster {0}")]
    EmptyCluster(ClusterId),
    #[error("invalid clustering request: {0}")]
    InvalidClustering(String),
    #[error("return mapping did not converge after {iterations} iterations (residual {residual:e})")]
    ReturnMapping { iterations: usize, residual: f64 },
    #[error("singular Jacobian at Newton iteration {iteration}; cut the increment")]
    SingularJacobian { iteration: usize },
    #[error("Newton-Raphson did not converge in {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("increment {increment} failed after {cuts} cuts: {source}")]
    IncrementFailed {
        increment: usize,
        cuts: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("full-field solver did not converge in {iterations} iterations (change {change:e})")]
    FullFieldDivergence { iterations: usize, change: f64 },
    #[error("retained cluster {0} changed its voxel set")]
    RetainedClusterChanged(ClusterId),
    #[error("cluster {0} has no ancestor in the rewind snapshot")]
    HierarchyCorrupted(ClusterId),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("zero reference value in relative error")]
    ZeroReference,
    #[error("corrupt interaction matrix dump: {0}")]
    CorruptDump(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
