use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {0} out of range (expected 2..=6)")]
    Dimension(usize),

    #[error("axis {axis}: {count} nodes, at least 5 required")]
    TooFewNodes { axis: usize, count: usize },

    #[error("axis {axis}: degenerate box [{lower}, {upper}]")]
    DegenerateBox { axis: usize, lower: f64, upper: f64 },

    #[error("expected {expected} entries, got {got}")]
    Length { expected: usize, got: usize },

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("fields live on different domains")]
    DomainMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("expected skew rank {expected}, found {found}")]
    Rank { expected: usize, found: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("U is not closed: max |U_IJ| = {max:.3e} at node {node} (entry {i},{j}), tolerance {tol:.3e}")]
    NotClosed {
        max: f64,
        node: usize,
        i: usize,
        j: usize,
        tol: f64,
    },

    #[error("line search step underflow in stage {stage} (eps = {eps:.1e}) at iteration {iteration}: objective {objective:.12e}, residual {residual:.3e}")]
    StepUnderflow {
        stage: usize,
        eps: f64,
        iteration: usize,
        objective: f64,
        residual: f64,
    },

    #[error("objective diverged in stage {stage} at iteration {iteration}")]
    Diverged { stage: usize, iteration: usize },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
