use std::path::PathBuf;

use crate::coherent::ModeLabel;
use crate::protocol::CaseId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("mode sets differ: {lhs:?} vs {rhs:?}")]
    ModeSetMismatch {
        lhs: Vec<ModeLabel>,
        rhs: Vec<ModeLabel>,
    },

    #[error("mode {0} appears more than once")]
    DuplicateMode(ModeLabel),

    #[error("mode {0} is not part of the state")]
    MissingMode(ModeLabel),

    #[error("output label {0} collides with an existing mode")]
    LabelCollision(ModeLabel),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("term has {got} amplitudes, state has {expected} modes")]
    TermShape { expected: usize, got: usize },

    #[error("squared norm {0:e} is below the zero-norm threshold")]
    ZeroNorm(f64),

    #[error("state is not a product of single-mode factors")]
    NotFactorizable,

    #[error(
        "truncation tail {tail:e} exceeds budget {budget:e} for |beta| = {beta} at dimension {dim} (suggested dimension {suggested})"
    )]
    TailBudget {
        beta: f64,
        dim: usize,
        tail: f64,
        budget: f64,
        suggested: usize,
    },

    #[error(
        "enumerated mass {mass} leaves {missing:e} > tail budget {budget:e} at cutoff {cutoff}"
    )]
    TailUnreachable {
        mass: f64,
        missing: f64,
        budget: f64,
        cutoff: u32,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("no correction plan exists for {0}")]
    NotACase(CaseId),

    #[error("distribution is empty")]
    EmptyDistribution,

    #[error("protocol stalled: {0}")]
    Deadlock(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
