use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("series too short: length {len} but block memory k = {k} needs at least {}", k + 1)]
    SeriesTooShort { len: usize, k: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    /// More than one closed communicating class; each inner vector lists the
    /// states of one closed class.
    #[error("reducible chain: {} closed classes {classes:?}", classes.len())]
    Reducible { classes: Vec<Vec<usize>> },

    #[error("policy is not admissible: {0}")]
    NotAdmissible(Box<Error>),

    #[error("MDP is not weakly connected: state {} cannot reach state {}", .from, .to)]
    NotWeaklyConnected { from: usize, to: usize },

    #[error("enumeration guard exceeded: {what} needs {size} entries, limit {limit}")]
    EnumerationGuard { what: &'static str, size: f64, limit: f64 },

    #[error("empty candidate family")]
    EmptyFamily,

    #[error("target unattainable: {0}")]
    Unattainable(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by a numeric or enumeration cap rather than by
    /// malformed input.
    pub fn is_guard(&self) -> bool {
        matches!(self, Error::EnumerationGuard { .. } | Error::Unattainable(_))
    }
}
