use thiserror::Error;

/// Errors raised by the solvers, loaders and tuning rules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0} of the design matrix is identically zero")]
    ZeroColumn(usize),
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid group structure: {0}")]
    InvalidGroups(String),
    #[error("formula undefined in this regime: {0}")]
    InvalidRegime(String),
    #[error("unsupported query: {0}")]
    Unsupported(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("factorization failed: {0}")]
    FactorizationFailure(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
