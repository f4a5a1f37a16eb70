use smoothmech_lp::LpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("size cap exceeded: {what} has {count} entries, cap {cap}")]
    Size { what: String, count: u128, cap: u128 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("refinement_empty: {0}")]
    RefinementEmpty(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

pub type Result<T> = std::result::Result<T, Error>;
