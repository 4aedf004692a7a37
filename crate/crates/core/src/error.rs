use thiserror::Error;

/// Every fallible operation in the crate reports one of these.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("inadmissible state: {0}")]
    State(String),
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("rank error: {0}")]
    Rank(String),
    #[error("degenerate input: {0}")]
    Degeneracy(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("implicit solve failed: {msg} (last iterate {last:?})")]
    ImplicitSolve { msg: String, last: Vec<f64> },
    #[error("singular matrix (inverse condition {inv_cond:e}): {msg}")]
    Singular { msg: String, inv_cond: f64 },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("lift failed: {msg} (last iterate {last:?})")]
    Lift { msg: String, last: Vec<f64> },
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Guard used by evaluators: turn a non-finite number into an evaluation error.
pub(crate) fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation(format!("{what} is not finite")))
    }
}
