use thiserror::Error;

/// Errors produced by the inference engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("solver did not converge after {sweeps} sweeps (max KKT violation {residual:e})")]
    NotConverged { sweeps: usize, residual: f64 },

    #[error("Gram matrix is rank deficient (condition number {condition:e})")]
    RankDeficient { condition: f64 },

    #[error("degenerate selection: scores tied between columns {first} and {second}")]
    DegenerateSelection { first: usize, second: usize },

    #[error("response lies outside the selection event (max constraint violation {violation:e})")]
    OutsideEvent { violation: f64 },

    #[error(
        "could not bracket the {side} confidence limit: F = {value} at m = {at} after {doublings} doublings"
    )]
    Bracketing {
        side: &'static str,
        at: f64,
        value: f64,
        doublings: u32,
    },

    #[error(
        "campaign produced {usable} usable pivots out of {required} required after {attempted} replications; \
         consider a smaller lambda or a stronger beta0"
    )]
    Campaign {
        usable: usize,
        required: usize,
        attempted: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            found,
        })
    }
}
