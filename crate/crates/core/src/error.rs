use thiserror::Error;

use crate::units::Unit;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown unit tag `{0}`")]
    UnknownUnit(String),

    #[error("cannot convert {from} to {to}")]
    DimensionMismatch { from: Unit, to: Unit },

    #[error("{}", distribution_message(*line, msg))]
    Distribution { line: usize, msg: String },

    #[error("step-size refinement did not converge: population change {change:.3e} after {refinements} halvings")]
    Convergence { change: f64, refinements: usize },

    #[error("propagating initial state j={j}, m={m}: {source}")]
    InitialState {
        j: usize,
        m: i32,
        #[source]
        source: Box<Error>,
    },

    #[error("at delay {delay_fs} fs: {source}")]
    Delay {
        delay_fs: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("for dalpha = {dalpha} a0^3: {source}")]
    Dalpha {
        dalpha: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("analysis: {0}")]
    Analysis(String),
}

/// Line 0 means the problem is not tied to a particular line.
fn distribution_message(line: usize, msg: &str) -> String {
    if line == 0 {
        format!("distribution: {msg}")
    } else {
        format!("distribution line {line}: {msg}")
    }
}

impl Error {
    /// Short machine-readable category used for exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) | Error::UnknownUnit(_) | Error::DimensionMismatch { .. } => {
                "validation"
            }
            Error::Distribution { .. } => "distribution",
            Error::Convergence { .. } => "propagation",
            Error::InitialState { source, .. }
            | Error::Delay { source, .. }
            | Error::Dalpha { source, .. } => source.category(),
            Error::Analysis(_) => "analysis",
        }
    }
}
