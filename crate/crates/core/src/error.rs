use thiserror::Error;

use crate::planner::SearchFailure;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("protocol must contain at least one segment with positive total duration")]
    EmptyProtocol,

    #[error("state is not normalized: |a1|^2 + |a2|^2 = {0}")]
    NotNormalized(f64),

    #[error("matrix is not unitary: |D|^2 + |O|^2 - 1 = {0:e}")]
    NotUnitary(f64),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("integration step too coarse: step * Omega = {0} exceeds 0.1")]
    StepTooLarge(f64),

    #[error("no plan reached the threshold within {cap} segments (best achieved {best_achieved})", cap = .0.cap, best_achieved = .0.best.achieved)]
    SearchExhausted(Box<SearchFailure>),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
