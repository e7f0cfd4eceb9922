use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("geometry degenerate: {0}")]
    GeometryDegenerate(String),
    #[error("accuracy warning: {0}")]
    AccuracyWarning(String),
    #[error("self-adjointness violation: {0}")]
    SelfAdjointnessViolation(String),
    #[error("degeneracy resolution failed: {0}")]
    DegeneracyResolution(String),
    #[error("excluded mode: {0}")]
    ExcludedMode(String),
    #[error("contrast singular: {0}")]
    ContrastSingular(String),
    #[error("resonance singular: {0}")]
    ResonanceSingular(String),
    #[error("empty table")]
    EmptyTable,
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

pub type Result<T> = std::result::Result<T, Error>;
