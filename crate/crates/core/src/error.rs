use crate::model::ValidationReport;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid system: {0}")]
    Validation(ValidationReport),
    #[error("unsupported interconnection block: {0}")]
    UnsupportedInterconnection(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("infeasible at gamma_hi = {gamma_hi}")]
    InfeasibleAtGammaHi { gamma_hi: f64 },
    #[error("slack variable numerically singular (condition number {cond:.3e})")]
    SingularF { cond: f64 },
    #[error("certificate verification failed at gamma = {gamma}: {detail}")]
    VerificationFailed { gamma: f64, detail: String },
    #[error("{what}: size {size} exceeds limit {limit}")]
    SizeGuard { what: &'static str, size: usize, limit: usize },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("unknown fixture '{0}'")]
    UnknownFixture(String),
}

pub type Result<T> = std::result::Result<T, Error>;
