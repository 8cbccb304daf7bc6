use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite plant evaluation at x1={x1:?}, x2={x2:?}")]
    Evaluation { x1: Vec<f64>, x2: Vec<f64> },

    #[error("plant violates the requested class: {0}")]
    Construction(String),

    #[error("f(.,0) is not conservative on the segment (symmetry residual {residual:e})")]
    NotConservative { residual: f64 },

    #[error("matrix field is not a Hessian field (residual {residual:e})")]
    NotHessianField { residual: f64 },

    #[error("gains outside the required region: {inequality} fails with margin {margin}")]
    Region { inequality: String, margin: f64 },

    #[error("certificate invalid: {inequality} fails with margin {margin}")]
    CertificateInvalid { inequality: String, margin: f64 },

    #[error("certificate not applicable: {0}")]
    CertificateInapplicable(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("step size underflow at t={t} (stiff or singular dynamics), state {state:?}")]
    Stiffness { t: f64, state: Vec<f64> },

    #[error("gains lie inside the necessary region; no counterexample is claimed")]
    NoCounterexampleClaimed,

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
