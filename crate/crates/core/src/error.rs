use thiserror::Error;

/// Failures reported by the geometry, flow and experiment routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("no convergence after {steps} steps (last residual {residual:e})")]
    NoConvergence { steps: usize, residual: f64 },

    #[error("degenerate alignment: smallest singular value of U1'U2 is {sigma_min:e}")]
    DegenerateAlignment { sigma_min: f64 },

    #[error("eigen-gap too small: lambda_r = {lambda_r}, lambda_r+1 = {lambda_next}")]
    DegenerateGap { lambda_r: f64, lambda_next: f64 },

    #[error("singular innovation covariance at t = {t}")]
    SingularSolve { t: f64 },

    #[error("rate fit failed: {0}")]
    Fit(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape(rows: usize, cols: usize) -> String {
    format!("{rows}x{cols}")
}

pub(crate) fn ensure_shape(
    context: &'static str,
    m: &nalgebra::DMatrix<f64>,
    rows: usize,
    cols: usize,
) -> Result<()> {
    if m.nrows() == rows && m.ncols() == cols {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected: shape(rows, cols),
            found: shape(m.nrows(), m.ncols()),
        })
    }
}
