use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("region {0} is below grid resolution (no cell centers inside)")]
    UnresolvedRegion(String),

    #[error("region {0} is not contained in the grid box")]
    RegionOutsideGrid(String),

    #[error("invalid dyadic net: {0}")]
    InvalidNet(String),

    #[error("ball {0} lies outside the base ball of the sample")]
    OutsideBaseBall(String),

    #[error("ellipticity violated at {location}: {detail}")]
    Ellipticity { location: String, detail: String },

    #[error("gradient of the coefficient field is not available for {0} fields")]
    GradientUnavailable(&'static str),

    #[error("solver did not converge after {iterations} iterations (relative residual {final_residual:.3e})")]
    SolverFailure {
        iterations: usize,
        final_residual: f64,
        history: Vec<f64>,
    },

    #[error("degenerate solution: zero energy on {0}")]
    DegenerateSolution(String),

    #[error("solution is not positive at {0}")]
    PositivityViolation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no admissible samples: {0}")]
    NoAdmissibleSamples(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
