use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("energy {energy} belongs to the singular set for d = {dim}")]
    SingularEnergy { energy: f64, dim: usize },

    #[error("energy {energy} lies outside [-{max}, {max}]", max = 2 * dim)]
    OutOfBand { energy: f64, dim: usize },

    #[error("energy {energy} is outside the convex regime 2d-4 < |E| < 2d for d = {dim}")]
    NonConvexRegime { energy: f64, dim: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("offset zeta must be non-zero")]
    ZeroOffset,

    #[error("measurement point is the origin")]
    ZeroPoint,

    #[error("point {point:?} lies inside the potential support box")]
    InsideSupport { point: Vec<i64> },

    #[error("{what} did not converge (residual {residual:e})")]
    NoConvergence { what: &'static str, residual: f64 },

    #[error("w = {w} is a band edge of the one-dimensional kernel")]
    BandEdge { w: f64 },

    #[error("quadrature not converged: refinement changed the value by {change:e} (tol {tol:e})")]
    QuadratureNotConverged { change: f64, tol: f64 },

    #[error("extrapolation unstable: {0}")]
    ExtrapolationUnstable(String),

    #[error("Lippmann-Schwinger system is numerically singular")]
    SingularSystem,

    #[error("|D| = {abs_det:e} is below the rejection threshold {threshold:e}")]
    NearSingularD { abs_det: f64, threshold: f64 },

    #[error("degenerate measurement separation: |sin| = {sine:e}")]
    DegenerateSeparation { sine: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

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
