use thiserror::Error;

/// Errors raised by the numerical layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("mass {mass:e} drifted from the constraint value {target:e}")]
    MassDrift { mass: f64, target: f64 },

    #[error("degenerate norm bundle: {0}")]
    DegenerateBundle(String),

    #[error("mass {c:e} is not below the threshold c0 = {c0:e}")]
    MassAboveThreshold { c: f64, c0: f64 },

    #[error(
        "no convergence after {iters} iterations (relative gradient {grad_norm:e}, Pohozaev residual {q_residual:e})"
    )]
    NotConverged {
        iters: usize,
        grad_norm: f64,
        q_residual: f64,
    },

    #[error("bending safeguard bound on {fraction:.3} of the steps; the constants are inconsistent with the problem")]
    SafeguardSaturated { fraction: f64 },

    #[error("truncation sensitivity {rel_change:e} exceeds {tolerance:e}; increase r_max")]
    TruncationSensitive { rel_change: f64, tolerance: f64 },

    #[error("field file: {0}")]
    FieldFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ParameterOutOfRange(_) => "parameter-out-of-range",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::GridMismatch => "grid-mismatch",
            Error::MassDrift { .. } => "mass-drift",
            Error::DegenerateBundle(_) => "degenerate-bundle",
            Error::MassAboveThreshold { .. } => "mass-above-threshold",
            Error::NotConverged { .. } => "not-converged",
            Error::SafeguardSaturated { .. } => "safeguard-saturated",
            Error::TruncationSensitive { .. } => "truncation-sensitive",
            Error::FieldFormat(_) => "field-format",
            Error::Io(_) => "io",
        }
    }
}
