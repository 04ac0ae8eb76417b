use thiserror::Error;

/// Errors raised by model construction, propagation and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid device parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),

    #[error("Hilbert space dimension {dim} exceeds the configured maximum of {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("{what}: |detuning| = {detuning:.6e} rad/s is below the resonance floor {floor:.6e} rad/s")]
    Resonance {
        what: &'static str,
        detuning: f64,
        floor: f64,
    },

    #[error(
        "leakage region: dressed state {label} lost its computational character at Omega = {omega:.6e} rad/s \
         (overlap {overlap:.3})"
    )]
    LeakageRegion {
        label: String,
        omega: f64,
        overlap: f64,
    },

    #[error("integration tolerance {tol:.1e} not met within {max_steps} steps (last error estimate {achieved:.3e})")]
    ToleranceNotMet {
        tol: f64,
        achieved: f64,
        max_steps: usize,
    },

    #[error("invalid pulse: {0}")]
    InvalidPulse(String),

    #[error("process tomography frame is rank deficient (rank {rank} of 16); deficient directions: {directions}")]
    RankDeficient { rank: usize, directions: String },

    #[error("physicality projection did not converge after {iterations} iterations (residual {residual:.3e})")]
    ProjectionNotConverged { iterations: usize, residual: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("configuration invalid:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("at grid point {context}: {source}")]
    AtGridPoint {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps a numerical failure with the grid point it came from.
    pub fn at(self, context: impl Into<String>) -> Self {
        Error::AtGridPoint {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for configuration problems (as opposed to numerical failures).
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::InvalidParams(_) | Error::DimensionTooLarge { .. } | Error::InvalidPulse(_) => {
                true
            }
            Error::AtGridPoint { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
