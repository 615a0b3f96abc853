use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by basis construction, model validation, solving and I/O.
#[derive(Debug, Error)]
pub enum FkError {
    #[error("cut-off N = {0} outside the supported range 1..={max}", max = crate::basis::MAX_CUTOFF)]
    UnsupportedCutoff(usize),

    #[error("half-width ell must be positive and finite, got {0}")]
    InvalidHalfWidth(f64),

    #[error("Gram matrix deviates from identity by {defect:.3e} (limit {limit:.0e})")]
    GramDefect { defect: f64, limit: f64 },

    #[error("S_N is not unit upper triangular: defect {0:.3e}")]
    TriangularityDefect(f64),

    #[error("derivative order {0} not supported (expected 0..=3)")]
    DerivativeOrder(usize),

    #[error("evaluation point {x} lies outside [-{ell}, {ell}]")]
    OutOfInterval { x: f64, ell: f64 },

    #[error("negative diffusion coefficient {0}")]
    NegativeDiffusion(f64),

    #[error("survival probability argument {0} outside [0, {1}]")]
    AgeOutOfRange(f64, f64),

    #[error("density must be strictly positive for the logarithmic transform, got {0}")]
    NonPositiveDensity(f64),

    #[error("survival probability vanishes at age {0}; the transform is singular there")]
    SingularAge(f64),

    #[error("blow-up at node (i={i}, j={j}): {detail}")]
    BlowUp { i: usize, j: usize, detail: String },

    #[error("exponent {exponent:.3e} in the inverse transform would overflow")]
    Overflow { exponent: f64 },

    #[error("{name} argument {value} outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("unknown preset example id {0} (expected 1, 2 or 3)")]
    UnknownPreset(u32),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    InvalidConfig(Vec<String>),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("zero reference field in relative error")]
    ZeroReference,

    #[error(
        "CFL violation: D*dt/dx^2 = {ratio:.4} > 0.5; refine dt by at least a factor {required}"
    )]
    Cfl { ratio: f64, required: usize },

    #[error("{context}: {source}")]
    Io {
        context: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl FkError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FkError::Io {
            context: path.into(),
            source,
        }
    }
}

pub type Result<T, E = FkError> = std::result::Result<T, E>;
