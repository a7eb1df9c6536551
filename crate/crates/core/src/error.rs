use thiserror::Error;

/// Errors raised by the numerical pipelines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("box side {side} must exceed twice the interaction range {range}")]
    BoxTooSmall { side: f64, range: f64 },

    #[error("point {index} lies outside the region")]
    PointOutsideBox { index: usize },

    #[error("chain settings cannot change the point count (birth and death probabilities are zero)")]
    NonErgodicSettings,

    #[error("quadrature dimension {dim}x{kmax} exceeds the supported cap")]
    DimensionTooLarge { dim: usize, kmax: usize },

    #[error("evaluation point hits a singular center")]
    SingularPoint,

    #[error("cutoff radius {cutoff} is below the required minimum {required}")]
    CutoffTooSmall { cutoff: f64, required: f64 },

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("symmetric factorization broke down at shift {shift}")]
    FactorizationBreakdown { shift: f64 },

    #[error("eigen-iteration did not converge; eigenvalue bracket [{lo}, {hi}]")]
    NoConvergence { lo: f64, hi: f64 },

    #[error("energy {energy} lies below the invertibility onset")]
    BelowOnset { energy: f64 },

    #[error("well combination never binds (not in D_q) up to coupling {g_max}")]
    NotInDq { g_max: f64 },

    #[error("invalid well combination: {0}")]
    InvalidCombination(String),

    #[error("packing grid has {candidates} candidate points (limit {limit})")]
    GridTooLarge { candidates: usize, limit: usize },

    #[error("{q} wells exceed the exact solver cap of {cap}")]
    TooManyWells { q: usize, cap: usize },

    #[error("hypothesis `{check}` is not met: {detail}")]
    HypothesisUnmet { check: String, detail: String },

    #[error("fit window has {usable} usable points, need at least {needed}")]
    EmptyWindow { usable: usize, needed: usize },

    #[error("grid too large: {nodes} nodes exceeds the cap {cap}")]
    GridCap { nodes: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
