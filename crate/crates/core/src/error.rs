use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("imaginary residue {residue:.3e} exceeds tolerance (relative to output norm)")]
    ImaginaryResidue { residue: f64 },

    #[error("boundary mass fraction {fraction:.3e} exceeds {threshold:.1e}; enlarge the box")]
    BoundaryMass { fraction: f64, threshold: f64 },

    #[error("dilation factor {0} outside the accuracy window [1/16, 16]")]
    DilationRange(f64),

    #[error("field has (near) zero mass")]
    ZeroMass,

    #[error("potential `{0}` has no analytic gradient; use an analytic family")]
    NoAnalyticPotential(&'static str),

    #[error("fiber degeneracy: no sign change of the fiber derivative in [2^-20, 2^20]")]
    FiberDegeneracy,

    #[error("non-unique critical dilation: {0} sign changes of the fiber derivative")]
    NonUniqueCriticalDilation(usize),

    #[error("fiber second derivative {0:.3e} at the critical dilation is not negative")]
    NonConcaveCritical(f64),

    #[error("criticality: 2s(p+2) - dp = {0} must be positive")]
    Criticality(f64),

    #[error("iteration diverged: {0}")]
    Divergence(String),

    #[error("maximum iterations ({0}) exceeded")]
    MaxIterations(usize),

    #[error("iterate collapsed (norm {0:.3e})")]
    Collapse(f64),

    #[error("line search failed after {0} halvings")]
    LineSearch(usize),

    #[error("admissibility: {0}")]
    Admissibility(String),

    #[error("config: {0}")]
    Config(String),

    #[error("field file: {0}")]
    FieldFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
