use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A closed-form expression left its mathematical domain, which means the
    /// formula and the operator implementation disagree.
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    #[error("bands touch at q = ({qx:.6}, {qy:.6}) (sin eps = {sin_eps:.3e})")]
    DegeneratePoint { qx: f64, qy: f64, sin_eps: f64 },

    #[error("delta = {delta:.6} is near-critical: minimum gap {gap:.3e} on the sampled grid")]
    NearCritical { delta: f64, gap: f64 },

    #[error("walker window overflow along {axis} (auto-grow disabled)")]
    WindowOverflow { axis: &'static str },

    #[error("ambiguous edge-branch tracking near q_y = {q_y:.6}; refine the q_y resolution")]
    RefineResolution { q_y: f64 },

    #[error("path-sum model is limited to {max} steps, got {steps}")]
    CombinatorialLimit { steps: usize, max: usize },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("spot fit diverged: {0}")]
    FitDivergence(String),

    #[error("image holds no power")]
    EmptyImage,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite, got {value}")))
    }
}
