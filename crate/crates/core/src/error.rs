use crate::elliptic::LinearSolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("collar under-resolved: h = {h} exceeds 1/2")]
    CollarUnderResolved { h: f64 },

    #[error("box side {side} is not an integer multiple of h = {h}")]
    NonCommensurate { side: f64, h: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("boundary data for species {species} is negative or non-finite at {position:?}")]
    BadBoundaryValue { species: usize, position: Vec<f64> },

    #[error("separation violated between species {i} and {j} at node {position:?}")]
    SeparationViolated { i: usize, j: usize, position: Vec<f64> },

    #[error("linear solve did not reach tolerance: {report}")]
    LinearSolve { report: LinearSolveReport },

    #[error("outer iteration cap {cap} reached; last gap {last_gap:.3e}")]
    IterationCap { cap: usize, last_gap: f64, gap_history: Vec<f64> },

    #[error("nonlinear residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    Residual { residual: f64, tol: f64 },

    #[error("fixed-point iteration diverged after {iterations} steps (change {change:.3e})")]
    Diverged { iterations: usize, change: f64 },

    #[error("empty boundary set: no collar node exceeds sigma = {sigma}")]
    EmptyBoundarySet { sigma: f64 },

    #[error("no threshold crossing found at theta = {theta}")]
    NoCrossing { theta: f64 },

    #[error("configuration errors:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Geometry(_) => "geometry",
            Error::CollarUnderResolved { .. } => "collar_under_resolved",
            Error::NonCommensurate { .. } => "non_commensurate",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::BadBoundaryValue { .. } => "bad_boundary_value",
            Error::SeparationViolated { .. } => "separation_violated",
            Error::LinearSolve { .. } => "linear_solve",
            Error::IterationCap { .. } => "iteration_cap",
            Error::Residual { .. } => "residual",
            Error::Diverged { .. } => "diverged",
            Error::EmptyBoundarySet { .. } => "empty_boundary_set",
            Error::NoCrossing { .. } => "no_crossing",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
