use thiserror::Error;

/// Errors raised by parameter validation, kernels, integrators and pipelines.
///
/// Every variant carries a stable code (see [`Error::code`]) so that front ends
/// can name the violated constraint without parsing messages.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("ERR_HURST: Hurst index H = {0} must lie in the open interval (1/2, 1)")]
    Hurst(f64),
    #[error("ERR_BETA: beta = {beta} must lie in the open interval ({lo:.5}, {hi}) for H = {hurst}")]
    Beta { beta: f64, lo: f64, hi: f64, hurst: f64 },
    #[error("ERR_GAMMA: gamma = {gamma} must satisfy 0 < gamma < beta = {beta} and beta + gamma < 1/2")]
    Gamma { gamma: f64, beta: f64 },
    #[error("ERR_DOMAIN: {0}")]
    Domain(String),
    #[error("ERR_N: n = {0} must be at least {1}")]
    N(u64, u64),
    #[error("ERR_SINGULAR: kernel evaluated at x = {x} >= s = {s}")]
    Singular { s: f64, x: f64 },
    #[error("ERR_DIAGONAL: Rosenblatt kernel is not defined on the diagonal y1 = y2 = {0}")]
    Diagonal(f64),
    #[error("ERR_QUAD_BUDGET: quadrature reached {evals} evaluations with relative error {rel_err:.3e} > target {target:.3e}")]
    QuadBudget { evals: usize, rel_err: f64, target: f64 },
    #[error("ERR_MESH: {0}")]
    Mesh(String),
    #[error("ERR_NO_CONVERGENCE: graded quadrature did not settle within {max_points} points (last change {last_change:.3e})")]
    NoConvergence { max_points: usize, last_change: f64 },
    #[error("ERR_BUDGET: {cells} cells exceed the limit of {limit}")]
    Budget { cells: usize, limit: usize },
    #[error("ERR_INPUT: {0}")]
    Input(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Hurst(_) => "ERR_HURST",
            Error::Beta { .. } => "ERR_BETA",
            Error::Gamma { .. } => "ERR_GAMMA",
            Error::Domain(_) => "ERR_DOMAIN",
            Error::N(..) => "ERR_N",
            Error::Singular { .. } => "ERR_SINGULAR",
            Error::Diagonal(_) => "ERR_DIAGONAL",
            Error::QuadBudget { .. } => "ERR_QUAD_BUDGET",
            Error::Mesh(_) => "ERR_MESH",
            Error::NoConvergence { .. } => "ERR_NO_CONVERGENCE",
            Error::Budget { .. } => "ERR_BUDGET",
            Error::Input(_) => "ERR_INPUT",
        }
    }

    /// True for errors caused by an invalid configuration rather than a numerical failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Hurst(_)
                | Error::Beta { .. }
                | Error::Gamma { .. }
                | Error::Domain(_)
                | Error::N(..)
                | Error::Mesh(_)
                | Error::Input(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
