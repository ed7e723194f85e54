use faer::c64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode of the library. Variants carry enough context to
/// report the failing parameter point.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("degenerate momentum k = {k}: {reason}")]
    DegenerateMomentum { k: c64, reason: &'static str },

    #[error("closed-form solution needs q > 0")]
    ZeroQ,

    #[error("no physical Riccati solution at k = {k}; candidate residuals {residuals:?}")]
    NoPhysicalSolution { k: c64, residuals: Vec<f64> },

    #[error("eigenvector block singular for every admissible pair at k = {k}")]
    DegenerateEigenbasis { k: c64 },

    #[error("Lyapunov operator singular at k = {k}; gamma = 0 with q = 0 has no unique steady state")]
    SingularLyapunov { k: c64 },

    #[error("not converged after t = {time}: residual {residual:e}, trace drift {drift:e}")]
    NotConverged { time: f64, residual: f64, drift: f64 },

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("invalid fit window [{lo}, {hi}] for L = {l}")]
    InvalidWindow { lo: usize, hi: usize, l: usize },

    #[error("no discontinuity found below Im k = {im_max}")]
    EmptyScan { im_max: f64 },

    #[error("composite covariance is ill conditioned (block length {ell})")]
    IllConditionedComposite { ell: usize },

    #[error("eigenvalues without a (beta, -beta) partner: {unpaired:?}")]
    PairingFailure { unpaired: Vec<c64> },

    #[error("every trajectory was discarded at t = {time}")]
    AllDiscarded { time: f64 },

    #[error("{what} supports L <= {max}, got L = {l}")]
    TooLarge { what: &'static str, l: usize, max: usize },

    #[error("dense linear algebra failed: {0}")]
    Linalg(String),
}
