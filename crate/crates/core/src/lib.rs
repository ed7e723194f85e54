//! Exact steady states of a Kitaev chain with on-site fermion loss whose
//! detector clicks are partially postselected away.
//!
//! A fraction `q` of the trajectories with a click is discarded, which
//! interpolates between the Lindblad average (`q = 0`) and the no-click
//! limit (`q = 1`). The steady state is Gaussian and translation invariant,
//! so everything reduces to a 2×2 Riccati equation per momentum.
//!
//! * [`model`] builds the operators from `(μ, γ, q, L)`.
//! * [`riccati`] solves the per-momentum steady state three ways.
//! * [`spatial`] transforms to real space, fits correlation lengths and
//!   bounds them through complex-momentum singularities.
//! * [`negativity`] computes the fermionic logarithmic negativity.
//! * [`spectrum`] gives rapidities and the Liouvillian gap.
//! * [`oracle`] is brute-force ground truth on a few sites.

pub mod error;
pub mod linalg;
pub mod model;
pub mod negativity;
pub mod oracle;
pub mod riccati;
pub mod spatial;
pub mod spectrum;

pub use error::{Error, Result};
pub use linalg::Mat2;
pub use model::ModelParams;

pub use faer::c64;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/steady-state.md")]
    mod steady_state {}
    #[doc = include_str!("../../../book/src/correlation-length.md")]
    mod correlation_length {}
    #[doc = include_str!("../../../book/src/negativity.md")]
    mod negativity {}
    #[doc = include_str!("../../../book/src/gap.md")]
    mod gap {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
