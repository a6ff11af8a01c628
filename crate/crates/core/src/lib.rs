//! Gaussian joint embeddings (GJE) and Gaussian-mixture joint embeddings (GMJE).
//!
//! The crate models a context embedding `z_c` and a target embedding `z_t`
//! through their joint density and predicts by closed-form conditioning.
//!
//! - [`gaussian`]: multivariate normal algebra.
//! - [`gje`]: primal and dual single-Gaussian objectives, RFF, HSIC.
//! - [`mixture`]: joint mixtures, prototype losses, EM, sampling, the InfoNCE bridge.
//! - [`neural`]: a small MLP with manual backprop, Adam, and mixture density networks.
//! - [`gng`]: growing neural gas prototype discovery.
//! - [`smc`]: particle-filter memory banks and a FIFO baseline.
//! - [`synth`]: the two-dimensional multi-branch datasets.
//! - [`eval`]: branch-matching and purity scores for those datasets.

pub mod error;
pub mod eval;
pub mod gaussian;
pub mod gje;
pub mod gng;
pub mod linalg;
pub mod mixture;
pub mod neural;
pub mod rng;
pub mod smc;
pub mod synth;

#[cfg(test)]
pub(crate) mod test_util;

pub use error::{Error, Result};
