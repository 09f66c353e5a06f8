//! Desk-scale variational Monte Carlo toolkit.
//!
//! Two training loops are implemented end to end: energy minimization of a
//! Rayleigh quotient with a centered, unbiased stochastic gradient, and
//! supervised pre-training against a target function with a scale-invariant
//! loss and a directionally unbiased gradient estimator. Finite
//! configuration spaces come with brute-force enumeration oracles and dense
//! eigensolves so every estimator identity can be checked exactly; bounded
//! continuous boxes use Metropolis walker ensembles as the practical analog.
//!
//! Modules:
//! - [`model`]: configuration spaces, measures, inner products, Hamiltonians.
//! - [`ansatz`]: parametric wave functions and their derivative surface.
//! - [`sampler`]: exact categorical sampling and Metropolis walker chains.
//! - [`vmc`]: energy functional, its gradient, the estimator, the trainer.
//! - [`pretrain`]: scale-invariant supervised losses and trainer.
//! - [`diagnostics`]: convergence fits, assumption monitors, ledgers.
//! - [`oracle`]: exact expectations by enumeration, finite differences.
//! - [`trace`]: per-step CSV records.
//! - [`verify`]: the runnable invariant suite behind `vmckit verify`.

pub mod ansatz;
pub mod diagnostics;
pub mod error;
pub mod model;
pub mod oracle;
pub mod pretrain;
pub mod reduce;
pub mod sampler;
pub mod trace;
pub mod verify;
pub mod vmc;

pub use error::{Error, Result};
