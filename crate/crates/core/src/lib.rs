//! Exact simulation of a two-prover, one-round quantum interactive proof for
//! gap 3-dimensional matching, together with numerical tools for rounding
//! almost-commuting projectors to commuting ones.
//!
//! Modules, bottom up:
//! - [`linalg`]: dense complex kernel (tensor products, SVD, Hermitian eigen,
//!   weighted Frobenius norms, SWAP test).
//! - [`gap3dm`]: degree-bounded instances, generators and an exact gap oracle.
//! - [`provers`]: prover strategies (shared Schmidt state plus four unitaries).
//! - [`protocol`]: the verifier, simulated exactly or sampled round by round.
//! - [`commuting`]: residual evaluators, projector rounding, successive
//!   diagonalization and the tensor-line construction.

pub mod commuting;
pub mod error;
pub mod gap3dm;
pub mod linalg;
pub mod protocol;
pub mod provers;
pub mod rng;

pub use error::{Error, Result};
