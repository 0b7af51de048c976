//! Dense complex linear algebra: matrices, register-structured state vectors,
//! decompositions, norms and the SWAP-test primitive.

mod decomp;
mod matrix;
pub mod random;
mod state;

pub use decomp::{
    eig_hermitian, eig_hermitian_tol, exp_i_hermitian, frobenius_norm_sq, frobenius_norm_sq_weighted,
    hadamard, nearest_unitary, operator_norm, svd, swap_test_circuit, swap_test_probability,
    HermitianEigen, Svd, IDENTITY_TOL, STRUCTURAL_TOL,
};
pub use matrix::{tensor, tensor_all, ComplexMatrix, C64};
pub use state::{StateVector, WeightMatrix};
