//! Random matrices and states used by generators and tests.

use rand::Rng;
use rand_distr::StandardNormal;

use super::decomp::operator_norm;
use super::matrix::{ComplexMatrix, C64};
use super::state::StateVector;

fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Ginibre matrix with i.i.d. standard complex Gaussian entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian_c64(rng))
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of
/// `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let g = gaussian_matrix(d, d, rng);
    let qr = nalgebra::QR::new(nalgebra::DMatrix::from_row_slice(d, d, g.data()));
    let q = qr.q();
    let r = qr.r();
    ComplexMatrix::from_fn(d, d, |i, j| {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { C64::new(1.0, 0.0) };
        q[(i, j)] * phase
    })
}

/// Random Hermitian matrix scaled to operator norm 1.
pub fn hermitian_unit_norm<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let h = gaussian_matrix(d, d, rng).hermitian_part();
    let n = operator_norm(&h);
    h.scale_real(1.0 / n)
}

/// Random rank-`rank` orthogonal projector.
pub fn projector<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> ComplexMatrix {
    let u = haar_unitary(d, rng);
    let cols: Vec<usize> = (0..rank).collect();
    let all: Vec<usize> = (0..d).collect();
    let v = u.select(&all, &cols);
    &v * &v.adjoint()
}

/// Haar-random normalized single-register state.
pub fn state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> StateVector {
    let mut s = StateVector::from_vec((0..d).map(|_| gaussian_c64(rng)).collect());
    s.normalize();
    s
}
