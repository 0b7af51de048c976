use nalgebra::DMatrix;

use super::matrix::{ComplexMatrix, C64, ZERO};
use super::state::{StateVector, WeightMatrix};
use crate::error::{Error, Result};

/// Tolerance for structural predicates (unitary, Hermitian, projector).
pub const STRUCTURAL_TOL: f64 = 1e-9;
/// Tolerance for identity checks.
pub const IDENTITY_TOL: f64 = 1e-12;

fn to_na(m: &ComplexMatrix) -> DMatrix<C64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

fn from_na(m: &DMatrix<C64>) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
}

/// Thin singular value decomposition `m = u * diag(singular_values) * v^dagger`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: ComplexMatrix,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let k = self.singular_values.len();
        let us = ComplexMatrix::from_fn(self.u.rows(), k, |r, c| self.u[(r, c)] * self.singular_values[c]);
        &us * &self.v.adjoint()
    }
}

pub fn svd(m: &ComplexMatrix) -> Svd {
    let dec = nalgebra::SVD::new(to_na(m), true, true);
    let u = from_na(dec.u.as_ref().expect("u requested"));
    let v = from_na(&dec.v_t.as_ref().expect("v requested").adjoint());
    Svd {
        u,
        singular_values: dec.singular_values.iter().copied().collect(),
        v,
    }
}

/// Closest unitary in Frobenius distance: `U V^dagger` from the SVD.
pub fn nearest_unitary(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    m.require_square()?;
    let dec = svd(m);
    let smax = dec.singular_values.first().copied().unwrap_or(0.0);
    let smin = dec.singular_values.last().copied().unwrap_or(0.0);
    if smin <= 1e-12 * smax.max(1.0) {
        log::warn!("nearest_unitary: rank-deficient input (min singular value {smin:.3e}); minimizer is not unique");
    }
    Ok(&dec.u * &dec.v.adjoint())
}

/// `Tr(m^dagger m)`.
pub fn frobenius_norm_sq(m: &ComplexMatrix) -> f64 {
    m.frobenius_norm_sq()
}

/// `||m D||_F^2` for diagonal `D`.
pub fn frobenius_norm_sq_weighted(m: &ComplexMatrix, d: &WeightMatrix) -> Result<f64> {
    if m.cols() != d.dim() {
        return Err(Error::DimensionMismatch {
            context: "weighted Frobenius norm",
            expected: m.cols(),
            found: d.dim(),
        });
    }
    let w = d.diagonal();
    let mut acc = 0.0;
    for r in 0..m.rows() {
        for (x, a) in m.row(r).iter().zip(w) {
            acc += x.norm_sqr() * a * a;
        }
    }
    Ok(acc)
}

/// Largest singular value.
pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    if m.rows() == 0 || m.cols() == 0 {
        return 0.0;
    }
    let dec = nalgebra::SVD::new(to_na(m), false, false);
    dec.singular_values.iter().copied().fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Unitary; column `k` belongs to `values[k]`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let vd = ComplexMatrix::from_fn(self.vectors.rows(), self.vectors.cols(), |r, c| {
            self.vectors[(r, c)] * self.values[c]
        });
        &vd * &self.vectors.adjoint()
    }
}

pub fn eig_hermitian(m: &ComplexMatrix) -> Result<HermitianEigen> {
    eig_hermitian_tol(m, STRUCTURAL_TOL)
}

pub fn eig_hermitian_tol(m: &ComplexMatrix, tol: f64) -> Result<HermitianEigen> {
    m.require_square()?;
    let deviation = m.hermitian_deviation();
    if deviation > tol {
        return Err(Error::NotHermitian { deviation, tol });
    }
    let n = m.rows();
    if n == 0 {
        return Ok(HermitianEigen {
            values: vec![],
            vectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let dec = nalgebra::SymmetricEigen::new(to_na(&m.hermitian_part()));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dec.eigenvalues[a].total_cmp(&dec.eigenvalues[b]));
    let values = order.iter().map(|&k| dec.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| dec.eigenvectors[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

/// `exp(i t H)` for Hermitian `H`.
pub fn exp_i_hermitian(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let eig = eig_hermitian(h)?;
    let phases: Vec<C64> = eig.values.iter().map(|&l| C64::from_polar(1.0, t * l)).collect();
    let vp = ComplexMatrix::from_fn(h.rows(), h.cols(), |r, c| eig.vectors[(r, c)] * phases[c]);
    Ok(&vp * &eig.vectors.adjoint())
}

fn check_swap_inputs(a: &StateVector, b: &StateVector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context: "SWAP test inputs",
            expected: a.dim(),
            found: b.dim(),
        });
    }
    a.require_normalized(STRUCTURAL_TOL)?;
    b.require_normalized(STRUCTURAL_TOL)
}

/// Acceptance probability of the SWAP test, `(1 + |<a|b>|^2) / 2`.
pub fn swap_test_probability(a: &StateVector, b: &StateVector) -> Result<f64> {
    check_swap_inputs(a, b)?;
    Ok(0.5 * (1.0 + a.inner(b)?.norm_sqr()))
}

/// Gate-level SWAP test: ancilla in `|0>`, Hadamard, controlled SWAP of the
/// two registers, Hadamard, then the probability of reading `|0>`.
pub fn swap_test_circuit(a: &StateVector, b: &StateVector) -> Result<f64> {
    check_swap_inputs(a, b)?;
    let d = a.dim();
    let ancilla = StateVector::from_vec(vec![C64::new(1.0, 0.0), ZERO]);
    let mut s = ancilla
        .tensor(&StateVector::from_vec(a.amplitudes().to_vec()))
        .tensor(&StateVector::from_vec(b.amplitudes().to_vec()));
    let h = hadamard();
    s.apply(&h, &[0])?;
    s.permute_digits(|x, y| {
        y[0] = x[0];
        if x[0] == 1 {
            y[1] = x[2];
            y[2] = x[1];
        } else {
            y[1] = x[1];
            y[2] = x[2];
        }
    });
    s.apply(&h, &[0])?;
    debug_assert_eq!(s.dim(), 2 * d * d);
    Ok(s.weight_where(|x| x[0] == 0))
}

pub fn hadamard() -> ComplexMatrix {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_real(2, 2, &[r, r, r, -r]).expect("2x2")
}
