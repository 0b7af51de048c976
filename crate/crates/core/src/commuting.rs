//! Almost-commuting projectors: relation residuals of prover blocks,
//! eigenvalue rounding, successive diagonalization, and two families of
//! test inputs (conjugated commuting projectors and tensor-line projectors).

use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gap3dm::Gap3DMInstance;
use crate::linalg::{
    eig_hermitian_tol, exp_i_hermitian, frobenius_norm_sq_weighted, random, tensor_all, ComplexMatrix,
    WeightMatrix, STRUCTURAL_TOL,
};
use crate::provers::{BlockDecomposition, Func};
use crate::rng::{child_seed, stream_rng};

/// Largest dimension that is ever materialized densely.
pub const MAX_DENSE_DIM: usize = 512;

/// Eigenvalue window accepted by [`round_to_projector`].
pub const EIGEN_WINDOW_TOL: f64 = 1e-9;

fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct ProjectorFamily {
    projectors: Vec<ComplexMatrix>,
    weight: WeightMatrix,
}

impl ProjectorFamily {
    pub fn new(projectors: Vec<ComplexMatrix>, weight: WeightMatrix) -> Result<Self> {
        for p in &projectors {
            p.require_square()?;
            check_dim("projector vs weight dimension", weight.dim(), p.rows())?;
            let h = p.hermitian_deviation();
            if h >= STRUCTURAL_TOL {
                return Err(Error::NotHermitian {
                    deviation: h,
                    tol: STRUCTURAL_TOL,
                });
            }
            let i = p.idempotent_deviation();
            if i >= STRUCTURAL_TOL {
                return Err(Error::NotProjector {
                    deviation: i,
                    tol: STRUCTURAL_TOL,
                });
            }
        }
        Ok(Self { projectors, weight })
    }

    pub fn projectors(&self) -> &[ComplexMatrix] {
        &self.projectors
    }

    pub fn weight(&self) -> &WeightMatrix {
        &self.weight
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.weight.dim()
    }

    /// Same family in a different order; `order[k]` is the old index of the
    /// new k-th projector.
    pub fn reordered(&self, order: &[usize]) -> Self {
        Self {
            projectors: order.iter().map(|&i| self.projectors[i].clone()).collect(),
            weight: self.weight.clone(),
        }
    }
}

/// A commuting family `U Q_i U†` with diagonal 0/1 `Q_i`, and its weighted
/// distance to a reference family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CommutingApproximation {
    pub basis: ComplexMatrix,
    /// Diagonals of the `Q_i`.
    pub q: Vec<Vec<u8>>,
    /// `||(P_i - U Q_i U†) D||_F^2` per projector.
    pub deltas: Vec<f64>,
    pub delta_max: f64,
    pub delta_mean: f64,
}

impl CommutingApproximation {
    fn from_parts(fam: &ProjectorFamily, basis: ComplexMatrix, q: Vec<Vec<u8>>) -> Result<Self> {
        let mut approx = Self {
            basis,
            q,
            deltas: Vec::new(),
            delta_max: 0.0,
            delta_mean: 0.0,
        };
        let deltas = fam
            .projectors
            .iter()
            .enumerate()
            .map(|(i, p)| frobenius_norm_sq_weighted(&p.try_sub(&approx.projector(i)?)?, &fam.weight))
            .collect::<Result<Vec<_>>>()?;
        approx.delta_max = deltas.iter().copied().fold(0.0, f64::max);
        approx.delta_mean = if deltas.is_empty() {
            0.0
        } else {
            deltas.iter().sum::<f64>() / deltas.len() as f64
        };
        approx.deltas = deltas;
        Ok(approx)
    }

    pub fn q_matrix(&self, i: usize) -> ComplexMatrix {
        let diag: Vec<f64> = self.q[i].iter().map(|&b| b as f64).collect();
        ComplexMatrix::from_real_diagonal(&diag)
    }

    /// `U Q_i U†`.
    pub fn projector(&self, i: usize) -> Result<ComplexMatrix> {
        // U Q U† = sum over kept columns of U
        let d = self.basis.rows();
        let kept: Vec<usize> = (0..d).filter(|&c| self.q[i][c] == 1).collect();
        let cols = self.basis.select(&(0..d).collect::<Vec<_>>(), &kept);
        cols.matmul(&cols.adjoint())
    }

    /// Checks unitarity of the basis and pairwise commutation of the
    /// rounded projectors, both within `tol` in Frobenius norm.
    pub fn verify(&self, tol: f64) -> Result<()> {
        let u = self.basis.unitary_deviation();
        if u >= tol {
            return Err(Error::NotUnitary { deviation: u, tol });
        }
        if let Some(bad) = self.q.iter().flatten().find(|&&b| b > 1) {
            return Err(Error::InvalidParameter(format!("Q entry {bad} is not 0/1")));
        }
        let ps = (0..self.q.len()).map(|i| self.projector(i)).collect::<Result<Vec<_>>>()?;
        for i in 0..ps.len() {
            for j in i + 1..ps.len() {
                let c = ps[i].commutator(&ps[j])?.frobenius_norm_sq().sqrt();
                if c >= tol {
                    return Err(Error::BoundViolated(format!("pair ({i},{j}) commutator {c:e}")));
                }
            }
        }
        Ok(())
    }
}

/// Averaged squared residuals of the zero-error relations of one question
/// label, plus their neighborhood-restricted forms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `n^{-1} sum_u sum_{v != v'} ||A^{u,v'} D (B^{u,v})^T||^2`
    pub testaz: f64,
    /// `n^{-1} sum_{u,v} ||A^{u,v} D - A^{u,v} D (B^{u,v})^T||^2`
    pub addb_left: f64,
    /// `n^{-1} sum_{u,v} ||A^{u,v} D (B^{u,v})^T - D (B^{u,v})^T||^2`
    pub addb_right: f64,
    /// `n^{-2} sum_{u,u',v,v'} ||A^{u,v} D (B^{u',v'})^T - A^{u',v'} D (B^{u,v})^T||^2`
    pub test1c: f64,
    /// `n^{-1} sum_{u,v} ||(A^{u,v} - (A^{u,v})† A^{u,v}) D||^2`
    pub projector: f64,
    /// `testaz` with `v` restricted to the neighborhood of `u`.
    pub testaz_neighborhood: f64,
    /// `test1c` with `v in N(u)`, `v' in N(u')`.
    pub test1c_neighborhood: f64,
    /// Largest entry deviation of `sum_v A^{u,v}` and `sum_u A^{u,v}` from `I`.
    pub row_sum_deviation: f64,
    pub column_sum_deviation: f64,
}

impl Residuals {
    pub fn max_relation(&self) -> f64 {
        [
            self.testaz,
            self.addb_left,
            self.addb_right,
            self.test1c,
            self.projector,
            self.testaz_neighborhood,
            self.test1c_neighborhood,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

#[derive(Default)]
struct ResidualSums {
    testaz: f64,
    testaz_nb: f64,
    addb_left: f64,
    addb_right: f64,
    projector: f64,
    test1c: f64,
    test1c_nb: f64,
}

/// Residuals of the zero-error relations for Alice's and Bob's blocks of
/// one question label. `B` enters transposed because both parties' blocks
/// act on the same Schmidt basis.
pub fn zero_error_residuals(
    a: &BlockDecomposition,
    b: &BlockDecomposition,
    weight: &WeightMatrix,
    inst: &Gap3DMInstance,
) -> Result<Residuals> {
    let n = inst.n();
    check_dim("alice blocks vs instance size", n, a.n())?;
    check_dim("bob blocks vs instance size", n, b.n())?;
    check_dim("alice private dimension vs weight", weight.dim(), a.d())?;
    check_dim("bob private dimension vs weight", weight.dim(), b.d())?;
    if a.func() != b.func() {
        return Err(Error::InvalidParameter("blocks must share a question label".into()));
    }
    let in_nbr = |u: usize, v: usize| {
        match a.func() {
            Func::Pi => inst.neighbors_v(u),
            Func::Sigma => inst.neighbors_w(u),
        }
        .binary_search(&v)
        .is_ok()
    };
    let dm = weight.to_matrix();
    // indexed u * n + v
    let ad: Vec<ComplexMatrix> = (0..n * n)
        .map(|k| a.block(k / n, k % n).matmul(&dm))
        .collect::<Result<_>>()?;
    let bt: Vec<ComplexMatrix> = (0..n * n).map(|k| b.block(k / n, k % n).transpose()).collect();
    let adbt = |k: usize, l: usize| ad[k].matmul(&bt[l]);

    let per_u: Vec<ResidualSums> = (0..n)
        .into_par_iter()
        .map(|u| -> Result<ResidualSums> {
            let mut r = ResidualSums::default();
            for v in 0..n {
                let k = u * n + v;
                for v2 in (0..n).filter(|&v2| v2 != v) {
                    let x = adbt(u * n + v2, k)?.frobenius_norm_sq();
                    r.testaz += x;
                    if in_nbr(u, v) {
                        r.testaz_nb += x;
                    }
                }
                let same = adbt(k, k)?;
                r.addb_left += ad[k].try_sub(&same)?.frobenius_norm_sq();
                r.addb_right += same.try_sub(&dm.matmul(&bt[k])?)?.frobenius_norm_sq();
                let blk = a.block(u, v);
                let defect = blk.try_sub(&blk.adjoint().matmul(blk)?)?;
                r.projector += frobenius_norm_sq_weighted(&defect, weight)?;
                for u2 in 0..n {
                    for v2 in 0..n {
                        let l = u2 * n + v2;
                        let x = adbt(k, l)?.try_sub(&adbt(l, k)?)?.frobenius_norm_sq();
                        r.test1c += x;
                        if in_nbr(u, v) && in_nbr(u2, v2) {
                            r.test1c_nb += x;
                        }
                    }
                }
            }
            Ok(r)
        })
        .collect::<Result<_>>()?;

    let mut s = ResidualSums::default();
    for r in &per_u {
        s.testaz += r.testaz;
        s.testaz_nb += r.testaz_nb;
        s.addb_left += r.addb_left;
        s.addb_right += r.addb_right;
        s.projector += r.projector;
        s.test1c += r.test1c;
        s.test1c_nb += r.test1c_nb;
    }
    let id = ComplexMatrix::identity(a.d());
    let (mut row_dev, mut col_dev) = (0.0f64, 0.0f64);
    for x in 0..n {
        let mut row = ComplexMatrix::zeros(a.d(), a.d());
        let mut col = row.clone();
        for y in 0..n {
            row = row.try_add(a.block(x, y))?;
            col = col.try_add(a.block(y, x))?;
        }
        row_dev = row_dev.max(row.max_abs_diff(&id));
        col_dev = col_dev.max(col.max_abs_diff(&id));
    }
    let nf = n as f64;
    Ok(Residuals {
        testaz: s.testaz / nf,
        addb_left: s.addb_left / nf,
        addb_right: s.addb_right / nf,
        test1c: s.test1c / (nf * nf),
        projector: s.projector / nf,
        testaz_neighborhood: s.testaz_nb / nf,
        test1c_neighborhood: s.test1c_nb / (nf * nf),
        row_sum_deviation: row_dev,
        column_sum_deviation: col_dev,
    })
}

/// Eigenbasis of a Hermitian matrix with eigenvalues rounded to 0/1,
/// ordered by descending eigenvalue so the 1s come first. Ties at 0.5
/// round down.
fn rounded_eigenbasis(s: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>, Vec<u8>)> {
    let eig = eig_hermitian_tol(s, STRUCTURAL_TOL)?;
    for &l in &eig.values {
        if !(-EIGEN_WINDOW_TOL..=1.0 + EIGEN_WINDOW_TOL).contains(&l) {
            return Err(Error::EigenvalueOutOfRange {
                value: l,
                lo: 0.0,
                hi: 1.0,
            });
        }
    }
    let d = s.rows();
    let order: Vec<usize> = (0..d).rev().collect();
    let vecs = eig.vectors.select(&(0..d).collect::<Vec<_>>(), &order);
    let values: Vec<f64> = order.iter().map(|&i| eig.values[i]).collect();
    let mu = values.iter().map(|&l| u8::from(l > 0.5)).collect();
    Ok((vecs, values, mu))
}

/// `V diag(mu) V†` restricted to the columns with `mu = 1`.
fn projector_from(vecs: &ComplexMatrix, mu: &[u8]) -> Result<ComplexMatrix> {
    let kept: Vec<usize> = (0..mu.len()).filter(|&i| mu[i] == 1).collect();
    let cols = vecs.select(&(0..vecs.rows()).collect::<Vec<_>>(), &kept);
    cols.matmul(&cols.adjoint())
}

/// Rounds every eigenvalue of `s` to the nearest of 0 and 1. Returns the
/// resulting projector and `||(S - P) D||_F^2`.
pub fn round_to_projector(s: &ComplexMatrix, weight: &WeightMatrix) -> Result<(ComplexMatrix, f64)> {
    s.require_square()?;
    check_dim("matrix vs weight dimension", weight.dim(), s.rows())?;
    let (vecs, _, mu) = rounded_eigenbasis(s)?;
    let p = projector_from(&vecs, &mu)?;
    let dist = frobenius_norm_sq_weighted(&s.try_sub(&p)?, weight)?;
    Ok((p, dist))
}

/// Rounds the family to a commuting one, one projector per round.
///
/// Round `k` diagonalizes the current `k`-th projector inside each block of
/// the common block structure (1-eigenvectors first), splits each block
/// accordingly, drops the off-block parts of the later projectors and
/// rounds their remaining diagonal blocks back to projectors.
pub fn successive_diagonalization(fam: &ProjectorFamily) -> Result<CommutingApproximation> {
    let d = fam.dim();
    let mut basis = ComplexMatrix::identity(d);
    let mut current = fam.projectors.clone();
    let mut blocks = vec![(0usize, d)];
    let mut q = Vec::with_capacity(fam.len());
    let all_rows: Vec<usize> = (0..d).collect();

    for k in 0..fam.len() {
        let (head, tail) = current.split_at_mut(k + 1);
        let pk = &head[k];
        let mut diag = vec![0u8; d];
        let mut refined = Vec::with_capacity(2 * blocks.len());
        let mut next: Vec<ComplexMatrix> = tail.iter().map(|_| ComplexMatrix::zeros(d, d)).collect();
        for &(start, len) in &blocks {
            let (vecs, _, mu) = rounded_eigenbasis(&pk.block(start, start, len, len))?;
            diag[start..start + len].copy_from_slice(&mu);
            let cols: Vec<usize> = (start..start + len).collect();
            basis.set_block(0, start, &basis.select(&all_rows, &cols).matmul(&vecs)?);

            let ones = mu.iter().filter(|&&x| x == 1).count();
            let children: Vec<(usize, usize)> =
                [(0, ones), (ones, len - ones)].into_iter().filter(|&(_, l)| l > 0).collect();
            let vadj = vecs.adjoint();
            for (later, out) in tail.iter().zip(next.iter_mut()) {
                let rotated = vadj.matmul(&later.block(start, start, len, len))?.matmul(&vecs)?;
                for &(cs, cl) in &children {
                    let (cv, _, cmu) = rounded_eigenbasis(&rotated.block(cs, cs, cl, cl).hermitian_part())?;
                    out.set_block(start + cs, start + cs, &projector_from(&cv, &cmu)?);
                }
            }
            refined.extend(children.iter().map(|&(cs, cl)| (start + cs, cl)));
        }
        for (t, m) in tail.iter_mut().zip(next) {
            *t = m;
        }
        blocks = refined;
        q.push(diag);
    }
    CommutingApproximation::from_parts(fam, basis, q)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairValue {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// `||(P_i P_j - P_j P_i) D||_F^2` for all `i < j`, in lexicographic order.
pub fn pairwise_commutators(fam: &ProjectorFamily) -> Result<Vec<PairValue>> {
    let m = fam.len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    pairs
        .into_par_iter()
        .map(|(i, j)| {
            let c = fam.projectors[i].commutator(&fam.projectors[j])?;
            Ok(PairValue {
                i,
                j,
                value: frobenius_norm_sq_weighted(&c, &fam.weight)?,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorStats {
    pub max: f64,
    pub mean: f64,
}

fn stats_of(values: &[PairValue]) -> CommutatorStats {
    if values.is_empty() {
        return CommutatorStats { max: 0.0, mean: 0.0 };
    }
    CommutatorStats {
        max: values.iter().map(|p| p.value).fold(0.0, f64::max),
        mean: values.iter().map(|p| p.value).sum::<f64>() / values.len() as f64,
    }
}

pub fn commutator_stats(fam: &ProjectorFamily) -> Result<CommutatorStats> {
    Ok(stats_of(&pairwise_commutators(fam)?))
}

const CONJUGATED_STREAM: u64 = 0x636f_6e6a;

/// Random diagonal 0/1 projectors `Q_i` (rank uniform in `1..d`), each
/// conjugated by `exp(i eps H_i)` with `H_i` Hermitian of unit operator
/// norm. Also returns the `Q_i` themselves as a commuting witness.
pub fn conjugated_commuting_family(
    m: usize,
    d: usize,
    eps: f64,
    seed: u64,
) -> Result<(ProjectorFamily, CommutingApproximation)> {
    if d < 2 || m == 0 {
        return Err(Error::InvalidParameter(format!("need m >= 1 and d >= 2, got m={m} d={d}")));
    }
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::InvalidParameter(format!("eps must be finite and >= 0, got {eps}")));
    }
    let parts: Vec<(ComplexMatrix, Vec<u8>)> = (0..m)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let mut rng = stream_rng(child_seed(seed, i as u64), CONJUGATED_STREAM);
            let rank = rng.random_range(1..d);
            let mut diag = vec![0u8; d];
            for pos in sample(&mut rng, d, rank) {
                diag[pos] = 1;
            }
            let h = random::hermitian_unit_norm(d, &mut rng);
            let qd: Vec<f64> = diag.iter().map(|&b| b as f64).collect();
            let q = ComplexMatrix::from_real_diagonal(&qd);
            if eps == 0.0 {
                return Ok((q, diag));
            }
            let v = exp_i_hermitian(&h, eps)?;
            let p = v.matmul(&q)?.matmul(&v.adjoint())?;
            Ok((p.hermitian_part(), diag))
        })
        .collect::<Result<_>>()?;
    let (projectors, q): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    let fam = ProjectorFamily::new(projectors, WeightMatrix::uniform(d))?;
    let truth = CommutingApproximation::from_parts(&fam, ComplexMatrix::identity(d), q)?;
    Ok((fam, truth))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Letter {
    Z,
    W,
}

pub fn eta(eps: f64) -> f64 {
    ((2.0 - eps) * eps).sqrt()
}

pub fn z_matrix() -> ComplexMatrix {
    ComplexMatrix::from_real_diagonal(&[1.0, -1.0])
}

/// `[[1 - eps, eta], [eta, eps - 1]]`: Hermitian, squares to `I`.
pub fn w_matrix(eps: f64) -> ComplexMatrix {
    let e = eta(eps);
    ComplexMatrix::from_real(2, 2, &[1.0 - eps, e, e, eps - 1.0]).expect("2x2")
}

fn letter_matrix(l: Letter, eps: f64) -> ComplexMatrix {
    match l {
        Letter::Z => z_matrix(),
        Letter::W => w_matrix(eps),
    }
}

pub fn is_prime(p: usize) -> bool {
    p >= 2 && (2..).take_while(|k| k * k <= p).all(|k| !p.is_multiple_of(k))
}

/// `(T + I) / 2` where `T` is a tensor product over the `p x p` grid of
/// qubits, with a Z or W letter at each point of the line
/// `{(x, slope * x + offset mod p)}` and identity elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorLineProjector {
    pub p: usize,
    pub slope: usize,
    pub offset: usize,
    /// Letter at the point with first coordinate `x`.
    pub letters: Vec<Letter>,
    pub eps: f64,
}

impl TensorLineProjector {
    pub fn new(p: usize, slope: usize, offset: usize, letters: Vec<Letter>, eps: f64) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::InvalidParameter(format!("grid side {p} is not prime")));
        }
        if slope >= p || offset >= p {
            return Err(Error::InvalidParameter(format!("slope {slope} / offset {offset} outside Z_{p}")));
        }
        check_dim("letters per line", p, letters.len())?;
        if !(0.0..=2.0).contains(&eps) {
            return Err(Error::InvalidParameter(format!("eps {eps} outside [0, 2]")));
        }
        Ok(Self {
            p,
            slope,
            offset,
            letters,
            eps,
        })
    }

    /// Grid positions `x * p + y` of the line, by increasing `x`.
    pub fn positions(&self) -> Vec<usize> {
        (0..self.p).map(|x| x * self.p + (self.slope * x + self.offset) % self.p).collect()
    }

    pub fn letter_at(&self, pos: usize) -> Option<Letter> {
        let x = pos / self.p;
        (x < self.p && (self.slope * x + self.offset) % self.p == pos % self.p).then(|| self.letters[x])
    }

    /// `2^{p^2}`, if it fits in memory at all.
    pub fn dim(&self) -> Option<usize> {
        let q = u32::try_from(self.p * self.p).ok()?;
        1usize.checked_shl(q).filter(|_| q < usize::BITS)
    }

    pub fn materialize(&self) -> Result<ComplexMatrix> {
        let dim = self.dim().unwrap_or(usize::MAX);
        if dim > MAX_DENSE_DIM {
            return Err(Error::TooLarge {
                n: dim,
                max: MAX_DENSE_DIM,
            });
        }
        let id = ComplexMatrix::identity(2);
        let factors: Vec<ComplexMatrix> = (0..self.p * self.p)
            .map(|pos| self.letter_at(pos).map_or_else(|| id.clone(), |l| letter_matrix(l, self.eps)))
            .collect();
        let t = tensor_all(&factors);
        Ok(t.try_add(&ComplexMatrix::identity(dim))?.scale_real(0.5))
    }
}

const LINES_STREAM: u64 = 0x6c69_6e65;

/// The first `num_lines` lines in slope-major order, each with uniformly
/// random letters.
pub fn regev_lines(p: usize, eps: f64, num_lines: usize, seed: u64) -> Result<Vec<TensorLineProjector>> {
    if !is_prime(p) {
        return Err(Error::InvalidParameter(format!("grid side {p} is not prime")));
    }
    if num_lines == 0 || num_lines > p * p {
        return Err(Error::InvalidParameter(format!("num_lines must be in 1..={}, got {num_lines}", p * p)));
    }
    let mut rng = stream_rng(seed, LINES_STREAM);
    (0..num_lines)
        .map(|k| {
            let letters = (0..p).map(|_| if rng.random::<bool>() { Letter::W } else { Letter::Z }).collect();
            TensorLineProjector::new(p, k / p, k % p, letters, eps)
        })
        .collect()
}

/// Materialized tensor-line family with `D = I / sqrt(2^{p^2})`.
pub fn regev_family(p: usize, eps: f64, num_lines: usize, seed: u64) -> Result<(Vec<TensorLineProjector>, ProjectorFamily)> {
    let lines = regev_lines(p, eps, num_lines, seed)?;
    let mats = lines.par_iter().map(|l| l.materialize()).collect::<Result<Vec<_>>>()?;
    let d = mats[0].rows();
    let fam = ProjectorFamily::new(mats, WeightMatrix::uniform(d))?;
    Ok((lines, fam))
}

/// Pairwise weighted commutator norms of tensor-line projectors without
/// materializing them.
///
/// Letters on disjoint positions commute, so `[T_i, T_j] = [a, b] (x) R`
/// with `R` unitary when the lines meet in one position carrying letters
/// `a != b`. Then `||[P_i, P_j] D||^2 = ||[a, b]||_F^2 / 32` for
/// `P = (T + I) / 2` and `D = I / sqrt(2^{p^2})`.
pub fn regev_commutators_analytic(lines: &[TensorLineProjector]) -> Result<Vec<PairValue>> {
    let Some(first) = lines.first() else {
        return Ok(Vec::new());
    };
    if lines.iter().any(|l| l.p != first.p || l.eps != first.eps) {
        return Err(Error::InvalidParameter("lines must share p and eps".into()));
    }
    let zw = z_matrix().commutator(&w_matrix(first.eps))?.frobenius_norm_sq() / 32.0;
    let mut out = Vec::new();
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let shared: Vec<usize> = lines[i]
                .positions()
                .into_iter()
                .filter(|&pos| lines[j].letter_at(pos).is_some())
                .collect();
            let value = match shared.as_slice() {
                [] => 0.0,
                [pos] if lines[i].letter_at(*pos) == lines[j].letter_at(*pos) => 0.0,
                [_] => zw,
                _ => {
                    return Err(Error::InvalidParameter(format!("lines {i} and {j} coincide")));
                }
            };
            out.push(PairValue { i, j, value });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SweepGenerator {
    Conjugated { m: usize, d: usize },
    Regev { p: usize, num_lines: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    pub d: usize,
    pub eps: f64,
    pub seed: u64,
    pub comm_max: f64,
    pub comm_mean: f64,
    pub delta_max: f64,
    pub delta_mean: f64,
    pub runtime_ms: u128,
    /// Conjugated families: delta of the generating commuting family.
    pub truth_delta_max: Option<f64>,
    /// Tensor-line families: analytic pair maximum and its largest
    /// disagreement with the dense pair values.
    pub comm_max_analytic: Option<f64>,
    pub analytic_dense_err: Option<f64>,
}

pub const SWEEP_HEADER: &str = "m,d,eps,seed,comm_max,comm_mean,delta_max,delta_mean,runtime_ms";

pub fn sweep_point(generator: &SweepGenerator, eps: f64, seed: u64) -> Result<SweepRow> {
    let start = Instant::now();
    let (fam, truth, analytic) = match *generator {
        SweepGenerator::Conjugated { m, d } => {
            let (fam, truth) = conjugated_commuting_family(m, d, eps, seed)?;
            (fam, Some(truth.delta_max), None)
        }
        SweepGenerator::Regev { p, num_lines } => {
            let (lines, fam) = regev_family(p, eps, num_lines, seed)?;
            (fam, None, Some(regev_commutators_analytic(&lines)?))
        }
    };
    let pairs = pairwise_commutators(&fam)?;
    let stats = stats_of(&pairs);
    let approx = successive_diagonalization(&fam)?;
    let (comm_max_analytic, analytic_dense_err) = match &analytic {
        Some(a) => (
            Some(stats_of(a).max),
            Some(a.iter().zip(&pairs).map(|(x, y)| (x.value - y.value).abs()).fold(0.0, f64::max)),
        ),
        None => (None, None),
    };
    Ok(SweepRow {
        m: fam.len(),
        d: fam.dim(),
        eps,
        seed,
        comm_max: stats.max,
        comm_mean: stats.mean,
        delta_max: approx.delta_max,
        delta_mean: approx.delta_mean,
        runtime_ms: start.elapsed().as_millis(),
        truth_delta_max: truth,
        comm_max_analytic,
        analytic_dense_err,
    })
}

/// One row per `(eps, seed)`, eps-major, computed in parallel.
pub fn delta_sweep(generator: &SweepGenerator, eps_grid: &[f64], seeds: &[u64]) -> Result<Vec<SweepRow>> {
    let points: Vec<(f64, u64)> = eps_grid.iter().flat_map(|&e| seeds.iter().map(move |&s| (e, s))).collect();
    points.into_par_iter().map(|(e, s)| sweep_point(generator, e, s)).collect()
}

/// CSV with [`SWEEP_HEADER`] plus the generator-specific columns.
pub fn sweep_csv(generator: &SweepGenerator, rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    match generator {
        SweepGenerator::Conjugated { .. } => out.push_str(",truth_delta_max"),
        SweepGenerator::Regev { .. } => out.push_str(",comm_max_analytic,analytic_dense_err"),
    }
    out.push('\n');
    let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
    for r in rows {
        out.push_str(&format!(
            "{},{},{:e},{},{:e},{:e},{:e},{:e},{}",
            r.m, r.d, r.eps, r.seed, r.comm_max, r.comm_mean, r.delta_max, r.delta_mean, r.runtime_ms
        ));
        match generator {
            SweepGenerator::Conjugated { .. } => out.push_str(&format!(",{}", opt(r.truth_delta_max))),
            SweepGenerator::Regev { .. } => out.push_str(&format!(
                ",{},{}",
                opt(r.comm_max_analytic),
                opt(r.analytic_dense_err)
            )),
        }
        out.push('\n');
    }
    out
}

/// Median of a slice; `NaN` when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}
