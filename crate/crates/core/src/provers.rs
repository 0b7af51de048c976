//! Prover strategies: a shared Schmidt-form state `sum_i alpha_i |i>_A |i>_B`
//! and four unitaries acting on `message (x) private` for each prover and
//! each question label. Index layout of every unitary is
//! `message * d + private`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gap3dm::{Gap3DMInstance, Matching};
use crate::linalg::{
    exp_i_hermitian, random, ComplexMatrix, StateVector, WeightMatrix, C64, STRUCTURAL_TOL,
};
use crate::rng::stream_rng;

/// Default cap on private register dimensions.
pub const DEFAULT_MAX_PRIVATE_DIM: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

/// Question label sent to a prover.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Func {
    Pi,
    Sigma,
}

impl Func {
    pub const BOTH: [Func; 2] = [Func::Pi, Func::Sigma];
}

#[derive(Clone, Copy, Debug)]
pub struct Limits {
    pub max_private_dim: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_private_dim: DEFAULT_MAX_PRIVATE_DIM,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProverStrategy {
    n: usize,
    d_a: usize,
    d_b: usize,
    shared: WeightMatrix,
    a_pi: ComplexMatrix,
    a_sigma: ComplexMatrix,
    b_pi: ComplexMatrix,
    b_sigma: ComplexMatrix,
}

impl ProverStrategy {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        d_a: usize,
        d_b: usize,
        shared: WeightMatrix,
        a_pi: ComplexMatrix,
        a_sigma: ComplexMatrix,
        b_pi: ComplexMatrix,
        b_sigma: ComplexMatrix,
    ) -> Result<Self> {
        Self::with_limits(n, d_a, d_b, shared, [a_pi, a_sigma, b_pi, b_sigma], &Limits::default())
    }

    /// `unitaries` in the order `a_pi, a_sigma, b_pi, b_sigma`.
    pub fn with_limits(
        n: usize,
        d_a: usize,
        d_b: usize,
        shared: WeightMatrix,
        unitaries: [ComplexMatrix; 4],
        limits: &Limits,
    ) -> Result<Self> {
        if n == 0 || d_a == 0 || d_b == 0 {
            return Err(Error::InvalidParameter("strategy dimensions must be positive".into()));
        }
        for d in [d_a, d_b] {
            if d > limits.max_private_dim {
                return Err(Error::InvalidParameter(format!(
                    "private dimension {d} exceeds the limit {}",
                    limits.max_private_dim
                )));
            }
        }
        if shared.dim() != d_a.min(d_b) {
            return Err(Error::DimensionMismatch {
                context: "Schmidt coefficients",
                expected: d_a.min(d_b),
                found: shared.dim(),
            });
        }
        for (k, u) in unitaries.iter().enumerate() {
            let dim = n * if k < 2 { d_a } else { d_b };
            if u.shape() != (dim, dim) {
                return Err(Error::DimensionMismatch {
                    context: "prover unitary",
                    expected: dim,
                    found: u.rows(),
                });
            }
            let deviation = u.unitary_deviation();
            if deviation > STRUCTURAL_TOL {
                return Err(Error::NotUnitary {
                    deviation,
                    tol: STRUCTURAL_TOL,
                });
            }
        }
        let [a_pi, a_sigma, b_pi, b_sigma] = unitaries;
        Ok(Self {
            n,
            d_a,
            d_b,
            shared,
            a_pi,
            a_sigma,
            b_pi,
            b_sigma,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn private_dim(&self, side: Side) -> usize {
        match side {
            Side::A => self.d_a,
            Side::B => self.d_b,
        }
    }

    pub fn shared(&self) -> &WeightMatrix {
        &self.shared
    }

    pub fn unitary(&self, side: Side, f: Func) -> &ComplexMatrix {
        match (side, f) {
            (Side::A, Func::Pi) => &self.a_pi,
            (Side::A, Func::Sigma) => &self.a_sigma,
            (Side::B, Func::Pi) => &self.b_pi,
            (Side::B, Func::Sigma) => &self.b_sigma,
        }
    }

    fn unitaries(&self) -> [&ComplexMatrix; 4] {
        [&self.a_pi, &self.a_sigma, &self.b_pi, &self.b_sigma]
    }

    /// `sum_i alpha_i |i>_A |i>_B` on registers `[d_a, d_b]`.
    pub fn shared_state(&self) -> StateVector {
        let mut s = StateVector::zeros(&[self.d_a, self.d_b]);
        for (i, &a) in self.shared.diagonal().iter().enumerate() {
            s.amplitudes_mut()[i * self.d_b + i] = C64::new(a, 0.0);
        }
        s
    }

    pub fn to_json(&self) -> String {
        let enc = |m: &ComplexMatrix| -> Vec<Vec<[f64; 2]>> {
            (0..m.rows())
                .map(|r| m.row(r).iter().map(|z| [z.re, z.im]).collect())
                .collect()
        };
        let raw = StrategyJson {
            n: self.n,
            d_a: self.d_a,
            d_b: self.d_b,
            alpha: self.shared.diagonal().to_vec(),
            a_pi: enc(&self.a_pi),
            a_sigma: enc(&self.a_sigma),
            b_pi: enc(&self.b_pi),
            b_sigma: enc(&self.b_sigma),
        };
        serde_json::to_string(&raw).expect("plain data serializes")
    }

    pub fn from_json(input: &str) -> Result<Self> {
        let raw: StrategyJson = serde_json::from_str(input).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        let dec = |rows: Vec<Vec<[f64; 2]>>| -> Result<ComplexMatrix> {
            let r = rows.len();
            let c = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|row| row.len() != c) {
                return Err(Error::Parse {
                    line: 0,
                    message: "ragged matrix rows".into(),
                });
            }
            ComplexMatrix::from_vec(r, c, rows.into_iter().flatten().map(|[re, im]| C64::new(re, im)).collect())
        };
        Self::new(
            raw.n,
            raw.d_a,
            raw.d_b,
            WeightMatrix::new(raw.alpha)?,
            dec(raw.a_pi)?,
            dec(raw.a_sigma)?,
            dec(raw.b_pi)?,
            dec(raw.b_sigma)?,
        )
    }

    /// SHA-256 of the JSON form.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

#[derive(Serialize, Deserialize)]
struct StrategyJson {
    n: usize,
    d_a: usize,
    d_b: usize,
    alpha: Vec<f64>,
    a_pi: Vec<Vec<[f64; 2]>>,
    a_sigma: Vec<Vec<[f64; 2]>>,
    b_pi: Vec<Vec<[f64; 2]>>,
    b_sigma: Vec<Vec<[f64; 2]>>,
}

fn check_matching(inst: &Gap3DMInstance, m: &Matching) -> Result<()> {
    if m.n() != inst.n() {
        return Err(Error::InvalidMatching(format!(
            "matching has size {}, instance has n={}",
            m.n(),
            inst.n()
        )));
    }
    Ok(())
}

/// Provers answer `pi(u)` / `sigma(u)` deterministically, no entanglement.
pub fn honest(inst: &Gap3DMInstance, m: &Matching) -> Result<ProverStrategy> {
    check_matching(inst, m)?;
    let p = ComplexMatrix::permutation(m.pi());
    let s = ComplexMatrix::permutation(m.sigma());
    ProverStrategy::new(inst.n(), 1, 1, WeightMatrix::new(vec![1.0])?, p.clone(), s.clone(), p, s)
}

/// `|u>|i> -> |f_i(u)>|i>`: block-diagonal over the private index.
fn controlled_permutation(perms: &[&[usize]]) -> ComplexMatrix {
    let d = perms.len();
    let n = perms[0].len();
    let mut m = ComplexMatrix::zeros(n * d, n * d);
    for (i, f) in perms.iter().enumerate() {
        for u in 0..n {
            m[(f[u] * d + i, u * d + i)] = C64::new(1.0, 0.0);
        }
    }
    m
}

/// Provers use the shared state as a coin selecting matching `i` with
/// probability `weights[i]^2`.
pub fn mixed_honest(inst: &Gap3DMInstance, ms: &[Matching], weights: &[f64]) -> Result<ProverStrategy> {
    if ms.is_empty() {
        return Err(Error::InvalidParameter("mixed strategy needs at least one matching".into()));
    }
    if weights.len() != ms.len() {
        return Err(Error::DimensionMismatch {
            context: "mixture weights",
            expected: ms.len(),
            found: weights.len(),
        });
    }
    for m in ms {
        check_matching(inst, m)?;
    }
    let shared = WeightMatrix::new(weights.to_vec())?;
    let pis: Vec<&[usize]> = ms.iter().map(Matching::pi).collect();
    let sigmas: Vec<&[usize]> = ms.iter().map(Matching::sigma).collect();
    let a_pi = controlled_permutation(&pis);
    let a_sigma = controlled_permutation(&sigmas);
    let d = ms.len();
    ProverStrategy::new(inst.n(), d, d, shared, a_pi.clone(), a_sigma.clone(), a_pi, a_sigma)
}

/// Classical (possibly non-injective) answer functions made reversible:
/// `|u>|j> -> |f(u) + j mod n>|u>`, so `|u>|0> -> |f(u)>|u>`. The private
/// register has dimension `n` and the shared state is `|0>|0>`.
pub fn classical_fn(inst: &Gap3DMInstance, f_pi: &[usize], f_sigma: &[usize]) -> Result<ProverStrategy> {
    let n = inst.n();
    for (name, f) in [("f_pi", f_pi), ("f_sigma", f_sigma)] {
        if f.len() != n || f.iter().any(|&x| x >= n) {
            return Err(Error::InvalidParameter(format!("{name} is not a map 0..{n} -> 0..{n}")));
        }
    }
    let build = |f: &[usize]| {
        let mut m = ComplexMatrix::zeros(n * n, n * n);
        for u in 0..n {
            for j in 0..n {
                m[(((f[u] + j) % n) * n + u, u * n + j)] = C64::new(1.0, 0.0);
            }
        }
        m
    };
    let mut alpha = vec![0.0; n];
    alpha[0] = 1.0;
    let (p, s) = (build(f_pi), build(f_sigma));
    ProverStrategy::new(n, n, n, WeightMatrix::new(alpha)?, p.clone(), s.clone(), p, s)
}

/// Left-multiplies each unitary by `exp(i eps H)` for independent random
/// Hermitian `H` of unit operator norm.
pub fn perturbed(base: &ProverStrategy, eps: f64, seed: u64) -> Result<ProverStrategy> {
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::InvalidParameter(format!("perturbation size {eps} must be >= 0")));
    }
    if eps == 0.0 {
        return Ok(base.clone());
    }
    let mut rng = stream_rng(seed, 0x7065_7274);
    let mut out = Vec::with_capacity(4);
    for u in base.unitaries() {
        let h = random::hermitian_unit_norm(u.rows(), &mut rng);
        out.push(&exp_i_hermitian(&h, eps)? * u);
    }
    let arr: [ComplexMatrix; 4] = out.try_into().expect("four unitaries");
    ProverStrategy::with_limits(
        base.n,
        base.d_a,
        base.d_b,
        base.shared.clone(),
        arr,
        &Limits {
            max_private_dim: base.d_a.max(base.d_b),
        },
    )
}

/// Haar-random unitaries and random Schmidt weights.
pub fn random_strategy(n: usize, d: usize, seed: u64) -> Result<ProverStrategy> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("n and d must be positive".into()));
    }
    let mut rng = stream_rng(seed, 0x7261_6e64);
    let unitaries = [(); 4].map(|_| random::haar_unitary(n * d, &mut rng));
    let weights = random::state(d, &mut rng).amplitudes().iter().map(|z| z.norm()).collect();
    ProverStrategy::with_limits(n, d, d, WeightMatrix::normalized(weights)?, unitaries, &Limits::default())
}

/// Sub-matrices `A^{u,v}` of one prover unitary, with output rows expressed
/// in an orthonormal basis `|e_j>` (columns of `basis`) and input columns in
/// the Schmidt basis: `A^{u,v}_{j,i} = <v|<e_j| A |u>|i>`.
#[derive(Clone, Debug)]
pub struct BlockDecomposition {
    n: usize,
    d: usize,
    side: Side,
    func: Func,
    basis: ComplexMatrix,
    /// Row-major over `(u, v)`.
    blocks: Vec<ComplexMatrix>,
}

impl BlockDecomposition {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn func(&self) -> Func {
        self.func
    }

    pub fn basis(&self) -> &ComplexMatrix {
        &self.basis
    }

    pub fn block(&self, u: usize, v: usize) -> &ComplexMatrix {
        &self.blocks[u * self.n + v]
    }

    /// Rebuilds the full unitary from the blocks.
    pub fn recompose(&self) -> ComplexMatrix {
        let (n, d) = (self.n, self.d);
        let mut m = ComplexMatrix::zeros(n * d, n * d);
        for u in 0..n {
            for v in 0..n {
                m.set_block(v * d, u * d, &(&self.basis * self.block(u, v)));
            }
        }
        m
    }

    /// Largest Frobenius deviation of `sum_v (A^{u,v})^dagger A^{u,v}` from `I` over `u`.
    pub fn column_completeness_deviation(&self) -> f64 {
        (0..self.n)
            .map(|u| {
                let mut acc = ComplexMatrix::zeros(self.d, self.d);
                for v in 0..self.n {
                    let b = self.block(u, v);
                    acc = &acc + &(&b.adjoint() * b);
                }
                (&acc - &ComplexMatrix::identity(self.d)).frobenius_norm_sq().sqrt()
            })
            .fold(0.0, f64::max)
    }
}

pub fn block_decomposition(
    s: &ProverStrategy,
    side: Side,
    func: Func,
    basis: &ComplexMatrix,
) -> Result<BlockDecomposition> {
    let d = s.private_dim(side);
    if basis.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            context: "block basis",
            expected: d,
            found: basis.rows(),
        });
    }
    let deviation = basis.unitary_deviation();
    if deviation > STRUCTURAL_TOL {
        return Err(Error::NotUnitary {
            deviation,
            tol: STRUCTURAL_TOL,
        });
    }
    let n = s.n();
    let full = s.unitary(side, func);
    let basis_adj = basis.adjoint();
    let mut blocks = Vec::with_capacity(n * n);
    for u in 0..n {
        for v in 0..n {
            blocks.push(&basis_adj * &full.block(v * d, u * d, d, d));
        }
    }
    Ok(BlockDecomposition {
        n,
        d,
        side,
        func,
        basis: basis.clone(),
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gap3dm::generate_positive;

    #[test]
    fn honest_identity_and_cycle() {
        let inst = Gap3DMInstance::new(3, 1, [(0, 0, 0), (1, 1, 1), (2, 2, 2)]).unwrap();
        let s = honest(&inst, &Matching::identity(3)).unwrap();
        for side in [Side::A, Side::B] {
            for f in Func::BOTH {
                assert_eq!(s.unitary(side, f), &ComplexMatrix::identity(3));
            }
        }
        let m = Matching::new(vec![1, 2, 0], vec![0, 1, 2]).unwrap();
        let s = honest(&inst, &m).unwrap();
        let a = s.unitary(Side::A, Func::Pi);
        assert_eq!(a[(1, 0)].re, 1.0);
        assert_eq!(a[(2, 1)].re, 1.0);
        assert_eq!(a[(0, 2)].re, 1.0);
        assert!(honest(&inst, &Matching::identity(4)).is_err());
    }

    #[test]
    fn mixed_single_equals_honest() {
        let (inst, m) = generate_positive(4, 2, 2, 3).unwrap();
        let a = mixed_honest(&inst, std::slice::from_ref(&m), &[1.0]).unwrap();
        let b = honest(&inst, &m).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            mixed_honest(&inst, &[m.clone(), m.clone()], &[0.5, 0.5]),
            Err(Error::WeightNormalization { .. })
        ));
    }

    #[test]
    fn perturbed_and_random_stay_unitary() {
        let (inst, m) = generate_positive(4, 2, 2, 3).unwrap();
        let h = honest(&inst, &m).unwrap();
        assert_eq!(perturbed(&h, 0.0, 1).unwrap(), h);
        let p = perturbed(&h, 1e-3, 1).unwrap();
        for side in [Side::A, Side::B] {
            for f in Func::BOTH {
                assert!(p.unitary(side, f).is_unitary(1e-9));
            }
        }
        assert!(perturbed(&h, -1.0, 1).is_err());

        let r = random_strategy(4, 2, 9).unwrap();
        assert_eq!(r, random_strategy(4, 2, 9).unwrap());
        assert_ne!(r, random_strategy(4, 2, 10).unwrap());
        assert!(r.shared_state().is_normalized(1e-12));
        assert!(random_strategy(2, 17, 0).is_err());
    }

    #[test]
    fn classical_fn_is_reversible() {
        let inst = Gap3DMInstance::new(3, 1, [(0, 0, 0)]).unwrap();
        let s = classical_fn(&inst, &[0, 0, 1], &[2, 2, 2]).unwrap();
        let a = s.unitary(Side::A, Func::Pi);
        // |u=2>|0> -> |f(2)=1>|2>
        assert_eq!(a[(3 + 2, 2 * 3)].re, 1.0);
        assert!(classical_fn(&inst, &[0, 0, 3], &[0, 0, 0]).is_err());
    }

    #[test]
    fn block_structure() {
        let (inst, m) = generate_positive(4, 2, 0, 1).unwrap();
        let h = honest(&inst, &m).unwrap();
        let b = block_decomposition(&h, Side::A, Func::Pi, &ComplexMatrix::identity(1)).unwrap();
        for u in 0..4 {
            for v in 0..4 {
                let expect = if v == m.pi()[u] { 1.0 } else { 0.0 };
                assert_eq!(b.block(u, v)[(0, 0)].re, expect);
            }
        }

        let ms: Vec<Matching> = (0..3).map(|k| generate_positive(4, 2, 0, k).unwrap().1).collect();
        let inst = Gap3DMInstance::new(
            4,
            3,
            ms.iter().flat_map(|m| (0..4).map(move |u| (u, m.pi()[u], m.sigma()[u]))),
        )
        .unwrap();
        let w = (1.0f64 / 3.0).sqrt();
        let s = mixed_honest(&inst, &ms, &[w, w, w]).unwrap();
        let b = block_decomposition(&s, Side::B, Func::Sigma, &ComplexMatrix::identity(3)).unwrap();
        for u in 0..4 {
            for v in 0..4 {
                let expect: Vec<f64> = ms.iter().map(|m| (m.sigma()[u] == v) as u8 as f64).collect();
                assert_eq!(b.block(u, v), &ComplexMatrix::from_real_diagonal(&expect));
            }
        }

        let r = random_strategy(3, 2, 4).unwrap();
        let mut rng = stream_rng(1, 1);
        let basis = random::haar_unitary(2, &mut rng);
        let b = block_decomposition(&r, Side::A, Func::Sigma, &basis).unwrap();
        assert!(b.column_completeness_deviation() < 1e-9);
        assert!(b.recompose().max_abs_diff(r.unitary(Side::A, Func::Sigma)) < 1e-10);
        assert!(block_decomposition(&r, Side::A, Func::Pi, &ComplexMatrix::identity(3)).is_err());
    }

    #[test]
    fn json_round_trip() {
        let r = random_strategy(3, 2, 4).unwrap();
        let back = ProverStrategy::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.content_hash(), r.content_hash());
        assert!(ProverStrategy::from_json("{}").is_err());
    }
}
