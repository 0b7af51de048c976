//! Cross-checks against independent dense constructions.
//!
//! The oracles here build full operators entry by entry from the prover
//! unitaries instead of going through `StateVector::apply`, and enumerate
//! matchings over both bijections instead of using augmenting paths.

use num_complex::Complex64 as C;
use rand::Rng;

use qmip_core::gap3dm::{exact_gap, match_fraction, Gap3DMInstance, Matching};
use qmip_core::linalg::{eig_hermitian, ComplexMatrix};
use qmip_core::protocol::{accept_probability, acceptance_gap_bound, matching_test_acceptance, matching_test_state, ProtocolVariant};
use qmip_core::provers::{honest, perturbed, random_strategy, Func, ProverStrategy, Side};
use qmip_core::rng::stream_rng;

fn random_instance(n: usize, count: usize, seed: u64) -> Gap3DMInstance {
    let mut rng = stream_rng(seed, 77);
    let triples: Vec<_> = (0..count)
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n)))
        .collect();
    Gap3DMInstance::new(n, n, triples).unwrap()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Maximum over all (pi, sigma) of the matched fraction.
fn gap_by_double_enumeration(inst: &Gap3DMInstance) -> f64 {
    let n = inst.n();
    let perms = permutations(n);
    let mut best = 0;
    for pi in &perms {
        for sigma in &perms {
            let k = (0..n).filter(|&u| inst.contains(u, pi[u], sigma[u])).count();
            best = best.max(k);
        }
    }
    best as f64 / n as f64
}

#[test]
fn gap_agrees_with_double_enumeration() {
    for seed in 0..40 {
        let n = 2 + (seed as usize % 4);
        let inst = random_instance(n, 2 * n, seed);
        assert_eq!(exact_gap(&inst).unwrap(), gap_by_double_enumeration(&inst), "seed {seed}");
    }
}

#[test]
fn match_fraction_by_hand() {
    let inst = Gap3DMInstance::new(3, 3, [(0, 1, 2), (1, 0, 0), (2, 2, 1)]).unwrap();
    let m = Matching::new(vec![1, 0, 2], vec![2, 0, 0]).err();
    assert!(m.is_some(), "sigma must be a bijection");
    let m = Matching::new(vec![1, 0, 2], vec![2, 0, 1]).unwrap();
    assert_eq!(match_fraction(&inst, &m).unwrap(), 1.0);
    let m = Matching::new(vec![1, 2, 0], vec![2, 0, 1]).unwrap();
    assert!((match_fraction(&inst, &m).unwrap() - 1.0 / 3.0).abs() < 1e-15);
}

/// Dense five-register model `[ctrl, msg_a, msg_b, priv_a, priv_b]`.
struct Dense<'a> {
    s: &'a ProverStrategy,
    n: usize,
    da: usize,
    db: usize,
}

impl<'a> Dense<'a> {
    fn new(s: &'a ProverStrategy) -> Self {
        Self {
            s,
            n: s.n(),
            da: s.d_a(),
            db: s.d_b(),
        }
    }

    fn dim(&self) -> usize {
        2 * self.n * self.n * self.da * self.db
    }

    fn decode(&self, x: usize) -> [usize; 5] {
        let j = x % self.db;
        let x = x / self.db;
        let i = x % self.da;
        let x = x / self.da;
        let b = x % self.n;
        let x = x / self.n;
        [x / self.n, x % self.n, b, i, j]
    }

    fn encode(&self, r: [usize; 5]) -> usize {
        (((r[0] * self.n + r[1]) * self.n + r[2]) * self.da + r[3]) * self.db + r[4]
    }

    fn schmidt(&self, k: usize) -> f64 {
        self.s.shared().diagonal()[k]
    }

    fn initial(&self, u: usize, probe_a: bool) -> Vec<C> {
        let mut v = vec![C::new(0.0, 0.0); self.dim()];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for k in 0..self.da.min(self.db) {
            let a = self.schmidt(k);
            for x in 0..self.n {
                let r = if probe_a { [0, x, u, k, k] } else { [0, u, x, k, k] };
                v[self.encode(r)] += C::new(h * a / (self.n as f64).sqrt(), 0.0);
            }
            v[self.encode([1, u, u, k, k])] += C::new(h * a, 0.0);
        }
        v
    }

    fn provers(&self, f: Func) -> ComplexMatrix {
        let (ua, ub) = (self.s.unitary(Side::A, f), self.s.unitary(Side::B, f));
        let (da, db) = (self.da, self.db);
        ComplexMatrix::from_fn(self.dim(), self.dim(), |r, c| {
            let (o, i) = (self.decode(r), self.decode(c));
            if o[0] != i[0] {
                return C::new(0.0, 0.0);
            }
            ua[(o[1] * da + o[3], i[1] * da + i[3])] * ub[(o[2] * db + o[4], i[2] * db + i[4])]
        })
    }

    fn diag_projector(&self, keep: impl Fn([usize; 5]) -> bool) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.dim(), self.dim(), |r, c| {
            C::new(if r == c && keep(self.decode(r)) { 1.0 } else { 0.0 }, 0.0)
        })
    }

    /// Matrix acting as `op` on register `reg` when ctrl == `when`.
    fn on_probe(&self, reg: usize, when: usize, op: impl Fn(usize, usize) -> C) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.dim(), self.dim(), |r, c| {
            let (o, i) = (self.decode(r), self.decode(c));
            let others_equal = (0..5).filter(|&k| k != reg).all(|k| o[k] == i[k]);
            if !others_equal {
                C::new(0.0, 0.0)
            } else if o[0] != when {
                C::new(if o[reg] == i[reg] { 1.0 } else { 0.0 }, 0.0)
            } else {
                op(o[reg], i[reg])
            }
        })
    }

    fn subtract(&self, probe: usize, anchor: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.dim(), self.dim(), |r, c| {
            let (o, i) = (self.decode(r), self.decode(c));
            let mut t = i;
            if i[0] == 1 {
                t[probe] = (i[probe] + self.n - i[anchor]) % self.n;
            }
            C::new(if o == t { 1.0 } else { 0.0 }, 0.0)
        })
    }

    fn fourier(&self, inverse: bool) -> impl Fn(usize, usize) -> C {
        let n = self.n;
        move |k, x| {
            let sign = if inverse { -1.0 } else { 1.0 };
            C::from_polar(1.0 / (n as f64).sqrt(), sign * 2.0 * std::f64::consts::PI * (x * k) as f64 / n as f64)
        }
    }

    fn plus_weight(&self, v: &[C]) -> f64 {
        let half = v.len() / 2;
        (0..half).map(|k| (v[k] + v[half + k]).norm_sqr() / 2.0).sum()
    }

    fn sub_test_ab(&self, inst: &Gap3DMInstance, u: usize, f: Func, probe_a: bool, variant: ProtocolVariant) -> f64 {
        let (probe, anchor) = if probe_a { (1, 2) } else { (2, 1) };
        let apply = |m: &ComplexMatrix, v: &[C]| m.mul_vec(v).unwrap();
        let psi = apply(&self.provers(f), &self.initial(u, probe_a));
        let p1 = self.diag_projector(|r| r[0] == 0 || r[1] == r[2]);
        let after1 = apply(&self.subtract(probe, anchor), &apply(&p1, &psi));
        match variant {
            ProtocolVariant::ZeroError => {
                let n = self.n as f64;
                let p2 = self.on_probe(probe, 0, |_, _| C::new(1.0 / n, 0.0));
                let e2 = self.on_probe(probe, 0, self.fourier(true));
                self.plus_weight(&apply(&e2, &apply(&p2, &after1)))
            }
            ProtocolVariant::Modified => {
                let nb = match f {
                    Func::Pi => inst.neighbors_v(u),
                    Func::Sigma => inst.neighbors_w(u),
                };
                let pn = self.diag_projector(|r| if r[0] == 1 { r[1] == r[2] } else { nb.contains(&r[anchor]) });
                let restricted: f64 = apply(&pn, &psi).iter().map(|a| a.norm_sqr()).sum();
                let e1 = self.on_probe(probe, 1, self.fourier(false));
                0.5 * restricted + 0.5 * self.plus_weight(&apply(&e1, &after1))
            }
        }
    }

    /// Sub-test c on `[r1, msg_a, r3, msg_b, priv_a, priv_b]`.
    fn sub_test_c(&self, f: Func) -> f64 {
        let (n, da, db) = (self.n, self.da, self.db);
        let dim = n.pow(4) * da * db;
        let enc = |r: [usize; 6]| ((((r[0] * n + r[1]) * n + r[2]) * n + r[3]) * da + r[4]) * db + r[5];
        let dec = |mut x: usize| {
            let mut r = [0; 6];
            for (k, m) in [db, da, n, n, n, n].into_iter().enumerate() {
                r[5 - k] = x % m;
                x /= m;
            }
            r
        };
        let mut v = vec![C::new(0.0, 0.0); dim];
        for u in 0..n {
            for w in 0..n {
                for k in 0..da.min(db) {
                    v[enc([u, u, w, w, k, k])] = C::new(self.schmidt(k) / n as f64, 0.0);
                }
            }
        }
        let (ua, ub) = (self.s.unitary(Side::A, f), self.s.unitary(Side::B, f));
        let op = ComplexMatrix::from_fn(dim, dim, |r, c| {
            let (o, i) = (dec(r), dec(c));
            if o[0] != i[0] || o[2] != i[2] {
                return C::new(0.0, 0.0);
            }
            ua[(o[1] * da + o[4], i[1] * da + i[4])] * ub[(o[3] * db + o[5], i[3] * db + i[5])]
        });
        let v = op.mul_vec(&v).unwrap();
        let overlap: C = (0..dim)
            .map(|x| {
                let r = dec(x);
                v[x].conj() * v[enc([r[2], r[3], r[0], r[1], r[4], r[5]])]
            })
            .sum();
        0.5 * (1.0 + overlap.re)
    }

    fn matching(&self, inst: &Gap3DMInstance, u: usize, alice: Func) -> f64 {
        let bob = if alice == Func::Pi { Func::Sigma } else { Func::Pi };
        let (ua, ub) = (self.s.unitary(Side::A, alice), self.s.unitary(Side::B, bob));
        let (n, da, db) = (self.n, self.da, self.db);
        let mut total = 0.0;
        for va in 0..n {
            for vb in 0..n {
                let ok = match alice {
                    Func::Pi => inst.contains(u, va, vb),
                    Func::Sigma => inst.contains(u, vb, va),
                };
                if !ok {
                    continue;
                }
                for i in 0..da {
                    for j in 0..db {
                        let amp: C = (0..da.min(db))
                            .map(|k| ua[(va * da + i, u * da + k)] * ub[(vb * db + j, u * db + k)] * self.schmidt(k))
                            .sum();
                        total += amp.norm_sqr();
                    }
                }
            }
        }
        total
    }
}

fn oracle_report(inst: &Gap3DMInstance, s: &ProverStrategy, variant: ProtocolVariant) -> [f64; 8] {
    let d = Dense::new(s);
    let n = inst.n() as f64;
    let mean = |g: &dyn Fn(usize) -> f64| (0..inst.n()).map(g).sum::<f64>() / n;
    let mut out = [0.0; 8];
    for (k, f) in [Func::Pi, Func::Sigma].into_iter().enumerate() {
        out[3 * k] = mean(&|u| d.sub_test_ab(inst, u, f, true, variant));
        out[3 * k + 1] = mean(&|u| d.sub_test_ab(inst, u, f, false, variant));
        out[3 * k + 2] = d.sub_test_c(f);
    }
    out[6] = mean(&|u| d.matching(inst, u, Func::Pi));
    out[7] = mean(&|u| d.matching(inst, u, Func::Sigma));
    out
}

#[test]
fn acceptance_matches_dense_oracle() {
    for seed in 0..4u64 {
        let inst = random_instance(3, 5, 100 + seed);
        for s in [random_strategy(3, 2, seed).unwrap(), random_strategy(3, 1, seed).unwrap()] {
            for variant in [ProtocolVariant::ZeroError, ProtocolVariant::Modified] {
                let got = accept_probability(&inst, &s, variant).unwrap();
                let want = oracle_report(&inst, &s, variant);
                for ((name, g), w) in got.branches().into_iter().zip(want) {
                    assert!((g - w).abs() < 1e-12, "seed {seed} {variant} {name}: {g} vs {w}");
                }
                let overall = (want[..6].iter().sum::<f64>()) / 12.0 + (want[6] + want[7]) / 4.0;
                assert!((got.overall - overall).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn random_strategies_never_beat_certainty() {
    for seed in 0..6 {
        let inst = random_instance(4, 6, seed);
        let s = random_strategy(4, 2, seed).unwrap();
        let r = accept_probability(&inst, &s, ProtocolVariant::ZeroError).unwrap();
        assert!(r.overall < 1.0 - 1e-6, "random strategy accepted with {}", r.overall);
    }
}

/// `(1/2) sum |eig(rho - rho')|` for the block-diagonal mixtures over `u`.
fn dense_trace_distance(a: &[qmip_core::linalg::StateVector], b: &[qmip_core::linalg::StateVector]) -> f64 {
    let n = a.len();
    let d = a[0].dim();
    let diff = ComplexMatrix::from_fn(n * d, n * d, |r, c| {
        if r / d != c / d {
            return C::new(0.0, 0.0);
        }
        let (u, i, j) = (r / d, r % d, c % d);
        let (x, y) = (a[u].amplitudes(), b[u].amplitudes());
        (x[i] * x[j].conj() - y[i] * y[j].conj()) / n as f64
    });
    0.5 * eig_hermitian(&diff.hermitian_part()).unwrap().values.iter().map(|l| l.abs()).sum::<f64>()
}

#[test]
fn trace_distance_matches_dense_eigenvalues() {
    for seed in 0..5 {
        let inst = random_instance(3, 6, seed + 40);
        let (_, ms) = qmip_core::gap3dm::optimal_matchings(&inst, 1).unwrap();
        let base = honest(&inst, &ms[0]).unwrap();
        let other = perturbed(&base, 0.3, seed).unwrap();
        let fam = |s: &ProverStrategy| (0..3).map(|u| matching_test_state(&inst, s, u).unwrap()).collect::<Vec<_>>();
        let (x, y) = (fam(&base), fam(&other));
        let bound = acceptance_gap_bound(&x, &y, |_, st| matching_test_acceptance(&inst, st)).unwrap();
        let td = dense_trace_distance(&x, &y);
        assert!((bound.trace_distance - td).abs() < 1e-10, "{} vs {td}", bound.trace_distance);
        assert!(bound.acceptance_diff <= td + 1e-9);
    }
}
