//! The verifier, simulated exactly on state vectors.
//!
//! Two fair coins pick the question labels. Equal labels `f` run the
//! bijection test (sub-tests a, b, c with probability 1/3 each); different
//! labels run the matching test. Every acceptance probability is computed
//! from squared norms of projected states, so there is no sampling error.
//! [`sample_round`] executes a single round with explicit measurement
//! outcomes for Monte Carlo cross-checks.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gap3dm::Gap3DMInstance;
use crate::linalg::{hadamard, ComplexMatrix, StateVector, C64};
use crate::provers::{Func, ProverStrategy, Side};
use crate::rng::stream_rng;

/// Projections whose kept weight falls below this are treated as
/// measure-zero: the continuation is skipped and counted as accepting.
pub const ZERO_BRANCH_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolVariant {
    /// Sub-tests a/b run all three parts.
    ZeroError,
    /// Sub-tests a/b flip a coin between a neighborhood-restricted
    /// projection and part 1 followed directly by part 3.
    Modified,
}

impl std::fmt::Display for ProtocolVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ZeroError => "zero_error",
            Self::Modified => "modified",
        })
    }
}

// Registers of sub-tests a/b and of the matching test.
const CTRL: usize = 0;
const MSG_A: usize = 1;
const MSG_B: usize = 2;
const PRIV_A: usize = 3;
const PRIV_B: usize = 4;

/// Which message register carries the uniform superposition on the
/// control-0 branch: `A` is sub-test a, `B` is sub-test b.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Probe {
    A,
    B,
}

impl Probe {
    /// `(probe register, anchor register)`.
    fn registers(self) -> (usize, usize) {
        match self {
            Probe::A => (MSG_A, MSG_B),
            Probe::B => (MSG_B, MSG_A),
        }
    }
}

/// Bijection-test acceptance for one question label.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BijectionScores {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl BijectionScores {
    pub fn combined(&self) -> f64 {
        (self.a + self.b + self.c) / 3.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub instance_hash: String,
    pub strategy_hash: String,
    pub variant: ProtocolVariant,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub test1_pi: BijectionScores,
    pub test1_sigma: BijectionScores,
    /// Matching test with `pi` sent to Alice and `sigma` to Bob.
    pub test2_pi_sigma: f64,
    /// Matching test with `sigma` sent to Alice and `pi` to Bob.
    pub test2_sigma_pi: f64,
    pub p_test1a: f64,
    pub p_test1b: f64,
    pub p_test1c: f64,
    pub p_test2: f64,
    pub overall: f64,
    pub metadata: ReportMetadata,
}

impl AcceptanceReport {
    /// Overall acceptance from the per-branch values: each coin pair has
    /// weight 1/4.
    pub fn recompute_overall(&self) -> f64 {
        0.25 * (self.test1_pi.combined() + self.test1_sigma.combined())
            + 0.25 * (self.test2_pi_sigma + self.test2_sigma_pi)
    }

    /// All per-branch probabilities, labelled.
    pub fn branches(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("test1a_pi", self.test1_pi.a),
            ("test1b_pi", self.test1_pi.b),
            ("test1c_pi", self.test1_pi.c),
            ("test1a_sigma", self.test1_sigma.a),
            ("test1b_sigma", self.test1_sigma.b),
            ("test1c_sigma", self.test1_sigma.c),
            ("test2_pi_sigma", self.test2_pi_sigma),
            ("test2_sigma_pi", self.test2_sigma_pi),
        ]
    }
}

/// `|x>|y> -> |x - y mod n>|y>` on `(probe, anchor)`.
fn subtract_mod(n: usize) -> ComplexMatrix {
    let mut perm = vec![0; n * n];
    for x in 0..n {
        for y in 0..n {
            perm[x * n + y] = ((x + n - y) % n) * n + y;
        }
    }
    ComplexMatrix::permutation(&perm)
}

/// Verifier bound to one instance and one strategy.
pub struct Verifier<'a> {
    inst: &'a Gap3DMInstance,
    strategy: &'a ProverStrategy,
    dft: ComplexMatrix,
    dft_inv: ComplexMatrix,
    subtract: ComplexMatrix,
}

impl<'a> Verifier<'a> {
    pub fn new(inst: &'a Gap3DMInstance, strategy: &'a ProverStrategy) -> Result<Self> {
        if strategy.n() != inst.n() {
            return Err(Error::DimensionMismatch {
                context: "strategy message dimension vs instance size",
                expected: inst.n(),
                found: strategy.n(),
            });
        }
        let n = inst.n();
        let dft = ComplexMatrix::dft(n);
        Ok(Self {
            inst,
            strategy,
            dft_inv: dft.adjoint(),
            dft,
            subtract: subtract_mod(n),
        })
    }

    fn n(&self) -> usize {
        self.inst.n()
    }

    fn neighbors(&self, u: usize, f: Func) -> &[usize] {
        match f {
            Func::Pi => self.inst.neighbors_v(u),
            Func::Sigma => self.inst.neighbors_w(u),
        }
    }

    /// `(|0> n^{-1/2} sum_u' |u'>_probe |u>_anchor + |1>|u>|u>) / sqrt 2`
    /// tensored with the shared state.
    pub fn prepare_ab(&self, u: usize, probe: Probe) -> StateVector {
        let n = self.n();
        let mut msg = StateVector::zeros(&[2, n, n]);
        let (p, _) = probe.registers();
        let a0 = C64::new(std::f64::consts::FRAC_1_SQRT_2 / (n as f64).sqrt(), 0.0);
        for x in 0..n {
            let digits = if p == MSG_A { [0, x, u] } else { [0, u, x] };
            let idx = msg.index_of(&digits).expect("in range");
            msg.amplitudes_mut()[idx] = a0;
        }
        let idx = msg.index_of(&[1, u, u]).expect("in range");
        msg.amplitudes_mut()[idx] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        msg.tensor(&self.strategy.shared_state())
    }

    /// Alice applies her `f_a` unitary to `(msg_a, priv_a)`, Bob his `f_b`
    /// unitary to `(msg_b, priv_b)`.
    fn apply_provers(&self, st: &mut StateVector, f_a: Func, f_b: Func, regs: [usize; 4]) -> Result<()> {
        let [msg_a, msg_b, priv_a, priv_b] = regs;
        st.apply(self.strategy.unitary(Side::A, f_a), &[msg_a, priv_a])?;
        st.apply(self.strategy.unitary(Side::B, f_b), &[msg_b, priv_b])
    }

    pub fn apply_provers_ab(&self, st: &mut StateVector, f: Func) -> Result<()> {
        self.apply_provers(st, f, f, [MSG_A, MSG_B, PRIV_A, PRIV_B])
    }

    /// Part 1: keep `|1>|v>|v>` and everything on the control-0 branch.
    /// Returns `(kept, rejected)` weights; the state keeps only its accepted part.
    pub fn part1_project(&self, st: &mut StateVector) -> (f64, f64) {
        let total = st.norm_sq();
        let kept = st.project(|x| x[CTRL] == 0 || x[MSG_A] == x[MSG_B]);
        (kept, total - kept)
    }

    /// Neighborhood-restricted projection of the modified protocol: keep
    /// `|1>|v>|v>` and `|0>` with the anchor register in `N(u)`.
    pub fn neighborhood_project(&self, st: &mut StateVector, u: usize, f: Func, probe: Probe) -> (f64, f64) {
        let (_, anchor) = probe.registers();
        let nb = self.neighbors(u, f);
        let total = st.norm_sq();
        let kept = st.project(|x| {
            if x[CTRL] == 1 {
                x[MSG_A] == x[MSG_B]
            } else {
                nb.binary_search(&x[anchor]).is_ok()
            }
        });
        (kept, total - kept)
    }

    /// On the control-1 branch, subtracts the anchor register from the probe
    /// register. With `to_uniform`, the cleared probe is then mapped from
    /// `|0>` to the uniform vector.
    pub fn erase_equal(&self, st: &mut StateVector, probe: Probe, to_uniform: bool) -> Result<()> {
        let (p, a) = probe.registers();
        st.apply_controlled(&self.subtract, &[p, a], CTRL, 1)?;
        if to_uniform {
            st.apply_controlled(&self.dft, &[p], CTRL, 1)?;
        }
        Ok(())
    }

    /// Part 2: on the control-0 branch, project the probe register onto the
    /// uniform vector.
    pub fn part2_project(&self, st: &mut StateVector, probe: Probe) -> Result<(f64, f64)> {
        let (p, _) = probe.registers();
        let total = st.norm_sq();
        st.apply_controlled(&self.dft_inv, &[p], CTRL, 0)?;
        let kept = st.project(|x| x[CTRL] == 1 || x[p] == 0);
        st.apply_controlled(&self.dft, &[p], CTRL, 0)?;
        Ok((kept, total - kept))
    }

    /// Maps the uniform probe register to `|0>` on the control-0 branch.
    pub fn erase_uniform(&self, st: &mut StateVector, probe: Probe) -> Result<()> {
        let (p, _) = probe.registers();
        st.apply_controlled(&self.dft_inv, &[p], CTRL, 0)
    }

    /// Part 3: probability of `|+>` on the control register. Leaves the
    /// state in the Hadamard-rotated frame.
    pub fn part3_plus(&self, st: &mut StateVector) -> Result<(f64, f64)> {
        st.apply(&hadamard(), &[CTRL])?;
        let plus = st.weight_where(|x| x[CTRL] == 0);
        Ok((plus, st.norm_sq() - plus))
    }

    /// Sub-test a or b for question `u` and label `f`.
    pub fn bijection_ab(&self, u: usize, f: Func, probe: Probe, variant: ProtocolVariant) -> Result<f64> {
        let mut st = self.prepare_ab(u, probe);
        self.apply_provers_ab(&mut st, f)?;
        match variant {
            ProtocolVariant::ZeroError => {
                let (p1, _) = self.part1_project(&mut st);
                if p1 < ZERO_BRANCH_TOL {
                    return Ok(p1);
                }
                st.normalize();
                self.erase_equal(&mut st, probe, false)?;
                let (p2, _) = self.part2_project(&mut st, probe)?;
                if p2 < ZERO_BRANCH_TOL {
                    return Ok(p1 * p2);
                }
                st.normalize();
                self.erase_uniform(&mut st, probe)?;
                let (p3, _) = self.part3_plus(&mut st)?;
                Ok(p1 * p2 * p3)
            }
            ProtocolVariant::Modified => {
                let mut restricted = st.clone();
                let (coin0, _) = self.neighborhood_project(&mut restricted, u, f, probe);
                let (p1, _) = self.part1_project(&mut st);
                let coin1 = if p1 < ZERO_BRANCH_TOL {
                    p1
                } else {
                    st.normalize();
                    self.erase_equal(&mut st, probe, true)?;
                    p1 * self.part3_plus(&mut st)?.0
                };
                Ok(0.5 * coin0 + 0.5 * coin1)
            }
        }
    }

    /// Registers `[r1, msg_a, r3, msg_b, priv_a, priv_b]` holding
    /// `n^{-1} sum_{u,u'} |u>|u>|u'>|u'>` times the shared state, after the
    /// provers answered label `f`.
    pub fn swap_state(&self, f: Func) -> Result<StateVector> {
        let n = self.n();
        let mut msg = StateVector::zeros(&[n, n, n, n]);
        let amp = C64::new(1.0 / n as f64, 0.0);
        for u in 0..n {
            for v in 0..n {
                let idx = msg.index_of(&[u, u, v, v]).expect("in range");
                msg.amplitudes_mut()[idx] = amp;
            }
        }
        let mut st = msg.tensor(&self.strategy.shared_state());
        self.apply_provers(&mut st, f, f, [1, 3, 4, 5])?;
        Ok(st)
    }

    /// Sub-test c: SWAP test between register pairs (1,2) and (3,4).
    pub fn bijection_c(&self, f: Func) -> Result<f64> {
        let st = self.swap_state(f)?;
        Ok(0.5 * (1.0 + st.swap_expectation(&[0, 1], &[2, 3])?))
    }

    /// Post-prover matching-test state `|u> A^{f_alice}|u>_A B^{other}|u>_B`
    /// on registers `[u, msg_a, msg_b, priv_a, priv_b]`.
    pub fn matching_state(&self, u: usize, alice: Func) -> Result<StateVector> {
        let n = self.n();
        if u >= n {
            return Err(Error::InvalidParameter(format!("question {u} outside 0..{n}")));
        }
        let bob = match alice {
            Func::Pi => Func::Sigma,
            Func::Sigma => Func::Pi,
        };
        let mut st = StateVector::basis(&[n, n, n], &[u, u, u])?.tensor(&self.strategy.shared_state());
        self.apply_provers(&mut st, alice, bob, [MSG_A, MSG_B, PRIV_A, PRIV_B])?;
        Ok(st)
    }

    fn matching_accept(&self, st: &StateVector, alice: Func) -> f64 {
        st.weight_where(|x| match alice {
            Func::Pi => self.inst.contains(x[0], x[1], x[2]),
            Func::Sigma => self.inst.contains(x[0], x[2], x[1]),
        })
    }

    pub fn matching(&self, u: usize, alice: Func) -> Result<f64> {
        Ok(self.matching_accept(&self.matching_state(u, alice)?, alice))
    }

    fn mean_over_u(&self, f: impl Fn(usize) -> Result<f64> + Sync + Send) -> Result<f64> {
        let per_u: Vec<f64> = (0..self.n()).into_par_iter().map(f).collect::<Result<_>>()?;
        Ok(per_u.iter().sum::<f64>() / self.n() as f64)
    }

    pub fn report(&self, variant: ProtocolVariant) -> Result<AcceptanceReport> {
        let scores = |f: Func| -> Result<BijectionScores> {
            Ok(BijectionScores {
                a: self.mean_over_u(|u| self.bijection_ab(u, f, Probe::A, variant))?,
                b: self.mean_over_u(|u| self.bijection_ab(u, f, Probe::B, variant))?,
                c: self.bijection_c(f)?,
            })
        };
        let test1_pi = scores(Func::Pi)?;
        let test1_sigma = scores(Func::Sigma)?;
        let test2_pi_sigma = self.mean_over_u(|u| self.matching(u, Func::Pi))?;
        let test2_sigma_pi = self.mean_over_u(|u| self.matching(u, Func::Sigma))?;
        let mut report = AcceptanceReport {
            p_test1a: 0.5 * (test1_pi.a + test1_sigma.a),
            p_test1b: 0.5 * (test1_pi.b + test1_sigma.b),
            p_test1c: 0.5 * (test1_pi.c + test1_sigma.c),
            p_test2: 0.5 * (test2_pi_sigma + test2_sigma_pi),
            test1_pi,
            test1_sigma,
            test2_pi_sigma,
            test2_sigma_pi,
            overall: 0.0,
            metadata: ReportMetadata {
                instance_hash: self.inst.content_hash(),
                strategy_hash: self.strategy.content_hash(),
                variant,
                seed: None,
            },
        };
        report.overall = report.recompute_overall();
        Ok(report)
    }
}

/// Exact acceptance probabilities of every branch and overall.
pub fn accept_probability(
    inst: &Gap3DMInstance,
    s: &ProverStrategy,
    variant: ProtocolVariant,
) -> Result<AcceptanceReport> {
    Verifier::new(inst, s)?.report(variant)
}

/// Matching-test state for question `u` with `pi` sent to Alice.
pub fn matching_test_state(inst: &Gap3DMInstance, s: &ProverStrategy, u: usize) -> Result<StateVector> {
    Verifier::new(inst, s)?.matching_state(u, Func::Pi)
}

/// Matching-test acceptance of a state on registers `[u, v, w, ...]`.
pub fn matching_test_acceptance(inst: &Gap3DMInstance, st: &StateVector) -> Result<f64> {
    let dims = st.register_dims();
    if dims.len() < 3 || dims[..3].iter().any(|&d| d != inst.n()) {
        return Err(Error::DimensionMismatch {
            context: "matching-test state registers",
            expected: inst.n(),
            found: dims.first().copied().unwrap_or(0),
        });
    }
    Ok(st.weight_where(|x| inst.contains(x[0], x[1], x[2])))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapBound {
    /// `n^{-1} sum_u |<alpha(u)|alpha'(u)>|^2`.
    pub overlap_avg: f64,
    pub p: f64,
    pub p_prime: f64,
    /// `|p - p'|`.
    pub acceptance_diff: f64,
    /// Trace distance between the two classical-quantum mixtures.
    pub trace_distance: f64,
}

/// Compares acceptance of two families of post-prover states against the
/// trace distance of the mixtures `n^{-1} sum_u |u><u| (x) |alpha(u)><alpha(u)|`.
/// The mixtures are block diagonal in `u`, so the trace distance is the
/// average of the pure-state distances `sqrt(1 - |<alpha|alpha'>|^2)`.
pub fn acceptance_gap_bound(
    alpha: &[StateVector],
    alpha_prime: &[StateVector],
    evaluate: impl Fn(usize, &StateVector) -> Result<f64>,
) -> Result<GapBound> {
    if alpha.len() != alpha_prime.len() || alpha.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "state family sizes",
            expected: alpha.len(),
            found: alpha_prime.len(),
        });
    }
    let n = alpha.len() as f64;
    let (mut overlap, mut td, mut p, mut pp) = (0.0, 0.0, 0.0, 0.0);
    for (u, (a, b)) in alpha.iter().zip(alpha_prime).enumerate() {
        if a.register_dims() != b.register_dims() {
            return Err(Error::DimensionMismatch {
                context: "paired state dimensions",
                expected: a.dim(),
                found: b.dim(),
            });
        }
        a.require_normalized(1e-9)?;
        b.require_normalized(1e-9)?;
        let o = a.inner(b)?.norm_sqr().min(1.0);
        overlap += o;
        td += (1.0 - o).sqrt();
        p += evaluate(u, a)?;
        pp += evaluate(u, b)?;
    }
    let bound = GapBound {
        overlap_avg: overlap / n,
        p: p / n,
        p_prime: pp / n,
        acceptance_diff: ((p - pp) / n).abs(),
        trace_distance: td / n,
    };
    if bound.acceptance_diff > bound.trace_distance + 1e-9 {
        return Err(Error::BoundViolated(format!(
            "acceptance difference {} exceeds trace distance {}",
            bound.acceptance_diff, bound.trace_distance
        )));
    }
    Ok(bound)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestLabel {
    Bijection1a,
    Bijection1b,
    Bijection1c,
    Matching,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub step: String,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub coins: [Func; 2],
    pub test: TestLabel,
    pub u: Option<usize>,
    /// Fair coin of the modified sub-tests a/b.
    pub verifier_coin: Option<u8>,
    pub measurements: Vec<Measurement>,
    /// Measured `(msg_a, msg_b)` of the matching test.
    pub answers: Option<(usize, usize)>,
    pub accepted: bool,
}

struct Sampler<R> {
    rng: R,
    log: Vec<Measurement>,
}

impl<R: Rng> Sampler<R> {
    /// Two-outcome measurement given the accepted weight of a normalized state.
    fn measure(&mut self, step: &str, accept_weight: f64) -> bool {
        let accepted = self.rng.random::<f64>() < accept_weight;
        self.log.push(Measurement {
            step: step.to_string(),
            accepted,
        });
        accepted
    }
}

/// Runs one protocol round with every random choice drawn from `seed`.
pub fn sample_round(
    inst: &Gap3DMInstance,
    s: &ProverStrategy,
    variant: ProtocolVariant,
    seed: u64,
) -> Result<Transcript> {
    let ver = Verifier::new(inst, s)?;
    let n = inst.n();
    let mut smp = Sampler {
        rng: stream_rng(seed, 0x0072_6f75_6e64),
        log: Vec::new(),
    };
    let pick = |b: bool| if b { Func::Sigma } else { Func::Pi };
    let coins = [pick(smp.rng.random()), pick(smp.rng.random())];
    let mut t = Transcript {
        coins,
        test: TestLabel::Matching,
        u: None,
        verifier_coin: None,
        measurements: Vec::new(),
        answers: None,
        accepted: false,
    };

    if coins[0] != coins[1] {
        let u = smp.rng.random_range(0..n);
        t.u = Some(u);
        let st = ver.matching_state(u, coins[0])?;
        let r: f64 = smp.rng.random();
        let mut acc = 0.0;
        let mut outcome = None;
        st.for_each(|x, a| {
            if outcome.is_none() {
                acc += a.norm_sqr();
                if r < acc {
                    outcome = Some((x[1], x[2]));
                }
            }
        });
        // Rounding can leave r just above the accumulated total.
        let (va, vb) = outcome.unwrap_or_else(|| {
            let last = st.digits_of(st.dim() - 1);
            (last[1], last[2])
        });
        t.answers = Some((va, vb));
        t.accepted = match coins[0] {
            Func::Pi => inst.contains(u, va, vb),
            Func::Sigma => inst.contains(u, vb, va),
        };
        return Ok(t);
    }

    let f = coins[0];
    let sub = smp.rng.random_range(0..3);
    if sub == 2 {
        t.test = TestLabel::Bijection1c;
        let p = ver.bijection_c(f)?;
        t.accepted = smp.measure("swap_test", p);
        t.measurements = smp.log;
        return Ok(t);
    }
    let probe = if sub == 0 { Probe::A } else { Probe::B };
    t.test = if sub == 0 {
        TestLabel::Bijection1a
    } else {
        TestLabel::Bijection1b
    };
    let u = smp.rng.random_range(0..n);
    t.u = Some(u);
    let mut st = ver.prepare_ab(u, probe);
    ver.apply_provers_ab(&mut st, f)?;

    t.accepted = 'run: {
        match variant {
            ProtocolVariant::ZeroError => {
                let mut kept = st.clone();
                let (p1, _) = ver.part1_project(&mut kept);
                if !smp.measure("part1", p1) {
                    break 'run false;
                }
                st = kept;
                st.normalize();
                ver.erase_equal(&mut st, probe, false)?;
                let mut kept = st.clone();
                let (p2, _) = ver.part2_project(&mut kept, probe)?;
                if !smp.measure("part2", p2) {
                    break 'run false;
                }
                st = kept;
                st.normalize();
                ver.erase_uniform(&mut st, probe)?;
                let (p3, _) = ver.part3_plus(&mut st)?;
                smp.measure("part3", p3)
            }
            ProtocolVariant::Modified => {
                let coin = smp.rng.random_range(0..2u8);
                t.verifier_coin = Some(coin);
                if coin == 0 {
                    let (p, _) = ver.neighborhood_project(&mut st, u, f, probe);
                    break 'run smp.measure("neighborhood", p);
                }
                let mut kept = st.clone();
                let (p1, _) = ver.part1_project(&mut kept);
                if !smp.measure("part1", p1) {
                    break 'run false;
                }
                st = kept;
                st.normalize();
                ver.erase_equal(&mut st, probe, true)?;
                let (p3, _) = ver.part3_plus(&mut st)?;
                smp.measure("part3", p3)
            }
        }
    };
    t.measurements = smp.log;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gap3dm::{generate_positive, match_fraction, Matching};
    use crate::provers::{honest, mixed_honest, random_strategy};

    const VARIANTS: [ProtocolVariant; 2] = [ProtocolVariant::ZeroError, ProtocolVariant::Modified];

    #[test]
    fn honest_is_accepted_everywhere() {
        for seed in 0..5 {
            let (inst, m) = generate_positive(4, 3, 5, seed).unwrap();
            let s = honest(&inst, &m).unwrap();
            for v in VARIANTS {
                let r = accept_probability(&inst, &s, v).unwrap();
                for (name, p) in r.branches() {
                    assert!((p - 1.0).abs() < 1e-9, "{v} {name} = {p}");
                }
                assert!((r.overall - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn honest_matching_score_is_match_fraction() {
        let inst = Gap3DMInstance::new(4, 2, [(0, 0, 0), (1, 1, 1), (2, 3, 2), (3, 2, 3)]).unwrap();
        let m = Matching::identity(4);
        let s = honest(&inst, &m).unwrap();
        let r = accept_probability(&inst, &s, ProtocolVariant::ZeroError).unwrap();
        assert_eq!(r.p_test2, match_fraction(&inst, &m).unwrap());
        assert_eq!(r.p_test2, 0.5);
    }

    #[test]
    fn projections_conserve_probability() {
        let (inst, _) = generate_positive(3, 2, 3, 1).unwrap();
        let s = random_strategy(3, 2, 5).unwrap();
        let ver = Verifier::new(&inst, &s).unwrap();
        for probe in [Probe::A, Probe::B] {
            for u in 0..3 {
                let mut st = ver.prepare_ab(u, probe);
                assert!(st.is_normalized(1e-12));
                ver.apply_provers_ab(&mut st, Func::Sigma).unwrap();
                let mut r = st.clone();
                let (k, j) = ver.neighborhood_project(&mut r, u, Func::Sigma, probe);
                assert!((k + j - 1.0).abs() < 1e-12);
                let (k, j) = ver.part1_project(&mut st);
                assert!((k + j - 1.0).abs() < 1e-12);
                st.normalize();
                ver.erase_equal(&mut st, probe, false).unwrap();
                let (k, j) = ver.part2_project(&mut st, probe).unwrap();
                assert!((k + j - 1.0).abs() < 1e-12);
                st.normalize();
                ver.erase_uniform(&mut st, probe).unwrap();
                let (k, j) = ver.part3_plus(&mut st).unwrap();
                assert!((k + j - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn honest_erasures_clear_the_probe() {
        let (inst, m) = generate_positive(5, 2, 4, 8).unwrap();
        let s = honest(&inst, &m).unwrap();
        let ver = Verifier::new(&inst, &s).unwrap();
        for probe in [Probe::A, Probe::B] {
            let (p, _) = probe.registers();
            for u in 0..5 {
                let mut st = ver.prepare_ab(u, probe);
                ver.apply_provers_ab(&mut st, Func::Pi).unwrap();
                ver.part1_project(&mut st);
                ver.erase_equal(&mut st, probe, false).unwrap();
                assert!(st.weight_where(|x| x[CTRL] == 1 && x[p] != 0) < 1e-24);
                ver.part2_project(&mut st, probe).unwrap();
                ver.erase_uniform(&mut st, probe).unwrap();
                assert!(st.weight_where(|x| x[p] != 0) < 1e-24);
                let (plus, _) = ver.part3_plus(&mut st).unwrap();
                assert!((plus - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mixed_honest_law() {
        let ms: Vec<Matching> = (0..3).map(|k| generate_positive(4, 2, 0, 10 + k).unwrap().1).collect();
        // instance containing only part of the triples of each matching
        let triples: Vec<_> = ms
            .iter()
            .enumerate()
            .flat_map(|(k, m)| (0..=k).map(move |u| (u, m.pi()[u], m.sigma()[u])))
            .collect();
        let inst = Gap3DMInstance::new(4, 4, triples).unwrap();
        let w = [0.6, 0.0, 0.8];
        let s = mixed_honest(&inst, &ms, &w).unwrap();
        let r = accept_probability(&inst, &s, ProtocolVariant::ZeroError).unwrap();
        let expect: f64 = ms
            .iter()
            .zip(w)
            .map(|(m, a)| a * a * match_fraction(&inst, m).unwrap())
            .sum();
        assert!((r.p_test2 - expect).abs() < 1e-10);
        assert!((r.p_test1c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_recomputes_and_stays_in_range() {
        let (inst, _) = generate_positive(3, 2, 2, 2).unwrap();
        let s = random_strategy(3, 2, 1).unwrap();
        for v in VARIANTS {
            let r = accept_probability(&inst, &s, v).unwrap();
            assert!((r.recompute_overall() - r.overall).abs() < 1e-12);
            for (_, p) in r.branches() {
                assert!((-1e-12..=1.0 + 1e-12).contains(&p));
            }
            let json = serde_json::to_string(&r).unwrap();
            let back: AcceptanceReport = serde_json::from_str(&json).unwrap();
            assert_eq!(back, r);
        }
        let wrong = random_strategy(4, 1, 1).unwrap();
        assert!(accept_probability(&inst, &wrong, ProtocolVariant::ZeroError).is_err());
    }

    #[test]
    fn matching_state_forms() {
        let (inst, m) = generate_positive(4, 2, 0, 3).unwrap();
        let s = honest(&inst, &m).unwrap();
        for u in 0..4 {
            let st = matching_test_state(&inst, &s, u).unwrap();
            let expect = StateVector::basis(&[4, 4, 4, 1, 1], &[u, m.pi()[u], m.sigma()[u], 0, 0]).unwrap();
            assert!((st.inner(&expect).unwrap().norm() - 1.0).abs() < 1e-12);
        }
        let r = random_strategy(4, 2, 3).unwrap();
        assert!(matching_test_state(&inst, &r, 2).unwrap().is_normalized(1e-12));
        assert!(matching_test_state(&inst, &r, 4).is_err());
    }

    #[test]
    fn gap_bound_trivial_cases() {
        let (inst, m) = generate_positive(3, 2, 0, 1).unwrap();
        let s = honest(&inst, &m).unwrap();
        let fam: Vec<_> = (0..3).map(|u| matching_test_state(&inst, &s, u).unwrap()).collect();
        let eval = |_: usize, st: &StateVector| matching_test_acceptance(&inst, st);
        let b = acceptance_gap_bound(&fam, &fam, eval).unwrap();
        assert_eq!(b.acceptance_diff, 0.0);
        assert!((b.overlap_avg - 1.0).abs() < 1e-12);
        // orthogonal family: flip the answer register
        let other: Vec<_> = (0..3)
            .map(|u| {
                StateVector::basis(&[3, 3, 3, 1, 1], &[u, (m.pi()[u] + 1) % 3, m.sigma()[u], 0, 0]).unwrap()
            })
            .collect();
        let b = acceptance_gap_bound(&fam, &other, eval).unwrap();
        assert!((b.trace_distance - 1.0).abs() < 1e-12);
        assert!(b.overlap_avg < 1e-12);
        assert!(acceptance_gap_bound(&fam, &other[..2], eval).is_err());
    }

    #[test]
    fn sample_round_is_deterministic() {
        let (inst, m) = generate_positive(3, 2, 2, 4).unwrap();
        let s = honest(&inst, &m).unwrap();
        for v in VARIANTS {
            for seed in 0..40 {
                let t = sample_round(&inst, &s, v, seed).unwrap();
                assert!(t.accepted, "{t:?}");
                assert_eq!(t, sample_round(&inst, &s, v, seed).unwrap());
            }
        }
    }
}
