//! Degree-bounded gap 3-dimensional matching instances.
//!
//! An instance is three vertex sets `U, V, W` of size `n` (plain indices) and
//! a set `M` of triples `(u, v, w)`. A matching is a pair of bijections
//! `pi: U -> V`, `sigma: U -> W`; its score is the fraction of `u` with
//! `(u, pi(u), sigma(u))` in `M`. The gap of an instance is the best score.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Largest `n` accepted by the exhaustive gap oracle.
pub const MAX_EXACT_N: usize = 9;

pub type Triple = (usize, usize, usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gap3DMInstance {
    n: usize,
    delta: usize,
    /// Sorted, deduplicated.
    triples: Vec<Triple>,
    nv: Vec<Vec<usize>>,
    nw: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct InstanceJson {
    n: usize,
    delta: usize,
    triples: Vec<[usize; 3]>,
}

impl Gap3DMInstance {
    /// Validates index ranges and the degree bound. Duplicate triples are merged.
    pub fn new(n: usize, delta: usize, triples: impl IntoIterator<Item = Triple>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInstance("n must be positive".into()));
        }
        let set: BTreeSet<Triple> = triples.into_iter().collect();
        for &(u, v, w) in &set {
            if u >= n || v >= n || w >= n {
                return Err(Error::InvalidInstance(format!(
                    "triple ({u}, {v}, {w}) has a vertex index outside 0..{n}"
                )));
            }
        }
        let mut nv = vec![BTreeSet::new(); n];
        let mut nw = vec![BTreeSet::new(); n];
        for &(u, v, w) in &set {
            nv[u].insert(v);
            nw[u].insert(w);
        }
        for u in 0..n {
            for (side, nb) in [('V', &nv[u]), ('W', &nw[u])] {
                if nb.len() > delta {
                    return Err(Error::DegreeBound {
                        u,
                        side,
                        degree: nb.len(),
                        delta,
                    });
                }
            }
        }
        Ok(Self {
            n,
            delta,
            triples: set.into_iter().collect(),
            nv: nv.into_iter().map(|s| s.into_iter().collect()).collect(),
            nw: nw.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn contains(&self, u: usize, v: usize, w: usize) -> bool {
        self.triples.binary_search(&(u, v, w)).is_ok()
    }

    /// `N_V(u)`, sorted.
    pub fn neighbors_v(&self, u: usize) -> &[usize] {
        &self.nv[u]
    }

    /// `N_W(u)`, sorted.
    pub fn neighbors_w(&self, u: usize) -> &[usize] {
        &self.nw[u]
    }

    pub fn degree_bound_holds(&self) -> bool {
        (0..self.n).all(|u| self.nv[u].len() <= self.delta && self.nw[u].len() <= self.delta)
    }

    /// Text form: header `n <n> delta <delta>` then one `u v w` line per triple.
    pub fn to_text(&self) -> String {
        let mut s = format!("n {} delta {}\n", self.n, self.delta);
        for &(u, v, w) in &self.triples {
            let _ = writeln!(s, "{u} {v} {w}");
        }
        s
    }

    pub fn to_json(&self) -> String {
        let raw = InstanceJson {
            n: self.n,
            delta: self.delta,
            triples: self.triples.iter().map(|&(u, v, w)| [u, v, w]).collect(),
        };
        serde_json::to_string(&raw).expect("plain data serializes")
    }

    /// Parses either the text or the JSON form.
    pub fn parse(input: &str) -> Result<Self> {
        if input.trim_start().starts_with('{') {
            let raw: InstanceJson = serde_json::from_str(input).map_err(|e| Error::Parse {
                line: e.line(),
                message: e.to_string(),
            })?;
            return Self::new(raw.n, raw.delta, raw.triples.into_iter().map(|[u, v, w]| (u, v, w)));
        }
        parse_text(input)
    }

    /// SHA-256 of the canonical text form.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

fn parse_text(input: &str) -> Result<Gap3DMInstance> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing header `n <n> delta <delta>`".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (n, delta) = match fields.as_slice() {
        ["n", n, "delta", d] => {
            let n: usize = n.parse().map_err(|_| Error::Parse {
                line: hline,
                message: format!("n: expected a count, found `{n}`"),
            })?;
            let d: usize = d.parse().map_err(|_| Error::Parse {
                line: hline,
                message: format!("delta: expected a count, found `{d}`"),
            })?;
            (n, d)
        }
        _ => {
            return Err(Error::Parse {
                line: hline,
                message: format!("expected header `n <n> delta <delta>`, found `{header}`"),
            })
        }
    };
    let mut triples = Vec::new();
    for (line, text) in lines {
        let parts: Vec<&str> = text.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected `u v w`, found {} fields", parts.len()),
            });
        }
        let mut t = [0usize; 3];
        for (k, (slot, p)) in t.iter_mut().zip(&parts).enumerate() {
            *slot = p.parse().map_err(|_| Error::Parse {
                line,
                message: format!("field {} (`{}`): expected a vertex index", ["u", "v", "w"][k], p),
            })?;
        }
        if let Some(bad) = t.iter().find(|&&x| x >= n) {
            return Err(Error::Parse {
                line,
                message: format!(
                    "triple ({}, {}, {}): vertex index {bad} outside 0..{n}",
                    t[0], t[1], t[2]
                ),
            });
        }
        triples.push((t[0], t[1], t[2]));
    }
    Gap3DMInstance::new(n, delta, triples)
}

/// Pair of bijections `pi: U -> V`, `sigma: U -> W`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Matching {
    pi: Vec<usize>,
    sigma: Vec<usize>,
}

fn check_bijection(f: &[usize], name: &str) -> Result<()> {
    let mut seen = vec![false; f.len()];
    for (u, &x) in f.iter().enumerate() {
        if x >= f.len() || std::mem::replace(&mut seen[x], true) {
            return Err(Error::InvalidMatching(format!("{name} is not a bijection (at u={u}, value {x})")));
        }
    }
    Ok(())
}

impl Matching {
    pub fn new(pi: Vec<usize>, sigma: Vec<usize>) -> Result<Self> {
        if pi.len() != sigma.len() {
            return Err(Error::InvalidMatching(format!(
                "pi has {} entries, sigma has {}",
                pi.len(),
                sigma.len()
            )));
        }
        check_bijection(&pi, "pi")?;
        check_bijection(&sigma, "sigma")?;
        Ok(Self { pi, sigma })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            pi: (0..n).collect(),
            sigma: (0..n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &[usize] {
        &self.pi
    }

    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }
}

/// Fraction of `u` with `(u, pi(u), sigma(u))` in `M`.
pub fn match_fraction(inst: &Gap3DMInstance, m: &Matching) -> Result<f64> {
    if m.n() != inst.n {
        return Err(Error::DimensionMismatch {
            context: "matching size",
            expected: inst.n,
            found: m.n(),
        });
    }
    let hits = (0..inst.n).filter(|&u| inst.contains(u, m.pi[u], m.sigma[u])).count();
    Ok(hits as f64 / inst.n as f64)
}

/// Planted positive instance: the triples of a random matching plus `decoys`
/// extra random triples that respect the degree bound.
pub fn generate_positive(n: usize, delta: usize, decoys: usize, seed: u64) -> Result<(Gap3DMInstance, Matching)> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n must be at least 2, got {n}")));
    }
    if delta == 0 {
        return Err(Error::InvalidParameter("delta must be at least 1".into()));
    }
    let per_u = delta.min(n);
    let capacity = n * (per_u * per_u - 1);
    if decoys > capacity {
        return Err(Error::Infeasible(format!(
            "{decoys} decoys exceed the {capacity} extra triples admissible for n={n}, delta={delta}"
        )));
    }
    let mut rng = stream_rng(seed, 0x67656e2b);
    let mut pi: Vec<usize> = (0..n).collect();
    let mut sigma: Vec<usize> = (0..n).collect();
    pi.shuffle(&mut rng);
    sigma.shuffle(&mut rng);
    let matching = Matching::new(pi, sigma)?;

    let mut triples: BTreeSet<Triple> = (0..n).map(|u| (u, matching.pi[u], matching.sigma[u])).collect();
    let mut nv: Vec<BTreeSet<usize>> = (0..n).map(|u| BTreeSet::from([matching.pi[u]])).collect();
    let mut nw: Vec<BTreeSet<usize>> = (0..n).map(|u| BTreeSet::from([matching.sigma[u]])).collect();

    let pick = |nb: &BTreeSet<usize>, rng: &mut crate::rng::ExperimentRng| -> usize {
        if nb.len() < delta {
            rng.random_range(0..n)
        } else {
            *nb.iter().nth(rng.random_range(0..nb.len())).expect("nonempty")
        }
    };
    let mut added = 0;
    let mut misses = 0usize;
    while added < decoys {
        let u = rng.random_range(0..n);
        let v = pick(&nv[u], &mut rng);
        let w = pick(&nw[u], &mut rng);
        if triples.insert((u, v, w)) {
            nv[u].insert(v);
            nw[u].insert(w);
            added += 1;
            misses = 0;
            continue;
        }
        misses += 1;
        if misses > 64 * n {
            // Dense regime: draw uniformly from the remaining admissible triples.
            let mut candidates = Vec::new();
            for u in 0..n {
                for v in 0..n {
                    if nv[u].len() >= delta && !nv[u].contains(&v) {
                        continue;
                    }
                    for w in 0..n {
                        if nw[u].len() >= delta && !nw[u].contains(&w) {
                            continue;
                        }
                        if !triples.contains(&(u, v, w)) {
                            candidates.push((u, v, w));
                        }
                    }
                }
            }
            let Some(&(u, v, w)) = candidates.get(rng.random_range(0..candidates.len().max(1))) else {
                return Err(Error::Infeasible(format!(
                    "only {added} of {decoys} decoys fit under delta={delta}"
                )));
            };
            triples.insert((u, v, w));
            nv[u].insert(v);
            nw[u].insert(w);
            added += 1;
            misses = 0;
        }
    }
    let inst = Gap3DMInstance::new(n, delta, triples)?;
    Ok((inst, matching))
}

/// Random degree-bounded instance, resampled until the exact gap is at most
/// `target_gap`. Each `u` receives between 1 and `delta` triples drawn from
/// random neighborhoods of size `min(delta, n)`.
pub fn generate_negative(
    n: usize,
    delta: usize,
    target_gap: f64,
    seed: u64,
    max_attempts: usize,
) -> Result<Gap3DMInstance> {
    if n == 0 || n > MAX_EXACT_N {
        return Err(Error::TooLarge { n, max: MAX_EXACT_N });
    }
    if delta == 0 {
        return Err(Error::InvalidParameter("delta must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&target_gap) {
        return Err(Error::InvalidParameter(format!("target gap {target_gap} outside [0, 1]")));
    }
    let mut rng = stream_rng(seed, 0x67656e2d);
    let k = delta.min(n);
    for _ in 0..max_attempts {
        let mut triples = Vec::new();
        for u in 0..n {
            let mut vs: Vec<usize> = (0..n).collect();
            let mut ws: Vec<usize> = (0..n).collect();
            vs.shuffle(&mut rng);
            ws.shuffle(&mut rng);
            let count = rng.random_range(1..=delta);
            for _ in 0..count {
                triples.push((u, vs[rng.random_range(0..k)], ws[rng.random_range(0..k)]));
            }
        }
        let inst = Gap3DMInstance::new(n, delta, triples)?;
        if exact_gap(&inst)? <= target_gap + 1e-12 {
            return Ok(inst);
        }
    }
    Err(Error::AttemptsExhausted {
        target: target_gap,
        attempts: max_attempts,
    })
}

/// Maximum bipartite matching between `U` and `W` by augmenting paths.
/// `adj[u]` lists admissible `w`. Returns `owner[w] = Some(u)`.
fn max_bipartite_matching(adj: &[&[usize]], n: usize) -> (usize, Vec<Option<usize>>) {
    fn augment(u: usize, adj: &[&[usize]], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &w in adj[u] {
            if seen[w] {
                continue;
            }
            seen[w] = true;
            if owner[w].is_none_or(|other| augment(other, adj, seen, owner)) {
                owner[w] = Some(u);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; n];
    let mut size = 0;
    for u in 0..adj.len() {
        let mut seen = vec![false; n];
        if augment(u, adj, &mut seen, &mut owner) {
            size += 1;
        }
    }
    (size, owner)
}

/// For every `(u, v)`, the sorted `w` with `(u, v, w)` in `M`.
fn w_lists(inst: &Gap3DMInstance) -> Vec<Vec<Vec<usize>>> {
    let mut lists = vec![vec![Vec::new(); inst.n]; inst.n];
    for &(u, v, w) in &inst.triples {
        lists[u][v].push(w);
    }
    lists
}

/// Steps `perm` to the next lexicographic permutation; false at the last one.
pub(crate) fn next_permutation(perm: &mut [usize]) -> bool {
    let Some(i) = perm.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = perm.iter().rposition(|&x| x > perm[i]).expect("pivot has a successor");
    perm.swap(i, j);
    perm[i + 1..].reverse();
    true
}

struct ClassBest {
    score: usize,
    witnesses: Vec<Matching>,
}

/// Best matchings among permutations with `pi(0) = first`, in lexicographic
/// order of `pi`, keeping at most `keep` witnesses.
fn best_in_class(inst: &Gap3DMInstance, lists: &[Vec<Vec<usize>>], first: usize, keep: usize) -> ClassBest {
    let n = inst.n;
    let mut rest: Vec<usize> = (0..n).filter(|&x| x != first).collect();
    let mut best = ClassBest {
        score: 0,
        witnesses: Vec::new(),
    };
    loop {
        let pi: Vec<usize> = std::iter::once(first).chain(rest.iter().copied()).collect();
        let adj: Vec<&[usize]> = (0..n).map(|u| lists[u][pi[u]].as_slice()).collect();
        let (score, owner) = max_bipartite_matching(&adj, n);
        if score > best.score || (score == best.score && best.witnesses.len() < keep) {
            if score > best.score {
                best.witnesses.clear();
            }
            best.score = score;
            best.witnesses.push(complete_matching(pi, &owner));
        }
        if score == n && best.witnesses.len() >= keep {
            break;
        }
        if !next_permutation(&mut rest) {
            break;
        }
    }
    best
}

/// Turns a partial `U -> W` assignment into a bijection by filling the
/// unmatched `u` with unused `w` in increasing order.
fn complete_matching(pi: Vec<usize>, owner: &[Option<usize>]) -> Matching {
    let n = pi.len();
    let mut sigma = vec![usize::MAX; n];
    for (w, o) in owner.iter().enumerate() {
        if let Some(u) = *o {
            sigma[u] = w;
        }
    }
    let mut free = (0..n).filter(|w| owner[*w].is_none());
    for s in sigma.iter_mut().filter(|s| **s == usize::MAX) {
        *s = free.next().expect("counts agree");
    }
    Matching { pi, sigma }
}

/// Up to `limit` matchings attaining the exact gap, together with the gap.
/// Witnesses have pairwise distinct `pi` and come in lexicographic `pi` order.
pub fn optimal_matchings(inst: &Gap3DMInstance, limit: usize) -> Result<(f64, Vec<Matching>)> {
    let n = inst.n;
    if n > MAX_EXACT_N {
        return Err(Error::TooLarge { n, max: MAX_EXACT_N });
    }
    let lists = w_lists(inst);
    let keep = limit.max(1);
    let classes: Vec<ClassBest> = (0..n)
        .into_par_iter()
        .map(|first| best_in_class(inst, &lists, first, keep))
        .collect();
    let score = classes.iter().map(|c| c.score).max().unwrap_or(0);
    let witnesses: Vec<Matching> = classes
        .into_iter()
        .filter(|c| c.score == score)
        .flat_map(|c| c.witnesses)
        .take(limit)
        .collect();
    Ok((score as f64 / n as f64, witnesses))
}

/// Maximum of [`match_fraction`] over all pairs of bijections. Enumerates `pi`
/// and solves the `sigma` side as a bipartite matching; `n <= 9`.
pub fn exact_gap(inst: &Gap3DMInstance) -> Result<f64> {
    optimal_matchings(inst, 1).map(|(g, _)| g)
}
