use serde::{Deserialize, Serialize};

use super::matrix::{ComplexMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// Pure state over an ordered product of registers. Register 0 is the most
/// significant digit of the flat amplitude index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    register_dims: Vec<usize>,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// All-zero vector (not a valid state until written to).
    pub fn zeros(register_dims: &[usize]) -> Self {
        let len = register_dims.iter().product();
        Self {
            register_dims: register_dims.to_vec(),
            amplitudes: vec![ZERO; len],
        }
    }

    pub fn basis(register_dims: &[usize], digits: &[usize]) -> Result<Self> {
        let mut s = Self::zeros(register_dims);
        let idx = s.index_of(digits)?;
        s.amplitudes[idx] = ONE;
        Ok(s)
    }

    pub fn from_amplitudes(register_dims: &[usize], amplitudes: Vec<C64>) -> Result<Self> {
        let len: usize = register_dims.iter().product();
        if amplitudes.len() != len {
            return Err(Error::DimensionMismatch {
                context: "state amplitudes",
                expected: len,
                found: amplitudes.len(),
            });
        }
        Ok(Self {
            register_dims: register_dims.to_vec(),
            amplitudes,
        })
    }

    /// Single-register state.
    pub fn from_vec(amplitudes: Vec<C64>) -> Self {
        Self {
            register_dims: vec![amplitudes.len()],
            amplitudes,
        }
    }

    pub fn register_dims(&self) -> &[usize] {
        &self.register_dims
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.register_dims.len()];
        for r in (0..self.register_dims.len().saturating_sub(1)).rev() {
            strides[r] = strides[r + 1] * self.register_dims[r + 1];
        }
        strides
    }

    pub fn index_of(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.register_dims.len() {
            return Err(Error::DimensionMismatch {
                context: "multi-index length",
                expected: self.register_dims.len(),
                found: digits.len(),
            });
        }
        let mut idx = 0;
        for (&d, &dim) in digits.iter().zip(&self.register_dims) {
            if d >= dim {
                return Err(Error::DimensionMismatch {
                    context: "register digit",
                    expected: dim,
                    found: d,
                });
            }
            idx = idx * dim + d;
        }
        Ok(idx)
    }

    pub fn digits_of(&self, mut idx: usize) -> Vec<usize> {
        let mut digits = vec![0; self.register_dims.len()];
        for r in (0..self.register_dims.len()).rev() {
            digits[r] = idx % self.register_dims[r];
            idx /= self.register_dims[r];
        }
        digits
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sq() - 1.0).abs() <= tol
    }

    pub(crate) fn require_normalized(&self, tol: f64) -> Result<()> {
        if self.is_normalized(tol) {
            Ok(())
        } else {
            Err(Error::NotNormalized {
                norm_sq: self.norm_sq(),
            })
        }
    }

    /// Rescales to unit norm and returns the squared norm before rescaling.
    pub fn normalize(&mut self) -> f64 {
        let n2 = self.norm_sq();
        if n2 > 0.0 {
            let s = 1.0 / n2.sqrt();
            self.amplitudes.iter_mut().for_each(|a| *a *= s);
        }
        n2
    }

    pub fn scale(&mut self, s: C64) {
        self.amplitudes.iter_mut().for_each(|a| *a *= s);
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                context: "inner product",
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `self (x) other`; registers are concatenated.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for &a in &self.amplitudes {
            amps.extend(other.amplitudes.iter().map(|&b| a * b));
        }
        let mut dims = self.register_dims.clone();
        dims.extend_from_slice(&other.register_dims);
        Self {
            register_dims: dims,
            amplitudes: amps,
        }
    }

    /// Flat offsets of every sub-index over `targets` (first target most
    /// significant) together with the base indices where all target digits are 0.
    fn target_layout(&self, targets: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
        let strides = self.strides();
        for (k, &t) in targets.iter().enumerate() {
            if t >= self.register_dims.len() || targets[..k].contains(&t) {
                return Err(Error::InvalidParameter(format!("bad target register list {targets:?}")));
            }
        }
        let mut offsets = vec![0usize];
        for &t in targets {
            let mut next = Vec::with_capacity(offsets.len() * self.register_dims[t]);
            for &o in &offsets {
                for digit in 0..self.register_dims[t] {
                    next.push(o + digit * strides[t]);
                }
            }
            offsets = next;
        }
        let mut rest_offsets = vec![0usize];
        for (r, (&dim, &stride)) in self.register_dims.iter().zip(&strides).enumerate() {
            if targets.contains(&r) {
                continue;
            }
            let mut next = Vec::with_capacity(rest_offsets.len() * dim);
            for &o in &rest_offsets {
                for digit in 0..dim {
                    next.push(o + digit * stride);
                }
            }
            rest_offsets = next;
        }
        Ok((offsets, rest_offsets))
    }

    /// Applies `op` to the tensor product of the `targets` registers, in the
    /// order given.
    pub fn apply(&mut self, op: &ComplexMatrix, targets: &[usize]) -> Result<()> {
        let (offsets, bases) = self.target_layout(targets)?;
        if op.rows() != offsets.len() || op.cols() != offsets.len() {
            return Err(Error::DimensionMismatch {
                context: "operator on target registers",
                expected: offsets.len(),
                found: op.cols(),
            });
        }
        let mut buf = vec![ZERO; offsets.len()];
        for base in bases {
            for (b, &o) in buf.iter_mut().zip(&offsets) {
                *b = self.amplitudes[base + o];
            }
            let out = op.mul_vec(&buf)?;
            for (v, &o) in out.into_iter().zip(&offsets) {
                self.amplitudes[base + o] = v;
            }
        }
        Ok(())
    }

    /// Applies `op` to `targets` on the branch where register `control`
    /// holds `value`; other branches are untouched.
    pub fn apply_controlled(&mut self, op: &ComplexMatrix, targets: &[usize], control: usize, value: usize) -> Result<()> {
        if targets.contains(&control) || control >= self.register_dims.len() {
            return Err(Error::InvalidParameter(format!("bad control register {control}")));
        }
        let stride = self.strides()[control];
        let dim = self.register_dims[control];
        let (offsets, bases) = self.target_layout(targets)?;
        if op.rows() != offsets.len() || op.cols() != offsets.len() {
            return Err(Error::DimensionMismatch {
                context: "operator on target registers",
                expected: offsets.len(),
                found: op.cols(),
            });
        }
        let mut buf = vec![ZERO; offsets.len()];
        for base in bases.into_iter().filter(|b| (b / stride) % dim == value) {
            for (b, &o) in buf.iter_mut().zip(&offsets) {
                *b = self.amplitudes[base + o];
            }
            let out = op.mul_vec(&buf)?;
            for (v, &o) in out.into_iter().zip(&offsets) {
                self.amplitudes[base + o] = v;
            }
        }
        Ok(())
    }

    /// `<psi| S |psi>` where `S` exchanges register `first[k]` with
    /// `second[k]` for every `k`. Real because `S` is Hermitian.
    pub fn swap_expectation(&self, first: &[usize], second: &[usize]) -> Result<f64> {
        if first.len() != second.len() {
            return Err(Error::InvalidParameter("swap register lists differ in length".into()));
        }
        for (&a, &b) in first.iter().zip(second) {
            let (da, db) = (self.register_dims.get(a), self.register_dims.get(b));
            if da.is_none() || da != db {
                return Err(Error::InvalidParameter(format!("registers {a} and {b} cannot be swapped")));
            }
        }
        let strides = self.strides();
        let mut acc = ZERO;
        let mut swapped = vec![0; self.register_dims.len()];
        self.for_each(|digits, amp| {
            swapped.copy_from_slice(digits);
            for (&a, &b) in first.iter().zip(second) {
                swapped.swap(a, b);
            }
            let idx: usize = swapped.iter().zip(&strides).map(|(d, s)| d * s).sum();
            acc += amp.conj() * self.amplitudes[idx];
        });
        Ok(acc.re)
    }

    /// Zeroes every amplitude whose digits fail `keep`. Returns the squared
    /// norm that was kept.
    pub fn project(&mut self, mut keep: impl FnMut(&[usize]) -> bool) -> f64 {
        let mut digits = vec![0; self.register_dims.len()];
        let mut kept = 0.0;
        for a in self.amplitudes.iter_mut() {
            if keep(&digits) {
                kept += a.norm_sqr();
            } else {
                *a = ZERO;
            }
            increment(&mut digits, &self.register_dims);
        }
        kept
    }

    /// Squared norm of the part of the state whose digits satisfy `pred`.
    pub fn weight_where(&self, mut pred: impl FnMut(&[usize]) -> bool) -> f64 {
        let mut digits = vec![0; self.register_dims.len()];
        let mut w = 0.0;
        for a in &self.amplitudes {
            if pred(&digits) {
                w += a.norm_sqr();
            }
            increment(&mut digits, &self.register_dims);
        }
        w
    }

    /// Visits every amplitude with its multi-index.
    pub fn for_each(&self, mut f: impl FnMut(&[usize], C64)) {
        let mut digits = vec![0; self.register_dims.len()];
        for &a in &self.amplitudes {
            f(&digits, a);
            increment(&mut digits, &self.register_dims);
        }
    }

    /// Reorders amplitudes by a digit-level permutation: the amplitude at
    /// digits `x` moves to digits `map(x)`. `map` must be a bijection.
    pub fn permute_digits(&mut self, mut map: impl FnMut(&[usize], &mut [usize])) {
        let mut out = vec![ZERO; self.amplitudes.len()];
        let mut digits = vec![0; self.register_dims.len()];
        let mut target = vec![0; self.register_dims.len()];
        for &a in &self.amplitudes {
            map(&digits, &mut target);
            let mut idx = 0;
            for (&d, &dim) in target.iter().zip(&self.register_dims) {
                idx = idx * dim + d;
            }
            out[idx] = a;
            increment(&mut digits, &self.register_dims);
        }
        self.amplitudes = out;
    }
}

fn increment(digits: &mut [usize], dims: &[usize]) {
    for r in (0..digits.len()).rev() {
        digits[r] += 1;
        if digits[r] < dims[r] {
            return;
        }
        digits[r] = 0;
    }
}

/// Diagonal weight matrix `D` holding nonnegative Schmidt coefficients with
/// unit Frobenius norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    diagonal: Vec<f64>,
}

impl WeightMatrix {
    pub const NORMALIZATION_TOL: f64 = 1e-9;

    pub fn new(diagonal: Vec<f64>) -> Result<Self> {
        if diagonal.is_empty() {
            return Err(Error::InvalidParameter("empty weight vector".into()));
        }
        if let Some(&neg) = diagonal.iter().find(|&&a| a.is_nan() || a < 0.0 || !a.is_finite()) {
            return Err(Error::InvalidParameter(format!("weight {neg} is not a nonnegative real")));
        }
        let sum_sq: f64 = diagonal.iter().map(|a| a * a).sum();
        if (sum_sq - 1.0).abs() > Self::NORMALIZATION_TOL {
            return Err(Error::WeightNormalization { sum_sq });
        }
        Ok(Self { diagonal })
    }

    /// Rescales arbitrary nonnegative weights to unit norm.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        let norm = raw.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm.is_nan() || norm <= 0.0 {
            return Err(Error::WeightNormalization { sum_sq: norm * norm });
        }
        Self::new(raw.into_iter().map(|a| a.abs() / norm).collect())
    }

    /// `I / sqrt(d)`, the maximally entangled case.
    pub fn uniform(d: usize) -> Self {
        Self {
            diagonal: vec![1.0 / (d as f64).sqrt(); d],
        }
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_real_diagonal(&self.diagonal)
    }
}
