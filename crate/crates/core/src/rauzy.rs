//! Interval exchanges, Rauzy–Veech and Zorich induction, integer cocycle
//! windows, the positive-block acceleration and suspension data.

use crate::combinat::Permutation;
use crate::error::{Error, Result};
use crate::matrix::IntMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use std::collections::VecDeque;
use std::fmt::Debug;
use std::ops::{Add, Sub};

/// Default relative tolerance for detecting ties between competing lengths.
pub const KEANE_TOL: f64 = 1e-14;

/// Scalar type usable for interval lengths.
pub trait Length: Clone + Debug + PartialOrd + Zero + Add<Output = Self> + Sub<Output = Self> {
    /// Whether `a` and `b` are indistinguishable at scale `scale`.
    fn tie(a: &Self, b: &Self, scale: &Self, tol: f64) -> bool;
    fn as_f64(&self) -> f64;
}

impl Length for f64 {
    fn tie(a: &f64, b: &f64, scale: &f64, tol: f64) -> bool {
        (a - b).abs() <= tol * scale.abs()
    }
    fn as_f64(&self) -> f64 {
        *self
    }
}

impl Length for BigRational {
    fn tie(a: &Self, b: &Self, _: &Self, _: f64) -> bool {
        a == b
    }
    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Length for crate::real::Mp {
    fn tie(a: &Self, b: &Self, scale: &Self, tol: f64) -> bool {
        use crate::real::Real;
        (a - b).abs() <= scale.abs() * tol
    }
    fn as_f64(&self) -> f64 {
        crate::real::Real::to_f64(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Iet<T: Length = f64> {
    lengths: Vec<T>,
    perm: Permutation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StepRecord {
    pub epsilon: u8,
    pub winner: usize,
    pub loser: usize,
}

impl StepRecord {
    pub fn for_type(perm: &Permutation, epsilon: u8) -> Self {
        StepRecord {
            epsilon,
            winner: perm.winner(epsilon),
            loser: perm.loser(epsilon),
        }
    }

    /// `A = Id + E_{winner, loser}`.
    pub fn matrix(&self, d: usize) -> IntMatrix {
        IntMatrix::elementary(d, self.winner, self.loser)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZorichRecord {
    pub epsilon: u8,
    pub z: usize,
    #[serde(rename = "B")]
    pub b: IntMatrix,
    pub lambda: Vec<f64>,
}

impl<T: Length> Iet<T> {
    pub fn new(lengths: Vec<T>, perm: Permutation) -> Result<Self> {
        if lengths.len() != perm.d() {
            return Err(Error::InvalidData("length vector size".into()));
        }
        if lengths.iter().any(|l| !(*l > T::zero())) {
            return Err(Error::InvalidData("lengths must be positive".into()));
        }
        Ok(Iet { lengths, perm })
    }

    pub fn lengths(&self) -> &[T] {
        &self.lengths
    }

    pub fn perm(&self) -> &Permutation {
        &self.perm
    }

    pub fn total(&self) -> T {
        self.lengths.iter().cloned().fold(T::zero(), |a, b| a + b)
    }

    pub fn rv_type_tol(&self, tol: f64) -> Result<StepRecord> {
        let a0 = self.perm.winner(0);
        let a1 = self.perm.winner(1);
        let (l0, l1) = (&self.lengths[a0], &self.lengths[a1]);
        if T::tie(l0, l1, &self.total(), tol) {
            return Err(Error::KeaneViolation { step: 0 });
        }
        Ok(StepRecord::for_type(&self.perm, if l0 > l1 { 0 } else { 1 }))
    }

    pub fn rv_type(&self) -> Result<StepRecord> {
        self.rv_type_tol(KEANE_TOL)
    }

    /// Applies `lambda' = A^{-1} lambda` for a given step record.
    pub fn apply_step(&self, rec: &StepRecord) -> Result<Self> {
        let mut lengths = self.lengths.clone();
        lengths[rec.winner] = lengths[rec.winner].clone() - lengths[rec.loser].clone();
        if !(lengths[rec.winner] > T::zero()) {
            return Err(Error::KeaneViolation { step: 0 });
        }
        Ok(Iet {
            lengths,
            perm: self.perm.rauzy_move(rec.epsilon),
        })
    }

    pub fn rv_step(&self) -> Result<(Self, StepRecord)> {
        let rec = self.rv_type()?;
        Ok((self.apply_step(&rec)?, rec))
    }

    /// Runs Rauzy–Veech steps until the type changes.
    pub fn zorich_step(&self) -> Result<(Self, ZorichRecord)> {
        let (mut cur, first) = self.rv_step()?;
        let d = self.perm.d();
        let mut b = first.matrix(d);
        let mut z = 1;
        loop {
            let rec = cur.rv_type().map_err(|_| Error::KeaneViolation { step: z })?;
            if rec.epsilon != first.epsilon {
                break;
            }
            cur = cur
                .apply_step(&rec)
                .map_err(|_| Error::KeaneViolation { step: z })?;
            b = &b * &rec.matrix(d);
            z += 1;
        }
        let lambda = cur.lengths.iter().map(|x| x.as_f64()).collect();
        Ok((
            cur,
            ZorichRecord {
                epsilon: first.epsilon,
                z,
                b,
                lambda,
            },
        ))
    }

    /// Finite-depth surrogate for Keane's condition.
    pub fn keane_check(&self, depth: usize, tol: f64) -> Result<()> {
        let mut cur = self.clone();
        for step in 0..depth {
            let rec = cur
                .rv_type_tol(tol)
                .map_err(|_| Error::KeaneViolation { step })?;
            cur = cur
                .apply_step(&rec)
                .map_err(|_| Error::KeaneViolation { step })?;
        }
        Ok(())
    }

    /// Records `steps` Rauzy–Veech steps.
    pub fn rauzy_path(&self, steps: usize) -> Result<(RauzyPath, Self)> {
        let mut cur = self.clone();
        let mut types = Vec::with_capacity(steps);
        for step in 0..steps {
            let (next, rec) = cur
                .rv_step()
                .map_err(|_| Error::KeaneViolation { step })?;
            types.push(rec.epsilon);
            cur = next;
        }
        Ok((RauzyPath::new(self.perm.clone(), types), cur))
    }

    pub fn zorich_log(&self, steps: usize) -> Result<Vec<ZorichRecord>> {
        let mut cur = self.clone();
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let (next, rec) = cur.zorich_step()?;
            out.push(rec);
            cur = next;
        }
        Ok(out)
    }
}

impl Iet<f64> {
    pub fn normalized(&self) -> Self {
        let t = self.total();
        Iet {
            lengths: self.lengths.iter().map(|x| x / t).collect(),
            perm: self.perm.clone(),
        }
    }

    pub fn is_normalized(&self) -> bool {
        (self.total() - 1.0).abs() <= 1e-12
    }
}

/// Finite path in the Rauzy graph, stored as its start and arrow types.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RauzyPath {
    pub start: Permutation,
    pub types: Vec<u8>,
}

impl RauzyPath {
    pub fn new(start: Permutation, types: Vec<u8>) -> Self {
        RauzyPath { start, types }
    }

    /// `reps` repetitions of a loop based at `start`.
    pub fn periodic(start: Permutation, cycle: &[u8], reps: usize) -> Result<Self> {
        let lp = RauzyPath::new(start.clone(), cycle.to_vec());
        if lp.end() != start {
            return Err(Error::InvalidData("cycle does not close up".into()));
        }
        Ok(RauzyPath::new(start, cycle.repeat(reps)))
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn d(&self) -> usize {
        self.start.d()
    }

    /// Permutations visited, `len() + 1` of them.
    pub fn perms(&self) -> Vec<Permutation> {
        let mut out = Vec::with_capacity(self.types.len() + 1);
        out.push(self.start.clone());
        for &t in &self.types {
            let next = out.last().unwrap().rauzy_move(t);
            out.push(next);
        }
        out
    }

    pub fn end(&self) -> Permutation {
        self.perms().pop().unwrap()
    }

    pub fn steps(&self) -> Vec<StepRecord> {
        let perms = self.perms();
        self.types
            .iter()
            .zip(&perms)
            .map(|(&t, p)| StepRecord::for_type(p, t))
            .collect()
    }

    pub fn matrix(&self) -> IntMatrix {
        let d = self.d();
        self.steps()
            .iter()
            .fold(IntMatrix::identity(d), |acc, s| &acc * &s.matrix(d))
    }

    /// Sub-path between Rauzy–Veech indices `m <= n`.
    pub fn slice(&self, m: usize, n: usize) -> RauzyPath {
        let start = self.perms().swap_remove(m);
        RauzyPath::new(start, self.types[m..n].to_vec())
    }

    pub fn concat(&self, other: &RauzyPath) -> Result<RauzyPath> {
        if self.end() != other.start {
            return Err(Error::InvalidData("paths are not composable".into()));
        }
        let mut types = self.types.clone();
        types.extend_from_slice(&other.types);
        Ok(RauzyPath::new(self.start.clone(), types))
    }

    /// Rauzy–Veech indices at which complete Zorich steps end (starting with 0).
    pub fn zorich_times(&self) -> Vec<usize> {
        let mut out = vec![0];
        for i in 1..self.types.len() {
            if self.types[i] != self.types[i - 1] {
                out.push(i);
            }
        }
        out
    }

    pub fn window(&self, m: usize, n: usize) -> Result<CocycleWindow> {
        if m > n || n > self.len() {
            return Err(Error::OutOfRange(format!("window [{m}, {n}) of {}", self.len())));
        }
        let matrix = self.slice(m, n).matrix();
        let ones = vec![BigInt::one(); self.d()];
        let heights = matrix.transpose().mul_vec_int(&ones);
        Ok(CocycleWindow {
            start: m,
            end: n,
            matrix,
            heights,
        })
    }

    /// Whether the loop `gamma` occurs as a block starting at index `i`.
    pub fn occurs_at(&self, gamma: &RauzyPath, i: usize, perms: &[Permutation]) -> bool {
        i + gamma.len() <= self.len()
            && perms[i] == gamma.start
            && self.types[i..i + gamma.len()] == gamma.types[..]
    }
}

/// Product of Rauzy–Veech matrices over `[start, end)` together with heights.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CocycleWindow {
    pub start: usize,
    pub end: usize,
    /// Length cocycle product `A_start ... A_{end-1}`.
    pub matrix: IntMatrix,
    /// `matrix^T` applied to the all-ones vector.
    pub heights: Vec<BigInt>,
}

impl CocycleWindow {
    /// Height cocycle `matrix^T`, the one acting on log-slope vectors.
    pub fn height_cocycle(&self) -> IntMatrix {
        self.matrix.transpose()
    }

    pub fn det(&self) -> BigInt {
        self.matrix.det()
    }

    pub fn compose(&self, next: &CocycleWindow) -> Result<CocycleWindow> {
        if self.end != next.start {
            return Err(Error::InvalidData("windows are not adjacent".into()));
        }
        let matrix = &self.matrix * &next.matrix;
        let ones = vec![BigInt::one(); matrix.dim()];
        let heights = matrix.transpose().mul_vec_int(&ones);
        Ok(CocycleWindow {
            start: self.start,
            end: next.end,
            matrix,
            heights,
        })
    }
}

/// Accelerated times: level `k` starts at Rauzy–Veech index `rv_index[k]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Schedule {
    pub gamma: RauzyPath,
    /// Zorich indices `n_k`.
    pub zorich_times: Vec<usize>,
    /// Rauzy–Veech indices `k(n)`.
    pub rv_index: Vec<usize>,
    /// Sublinearity diagnostic `max_k n_k / k`.
    pub max_ratio: f64,
}

impl Schedule {
    pub fn levels(&self) -> usize {
        self.rv_index.len() - 1
    }

    pub fn windows(&self, path: &RauzyPath) -> Result<Vec<CocycleWindow>> {
        self.rv_index
            .windows(2)
            .map(|w| path.window(w[0], w[1]))
            .collect()
    }
}

/// Shortest loop at `start` whose matrix is entrywise positive.
pub fn default_gamma(start: &Permutation, max_len: usize) -> Result<RauzyPath> {
    let d = start.d();
    let mut queue: VecDeque<(Vec<u8>, Permutation, IntMatrix)> = VecDeque::new();
    queue.push_back((Vec::new(), start.clone(), IntMatrix::identity(d)));
    while let Some((types, perm, m)) = queue.pop_front() {
        if !types.is_empty() && perm == *start && m.is_positive() {
            return Ok(RauzyPath::new(start.clone(), types));
        }
        if types.len() == max_len {
            continue;
        }
        for eps in 0..2u8 {
            let rec = StepRecord::for_type(&perm, eps);
            let mut t = types.clone();
            t.push(eps);
            queue.push_back((t, perm.rauzy_move(eps), &m * &rec.matrix(d)));
        }
    }
    Err(Error::Diagnostic {
        module: "rauzy",
        level: 0,
        cause: format!("no positive loop of length <= {max_len}"),
    })
}

/// Acceleration along `path`: each window between consecutive accelerated
/// times is a union of Zorich steps containing one occurrence of `gamma`.
pub fn accelerate(path: &RauzyPath, gamma: &RauzyPath) -> Result<Schedule> {
    if gamma.is_empty() || !gamma.matrix().is_positive() {
        return Err(Error::InvalidData("gamma must have a positive matrix".into()));
    }
    let perms = path.perms();
    let zt = path.zorich_times();
    let mut zorich_times = vec![0];
    let mut rv_index = vec![0];
    let mut last = 0usize;
    let mut first_occurrence_end: Option<usize> = None;
    for (zi, &t) in zt.iter().enumerate().skip(1) {
        if first_occurrence_end.is_none() {
            first_occurrence_end = (last..t)
                .find(|&i| path.occurs_at(gamma, i, &perms))
                .map(|i| i + gamma.len());
        }
        if let Some(e) = first_occurrence_end {
            if e <= t {
                zorich_times.push(zi);
                rv_index.push(t);
                last = t;
                first_occurrence_end = None;
            }
        }
    }
    if rv_index.len() < 2 {
        return Err(Error::Diagnostic {
            module: "rauzy",
            level: 0,
            cause: "gamma never occurs within the available depth".into(),
        });
    }
    let max_ratio = zorich_times
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &n)| n as f64 / k as f64)
        .fold(0.0, f64::max);
    Ok(Schedule {
        gamma: gamma.clone(),
        zorich_times,
        rv_index,
        max_ratio,
    })
}

/// Perron–Frobenius eigenvector (sum 1) of the loop matrix; the lengths of
/// the self-similar exchange whose path repeats `gamma` forever.
pub fn self_similar_lengths(gamma: &RauzyPath) -> Result<Vec<f64>> {
    let m = gamma.matrix();
    if !m.is_positive() {
        return Err(Error::InvalidData("loop matrix is not positive".into()));
    }
    let mf = m.to_f64();
    let d = m.dim();
    let mut v = nalgebra::DVector::from_element(d, 1.0 / d as f64);
    for _ in 0..2000 {
        let w = &mf * &v;
        let w = &w / w.sum();
        let done = (&w - &v).amax() < 1e-17;
        v = w;
        if done {
            break;
        }
    }
    Ok(v.iter().copied().collect())
}

/// Exact-rational lengths `(1 - x, x)`-style helper for the two-letter case.
pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Suspension data `tau` over the alphabet.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuspensionData {
    pub tau: Vec<f64>,
}

impl SuspensionData {
    pub fn is_valid(&self, p: &Permutation) -> bool {
        let d = p.d();
        let (top, bottom) = (p.row(0), p.row(1));
        (1..d).all(|k| {
            let s0: f64 = top[..k].iter().map(|&a| self.tau[a]).sum();
            let s1: f64 = bottom[..k].iter().map(|&a| self.tau[a]).sum();
            s0 > 0.0 && s1 < 0.0
        })
    }

    /// `tau -> B^{-1} tau` for a unimodular window matrix `B`.
    pub fn step(&self, b: &IntMatrix) -> Result<SuspensionData> {
        let inv = b
            .inverse()
            .ok_or_else(|| Error::InvalidData("window matrix is not unimodular".into()))?;
        let v = inv.mul_vec_f64(&nalgebra::DVector::from_vec(self.tau.clone()));
        Ok(SuspensionData {
            tau: v.iter().copied().collect(),
        })
    }
}

/// Partial quotients `a_1, a_2, ...` of `x` in `(0, 1)`, exact.
pub fn continued_fraction(x: &BigRational, max_terms: usize) -> Vec<BigInt> {
    let mut out = Vec::new();
    let mut r = x.clone();
    while out.len() < max_terms && r.is_positive() {
        let inv = r.recip();
        let a = inv.floor();
        out.push(a.to_integer());
        r = inv - a;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swap() -> Permutation {
        Permutation::from_rows("A B", "B A").unwrap()
    }

    #[test]
    fn swap_type_examples() {
        let t = Iet::new(vec![0.7, 0.3], swap()).unwrap();
        let rec = t.rv_type().unwrap();
        assert_eq!((rec.epsilon, rec.winner, rec.loser), (1, 0, 1));
        assert_eq!(rec.matrix(2), IntMatrix::from_rows(&[vec![1, 1], vec![0, 1]]));
        let (next, _) = t.rv_step().unwrap();
        assert!((next.lengths()[0] - 0.4).abs() < 1e-15);
        assert_eq!(next.perm(), &swap());
        let t = Iet::new(vec![0.3, 0.7], swap()).unwrap();
        assert_eq!(t.rv_type().unwrap().epsilon, 0);
        let t = Iet::new(vec![0.5, 0.5], swap()).unwrap();
        assert!(matches!(t.rv_type(), Err(Error::KeaneViolation { .. })));
    }

    #[test]
    fn zero_length_rejected() {
        assert!(Iet::new(vec![0.0, 1.0], swap()).is_err());
    }

    #[test]
    fn rational_keane_violation() {
        let t = Iet::new(vec![rational(2, 3), rational(1, 3)], swap()).unwrap();
        assert_eq!(t.keane_check(10, 0.0), Err(Error::KeaneViolation { step: 1 }));
    }

    #[test]
    fn cf_of_rational() {
        let cf = continued_fraction(&rational(7, 24), 10);
        // 7/24 = [0; 3, 2, 3]
        assert_eq!(cf, vec![3.into(), 2.into(), 3.into()]);
    }
}
