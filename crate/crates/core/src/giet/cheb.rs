//! Chebyshev–Lobatto interpolants on `[0, 1]` in extended precision. Induced
//! branches are carried as such interpolants of their zoomed profile.

use crate::error::{Error, Result};
use crate::real::{Mp, Real};
use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

/// Absolute tail threshold for accepting an interpolant.
pub const CHEB_TOL: f64 = 1e-33;
pub const CHEB_MAX_DEGREE: usize = 1024;
/// Largest tail accepted once the coefficients stop decaying.
pub const CHEB_NOISE_TOL: f64 = 1e-20;

thread_local! {
    static COS_TABLES: RefCell<HashMap<usize, Rc<Vec<Mp>>>> = RefCell::new(HashMap::new());
}

/// `cos(pi m / n)` for `m = 0..2n`.
fn cos_table(n: usize) -> Rc<Vec<Mp>> {
    COS_TABLES.with(|t| {
        t.borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                let pi = Mp::pi();
                Rc::new(
                    (0..2 * n)
                        .map(|m| (&pi * &Mp::from_i64(m as i64) / &Mp::from_i64(n as i64)).cos())
                        .collect(),
                )
            })
            .clone()
    })
}

/// `f(t) = sum_j a_j T_j(2t - 1)` on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct Cheb {
    coef: Vec<Mp>,
    /// Coefficients of `d f / d t`.
    dcoef: Vec<Mp>,
    coef64: Vec<f64>,
    dcoef64: Vec<f64>,
}

impl Cheb {
    pub fn identity() -> Self {
        Cheb::from_coefficients(vec![Mp::new(0.5), Mp::new(0.5)])
    }

    pub fn from_coefficients(coef: Vec<Mp>) -> Self {
        let n = coef.len();
        // derivative w.r.t. s = 2t - 1, then chain factor 2
        let mut ds = vec![Mp::new(0.0); n.max(1)];
        if n >= 2 {
            let mut next = Mp::new(0.0);
            let mut next2 = Mp::new(0.0);
            for j in (0..n - 1).rev() {
                let cur = &next2 + &(&coef[j + 1] * &Mp::from_i64(2 * (j as i64 + 1)));
                ds[j] = cur.clone();
                next2 = next;
                next = cur;
            }
            ds[0] = &ds[0] * 0.5;
        }
        let dcoef: Vec<Mp> = ds.into_iter().map(|c| c * 2.0).collect();
        let coef64 = coef.iter().map(|c| c.to_f64()).collect();
        let dcoef64 = dcoef.iter().map(|c| c.to_f64()).collect();
        Cheb {
            coef,
            dcoef,
            coef64,
            dcoef64,
        }
    }

    /// Adaptive interpolation of `f` on `[0, 1]`, doubling the degree from
    /// `start` until the trailing coefficients fall below `CHEB_TOL`.
    pub fn fit(f: &dyn Fn(&Mp) -> Mp, start: usize) -> Result<Self> {
        let mut n = start.max(4);
        let mut vals: Vec<Mp> = lobatto_nodes(n).iter().map(f).collect();
        let mut prev_tail = f64::INFINITY;
        loop {
            let coef = coefficients(&vals, n);
            let scale = coef
                .iter()
                .map(|c| c.abs().to_f64())
                .fold(1.0f64, f64::max);
            let tail = coef[n - 2..]
                .iter()
                .map(|c| c.abs().to_f64())
                .fold(0.0f64, f64::max);
            if tail <= CHEB_TOL * scale {
                let keep = trim(&coef, CHEB_TOL * scale * 1e-3);
                return Ok(Cheb::from_coefficients(coef[..keep].to_vec()));
            }
            // Round-off floor reached: doubling no longer reduces the tail.
            if n >= 32 && tail <= CHEB_NOISE_TOL * scale && tail > 1e-2 * prev_tail {
                let keep = trim(&coef, 4.0 * tail.max(prev_tail));
                return Ok(Cheb::from_coefficients(coef[..keep].to_vec()));
            }
            if 2 * n > CHEB_MAX_DEGREE {
                return Err(Error::Diagnostic {
                    module: "giet",
                    level: 0,
                    cause: format!("interpolant did not converge (tail {tail:e} at degree {n})"),
                });
            }
            prev_tail = tail;
            let nodes = lobatto_nodes(2 * n);
            let mut next = Vec::with_capacity(2 * n + 1);
            for (k, t) in nodes.iter().enumerate() {
                if k % 2 == 0 {
                    next.push(vals[k / 2].clone());
                } else {
                    next.push(f(t));
                }
            }
            vals = next;
            n *= 2;
        }
    }

    pub fn degree(&self) -> usize {
        self.coef.len().saturating_sub(1)
    }

    pub fn eval(&self, t: &Mp) -> Mp {
        clenshaw(&self.coef, t)
    }

    pub fn deriv(&self, t: &Mp) -> Mp {
        clenshaw(&self.dcoef, t)
    }

    pub fn eval64(&self, t: f64) -> f64 {
        clenshaw(&self.coef64, &t)
    }

    pub fn deriv64(&self, t: f64) -> f64 {
        clenshaw(&self.dcoef64, &t)
    }

    /// Solves `eval(t) = y` for an increasing interpolant by safeguarded Newton.
    pub fn solve(&self, y: &Mp) -> Mp {
        let (mut lo, mut hi) = (Mp::new(0.0), Mp::new(1.0));
        let mut t = y.clone().max(Mp::new(0.0)).min(Mp::new(1.0));
        for _ in 0..200 {
            let v = self.eval(&t) - y;
            if v > 0.0 {
                hi = t.clone();
            } else {
                lo = t.clone();
            }
            let d = self.deriv(&t);
            let mut next = &t - &(&v / &d);
            if !(next > lo && next < hi) || !next.is_finite() {
                next = (&lo + &hi) * 0.5;
            }
            let step = (&next - &t).abs().to_f64();
            t = next;
            if step < 1e-37 {
                break;
            }
        }
        t
    }
}

pub fn lobatto_nodes(n: usize) -> Vec<Mp> {
    let table = cos_table(n);
    (0..=n).map(|k| (Mp::new(1.0) - &table[k]) * 0.5).collect()
}

/// Coefficients from values at `t_k = (1 - cos(pi k / n)) / 2`, i.e. at
/// `s_k = -cos(pi k / n)`.
fn coefficients(vals: &[Mp], n: usize) -> Vec<Mp> {
    let table = cos_table(n);
    let two_n = 2 * n;
    (0..=n)
        .map(|j| {
            let mut acc = Mp::new(0.0);
            for (k, v) in vals.iter().enumerate() {
                // T_j(-cos x) = (-1)^j cos(j x)
                let c = &table[(j * k) % two_n];
                let mut term = v * c;
                if k == 0 || k == n {
                    term = term * 0.5;
                }
                acc = acc + term;
            }
            let mut a = acc * (2.0 / n as f64);
            if j % 2 == 1 {
                a = -a;
            }
            if j == 0 || j == n {
                a = a * 0.5;
            }
            a
        })
        .collect()
}

fn trim(coef: &[Mp], tol: f64) -> usize {
    let mut keep = coef.len();
    while keep > 2 && coef[keep - 1].abs().to_f64() <= tol {
        keep -= 1;
    }
    keep
}

fn clenshaw<T: Real>(coef: &[T], t: &T) -> T {
    let s = t.clone() * T::from_f64(2.0) - T::one();
    let two_s = s.clone() * T::from_f64(2.0);
    let mut b1 = T::zero();
    let mut b2 = T::zero();
    for c in coef.iter().skip(1).rev() {
        let b0 = two_s.clone() * b1.clone() - b2 + c.clone();
        b2 = b1;
        b1 = b0;
    }
    match coef.first() {
        Some(c0) => s * b1 - b2 + c0.clone(),
        None => T::zero(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_profile_in_extended_precision() {
        let s = Mp::new(0.8);
        let e = s.exp_m1();
        let f = |t: &Mp| (&s * t).exp_m1() / &e;
        let c = Cheb::fit(&f, 8).unwrap();
        for i in 0..=10 {
            let t = Mp::new(i as f64 / 10.0);
            assert!((c.eval(&t) - f(&t)).abs().to_f64() < 1e-32);
            let d = &s * &(&s * &t).exp() / &e;
            assert!((c.deriv(&t) - d).abs().to_f64() < 1e-30);
        }
        let y = Mp::new(0.4);
        let t = c.solve(&y);
        assert!((c.eval(&t) - y).abs().to_f64() < 1e-34);
    }

    #[test]
    fn identity_is_exact() {
        let c = Cheb::identity();
        assert_eq!(c.eval64(0.25), 0.25);
        assert_eq!(c.deriv64(0.7), 1.0);
    }
}
