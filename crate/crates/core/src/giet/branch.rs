//! Closed-form primitive diffeomorphisms and composition chains of them.

use crate::real::{Mp, Real};
use serde::{Deserialize, Serialize};

/// A primitive orientation-preserving map.
#[derive(Clone, Debug, PartialEq)]
pub enum Prim<T> {
    /// `x -> a x + b`, `a > 0`.
    Affine { a: T, b: T },
    /// `x -> (e^{s x} - 1) / (e^s - 1)` on `[0, 1]`; `e = e^s - 1`.
    Profile { s: T, e: T },
    /// Inverse of `Profile`: `y -> ln(1 + y (e^s - 1)) / s`.
    InvProfile { s: T, e: T },
}

/// Serializable description of a primitive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrimSpec {
    Affine { a: f64, b: f64 },
    Profile { s: f64 },
    InvProfile { s: f64 },
}

impl<T: Real> Prim<T> {
    pub fn affine(a: T, b: T) -> Self {
        Prim::Affine { a, b }
    }

    pub fn profile(s: T) -> Self {
        let e = s.exp_m1();
        Prim::Profile { s, e }
    }

    pub fn inv_profile(s: T) -> Self {
        let e = s.exp_m1();
        Prim::InvProfile { s, e }
    }

    fn is_identity_profile(s: &T) -> bool {
        s.is_zero()
    }

    pub fn inverse(&self) -> Self {
        match self {
            Prim::Affine { a, b } => Prim::Affine {
                a: T::one() / a.clone(),
                b: -(b.clone() / a.clone()),
            },
            Prim::Profile { s, e } => Prim::InvProfile {
                s: s.clone(),
                e: e.clone(),
            },
            Prim::InvProfile { s, e } => Prim::Profile {
                s: s.clone(),
                e: e.clone(),
            },
        }
    }

    pub fn value(&self, x: &T) -> T {
        match self {
            Prim::Affine { a, b } => a.clone() * x.clone() + b.clone(),
            Prim::Profile { s, e } => {
                if Self::is_identity_profile(s) {
                    x.clone()
                } else {
                    (s.clone() * x.clone()).exp_m1() / e.clone()
                }
            }
            Prim::InvProfile { s, e } => {
                if Self::is_identity_profile(s) {
                    x.clone()
                } else {
                    (x.clone() * e.clone()).ln_1p() / s.clone()
                }
            }
        }
    }

    /// Value, first and second derivative.
    pub fn jet(&self, x: &T) -> (T, T, T) {
        match self {
            Prim::Affine { a, b } => (a.clone() * x.clone() + b.clone(), a.clone(), T::zero()),
            Prim::Profile { s, e } => {
                if Self::is_identity_profile(s) {
                    return (x.clone(), T::one(), T::zero());
                }
                let sx = s.clone() * x.clone();
                let ex = sx.exp();
                let v = sx.exp_m1() / e.clone();
                let d1 = s.clone() * ex / e.clone();
                let d2 = s.clone() * d1.clone();
                (v, d1, d2)
            }
            Prim::InvProfile { s, e } => {
                if Self::is_identity_profile(s) {
                    return (x.clone(), T::one(), T::zero());
                }
                let g = T::one() + x.clone() * e.clone();
                let v = (x.clone() * e.clone()).ln_1p() / s.clone();
                let d1 = e.clone() / (s.clone() * g.clone());
                let d2 = -(d1.clone() * e.clone() / g);
                (v, d1, d2)
            }
        }
    }

    /// `log` of the first derivative, computed without forming the derivative.
    pub fn log_deriv(&self, x: &T) -> T {
        match self {
            Prim::Affine { a, .. } => a.ln(),
            Prim::Profile { s, e } => {
                if Self::is_identity_profile(s) {
                    T::zero()
                } else {
                    (s.clone() / e.clone()).ln() + s.clone() * x.clone()
                }
            }
            Prim::InvProfile { s, e } => {
                if Self::is_identity_profile(s) {
                    T::zero()
                } else {
                    (e.clone() / s.clone()).ln() - (x.clone() * e.clone()).ln_1p()
                }
            }
        }
    }

    pub fn convert<U: Real>(&self) -> Prim<U> {
        let c = |t: &T| U::from_f64(t.to_f64());
        match self {
            Prim::Affine { a, b } => Prim::Affine { a: c(a), b: c(b) },
            Prim::Profile { s, .. } => Prim::profile(c(s)),
            Prim::InvProfile { s, .. } => Prim::inv_profile(c(s)),
        }
    }
}

impl Prim<Mp> {
    pub fn spec(&self) -> PrimSpec {
        match self {
            Prim::Affine { a, b } => PrimSpec::Affine {
                a: a.to_f64(),
                b: b.to_f64(),
            },
            Prim::Profile { s, .. } => PrimSpec::Profile { s: s.to_f64() },
            Prim::InvProfile { s, .. } => PrimSpec::InvProfile { s: s.to_f64() },
        }
    }

    pub fn from_spec(p: &PrimSpec) -> Self {
        match *p {
            PrimSpec::Affine { a, b } => Prim::affine(Mp::new(a), Mp::new(b)),
            PrimSpec::Profile { s } => Prim::profile(Mp::new(s)),
            PrimSpec::InvProfile { s } => Prim::inv_profile(Mp::new(s)),
        }
    }
}

/// Composition chain `p_k o ... o p_1` applied left to right, kept in
/// extended precision with an `f64` shadow copy for bulk orbit iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    prims: Vec<Prim<Mp>>,
    fast: Vec<Prim<f64>>,
}

impl Chain {
    pub fn new(prims: Vec<Prim<Mp>>) -> Self {
        let fast = prims.iter().map(|p| p.convert()).collect();
        Chain { prims, fast }
    }

    pub fn identity() -> Self {
        Chain::new(Vec::new())
    }

    pub fn prims(&self) -> &[Prim<Mp>] {
        &self.prims
    }

    /// `other o self`.
    pub fn then(&self, other: &Chain) -> Chain {
        let mut prims = self.prims.clone();
        prims.extend(other.prims.iter().cloned());
        Chain::new(prims)
    }

    pub fn inverse(&self) -> Chain {
        Chain::new(self.prims.iter().rev().map(|p| p.inverse()).collect())
    }

    pub fn value(&self, x: &Mp) -> Mp {
        self.prims.iter().fold(x.clone(), |v, p| p.value(&v))
    }

    pub fn value64(&self, x: f64) -> f64 {
        self.fast.iter().fold(x, |v, p| p.value(&v))
    }

    pub fn jet(&self, x: &Mp) -> (Mp, Mp, Mp) {
        jet_chain(&self.prims, x)
    }

    pub fn jet64(&self, x: f64) -> (f64, f64, f64) {
        jet_chain(&self.fast, &x)
    }

    pub fn log_deriv(&self, x: &Mp) -> Mp {
        log_deriv_chain(&self.prims, x)
    }

    pub fn log_deriv64(&self, x: f64) -> f64 {
        log_deriv_chain(&self.fast, &x)
    }

    /// Value and log-derivative in one pass.
    pub fn value_log_deriv64(&self, x: f64) -> (f64, f64) {
        let mut v = x;
        let mut l = 0.0;
        for p in &self.fast {
            l += p.log_deriv(&v);
            v = p.value(&v);
        }
        (v, l)
    }

    pub fn specs(&self) -> Vec<PrimSpec> {
        self.prims.iter().map(|p| p.spec()).collect()
    }
}

fn jet_chain<T: Real>(prims: &[Prim<T>], x: &T) -> (T, T, T) {
    let mut v = x.clone();
    let mut d1 = T::one();
    let mut d2 = T::zero();
    for p in prims {
        let (pv, p1, p2) = p.jet(&v);
        d2 = p2 * d1.clone() * d1.clone() + p1.clone() * d2;
        d1 = p1 * d1;
        v = pv;
    }
    (v, d1, d2)
}

fn log_deriv_chain<T: Real>(prims: &[Prim<T>], x: &T) -> T {
    let mut v = x.clone();
    let mut l = T::zero();
    for p in prims {
        l = l + p.log_deriv(&v);
        v = p.value(&v);
    }
    l
}

/// Affine bijection `[a, b] -> [c, d]`.
pub fn affine_between(a: &Mp, b: &Mp, c: &Mp, d: &Mp) -> Prim<Mp> {
    let slope = (d - c) / (b - a);
    let shift = c - &(&slope * a);
    Prim::affine(slope, shift)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_inverse_round_trip() {
        let p = Prim::profile(Mp::new(0.4));
        let q = p.inverse();
        let x = Mp::new(0.3);
        assert!((q.value(&p.value(&x)) - x).abs().to_f64() < 1e-35);
    }

    #[test]
    fn jets_match_finite_differences() {
        let c = Chain::new(vec![
            Prim::profile(Mp::new(0.7)),
            Prim::affine(Mp::new(2.0), Mp::new(0.1)),
            Prim::inv_profile(Mp::new(-0.3)),
        ]);
        let x = Mp::new(0.37);
        let h = Mp::new(1e-12);
        let (v, d1, d2) = c.jet(&x);
        let fd1 = (c.value(&(&x + &h)) - c.value(&(&x - &h))) / (h.clone() * 2.0);
        let fd2 = (c.value(&(&x + &h)) - v.clone() * 2.0 + c.value(&(&x - &h))) / (&h * &h);
        assert!((d1.clone() - fd1).abs().to_f64() < 1e-18);
        assert!((d2 - fd2).abs().to_f64() < 1e-8);
        assert!((c.log_deriv(&x) - d1.ln()).abs().to_f64() < 1e-30);
        assert!((c.value64(0.37) - v.to_f64()).abs() < 1e-15);
    }
}
