//! Scalars: `f64` for bulk orbit work and `Mp`, a fixed-precision MPFR float
//! used wherever renormalization amplifies round-off.

use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;
use serde::{Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Working precision in bits.
pub const PREC: u32 = 128;

/// Operations shared by `f64` and `Mp` so that primitive maps and small
/// matrix routines can be written once.
pub trait Real:
    Clone
    + fmt::Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn exp_m1(&self) -> Self;
    fn ln_1p(&self) -> Self;
    fn abs(&self) -> Self;
    fn sqrt(&self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    fn is_zero(&self) -> bool {
        self.to_f64() == 0.0
    }
    fn max_of(a: Self, b: Self) -> Self {
        if a >= b {
            a
        } else {
            b
        }
    }
    fn min_of(a: Self, b: Self) -> Self {
        if a <= b {
            a
        } else {
            b
        }
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn exp_m1(&self) -> Self {
        f64::exp_m1(*self)
    }
    fn ln_1p(&self) -> Self {
        f64::ln_1p(*self)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
}

#[derive(Clone, PartialEq, PartialOrd)]
pub struct Mp(pub Float);

impl Mp {
    pub fn new(x: f64) -> Self {
        Mp(Float::with_val(PREC, x))
    }

    pub fn from_i64(x: i64) -> Self {
        Mp(Float::with_val(PREC, x))
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Mp::from_i64(num) / Mp::from_i64(den)
    }

    pub fn pi() -> Self {
        Mp(Float::with_val(PREC, Constant::Pi))
    }

    pub fn cos(&self) -> Self {
        Mp(self.0.clone().cos())
    }

    pub fn powi(&self, n: i32) -> Self {
        Mp(self.0.clone().pow(n))
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    pub fn max(self, other: Mp) -> Mp {
        Real::max_of(self, other)
    }

    pub fn min(self, other: Mp) -> Mp {
        Real::min_of(self, other)
    }
}

impl Real for Mp {
    fn from_f64(x: f64) -> Self {
        Mp::new(x)
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
    fn exp(&self) -> Self {
        Mp(self.0.clone().exp())
    }
    fn ln(&self) -> Self {
        Mp(self.0.clone().ln())
    }
    fn exp_m1(&self) -> Self {
        Mp(self.0.clone().exp_m1())
    }
    fn ln_1p(&self) -> Self {
        Mp(self.0.clone().ln_1p())
    }
    fn abs(&self) -> Self {
        Mp(self.0.clone().abs())
    }
    fn sqrt(&self) -> Self {
        Mp(self.0.clone().sqrt())
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl fmt::Debug for Mp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.30e}", self.0)
    }
}

impl fmt::Display for Mp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.30e}", self.0)
    }
}

impl Serialize for Mp {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

impl From<f64> for Mp {
    fn from(x: f64) -> Self {
        Mp::new(x)
    }
}

macro_rules! mp_binop {
    ($tr:ident, $m:ident) => {
        impl $tr<Mp> for Mp {
            type Output = Mp;
            fn $m(self, rhs: Mp) -> Mp {
                Mp($tr::$m(self.0, rhs.0))
            }
        }
        impl $tr<&Mp> for Mp {
            type Output = Mp;
            fn $m(self, rhs: &Mp) -> Mp {
                Mp($tr::$m(self.0, &rhs.0))
            }
        }
        impl $tr<&Mp> for &Mp {
            type Output = Mp;
            fn $m(self, rhs: &Mp) -> Mp {
                Mp(Float::with_val(PREC, $tr::$m(&self.0, &rhs.0)))
            }
        }
        impl $tr<Mp> for &Mp {
            type Output = Mp;
            fn $m(self, rhs: Mp) -> Mp {
                Mp(Float::with_val(PREC, $tr::$m(&self.0, &rhs.0)))
            }
        }
        impl $tr<f64> for Mp {
            type Output = Mp;
            fn $m(self, rhs: f64) -> Mp {
                Mp($tr::$m(self.0, rhs))
            }
        }
        impl $tr<f64> for &Mp {
            type Output = Mp;
            fn $m(self, rhs: f64) -> Mp {
                Mp(Float::with_val(PREC, $tr::$m(&self.0, rhs)))
            }
        }
    };
}

mp_binop!(Add, add);
mp_binop!(Sub, sub);
mp_binop!(Mul, mul);
mp_binop!(Div, div);

impl Neg for Mp {
    type Output = Mp;
    fn neg(self) -> Mp {
        Mp(-self.0)
    }
}

impl Neg for &Mp {
    type Output = Mp;
    fn neg(self) -> Mp {
        Mp(Float::with_val(PREC, -&self.0))
    }
}

impl PartialEq<f64> for Mp {
    fn eq(&self, other: &f64) -> bool {
        self.0 == *other
    }
}

impl PartialOrd<f64> for Mp {
    fn partial_cmp(&self, other: &f64) -> Option<Ordering> {
        self.0.partial_cmp(other)
    }
}

impl std::iter::Sum for Mp {
    fn sum<I: Iterator<Item = Mp>>(iter: I) -> Mp {
        iter.fold(Mp::new(0.0), |a, b| a + b)
    }
}

impl<'a> std::iter::Sum<&'a Mp> for Mp {
    fn sum<I: Iterator<Item = &'a Mp>>(iter: I) -> Mp {
        iter.fold(Mp::new(0.0), |a, b| a + b)
    }
}

impl num_traits::Zero for Mp {
    fn zero() -> Self {
        Mp::new(0.0)
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

pub fn mp_vec(v: &[f64]) -> Vec<Mp> {
    v.iter().map(|&x| Mp::new(x)).collect()
}

pub fn f64_vec<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extended_precision_resolves_tiny_differences() {
        let one = Mp::new(1.0);
        let tiny = Mp::new(1e-30);
        let x = &one + &tiny;
        assert!((x - one).to_f64() > 0.9e-30);
    }

    #[test]
    fn transcendental_consistency() {
        let x = Mp::new(0.3);
        let y = x.exp_m1().ln_1p();
        assert!((y - x).abs().to_f64() < 1e-35);
        assert!((Mp::pi().cos() + 1.0).abs().to_f64() < 1e-35);
    }
}
