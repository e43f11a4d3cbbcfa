//! Square matrices over arbitrary-precision integers, used for cocycle windows.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use std::fmt;
use std::ops::Mul;

#[derive(Clone, PartialEq, Eq)]
pub struct IntMatrix {
    n: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(n: usize) -> Self {
        IntMatrix {
            n,
            data: vec![BigInt::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = BigInt::one();
        }
        m
    }

    /// `Id + E_{row,col}`.
    pub fn elementary(n: usize, row: usize, col: usize) -> Self {
        let mut m = Self::identity(n);
        m.data[row * n + col] += 1;
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "matrix must be square");
            for (j, &v) in r.iter().enumerate() {
                m.data[i * n + j] = BigInt::from(v);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.n + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<BigInt>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t.data[j * n + i] = self.data[i * n + j].clone();
            }
        }
        t
    }

    pub fn is_positive(&self) -> bool {
        self.data.iter().all(|x| x.is_positive())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|x| !x.is_negative())
    }

    pub fn min_entry(&self) -> BigInt {
        self.data.iter().min().cloned().unwrap_or_default()
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> BigInt {
        self.data
            .chunks(self.n)
            .map(|r| r.iter().map(|x| x.abs()).sum::<BigInt>())
            .max()
            .unwrap_or_default()
    }

    pub fn norm_inf_f64(&self) -> f64 {
        self.norm_inf().to_f64().unwrap_or(f64::INFINITY)
    }

    pub fn det(&self) -> BigInt {
        bareiss_det(self.n, self.data.clone())
    }

    /// Exact inverse; `None` unless the matrix is invertible over the integers.
    pub fn inverse(&self) -> Option<Self> {
        let n = self.n;
        let mut a: Vec<Vec<BigRational>> = (0..n)
            .map(|i| {
                let mut row: Vec<BigRational> = (0..n)
                    .map(|j| BigRational::from_integer(self.get(i, j).clone()))
                    .collect();
                row.extend((0..n).map(|j| {
                    if i == j {
                        BigRational::one()
                    } else {
                        BigRational::zero()
                    }
                }));
                row
            })
            .collect();
        for col in 0..n {
            let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
            a.swap(col, piv);
            let p = a[col][col].clone();
            for x in a[col].iter_mut() {
                *x = &*x / &p;
            }
            for r in 0..n {
                if r != col && !a[r][col].is_zero() {
                    let f = a[r][col].clone();
                    for c in 0..2 * n {
                        let v = &f * &a[col][c];
                        a[r][c] -= v;
                    }
                }
            }
        }
        let mut inv = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let v = &a[i][n + j];
                if !v.is_integer() {
                    return None;
                }
                inv.data[i * n + j] = v.to_integer();
            }
        }
        Some(inv)
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| {
            self.get(i, j).to_f64().unwrap_or(f64::NAN)
        })
    }

    pub fn mul_vec_f64(&self, v: &DVector<f64>) -> DVector<f64> {
        self.to_f64() * v
    }

    pub fn mul_vec_int(&self, v: &[BigInt]) -> Vec<BigInt> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * &v[j]).sum())
            .collect()
    }
}

impl Mul for &IntMatrix {
    type Output = IntMatrix;
    fn mul(self, rhs: &IntMatrix) -> IntMatrix {
        let n = self.n;
        assert_eq!(n, rhs.n);
        let mut out = IntMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = &self.data[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = &rhs.data[k * n + j];
                    if !b.is_zero() {
                        out.data[i * n + j] += a * b;
                    }
                }
            }
        }
        out
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

impl Serialize for IntMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> = self
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|x| x.to_string()).collect())
            .collect();
        rows.serialize(s)
    }
}

fn bareiss_det(n: usize, mut a: Vec<BigInt>) -> BigInt {
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k * n + k].is_zero() {
            match (k + 1..n).find(|&r| !a[r * n + k].is_zero()) {
                Some(r) => {
                    for c in 0..n {
                        a.swap(k * n + c, r * n + c);
                    }
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &a[i * n + j] * &a[k * n + k] - &a[i * n + k] * &a[k * n + j];
                a[i * n + j] = v / &prev;
            }
        }
        prev = a[k * n + k].clone();
    }
    sign * a[n * n - 1].clone()
}

/// Rank of an integer matrix (any shape), computed exactly.
pub fn exact_rank(rows: &[Vec<i64>]) -> usize {
    let mut a: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|&x| BigRational::from_integer(BigInt::from(x)))
                .collect()
        })
        .collect();
    let m = a.len();
    let n = a.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..n {
        let Some(piv) = (rank..m).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, piv);
        for r in rank + 1..m {
            if !a[r][col].is_zero() {
                let f = &a[r][col] / &a[rank][col];
                for c in col..n {
                    let v = &f * &a[rank][c];
                    a[r][c] -= v;
                }
            }
        }
        rank += 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_and_inverse_of_unimodular() {
        let m = IntMatrix::from_rows(&[vec![2, 1], vec![1, 1]]);
        assert_eq!(m.det(), BigInt::from(1));
        let inv = m.inverse().unwrap();
        assert_eq!(&m * &inv, IntMatrix::identity(2));
    }

    #[test]
    fn non_unimodular_has_no_integer_inverse() {
        let m = IntMatrix::from_rows(&[vec![2, 0], vec![0, 1]]);
        assert!(m.inverse().is_none());
        assert_eq!(m.det(), BigInt::from(2));
    }

    #[test]
    fn det_with_pivoting() {
        let m = IntMatrix::from_rows(&[vec![0, 1, 0], vec![1, 0, 0], vec![0, 0, 1]]);
        assert_eq!(m.det(), BigInt::from(-1));
    }

    #[test]
    fn rank_of_rectangular() {
        assert_eq!(exact_rank(&[vec![1, 2, 3], vec![2, 4, 6]]), 1);
        assert_eq!(exact_rank(&[vec![0, 1], vec![-1, 0]]), 2);
    }
}
