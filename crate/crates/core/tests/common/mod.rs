//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use renormkit::Permutation;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Partial quotients of `p / q` in `(0, 1)` by the integer Euclidean algorithm.
pub fn cf_oracle(p: &BigInt, q: &BigInt, terms: usize) -> Vec<BigInt> {
    let (mut a, mut b) = (q.clone(), p.clone());
    let mut out = Vec::new();
    while out.len() < terms && !b.is_zero() {
        out.push(&a / &b);
        let r = &a % &b;
        a = b;
        b = r;
    }
    out
}

/// `F_1 = F_2 = 1`.
pub fn fibonacci(n: usize) -> BigInt {
    let (mut a, mut b) = (BigInt::zero(), BigInt::one());
    for _ in 0..n {
        let c = &a + &b;
        a = b;
        b = c;
    }
    a
}

/// Fraction-free (Bareiss) determinant.
pub fn bareiss_det(m: &[Vec<BigInt>]) -> BigInt {
    let n = m.len();
    let mut a: Vec<Vec<BigInt>> = m.to_vec();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                Some(i) => {
                    a.swap(i, k);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

/// Rank over the rationals by fraction-free elimination.
pub fn rank(m: &[Vec<i64>]) -> usize {
    let mut a: Vec<Vec<BigInt>> = m.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect();
    let (rows, cols) = (a.len(), a.first().map_or(0, |r| r.len()));
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(r, p);
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let (x, y) = (a[r][c].clone(), a[i][c].clone());
                for j in 0..cols {
                    a[i][j] = &a[i][j] * &x - &a[r][j] * &y;
                }
            }
        }
        r += 1;
    }
    r
}

/// Translation matrix from its definition: `+1` when `a` precedes `b` on
/// top and follows it on the bottom.
pub fn omega_matrix(p: &Permutation) -> Vec<Vec<i64>> {
    let d = p.d();
    (0..d)
        .map(|a| {
            (0..d)
                .map(|b| {
                    let (t, s) = (p.pos(0, a) as i64 - p.pos(0, b) as i64, p.pos(1, a) as i64 - p.pos(1, b) as i64);
                    if t < 0 && s > 0 {
                        1
                    } else if t > 0 && s < 0 {
                        -1
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect()
}

/// Product of the elementary matrices `Id + E_{winner, loser}` along a path.
pub fn path_product(start: &Permutation, types: &[u8]) -> Vec<Vec<BigInt>> {
    let d = start.d();
    let mut m: Vec<Vec<BigInt>> = (0..d)
        .map(|i| (0..d).map(|j| BigInt::from((i == j) as i64)).collect())
        .collect();
    let mut p = start.clone();
    for &eps in types {
        let w = p.letter_at(eps, d);
        let l = p.letter_at(1 - eps, d);
        // right multiplication adds column w to column l
        for row in m.iter_mut() {
            let add = row[w].clone();
            row[l] += add;
        }
        p = p.rauzy_move(eps);
    }
    m
}

pub fn max_abs(v: &[BigInt]) -> BigInt {
    v.iter().map(|x| x.abs()).max().unwrap_or_default()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().map(|x| x.abs()).fold(0.0, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

pub fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s
}

pub fn golden_perm() -> Permutation {
    Permutation::from_rows("A B C", "C A B").unwrap()
}
