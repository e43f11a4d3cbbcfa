//! Permutation-level combinatorics: irreducibility, the translation matrix,
//! the singularity permutation and Rauzy moves.

use crate::error::{Error, Result};
use crate::matrix::exact_rank;
use serde::{Deserialize, Serialize};

/// Combinatorial datum `(pi0, pi1)`: each row maps a letter to its 1-based
/// position on the top (resp. bottom) of the exchange.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPermutation")]
pub struct Permutation {
    alphabet: Vec<String>,
    pi0: Vec<usize>,
    pi1: Vec<usize>,
}

#[derive(Deserialize)]
struct RawPermutation {
    alphabet: Vec<String>,
    pi0: Vec<usize>,
    pi1: Vec<usize>,
}

impl TryFrom<RawPermutation> for Permutation {
    type Error = Error;
    fn try_from(r: RawPermutation) -> Result<Self> {
        Permutation::new(r.alphabet, r.pi0, r.pi1)
    }
}

fn is_bijection(v: &[usize]) -> bool {
    let mut seen = vec![false; v.len()];
    v.iter().all(|&x| {
        (1..=v.len()).contains(&x) && !std::mem::replace(&mut seen[x - 1], true)
    })
}

pub fn standard_alphabet(d: usize) -> Vec<String> {
    (0..d)
        .map(|i| {
            if i < 26 {
                ((b'A' + i as u8) as char).to_string()
            } else {
                format!("L{i}")
            }
        })
        .collect()
}

impl Permutation {
    pub fn new(alphabet: Vec<String>, pi0: Vec<usize>, pi1: Vec<usize>) -> Result<Self> {
        let d = alphabet.len();
        if d < 2 {
            return Err(Error::InvalidPermutation("need at least two letters".into()));
        }
        if pi0.len() != d || pi1.len() != d {
            return Err(Error::InvalidPermutation("row length mismatch".into()));
        }
        let mut names = alphabet.clone();
        names.sort();
        names.dedup();
        if names.len() != d {
            return Err(Error::InvalidPermutation("repeated symbol".into()));
        }
        if !is_bijection(&pi0) || !is_bijection(&pi1) {
            return Err(Error::InvalidPermutation("rows must be bijections onto 1..d".into()));
        }
        Ok(Permutation { alphabet, pi0, pi1 })
    }

    /// Builds a permutation from its two rows, e.g. `("A B C", "C A B")`.
    /// The alphabet is ordered as the top row.
    pub fn from_rows(top: &str, bottom: &str) -> Result<Self> {
        let t: Vec<&str> = top.split_whitespace().collect();
        let b: Vec<&str> = bottom.split_whitespace().collect();
        let alphabet: Vec<String> = t.iter().map(|s| s.to_string()).collect();
        let pi0 = (1..=t.len()).collect();
        let mut pi1 = vec![0; t.len()];
        for (pos, s) in b.iter().enumerate() {
            let a = t
                .iter()
                .position(|x| x == s)
                .ok_or_else(|| Error::InvalidPermutation(format!("unknown symbol {s}")))?;
            pi1[a] = pos + 1;
        }
        Permutation::new(alphabet, pi0, pi1)
    }

    /// Rotation-type datum with `pi1 o pi0^{-1}(i) - 1 = i + k (mod d)` and `pi0 = id`.
    pub fn rotation(d: usize, k: usize) -> Result<Self> {
        if d < 2 || k > d - 2 {
            return Err(Error::InvalidPermutation(format!("no rotation type ({d}, {k})")));
        }
        let pi0: Vec<usize> = (1..=d).collect();
        let pi1 = (1..=d).map(|i| (i + k) % d + 1).collect();
        Permutation::new(standard_alphabet(d), pi0, pi1)
    }

    pub fn d(&self) -> usize {
        self.alphabet.len()
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn pi0(&self) -> &[usize] {
        &self.pi0
    }

    pub fn pi1(&self) -> &[usize] {
        &self.pi1
    }

    /// Position of letter `a` in row `eps` (1-based).
    pub fn pos(&self, eps: u8, a: usize) -> usize {
        if eps == 0 {
            self.pi0[a]
        } else {
            self.pi1[a]
        }
    }

    /// Letter at 1-based position `j` of row `eps`.
    pub fn letter_at(&self, eps: u8, j: usize) -> usize {
        let row = if eps == 0 { &self.pi0 } else { &self.pi1 };
        row.iter().position(|&x| x == j).expect("position in range")
    }

    /// Letters of row `eps` in left-to-right order.
    pub fn row(&self, eps: u8) -> Vec<usize> {
        (1..=self.d()).map(|j| self.letter_at(eps, j)).collect()
    }

    /// Monodromy `p = pi1 o pi0^{-1}` on `1..=d`.
    pub fn monodromy(&self, j: usize) -> usize {
        self.pi1[self.letter_at(0, j)]
    }

    pub fn is_irreducible(&self) -> bool {
        let d = self.d();
        (1..d).all(|k| (1..=k).any(|j| self.monodromy(j) > k))
    }

    /// Antisymmetric matrix with `+1` when `alpha` is left of `beta` on top and right of it below.
    pub fn translation_matrix(&self) -> Vec<Vec<i64>> {
        let d = self.d();
        let mut om = vec![vec![0i64; d]; d];
        for a in 0..d {
            for b in 0..d {
                if self.pi1[a] > self.pi1[b] && self.pi0[a] < self.pi0[b] {
                    om[a][b] = 1;
                } else if self.pi1[a] < self.pi1[b] && self.pi0[a] > self.pi0[b] {
                    om[a][b] = -1;
                }
            }
        }
        om
    }

    pub fn kernel_dim(&self) -> usize {
        self.d() - exact_rank(&self.translation_matrix())
    }

    pub fn genus(&self) -> usize {
        exact_rank(&self.translation_matrix()) / 2
    }

    pub fn singularity(&self) -> Result<SingularityStructure> {
        if !self.is_irreducible() {
            return Err(Error::Reducible);
        }
        let d = self.d();
        let p: Vec<usize> = (0..=d)
            .map(|j| if j == 0 { 0 } else { self.monodromy(j) })
            .collect();
        let mut pinv = vec![0; d + 2];
        for j in 1..=d {
            pinv[p[j]] = j;
        }
        let sigma: Vec<usize> = (0..=d)
            .map(|j| {
                if j == 0 {
                    pinv[1] - 1
                } else if p[j] == d {
                    d
                } else {
                    pinv[p[j] + 1] - 1
                }
            })
            .collect();
        let mut seen = vec![false; d + 1];
        let mut orbits = Vec::new();
        for start in 0..=d {
            if seen[start] {
                continue;
            }
            let mut orbit = Vec::new();
            let mut j = start;
            while !seen[j] {
                seen[j] = true;
                orbit.push(j);
                j = sigma[j];
            }
            orbits.push(orbit);
        }
        let kernel_basis = orbits
            .iter()
            .filter(|o| !o.contains(&0))
            .map(|o| {
                let mut v = vec![0i64; d];
                for j in 1..=d {
                    let a = self.letter_at(0, j);
                    let here = o.contains(&j);
                    let prev = o.contains(&(j - 1));
                    v[a] = match (here, prev) {
                        (true, false) => 1,
                        (false, true) => -1,
                        _ => 0,
                    };
                }
                v
            })
            .collect();
        Ok(SingularityStructure {
            kappa: orbits.len(),
            sigma,
            orbits,
            kernel_basis,
        })
    }

    /// Shift `k` when the datum is of rotation type.
    pub fn rotation_type(&self) -> Option<usize> {
        let d = self.d();
        (0..d.saturating_sub(1)).find(|&k| (1..=d).all(|i| (self.monodromy(i) - 1) % d == (i + k) % d))
    }

    /// Winner letter `pi_eps^{-1}(d)`.
    pub fn winner(&self, eps: u8) -> usize {
        self.letter_at(eps, self.d())
    }

    /// Loser letter `pi_{1-eps}^{-1}(d)`.
    pub fn loser(&self, eps: u8) -> usize {
        self.letter_at(1 - eps, self.d())
    }

    /// Target of the Rauzy arrow of type `eps`.
    pub fn rauzy_move(&self, eps: u8) -> Permutation {
        let d = self.d();
        let w = self.winner(eps);
        let l = self.loser(eps);
        let mut next = self.clone();
        let row = if eps == 0 { &mut next.pi1 } else { &mut next.pi0 };
        let j = row[w];
        for x in row.iter_mut() {
            if *x > j && *x < d {
                *x += 1;
            }
        }
        row[l] = j + 1;
        next
    }

    pub fn arrow(&self, eps: u8) -> RauzyArrow {
        RauzyArrow {
            source: self.clone(),
            epsilon: eps,
            target: self.rauzy_move(eps),
        }
    }

    /// Rauzy class reachable from `self`, in breadth-first order.
    pub fn rauzy_class(&self) -> Vec<Permutation> {
        let mut class = vec![self.clone()];
        let mut i = 0;
        while i < class.len() {
            for eps in 0..2 {
                let q = class[i].rauzy_move(eps);
                if !class.contains(&q) {
                    class.push(q);
                }
            }
            i += 1;
        }
        class
    }
}

/// All irreducible permutations on `d` letters with `pi0 = id`.
pub fn irreducible_permutations(d: usize) -> Vec<Permutation> {
    let mut out = Vec::new();
    let mut rows: Vec<usize> = (1..=d).collect();
    permute(&mut rows, 0, &mut |pi1| {
        if let Ok(p) = Permutation::new(standard_alphabet(d), (1..=d).collect(), pi1.to_vec()) {
            if p.is_irreducible() {
                out.push(p);
            }
        }
    });
    out
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

/// Explicit singularity permutation for the rotation type `(d, k)`.
pub fn rotation_sigma(d: usize, k: usize) -> Vec<usize> {
    (0..=d)
        .map(|j| {
            if j == 0 {
                d - k - 1
            } else if j == d - k - 1 {
                d
            } else if j == d {
                0
            } else {
                j
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SingularityStructure {
    pub sigma: Vec<usize>,
    /// Cycles of `sigma`, each starting at its smallest element, sorted by it.
    pub orbits: Vec<Vec<usize>>,
    pub kappa: usize,
    /// One vector per orbit not containing 0, in orbit order.
    pub kernel_basis: Vec<Vec<i64>>,
}

impl SingularityStructure {
    /// Index of the orbit containing endpoint `j`.
    pub fn orbit_of(&self, j: usize) -> usize {
        self.orbits
            .iter()
            .position(|o| o.contains(&j))
            .expect("endpoint in range")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RauzyArrow {
    pub source: Permutation,
    pub epsilon: u8,
    pub target: Permutation,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swap() -> Permutation {
        Permutation::from_rows("A B", "B A").unwrap()
    }

    #[test]
    fn two_letter_cases() {
        assert!(swap().is_irreducible());
        assert!(!Permutation::from_rows("A B", "A B").unwrap().is_irreducible());
        assert_eq!(swap().translation_matrix(), vec![vec![0, 1], vec![-1, 0]]);
    }

    #[test]
    fn rotation_rows() {
        let p = Permutation::rotation(3, 0).unwrap();
        assert_eq!(p.row(1), vec![2, 0, 1]);
        assert_eq!(p.rotation_type(), Some(0));
        let q = Permutation::rotation(4, 1).unwrap();
        assert_eq!(q.rotation_type(), Some(1));
        assert!(q.is_irreducible());
    }

    #[test]
    fn swap_rauzy_moves_are_loops() {
        assert_eq!(swap().rauzy_move(0), swap());
        assert_eq!(swap().rauzy_move(1), swap());
    }

    #[test]
    fn rauzy_move_type0_shifts_bottom_row() {
        let p = Permutation::from_rows("A B C D", "D C B A").unwrap();
        let q = p.rauzy_move(0);
        assert_eq!(q.row(0), p.row(0));
        // loser A jumps right after the winner D in the bottom row
        assert_eq!(q.row(1), vec![3, 0, 2, 1]);
        let r = p.rauzy_move(1);
        assert_eq!(r.row(1), p.row(1));
        assert_eq!(r.row(0), vec![0, 3, 1, 2]);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let p = Permutation::rotation(3, 0).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"alphabet":["A","B","C"],"pi0":[1,2,3],"pi1":[2,3,1]}"#);
        let q: Permutation = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        let bad = r#"{"alphabet":["A","B"],"pi0":[1,1],"pi1":[2,1]}"#;
        assert!(serde_json::from_str::<Permutation>(bad).is_err());
    }
}
