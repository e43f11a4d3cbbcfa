//! Numerical Oseledets splitting of the accelerated height cocycle and the
//! explicit stable space for rotation-type data.

use crate::combinat::Permutation;
use crate::error::{Error, Result};
use crate::matrix::IntMatrix;
use crate::rauzy::CocycleWindow;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

/// Accepted bound on the condition number of the kernel projection on `E^c`.
pub const COND_LIMIT: f64 = 1e8;

/// Height cocycle over accelerated windows: `H_k = Q_k^T` maps level `k` to
/// `k + 1`. A periodic sequence wraps in both directions.
#[derive(Clone, Debug)]
pub struct HeightSeq {
    mats: Vec<DMatrix<f64>>,
    inverses: Vec<DMatrix<f64>>,
    periodic: bool,
}

impl HeightSeq {
    pub fn from_windows(windows: &[CocycleWindow], periodic: bool) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::InvalidData("no cocycle windows".into()));
        }
        let mut mats = Vec::with_capacity(windows.len());
        let mut inverses = Vec::with_capacity(windows.len());
        for w in windows {
            let h: IntMatrix = w.height_cocycle();
            let inv = h
                .inverse()
                .ok_or_else(|| Error::InvalidData("window is not unimodular".into()))?;
            mats.push(h.to_f64());
            inverses.push(inv.to_f64());
        }
        Ok(HeightSeq {
            mats,
            inverses,
            periodic,
        })
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn d(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    fn index(&self, k: isize) -> Option<usize> {
        let n = self.mats.len() as isize;
        if self.periodic {
            Some(k.rem_euclid(n) as usize)
        } else if (0..n).contains(&k) {
            Some(k as usize)
        } else {
            None
        }
    }

    /// `H_k`, if available.
    pub fn get(&self, k: isize) -> Option<&DMatrix<f64>> {
        self.index(k).map(|i| &self.mats[i])
    }

    pub fn get_inverse(&self, k: isize) -> Option<&DMatrix<f64>> {
        self.index(k).map(|i| &self.inverses[i])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SplittingEstimate {
    pub at: usize,
    pub basis_s: Vec<Vec<f64>>,
    pub basis_c: Vec<Vec<f64>>,
    pub basis_u: Vec<Vec<f64>>,
    /// Per-window Lyapunov exponents: unstable block, then central block.
    pub exponents_u: Vec<f64>,
    pub exponents_c: Vec<f64>,
    /// Backward growth of the stable block (negated).
    pub exponents_s: Vec<f64>,
    /// Distance of the intersection `E^{cs} \cap E^{cu}` from being exact.
    pub intersection_residual: f64,
    /// Subspace change between half-depth and full-depth estimates.
    pub convergence_residual: f64,
    /// Condition number of the kernel projection restricted to `E^c`.
    pub cond_central: f64,
    pub past_windows: usize,
    pub future_windows: usize,
}

impl SplittingEstimate {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.basis_s.len(), self.basis_c.len(), self.basis_u.len())
    }

    pub fn residual(&self) -> f64 {
        self.intersection_residual.max(self.convergence_residual)
    }

    fn matrix(cols: &[Vec<f64>], d: usize) -> DMatrix<f64> {
        DMatrix::from_fn(d, cols.len(), |i, j| cols[j][i])
    }

    pub fn basis_matrix(&self) -> DMatrix<f64> {
        let d = self.d();
        let mut cols = self.basis_s.clone();
        cols.extend(self.basis_c.iter().cloned());
        cols.extend(self.basis_u.iter().cloned());
        Self::matrix(&cols, d)
    }

    pub fn d(&self) -> usize {
        self.basis_s
            .first()
            .or(self.basis_c.first())
            .or(self.basis_u.first())
            .map(|v| v.len())
            .unwrap_or(0)
    }

    /// `(x^s, x^c, x^u)` with `x = x^s + x^c + x^u`.
    pub fn decompose(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let b = self.basis_matrix();
        let coef = b
            .clone()
            .lu()
            .solve(&DVector::from_column_slice(x))
            .ok_or(Error::IllConditioned {
                what: "splitting basis",
                cond: f64::INFINITY,
            })?;
        let (ns, nc) = (self.basis_s.len(), self.basis_c.len());
        let part = |lo: usize, hi: usize| -> Vec<f64> {
            let mut v = DVector::zeros(x.len());
            for j in lo..hi {
                v += b.column(j) * coef[j];
            }
            v.iter().copied().collect()
        };
        let s = part(0, ns);
        let c = part(ns, ns + nc);
        let u: Vec<f64> = x
            .iter()
            .zip(&s)
            .zip(&c)
            .map(|((a, b), c)| a - b - c)
            .collect();
        Ok((s, c, u))
    }

    /// Splitting one level earlier: every subspace mapped by `h_inv`, the
    /// inverse of the window cocycle, with columns renormalized.
    pub fn pull_back(&self, h_inv: &DMatrix<f64>) -> SplittingEstimate {
        let map = |cols: &[Vec<f64>]| -> Vec<Vec<f64>> {
            cols.iter()
                .map(|c| {
                    let v = h_inv * DVector::from_column_slice(c);
                    (&v / v.norm()).iter().copied().collect()
                })
                .collect()
        };
        SplittingEstimate {
            at: self.at.saturating_sub(1),
            basis_s: map(&self.basis_s),
            basis_c: map(&self.basis_c),
            basis_u: map(&self.basis_u),
            ..self.clone()
        }
    }

    /// Projection onto `E^{cs}` along `E^u`.
    pub fn drop_unstable(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (s, c, _) = self.decompose(x)?;
        Ok(s.iter().zip(&c).map(|(a, b)| a + b).collect())
    }
}

fn random_frame(d: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(d, k, |_, _| StandardNormal.sample(&mut rng))
}

/// Pushes a `k`-frame through `steps` matrices with re-orthonormalization;
/// returns the frame and the per-step log growth of each column.
fn push_frame<'a>(
    mut x: DMatrix<f64>,
    mats: impl Iterator<Item = &'a DMatrix<f64>>,
) -> (DMatrix<f64>, Vec<Vec<f64>>) {
    let mut growth = Vec::new();
    for m in mats {
        let y = m * &x;
        let qr = y.qr();
        let r = qr.r();
        growth.push((0..r.ncols()).map(|i| r[(i, i)].abs().ln()).collect());
        x = qr.q();
    }
    (x, growth)
}

fn tail_mean(growth: &[Vec<f64>], col: usize) -> f64 {
    let half = &growth[growth.len() / 2..];
    if half.is_empty() {
        return 0.0;
    }
    half.iter().map(|g| g[col]).sum::<f64>() / half.len() as f64
}

/// Orthonormal basis of `Ker Omega_pi` (columns).
pub fn kernel_frame(perm: &Permutation) -> Result<DMatrix<f64>> {
    let sing = perm.singularity()?;
    let d = perm.d();
    let c = sing.kernel_basis.len();
    if c == 0 {
        return Ok(DMatrix::zeros(d, 0));
    }
    let k = DMatrix::from_fn(d, c, |i, j| sing.kernel_basis[j][i] as f64);
    Ok(k.qr().q())
}

/// Orthogonal projection onto `Ker Omega_pi`.
pub fn kernel_projection(perm: &Permutation, x: &[f64]) -> Result<Vec<f64>> {
    let k = kernel_frame(perm)?;
    let v = &k * (k.transpose() * DVector::from_column_slice(x));
    Ok(v.iter().copied().collect())
}

fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

/// Largest principal angle sine between the column spans of orthonormal frames.
pub fn subspace_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() == 0 {
        return 0.0;
    }
    let r = a - b * (b.transpose() * a);
    r.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

struct Frames {
    u: DMatrix<f64>,
    cu: DMatrix<f64>,
    s: DMatrix<f64>,
    cs: DMatrix<f64>,
    growth_fwd: Vec<Vec<f64>>,
    growth_bwd: Vec<Vec<f64>>,
}

fn frames(seq: &HeightSeq, at: usize, past: usize, future: usize, g: usize, c: usize) -> Frames {
    let d = seq.d();
    let at = at as isize;
    let fwd = (at - past as isize..at).map(|k| seq.get(k).expect("window available"));
    let (cu, growth_fwd) = push_frame(random_frame(d, g + c, 11), fwd);
    let bwd = (at..at + future as isize)
        .rev()
        .map(|k| seq.get_inverse(k).expect("window available"));
    let (cs, growth_bwd) = push_frame(random_frame(d, g + c, 13), bwd);
    Frames {
        u: cu.columns(0, g).into_owned(),
        s: cs.columns(0, g).into_owned(),
        cu,
        cs,
        growth_fwd,
        growth_bwd,
    }
}

/// Oseledets splitting at accelerated level `at`, using up to `depth`
/// windows on each side. `perm` is the permutation at that level.
pub fn estimate_splitting(seq: &HeightSeq, perm: &Permutation, at: usize, depth: usize) -> Result<SplittingEstimate> {
    let d = seq.d();
    let c = perm.kernel_dim();
    let g = (d - c) / 2;
    let (past, future) = if seq.is_periodic() {
        (depth, depth)
    } else {
        (depth.min(at), depth.min(seq.len().saturating_sub(at)))
    };
    const MIN_WINDOWS: usize = 4;
    if g > 0 && (past < MIN_WINDOWS || future < MIN_WINDOWS) {
        return Err(Error::Diagnostic {
            module: "oseledets",
            level: at,
            cause: format!("insufficient depth (past {past}, future {future})"),
        });
    }
    let full = frames(seq, at, past, future, g, c);
    let half = frames(seq, at, past / 2, future / 2, g, c);

    // E^c = E^cs ∩ E^cu
    let (basis_c, intersection_residual) = if c == 0 {
        (DMatrix::zeros(d, 0), 0.0)
    } else {
        let perp = DMatrix::identity(d, d) - &full.cs * full.cs.transpose();
        let m = &perp * &full.cu;
        let svd = m.svd(false, true);
        let vt = svd.v_t.expect("right singular vectors");
        let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
        idx.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
        let coeffs = DMatrix::from_fn(g + c, c, |i, j| vt[(idx[j], i)]);
        let res = idx[..c]
            .iter()
            .map(|&i| svd.singular_values[i])
            .fold(0.0, f64::max);
        ((&full.cu * coeffs).qr().q(), res)
    };
    let half_c = if c == 0 {
        DMatrix::zeros(d, 0)
    } else {
        let perp = DMatrix::identity(d, d) - &half.cs * half.cs.transpose();
        let svd = (&perp * &half.cu).svd(false, true);
        let vt = svd.v_t.expect("right singular vectors");
        let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
        idx.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
        let coeffs = DMatrix::from_fn(g + c, c, |i, j| vt[(idx[j], i)]);
        (&half.cu * coeffs).qr().q()
    };
    let convergence_residual = subspace_gap(&full.u, &half.u)
        .max(subspace_gap(&full.s, &half.s))
        .max(subspace_gap(&basis_c, &half_c));

    let cond_central = if c == 0 {
        1.0
    } else {
        let k = kernel_frame(perm)?;
        let sv = (k.transpose() * &basis_c).singular_values();
        let hi = sv.iter().cloned().fold(0.0, f64::max);
        let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        hi / lo
    };
    if !(cond_central <= COND_LIMIT) {
        return Err(Error::IllConditioned {
            what: "kernel projection on E^c",
            cond: cond_central,
        });
    }
    Ok(SplittingEstimate {
        at,
        basis_s: columns(&full.s),
        basis_c: columns(&basis_c),
        basis_u: columns(&full.u),
        exponents_u: (0..g).map(|i| tail_mean(&full.growth_fwd, i)).collect(),
        exponents_c: (g..g + c).map(|i| tail_mean(&full.growth_fwd, i)).collect(),
        exponents_s: (0..g).map(|i| -tail_mean(&full.growth_bwd, i)).collect(),
        intersection_residual,
        convergence_residual,
        cond_central,
        past_windows: past,
        future_windows: future,
    })
}

/// The unique `omega` in the span of `split.basis_c` whose kernel projection is `target`.
pub fn central_from_kernel(perm: &Permutation, target: &[f64], split: &SplittingEstimate) -> Result<Vec<f64>> {
    let d = perm.d();
    let omega_mat = perm.translation_matrix();
    let scale = target.iter().map(|x| x.abs()).fold(1.0, f64::max);
    let defect = omega_mat
        .iter()
        .map(|row| row.iter().zip(target).map(|(&a, x)| a as f64 * x).sum::<f64>().abs())
        .fold(0.0, f64::max);
    if defect > 1e-9 * scale {
        return Err(Error::InvalidData("target is not in the kernel".into()));
    }
    let c = split.basis_c.len();
    if c != perm.kernel_dim() {
        return Err(Error::InvalidData("central dimension differs from kernel dimension".into()));
    }
    if c == 0 {
        return Ok(vec![0.0; d]);
    }
    let k = kernel_frame(perm)?;
    let bc = SplittingEstimate::matrix(&split.basis_c, d);
    let m = k.transpose() * &bc;
    let rhs = k.transpose() * DVector::from_column_slice(target);
    let svd = m.clone().svd(true, true);
    let sv = &svd.singular_values;
    let cond = sv.max() / sv.min();
    if !(cond <= COND_LIMIT) {
        return Err(Error::IllConditioned {
            what: "kernel projection on E^c",
            cond,
        });
    }
    let y = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::InvalidData(e.to_string()))?;
    let w = &bc * y;
    let back = &k * (k.transpose() * &w);
    let res = (back - DVector::from_column_slice(target)).amax();
    if res > 1e-8 * scale {
        return Err(Error::Diagnostic {
            module: "oseledets",
            level: split.at,
            cause: format!("central lift residual {res:e}"),
        });
    }
    Ok(w.iter().copied().collect())
}

/// Explicit stable direction for rotation-type data: `a` on the letters in
/// top positions `1..=d-k-1`, `t a` on the others, orthogonal to `lambda`.
/// Returns the unit vector (with `a > 0`) and `t`.
pub fn rotation_type_stable_space(lambda: &[f64], perm: &Permutation) -> Result<(Vec<f64>, f64)> {
    let k = perm.rotation_type().ok_or(Error::NotRotationType)?;
    let d = perm.d();
    let cut = d - k - 1;
    let first: f64 = (0..d).filter(|&a| perm.pos(0, a) <= cut).map(|a| lambda[a]).sum();
    let second: f64 = (0..d).filter(|&a| perm.pos(0, a) > cut).map(|a| lambda[a]).sum();
    let t = -first / second;
    let v: Vec<f64> = (0..d)
        .map(|a| if perm.pos(0, a) <= cut { 1.0 } else { t })
        .collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok((v.iter().map(|x| x / n).collect(), t))
}
