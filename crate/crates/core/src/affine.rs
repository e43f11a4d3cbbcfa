//! Affine interval exchanges: slope-transfer matrices, direct induction,
//! the Hilbert projective metric, cone contraction and cone-limit models.

use crate::combinat::Permutation;
use crate::error::{Error, Result};
use crate::giet::{Giet, Level, Word};
use crate::rauzy::{RauzyPath, StepRecord, KEANE_TOL};
use crate::real::{Mp, Real};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Piecewise affine exchange with domain lengths `lambda` and log-slopes `omega`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aiet {
    pub perm: Permutation,
    pub lambda: Vec<f64>,
    pub omega: Vec<f64>,
}

impl Aiet {
    pub fn new(perm: Permutation, lambda: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        let d = perm.d();
        if lambda.len() != d || omega.len() != d {
            return Err(Error::InvalidData("AIET data size mismatch".into()));
        }
        if lambda.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidData("AIET lengths must be positive".into()));
        }
        let s = Aiet {
            perm,
            lambda,
            omega,
        };
        let tl: f64 = s.lambda.iter().sum();
        if (s.image_lengths().iter().sum::<f64>() - tl).abs() > 1e-12 * tl {
            return Err(Error::InvalidData("AIET images do not close up".into()));
        }
        Ok(s)
    }

    /// Shifts `omega` by a constant so that the images tile the domain.
    pub fn closed(perm: Permutation, lambda: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        let tl: f64 = lambda.iter().sum();
        let tw: f64 = lambda.iter().zip(&omega).map(|(l, o)| l * o.exp()).sum();
        let c = (tl / tw).ln();
        Aiet::new(perm, lambda, omega.into_iter().map(|o| o + c).collect())
    }

    pub fn d(&self) -> usize {
        self.perm.d()
    }

    pub fn total(&self) -> f64 {
        self.lambda.iter().sum()
    }

    pub fn image_lengths(&self) -> Vec<f64> {
        self.lambda
            .iter()
            .zip(&self.omega)
            .map(|(l, o)| l * o.exp())
            .collect()
    }

    pub fn rv_type(&self) -> Result<StepRecord> {
        let a0 = self.perm.winner(0);
        let a1 = self.perm.winner(1);
        let top = self.lambda[a0];
        let bot = self.lambda[a1] * self.omega[a1].exp();
        if (top - bot).abs() <= KEANE_TOL * self.total() {
            return Err(Error::KeaneViolation { step: 0 });
        }
        Ok(StepRecord::for_type(&self.perm, if top > bot { 0 } else { 1 }))
    }

    /// One Rauzy–Veech step performed on the affine branches themselves.
    pub fn rv_step(&self) -> Result<(Aiet, StepRecord)> {
        let rec = self.rv_type()?;
        let (w, l) = (rec.winner, rec.loser);
        let mut lambda = self.lambda.clone();
        let mut omega = self.omega.clone();
        if rec.epsilon == 0 {
            // top interval is cut by the image of the loser; loser composes
            lambda[w] = self.lambda[w] - self.lambda[l] * self.omega[l].exp();
        } else {
            // the winner's domain is split at the preimage of the loser's domain
            lambda[l] = self.lambda[l] * (-self.omega[w]).exp();
            lambda[w] = self.lambda[w] - lambda[l];
        }
        omega[l] = self.omega[l] + self.omega[w];
        if lambda.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::KeaneViolation { step: 0 });
        }
        Ok((
            Aiet {
                perm: self.perm.rauzy_move(rec.epsilon),
                lambda,
                omega,
            },
            rec,
        ))
    }

    pub fn to_giet(&self) -> Result<Giet> {
        let l: Vec<Mp> = self.lambda.iter().map(|&x| Mp::new(x)).collect();
        let o: Vec<Mp> = self.omega.iter().map(|&x| Mp::new(x)).collect();
        Giet::affine(self.perm.clone(), &l, &o)
    }

    /// `<omega, lambda(O)>` for each kernel basis vector.
    pub fn kernel_pairing(&self) -> Result<Vec<f64>> {
        kernel_pairing(&self.perm, &self.omega)
    }
}

pub fn kernel_pairing(perm: &Permutation, omega: &[f64]) -> Result<Vec<f64>> {
    let sing = perm.singularity()?;
    Ok(sing
        .kernel_basis
        .iter()
        .map(|v| v.iter().zip(omega).map(|(&a, o)| a as f64 * o).sum())
        .collect())
}

/// Slope-transfer matrix of one step: `lambda = U lambda'`.
pub fn u_matrix<T: Real>(rec: &StepRecord, omega: &[T]) -> Vec<Vec<T>> {
    let d = omega.len();
    let mut u = vec![vec![T::zero(); d]; d];
    for (i, row) in u.iter_mut().enumerate() {
        row[i] = T::one();
    }
    let (w, l) = (rec.winner, rec.loser);
    if rec.epsilon == 0 {
        u[w][l] = omega[l].exp();
    } else {
        u[l][l] = omega[w].exp();
        u[w][l] = T::one();
    }
    u
}

/// Slopes after the step: the loser's slope gains the winner's.
pub fn transport_slopes<T: Real>(rec: &StepRecord, omega: &[T]) -> Vec<T> {
    let mut o = omega.to_vec();
    o[rec.loser] = omega[rec.loser].clone() + omega[rec.winner].clone();
    o
}

pub fn mat_mul<T: Real>(a: &[Vec<T>], b: &[Vec<T>]) -> Vec<Vec<T>> {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    a[i].iter()
                        .zip(b)
                        .fold(T::zero(), |acc, (x, row)| acc + x.clone() * row[j].clone())
                })
                .collect()
        })
        .collect()
}

pub fn mat_vec<T: Real>(a: &[Vec<T>], v: &[T]) -> Vec<T> {
    a.iter()
        .map(|row| {
            row.iter()
                .zip(v)
                .fold(T::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
        })
        .collect()
}

pub fn to_dmatrix<T: Real>(a: &[Vec<T>]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), a[0].len(), |i, j| a[i][j].to_f64())
}

/// Product of slope-transfer matrices over Rauzy–Veech indices `[m, n)`.
#[derive(Clone, Debug)]
pub struct SlopeTransfer<T: Real = f64> {
    pub start: usize,
    pub end: usize,
    pub v: Vec<Vec<T>>,
    /// Log-slopes transported to index `end`.
    pub omega_end: Vec<T>,
}

/// `V` over `[m, n)` of `path`, with `omega` given at index `m`.
pub fn v_matrix<T: Real>(path: &RauzyPath, m: usize, n: usize, omega: &[T]) -> Result<SlopeTransfer<T>> {
    if m > n || n > path.len() {
        return Err(Error::OutOfRange(format!("window [{m}, {n}) of {}", path.len())));
    }
    let steps = path.steps();
    let d = path.d();
    let mut v: Vec<Vec<T>> = (0..d)
        .map(|i| (0..d).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let mut o = omega.to_vec();
    for rec in &steps[m..n] {
        v = mat_mul(&v, &u_matrix(rec, &o));
        o = transport_slopes(rec, &o);
    }
    Ok(SlopeTransfer {
        start: m,
        end: n,
        v,
        omega_end: o,
    })
}

/// Hilbert projective distance between positive vectors.
pub fn hilbert_metric(v: &[f64], w: &[f64]) -> Result<f64> {
    if v.len() != w.len() || v.iter().chain(w).any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidData("Hilbert metric needs positive vectors".into()));
    }
    let r: Vec<f64> = v.iter().zip(w).map(|(a, b)| (a / b).ln()).collect();
    let hi = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(hi - lo)
}

/// Hilbert metric evaluated in the precision of `T` (infinite off the cone).
pub fn hilbert_metric_t<T: Real>(v: &[T], w: &[T]) -> f64 {
    if v.iter().chain(w).any(|x| !(x.to_f64() > 0.0)) {
        return f64::INFINITY;
    }
    let r: Vec<T> = v.iter().zip(w).map(|(a, b)| (a.clone() / b.clone()).ln()).collect();
    let hi = r.iter().cloned().reduce(T::max_of).unwrap_or_else(T::zero);
    let lo = r.iter().cloned().reduce(T::min_of).unwrap_or_else(T::zero);
    (hi - lo).to_f64()
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionReport {
    /// Whether every entry of the matrix is positive.
    pub positive: bool,
    /// Largest sampled ratio `d_p(Vv, Vw) / d_p(v, w)`.
    pub empirical: f64,
    /// Birkhoff bound `tanh(Delta / 4)` from the projective diameter of the image; `None` when not positive.
    pub birkhoff: Option<f64>,
}

/// Samples positive pairs and measures how much `v` shrinks their Hilbert distance.
pub fn contraction_check<R: Rng>(v: &DMatrix<f64>, samples: usize, rng: &mut R) -> Result<ContractionReport> {
    let d = v.ncols();
    let positive = v.iter().all(|&x| x > 0.0);
    let mut empirical = 0.0f64;
    for _ in 0..samples {
        let a = DVector::from_vec(crate::giet::simplex_point(d, rng));
        let b = DVector::from_vec(crate::giet::simplex_point(d, rng));
        let d0 = hilbert_metric(a.as_slice(), b.as_slice())?;
        if d0 < 1e-12 {
            continue;
        }
        let va = v * &a;
        let vb = v * &b;
        let d1 = hilbert_metric(va.as_slice(), vb.as_slice())?;
        empirical = empirical.max(d1 / d0);
    }
    let birkhoff = if positive {
        let mut diam = 0.0f64;
        for i in 0..v.nrows() {
            for k in 0..v.nrows() {
                for j in 0..d {
                    for l in 0..d {
                        let x = (v[(i, j)] * v[(k, l)] / (v[(i, l)] * v[(k, j)])).ln();
                        diam = diam.max(x);
                    }
                }
            }
        }
        Some((diam / 4.0).tanh())
    } else {
        None
    };
    Ok(ContractionReport {
        positive,
        empirical,
        birkhoff,
    })
}

/// Normalized cone limit `lim V_0 ... V_{M-1} (barycenter)` for a sequence of
/// window matrices, stopping when successive images are `tol`-close in the
/// Hilbert metric. Returns the limit, windows used and the last increment.
pub fn cone_limit<T: Real>(windows: &[Vec<Vec<T>>], tol: f64) -> (Vec<T>, usize, f64) {
    let d = windows.first().map(|w| w.len()).unwrap_or(0);
    let bary = vec![T::from_f64(1.0 / d as f64); d];
    let mut prod: Option<Vec<Vec<T>>> = None;
    let mut prev: Option<Vec<T>> = None;
    let mut inc = f64::INFINITY;
    for (k, w) in windows.iter().enumerate() {
        let p = match prod {
            None => w.clone(),
            Some(p) => mat_mul(&p, w),
        };
        // keep the product bounded
        let scale = p
            .iter()
            .flatten()
            .fold(T::zero(), |a, x| T::max_of(a, x.abs()));
        let p: Vec<Vec<T>> = p
            .into_iter()
            .map(|r| r.into_iter().map(|x| x / scale.clone()).collect())
            .collect();
        let x = normalize(&mat_vec(&p, &bary));
        if let Some(q) = &prev {
            inc = hilbert_metric_t(&x, q);
            if inc <= tol {
                return (x, k + 1, inc);
            }
        }
        prev = Some(x);
        prod = Some(p);
    }
    (prev.unwrap_or(bary), windows.len(), inc)
}

pub fn normalize<T: Real>(v: &[T]) -> Vec<T> {
    let s = v.iter().fold(T::zero(), |a, x| a + x.clone());
    v.iter().map(|x| x.clone() / s.clone()).collect()
}

/// Affine model along a reference path: per accelerated level, the
/// normalized lengths and log-slopes of the AIET with log-slope `omega`
/// following the path.
#[derive(Clone, Debug, Serialize)]
pub struct AffineModel {
    pub perms: Vec<Permutation>,
    /// Rauzy–Veech index of each level.
    pub rv_index: Vec<usize>,
    pub lengths: Vec<Vec<f64>>,
    pub omegas: Vec<Vec<f64>>,
    /// `|I^n(S)| / |I^0(S)|`.
    pub scales: Vec<f64>,
    /// Windows used by each cone limit and its final Hilbert increment.
    pub cone_windows: Vec<usize>,
    pub cone_increment: Vec<f64>,
    /// Number of levels the level-0 model reproduces by direct induction.
    pub certified_depth: usize,
}

/// Options for `construct_affine_model`.
#[derive(Clone, Debug)]
pub struct ModelOptions {
    pub tol: f64,
    /// Maximal number of future windows used per cone limit.
    pub max_windows: usize,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            tol: 1e-12,
            max_windows: 40,
        }
    }
}

/// Cone-limit affine model. `rv_index` lists accelerated times along `path`
/// (which must extend beyond the requested depth for the limits to converge).
/// `project(n, omega)` may replace the transported slope at level `n`, e.g.
/// to remove unstable round-off.
pub fn construct_affine_model(
    path: &RauzyPath,
    rv_index: &[usize],
    omega: &[f64],
    depth: usize,
    opts: &ModelOptions,
    project: Option<&dyn Fn(usize, &[f64]) -> Vec<f64>>,
) -> Result<AffineModel> {
    if rv_index.len() < depth + 2 {
        return Err(Error::OutOfRange(format!(
            "{} accelerated levels available, {} needed",
            rv_index.len().saturating_sub(1),
            depth + 1
        )));
    }
    let nwin = rv_index.len() - 1;
    // slopes at every accelerated time and window matrices
    let mut omegas = vec![omega.to_vec()];
    let mut windows = Vec::with_capacity(nwin);
    for k in 0..nwin {
        let st = v_matrix(path, rv_index[k], rv_index[k + 1], &omegas[k])?;
        windows.push(st.v);
        let next = match project {
            Some(p) => p(k + 1, &st.omega_end),
            None => st.omega_end,
        };
        omegas.push(next);
    }
    let perms_all = path.perms();
    let mut lengths = Vec::with_capacity(depth + 1);
    let mut cone_windows = Vec::with_capacity(depth + 1);
    let mut cone_increment = Vec::with_capacity(depth + 1);
    for n in 0..=depth {
        let hi = (n + opts.max_windows).min(nwin);
        let (x, used, inc) = cone_limit(&windows[n..hi], opts.tol);
        lengths.push(x);
        cone_windows.push(used);
        cone_increment.push(inc);
    }
    let mut scales = vec![1.0];
    for n in 0..depth {
        let img = mat_vec(&windows[n], &lengths[n + 1]);
        let c: f64 = img.iter().sum();
        scales.push(scales[n] / c);
    }
    let s0 = Aiet::closed(perms_all[0].clone(), lengths[0].clone(), omega.to_vec())?;
    let certified_depth = certify(&s0, path, &rv_index[..=depth]);
    Ok(AffineModel {
        perms: rv_index[..=depth].iter().map(|&k| perms_all[k].clone()).collect(),
        rv_index: rv_index[..=depth].to_vec(),
        lengths,
        omegas: omegas[..=depth].to_vec(),
        scales,
        cone_windows,
        cone_increment,
        certified_depth,
    })
}

/// Number of accelerated levels along which direct induction of `s` follows `path`.
pub fn certify(s: &Aiet, path: &RauzyPath, rv_index: &[usize]) -> usize {
    let mut cur = s.clone();
    let mut level = 0;
    for (i, &t) in path.types.iter().enumerate().take(*rv_index.last().unwrap_or(&0)) {
        match cur.rv_step() {
            Ok((next, rec)) if rec.epsilon == t => cur = next,
            _ => return level,
        }
        if rv_index.get(level + 1) == Some(&(i + 1)) {
            level += 1;
        }
    }
    level
}

impl AffineModel {
    pub fn depth(&self) -> usize {
        self.lengths.len() - 1
    }

    /// Level-0 AIET on `[0, 1)`.
    pub fn base(&self) -> Result<Aiet> {
        Aiet::closed(self.perms[0].clone(), self.lengths[0].clone(), self.omegas[0].clone())
    }

    /// Level `n` as a normalized affine `Level` carrying the itineraries `words`.
    pub fn level(&self, n: usize, words: Vec<Arc<Word>>) -> Level {
        let l: Vec<Mp> = self.lengths[n].iter().map(|&x| Mp::new(x)).collect();
        let o = closing_slopes(&self.lengths[n], &self.omegas[n]);
        let o: Vec<Mp> = o.iter().map(|&x| Mp::new(x)).collect();
        Level::affine(&self.perms[n], &l, &o, words, self.rv_index[n])
    }

    pub fn normalized_images(&self, n: usize) -> Vec<f64> {
        let o = closing_slopes(&self.lengths[n], &self.omegas[n]);
        self.lengths[n]
            .iter()
            .zip(&o)
            .map(|(l, w)| l * w.exp())
            .collect()
    }
}

/// Slopes shifted by a constant so that images of `lengths` close up.
pub fn closing_slopes(lengths: &[f64], omega: &[f64]) -> Vec<f64> {
    let tl: f64 = lengths.iter().sum();
    let tw: f64 = lengths.iter().zip(omega).map(|(l, o)| l * o.exp()).sum();
    let c = (tl / tw).ln();
    omega.iter().map(|o| o + c).collect()
}

/// Extended-precision level-0 lengths of the AIET with slope `omega`
/// following `path` through the accelerated times `rv_index`.
pub fn cone_limit_mp(path: &RauzyPath, rv_index: &[usize], omega: &[Mp], tol: f64) -> Result<(Vec<Mp>, usize, f64)> {
    let mut o = omega.to_vec();
    let mut windows = Vec::new();
    for k in 0..rv_index.len() - 1 {
        let st = v_matrix(path, rv_index[k], rv_index[k + 1], &o)?;
        windows.push(st.v);
        o = st.omega_end;
    }
    Ok(cone_limit(&windows, tol))
}
