//! Rokhlin towers of renormalization levels, special Birkhoff sums, the
//! tower-matched semi-conjugacy, the cohomological equation and the
//! derivative `Dh = C e^psi` with grid verification.

use crate::affine::Aiet;
use crate::error::{Error, Result};
use crate::giet::{Giet, Level, Word};
use crate::real::Real;
use serde::Serialize;
use std::sync::Arc;

/// Branchwise evaluation of an interval exchange in double precision.
pub trait BaseMap {
    fn d(&self) -> usize;
    fn total(&self) -> f64;
    fn letter_of(&self, x: f64) -> usize;
    /// Branch `a` applied to `x` (extended beyond its domain if needed).
    fn eval_letter(&self, a: usize, x: f64) -> f64;
    fn log_deriv_letter(&self, a: usize, x: f64) -> f64;
    fn eval(&self, x: f64) -> f64 {
        self.eval_letter(self.letter_of(x), x)
    }
}

impl BaseMap for Giet {
    fn d(&self) -> usize {
        Giet::d(self)
    }
    fn total(&self) -> f64 {
        Giet::total(self).to_f64()
    }
    fn letter_of(&self, x: f64) -> usize {
        self.letter_of64(x)
    }
    fn eval_letter(&self, a: usize, x: f64) -> f64 {
        self.branch(a).value64(x)
    }
    fn log_deriv_letter(&self, a: usize, x: f64) -> f64 {
        self.branch(a).log_deriv64(x)
    }
}

/// Affine exchange in double precision.
#[derive(Clone, Debug)]
pub struct AffineMap64 {
    dom: Vec<(f64, f64)>,
    img0: Vec<f64>,
    slope: Vec<f64>,
    log_slope: Vec<f64>,
    top: Vec<usize>,
    total: f64,
}

impl AffineMap64 {
    pub fn new(s: &Aiet) -> Self {
        let d = s.d();
        let top = s.perm.row(0);
        let bottom = s.perm.row(1);
        let w = s.image_lengths();
        let mut dom = vec![(0.0, 0.0); d];
        let mut x = 0.0;
        for &a in &top {
            dom[a] = (x, x + s.lambda[a]);
            x += s.lambda[a];
        }
        let total = x;
        let tw: f64 = w.iter().sum();
        let mut img0 = vec![0.0; d];
        let mut slope = vec![0.0; d];
        let mut y = 0.0;
        for &a in &bottom {
            img0[a] = y;
            let wa = w[a] * total / tw;
            slope[a] = wa / s.lambda[a];
            y += wa;
        }
        AffineMap64 {
            dom,
            img0,
            log_slope: slope.iter().map(|x| x.ln()).collect(),
            slope,
            top,
            total,
        }
    }

    pub fn log_slopes(&self) -> &[f64] {
        &self.log_slope
    }
}

impl BaseMap for AffineMap64 {
    fn d(&self) -> usize {
        self.dom.len()
    }
    fn total(&self) -> f64 {
        self.total
    }
    fn letter_of(&self, x: f64) -> usize {
        for &a in &self.top {
            if x < self.dom[a].1 {
                return a;
            }
        }
        *self.top.last().expect("nonempty")
    }
    fn eval_letter(&self, a: usize, x: f64) -> f64 {
        self.img0[a] + (x - self.dom[a].0) * self.slope[a]
    }
    fn log_deriv_letter(&self, a: usize, _: f64) -> f64 {
        self.log_slope[a]
    }
}

/// Floors `f^j(I^n_alpha)` stored tower by tower.
#[derive(Clone, Debug)]
pub struct TowerPartition {
    pub level: usize,
    pub heights: Vec<u64>,
    /// Index of the first floor of each tower.
    pub offsets: Vec<usize>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub letter: Vec<u16>,
    pub logd_left: Vec<f64>,
    pub logd_right: Vec<f64>,
    /// Images of the base endpoints under the first return.
    pub returns: Vec<(f64, f64)>,
    /// Floor indices sorted by left endpoint.
    pub order: Vec<u32>,
    pub mesh: f64,
    /// Largest gap or overlap between consecutive sorted floors.
    pub tiling_error: f64,
}

/// Default bound on the number of floors.
pub const FLOOR_CAP: u64 = 50_000_000;

impl TowerPartition {
    /// Towers over the base intervals `bases[alpha]` with itineraries `words`.
    pub fn build(base: &dyn BaseMap, bases: &[(f64, f64)], words: &[Arc<Word>], level: usize) -> Result<Self> {
        let heights: Vec<u64> = words.iter().map(|w| w.len()).collect();
        let total: u64 = heights.iter().sum();
        if total > FLOOR_CAP {
            return Err(Error::HeightCap {
                level,
                height: total as f64,
            });
        }
        let n = total as usize;
        let mut t = TowerPartition {
            level,
            offsets: Vec::with_capacity(words.len()),
            heights,
            left: Vec::with_capacity(n),
            right: Vec::with_capacity(n),
            letter: Vec::with_capacity(n),
            logd_left: Vec::with_capacity(n),
            logd_right: Vec::with_capacity(n),
            returns: Vec::with_capacity(words.len()),
            order: Vec::new(),
            mesh: 0.0,
            tiling_error: 0.0,
        };
        for (a, w) in words.iter().enumerate() {
            t.offsets.push(t.left.len());
            let (mut x, mut y) = bases[a];
            w.for_each(|b| {
                t.left.push(x);
                t.right.push(y);
                t.letter.push(b as u16);
                t.logd_left.push(base.log_deriv_letter(b, x));
                t.logd_right.push(base.log_deriv_letter(b, y));
                x = base.eval_letter(b, x);
                y = base.eval_letter(b, y);
            });
            t.returns.push((x, y));
        }
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_by(|&i, &j| t.left[i as usize].total_cmp(&t.left[j as usize]));
        let mut mesh = 0.0f64;
        let mut tiling = 0.0f64;
        for k in 0..n {
            let i = order[k] as usize;
            mesh = mesh.max(t.right[i] - t.left[i]);
            let expected = if k == 0 {
                0.0
            } else {
                t.right[order[k - 1] as usize]
            };
            tiling = tiling.max((t.left[i] - expected).abs());
        }
        if let Some(&i) = order.last() {
            tiling = tiling.max((t.right[i as usize] - base.total()).abs());
        }
        t.order = order;
        t.mesh = mesh;
        t.tiling_error = tiling;
        Ok(t)
    }

    /// Towers of a renormalization level of `f`.
    pub fn of_level(base: &dyn BaseMap, lv: &Level, level: usize) -> Result<Self> {
        let bases: Vec<(f64, f64)> = lv
            .branches()
            .iter()
            .map(|b| (b.a.to_f64(), b.b.to_f64()))
            .collect();
        TowerPartition::build(base, &bases, lv.words(), level)
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    /// `(alpha, j)` of floor `i`.
    pub fn tower_of(&self, i: usize) -> (usize, usize) {
        let a = match self.offsets.binary_search(&i) {
            Ok(a) => a,
            Err(a) => a - 1,
        };
        (a, i - self.offsets[a])
    }

    /// Floor containing `x`.
    pub fn locate(&self, x: f64) -> usize {
        let k = self
            .order
            .partition_point(|&i| self.left[i as usize] <= x)
            .max(1);
        self.order[k - 1] as usize
    }

    /// Whether every floor lies inside a floor of `coarse` (up to `tol`).
    pub fn refines(&self, coarse: &TowerPartition, tol: f64) -> bool {
        (0..self.len()).all(|i| {
            let c = coarse.locate(0.5 * (self.left[i] + self.right[i]));
            self.left[i] >= coarse.left[c] - tol && self.right[i] <= coarse.right[c] + tol
        })
    }
}

/// Special Birkhoff sums of `phi = omega_n - log D(R^n f)` on each base
/// interval, sampled on a grid; `max_alpha sup |S_q phi|` per level.
pub fn special_sums(levels: &[Level], omegas: &[Vec<f64>], grid: usize) -> Vec<f64> {
    levels
        .iter()
        .zip(omegas)
        .map(|(lv, om)| {
            lv.branches()
                .iter()
                .zip(om)
                .map(|(b, o)| {
                    let base = (b.img_len() / b.len()).ln().to_f64();
                    crate::giet::renorm::grid_points(grid)
                        .iter()
                        .map(|&t| (o - base - b.z.deriv64(t).ln()).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct BirkhoffBound {
    pub special_sums: Vec<f64>,
    /// Partial sums of `||H_{n,n+1}|| max_alpha |S_{q^n_alpha} phi|`.
    pub partial_bounds: Vec<f64>,
}

pub fn birkhoff_bound(special: &[f64], window_norms: &[f64]) -> BirkhoffBound {
    let mut acc = 0.0;
    let partial_bounds = special
        .iter()
        .zip(window_norms)
        .map(|(s, q)| {
            acc += s * q;
            acc
        })
        .collect();
    BirkhoffBound {
        special_sums: special.to_vec(),
        partial_bounds,
    }
}

/// Floor-matched map between the towers of `f` and of `S`.
#[derive(Clone, Debug)]
pub struct SemiConjugacy {
    pub f: TowerPartition,
    pub s: TowerPartition,
    pub sup_ratio: f64,
    pub inf_ratio: f64,
}

impl SemiConjugacy {
    pub fn new(f: TowerPartition, s: TowerPartition) -> Result<Self> {
        if f.heights != s.heights {
            return Err(Error::Diagnostic {
                module: "conjugacy",
                level: f.level,
                cause: "tower combinatorics differ".into(),
            });
        }
        let mut sup = 0.0f64;
        let mut inf = f64::INFINITY;
        for i in 0..f.len() {
            let r = (s.right[i] - s.left[i]) / (f.right[i] - f.left[i]);
            sup = sup.max(r);
            inf = inf.min(r);
        }
        Ok(SemiConjugacy {
            f,
            s,
            sup_ratio: sup,
            inf_ratio: inf,
        })
    }

    /// Matching in the opposite direction.
    pub fn inverse(&self) -> SemiConjugacy {
        SemiConjugacy {
            f: self.s.clone(),
            s: self.f.clone(),
            sup_ratio: 1.0 / self.inf_ratio,
            inf_ratio: 1.0 / self.sup_ratio,
        }
    }

    pub fn resolution(&self) -> f64 {
        self.f.mesh
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.f.locate(x);
        self.eval_in(i, x)
    }

    fn eval_in(&self, i: usize, x: f64) -> f64 {
        let (fl, fr) = (self.f.left[i], self.f.right[i]);
        let (sl, sr) = (self.s.left[i], self.s.right[i]);
        sl + (x - fl) * (sr - sl) / (fr - fl)
    }

    /// Largest mismatch at shared endpoints with a coarser matching.
    pub fn refinement_gap(&self, coarse: &SemiConjugacy) -> f64 {
        (0..coarse.f.len())
            .map(|i| (self.eval(coarse.f.left[i]) - coarse.s.left[i]).abs())
            .fold(0.0, f64::max)
    }
}

/// Solution of `psi o f - psi = phi` with `phi = log DS o h - log Df`,
/// known at the floor endpoints and interpolated linearly in between.
#[derive(Clone, Debug)]
pub struct PotentialSolution {
    pub psi_left: Vec<f64>,
    pub psi_right: Vec<f64>,
    /// Slope of the linear fit on the base interval.
    pub base_slope: f64,
    /// Residual of the return-map equations on the base interval.
    pub base_residual: f64,
    /// `C` in `Dh = C e^psi`, fixed by total length.
    pub c: f64,
}

impl PotentialSolution {
    pub fn eval_in(&self, towers: &TowerPartition, i: usize, x: f64) -> f64 {
        let (l, r) = (towers.left[i], towers.right[i]);
        let t = ((x - l) / (r - l)).clamp(0.0, 1.0);
        self.psi_left[i] + t * (self.psi_right[i] - self.psi_left[i])
    }

    pub fn eval(&self, towers: &TowerPartition, x: f64) -> f64 {
        self.eval_in(towers, towers.locate(x), x)
    }

    pub fn dh(&self, towers: &TowerPartition, x: f64) -> f64 {
        self.c * self.eval(towers, x).exp()
    }
}

/// Builds `psi` along the towers of `f` from the log-slopes of `S` on each
/// letter. On the base interval `psi` is taken linear; its slope solves the
/// return-map equations `m (R(x) - x) = S_q phi(x)` at the base endpoints by
/// least squares.
pub fn solve_cohomological(sc: &SemiConjugacy, s_log_slopes: &[f64], s_total: f64) -> Result<PotentialSolution> {
    let t = &sc.f;
    let n = t.len();
    let phi = |i: usize, right: bool| -> f64 {
        let l = t.letter[i] as usize;
        s_log_slopes[l] - if right { t.logd_right[i] } else { t.logd_left[i] }
    };
    let d = t.heights.len();
    // special sums at the base endpoints
    let mut eq: Vec<(f64, f64)> = Vec::with_capacity(2 * d);
    let base_left = (0..d)
        .map(|a| t.left[t.offsets[a]])
        .fold(f64::INFINITY, f64::min);
    for a in 0..d {
        let (o, h) = (t.offsets[a], t.heights[a] as usize);
        let sl: f64 = (o..o + h).map(|i| phi(i, false)).sum();
        let sr: f64 = (o..o + h).map(|i| phi(i, true)).sum();
        eq.push((t.returns[a].0 - t.left[o], sl));
        eq.push((t.returns[a].1 - t.right[o], sr));
    }
    let num: f64 = eq.iter().map(|(x, s)| x * s).sum();
    let den: f64 = eq.iter().map(|(x, _)| x * x).sum();
    if !(den > 0.0) {
        return Err(Error::Diagnostic {
            module: "conjugacy",
            level: t.level,
            cause: "degenerate return displacements".into(),
        });
    }
    let m = num / den;
    let base_residual = eq.iter().map(|(x, s)| (m * x - s).abs()).fold(0.0, f64::max);
    let mut psi_left = vec![0.0; n];
    let mut psi_right = vec![0.0; n];
    for a in 0..d {
        let (o, h) = (t.offsets[a], t.heights[a] as usize);
        let mut pl = m * (t.left[o] - base_left);
        let mut pr = m * (t.right[o] - base_left);
        for i in o..o + h {
            psi_left[i] = pl;
            psi_right[i] = pr;
            pl += phi(i, false);
            pr += phi(i, true);
        }
    }
    // total length normalization: integral of e^psi over each floor (psi linear)
    let mut integral = 0.0;
    for i in 0..n {
        let len = t.right[i] - t.left[i];
        let (a, b) = (psi_left[i], psi_right[i]);
        let dlt = b - a;
        let avg = if dlt.abs() < 1e-8 {
            a.exp() * (1.0 + dlt / 2.0 + dlt * dlt / 6.0)
        } else {
            (b.exp() - a.exp()) / dlt
        };
        integral += len * avg;
    }
    Ok(PotentialSolution {
        psi_left,
        psi_right,
        base_slope: m,
        base_residual,
        c: s_total / integral,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjugacyReport {
    pub resolution: f64,
    pub floors: usize,
    pub sup_ratio: f64,
    pub inf_ratio: f64,
    pub cohom_residual: f64,
    pub conj_residual: f64,
    pub dh_gap: f64,
    #[serde(rename = "C")]
    pub c: f64,
    /// `|integral of Dh - |I(S)||`.
    pub integral_gap: f64,
    pub tiling_error: f64,
}

/// Grid verification of `h o f = S o h`, of the cohomological identity and
/// of `Dh = C e^psi` against the floor slopes of the matched map.
pub fn verify(
    f: &dyn BaseMap,
    s: &dyn BaseMap,
    sc: &SemiConjugacy,
    psi: &PotentialSolution,
    s_log_slopes: &[f64],
    grid: usize,
) -> ConjugacyReport {
    let total = f.total();
    let mut conj = 0.0f64;
    let mut cohom = 0.0f64;
    let mut dh_gap = 0.0f64;
    let mut integral = 0.0;
    for k in 0..grid {
        let x = (k as f64 + 0.5) / grid as f64 * total;
        let i = sc.f.locate(x);
        let hx = sc.eval_in(i, x);
        let a = f.letter_of(x);
        let fx = f.eval_letter(a, x);
        let j = sc.f.locate(fx);
        conj = conj.max((sc.eval_in(j, fx) - s.eval(hx)).abs());
        let phi = s_log_slopes[s.letter_of(hx)] - f.log_deriv_letter(a, x);
        let p = psi.eval_in(&sc.f, i, x);
        cohom = cohom.max((psi.eval_in(&sc.f, j, fx) - p - phi).abs());
        let slope = (sc.s.right[i] - sc.s.left[i]) / (sc.f.right[i] - sc.f.left[i]);
        let dh = psi.c * p.exp();
        dh_gap = dh_gap.max((slope - dh).abs());
        integral += dh * total / grid as f64;
    }
    ConjugacyReport {
        resolution: sc.resolution(),
        floors: sc.f.len(),
        sup_ratio: sc.sup_ratio,
        inf_ratio: sc.inf_ratio,
        cohom_residual: cohom,
        conj_residual: conj,
        dh_gap,
        c: psi.c,
        integral_gap: (integral - s.total()).abs(),
        tiling_error: sc.f.tiling_error.max(sc.s.tiling_error),
    }
}
