//! Rauzy–Veech renormalization of GIETs. Induced branches are carried as
//! extended-precision Chebyshev interpolants of their zoomed profiles, and
//! each keeps the exact itinerary (a word over base letters) so that it can be
//! checked against direct iteration of the base map.

use super::cheb::Cheb;
use super::{boundary_from_limits, layout, Giet};
use crate::combinat::Permutation;
use crate::error::{Error, Result};
use crate::rauzy::{RauzyPath, StepRecord, KEANE_TOL};
use crate::real::{f64_vec, Mp, Real};
use nalgebra::DMatrix;
use std::sync::Arc;

/// Itinerary of an induced branch as a rope over base letters.
#[derive(Debug)]
pub enum Word {
    Leaf(usize),
    Cat(Arc<Word>, Arc<Word>, u64),
}

impl Word {
    pub fn leaf(a: usize) -> Arc<Word> {
        Arc::new(Word::Leaf(a))
    }

    pub fn cat(x: &Arc<Word>, y: &Arc<Word>) -> Arc<Word> {
        Arc::new(Word::Cat(x.clone(), y.clone(), x.len() + y.len()))
    }

    pub fn len(&self) -> u64 {
        match self {
            Word::Leaf(_) => 1,
            Word::Cat(_, _, n) => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Visits the letters in order.
    pub fn for_each(&self, mut f: impl FnMut(usize)) {
        let mut stack: Vec<&Word> = vec![self];
        while let Some(w) = stack.pop() {
            match w {
                Word::Leaf(a) => f(*a),
                Word::Cat(x, y, _) => {
                    stack.push(y);
                    stack.push(x);
                }
            }
        }
    }

    pub fn letters(&self) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.len() as usize);
        self.for_each(|a| v.push(a));
        v
    }
}

/// Words produced by following `path` from single letters; one set per stop.
pub fn path_words(path: &RauzyPath, stops: &[usize]) -> Vec<Vec<Arc<Word>>> {
    let d = path.d();
    let mut words: Vec<Arc<Word>> = (0..d).map(Word::leaf).collect();
    let steps = path.steps();
    let mut out = Vec::with_capacity(stops.len());
    let mut k = 0;
    for (i, s) in steps.iter().enumerate().map(|(i, s)| (i, Some(s))).chain([(steps.len(), None)]) {
        while k < stops.len() && stops[k] == i {
            out.push(words.clone());
            k += 1;
        }
        if let Some(s) = s {
            let (a0, a1) = if s.epsilon == 0 {
                (s.winner, s.loser)
            } else {
                (s.loser, s.winner)
            };
            words[s.loser] = Word::cat(&words[a1], &words[a0]);
        }
    }
    out
}

/// Branch `x -> c + (d - c) Z((x - a) / (b - a))` with `Z` an interpolant.
#[derive(Clone, Debug)]
pub struct ProxyBranch {
    pub a: Mp,
    pub b: Mp,
    pub c: Mp,
    pub d: Mp,
    pub z: Cheb,
}

impl ProxyBranch {
    pub fn fit(a: Mp, b: Mp, f: &dyn Fn(&Mp) -> Mp, start: usize) -> Result<Self> {
        if !(b > a) {
            return Err(Error::InvalidData("degenerate branch interval".into()));
        }
        let c = f(&a);
        let d = f(&b);
        if !(d > c) {
            return Err(Error::InvalidData("branch is not increasing".into()));
        }
        let len = &b - &a;
        let ilen = &d - &c;
        let z = Cheb::fit(&|t: &Mp| (f(&(&a + &(t * &len))) - &c) / &ilen, start)?;
        Ok(ProxyBranch { a, b, c, d, z })
    }

    pub fn affine(a: Mp, b: Mp, c: Mp, d: Mp) -> Self {
        ProxyBranch {
            a,
            b,
            c,
            d,
            z: Cheb::identity(),
        }
    }

    pub fn len(&self) -> Mp {
        &self.b - &self.a
    }

    pub fn is_empty(&self) -> bool {
        !(self.b > self.a)
    }

    pub fn img_len(&self) -> Mp {
        &self.d - &self.c
    }

    fn t_of(&self, x: &Mp) -> Mp {
        (x - &self.a) / self.len()
    }

    pub fn eval(&self, x: &Mp) -> Mp {
        &self.c + &(self.img_len() * self.z.eval(&self.t_of(x)))
    }

    pub fn deriv(&self, x: &Mp) -> Mp {
        self.img_len() / self.len() * self.z.deriv(&self.t_of(x))
    }

    pub fn inverse(&self, y: &Mp) -> Mp {
        let tau = (y - &self.c) / self.img_len();
        &self.a + &(self.len() * self.z.solve(&tau))
    }

    /// `(log DF(a+), log DF(b-))`.
    pub fn log_deriv_limits(&self) -> (Mp, Mp) {
        let base = (self.img_len() / self.len()).ln();
        (
            &base + &self.z.deriv(&Mp::new(0.0)).ln(),
            base + self.z.deriv(&Mp::new(1.0)).ln(),
        )
    }

    fn scaled(&self, k: &Mp) -> Self {
        ProxyBranch {
            a: &self.a * k,
            b: &self.b * k,
            c: &self.c * k,
            d: &self.d * k,
            z: self.z.clone(),
        }
    }
}

/// Knobs for the renormalization engine.
#[derive(Clone, Debug)]
pub struct RenormOptions {
    pub tie_tol: f64,
    pub height_cap: u64,
    pub start_degree: usize,
}

impl Default for RenormOptions {
    fn default() -> Self {
        RenormOptions {
            tie_tol: KEANE_TOL,
            height_cap: 10_000_000,
            start_degree: 8,
        }
    }
}

/// An induced GIET at some Rauzy–Veech time.
#[derive(Clone, Debug)]
pub struct Level {
    perm: Permutation,
    branches: Vec<ProxyBranch>,
    words: Vec<Arc<Word>>,
    rv: usize,
}

impl Level {
    pub fn from_giet(f: &Giet) -> Result<Self> {
        let branches = (0..f.d())
            .map(|a| {
                let (x0, x1) = f.dom(a).clone();
                let br = f.branch(a);
                ProxyBranch::fit(x0, x1, &|x: &Mp| br.value(x), 16)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Level {
            perm: f.perm().clone(),
            branches,
            words: (0..f.d()).map(Word::leaf).collect(),
            rv: 0,
        })
    }

    /// Affine level with absolute domain lengths and log-slopes.
    pub fn affine(
        perm: &Permutation,
        lambda: &[Mp],
        omega: &[Mp],
        words: Vec<Arc<Word>>,
        rv: usize,
    ) -> Self {
        let w: Vec<Mp> = lambda.iter().zip(omega).map(|(l, o)| l * &o.exp()).collect();
        let dom = layout(lambda, perm.pi0());
        let img = layout(&w, perm.pi1());
        let branches = (0..perm.d())
            .map(|a| {
                ProxyBranch::affine(
                    dom[a].0.clone(),
                    dom[a].1.clone(),
                    img[a].0.clone(),
                    img[a].1.clone(),
                )
            })
            .collect();
        Level {
            perm: perm.clone(),
            branches,
            words,
            rv,
        }
    }

    pub fn d(&self) -> usize {
        self.perm.d()
    }

    pub fn perm(&self) -> &Permutation {
        &self.perm
    }

    pub fn branch(&self, a: usize) -> &ProxyBranch {
        &self.branches[a]
    }

    pub fn branches(&self) -> &[ProxyBranch] {
        &self.branches
    }

    pub fn word(&self, a: usize) -> &Arc<Word> {
        &self.words[a]
    }

    pub fn words(&self) -> &[Arc<Word>] {
        &self.words
    }

    pub fn rv(&self) -> usize {
        self.rv
    }

    pub fn heights(&self) -> Vec<u64> {
        self.words.iter().map(|w| w.len()).collect()
    }

    pub fn total(&self) -> Mp {
        self.branches.iter().map(|b| b.len()).sum()
    }

    pub fn lengths(&self) -> Vec<Mp> {
        self.branches.iter().map(|b| b.len()).collect()
    }

    pub fn image_lengths(&self) -> Vec<Mp> {
        self.branches.iter().map(|b| b.img_len()).collect()
    }

    /// `|I^n_alpha| / |I^n|`.
    pub fn normalized_lengths(&self) -> Vec<f64> {
        let t = self.total();
        self.branches.iter().map(|b| (b.len() / &t).to_f64()).collect()
    }

    /// `|R^n f(I^n_alpha)| / |I^n|`.
    pub fn normalized_images(&self) -> Vec<f64> {
        let t = self.total();
        self.branches
            .iter()
            .map(|b| (b.img_len() / &t).to_f64())
            .collect()
    }

    /// Copy rescaled to total length 1.
    pub fn normalized(&self) -> Level {
        let k = Mp::new(1.0) / self.total();
        Level {
            perm: self.perm.clone(),
            branches: self.branches.iter().map(|b| b.scaled(&k)).collect(),
            words: self.words.clone(),
            rv: self.rv,
        }
    }

    /// Average log-slopes `ln(|R^n f(I^n_alpha)| / |I^n_alpha|)`.
    pub fn avg_log_slope(&self) -> Vec<f64> {
        self.branches
            .iter()
            .map(|b| (b.img_len() / b.len()).ln().to_f64())
            .collect()
    }

    pub fn avg_log_slope_mp(&self) -> Vec<Mp> {
        self.branches
            .iter()
            .map(|b| (b.img_len() / b.len()).ln())
            .collect()
    }

    pub fn log_deriv_limits(&self) -> Vec<(Mp, Mp)> {
        self.branches.iter().map(|b| b.log_deriv_limits()).collect()
    }

    pub fn boundary(&self) -> Result<Vec<f64>> {
        boundary_from_limits(&self.perm, &self.log_deriv_limits())
    }

    pub fn mean_nonlinearity(&self) -> f64 {
        self.log_deriv_limits()
            .iter()
            .map(|(l, r)| r - l)
            .sum::<Mp>()
            .to_f64()
    }

    /// `max_alpha` of the grid C^1 distance between the zoomed branch and the identity.
    pub fn e1(&self, grid: usize) -> f64 {
        let ts = grid_points(grid);
        self.branches
            .iter()
            .map(|b| {
                let v = ts.iter().map(|&t| (b.z.eval64(t) - t).abs()).fold(0.0, f64::max);
                let dv = ts
                    .iter()
                    .map(|&t| (b.z.deriv64(t) - 1.0).abs())
                    .fold(0.0, f64::max);
                v + dv
            })
            .fold(0.0, f64::max)
    }

    /// Largest ratio of derivatives of an induced branch on the grid, minus 1.
    pub fn distortion(&self, grid: usize) -> f64 {
        let ts = grid_points(grid);
        self.branches
            .iter()
            .map(|b| {
                let logs: Vec<f64> = ts.iter().map(|&t| b.z.deriv64(t).ln()).collect();
                let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
                (hi - lo).exp_m1()
            })
            .fold(0.0, f64::max)
    }

    pub fn letter_of(&self, x: &Mp) -> usize {
        let d = self.d();
        for j in 1..=d {
            let a = self.perm.letter_at(0, j);
            if *x < self.branches[a].b {
                return a;
            }
        }
        self.perm.letter_at(0, d)
    }

    pub fn eval(&self, x: &Mp) -> Mp {
        self.branches[self.letter_of(x)].eval(x)
    }

    pub fn rv_type(&self, tol: f64) -> Result<u8> {
        let a0 = self.perm.winner(0);
        let a1 = self.perm.winner(1);
        let top = self.branches[a0].len();
        let bot = self.branches[a1].img_len();
        if (&top - &bot).abs() <= self.total() * tol {
            return Err(Error::KeaneViolation { step: self.rv });
        }
        Ok(if top > bot { 0 } else { 1 })
    }

    /// One Rauzy–Veech step driven by the level's own interval comparison.
    pub fn rv_step(&self, opts: &RenormOptions) -> Result<(Level, StepRecord)> {
        let eps = self.rv_type(opts.tie_tol)?;
        self.apply(eps, opts)
    }

    fn apply(&self, eps: u8, opts: &RenormOptions) -> Result<(Level, StepRecord)> {
        let rec = StepRecord::for_type(&self.perm, eps);
        let a0 = self.perm.winner(0);
        let a1 = self.perm.winner(1);
        let f0 = &self.branches[a0];
        let f1 = &self.branches[a1];
        let start = opts.start_degree;
        let comp = |x: &Mp| f0.eval(&f1.eval(x));
        let mut branches = self.branches.clone();
        if eps == 0 {
            branches[a1] = ProxyBranch::fit(f1.a.clone(), f1.b.clone(), &comp, start)?;
            branches[a0] = ProxyBranch::fit(f0.a.clone(), f1.c.clone(), &|x| f0.eval(x), start)?;
        } else {
            let split = f1.inverse(&f0.a);
            branches[a1] = ProxyBranch::fit(f1.a.clone(), split.clone(), &|x| f1.eval(x), start)?;
            branches[a0] = ProxyBranch::fit(split, f1.b.clone(), &comp, start)?;
        }
        let mut words = self.words.clone();
        words[rec.loser] = Word::cat(&self.words[a1], &self.words[a0]);
        Ok((
            Level {
                perm: self.perm.rauzy_move(eps),
                branches,
                words,
                rv: self.rv + 1,
            },
            rec,
        ))
    }

    /// `A^n(f)`: entry `(beta, alpha)` sums `|f^j(I^n_alpha)| / |I^n_alpha|`
    /// over the floors of tower `alpha` inside `I_beta(f)`; also returns the
    /// visit counts. Floors are computed by exact iteration of the base map.
    pub fn length_matrix(&self, base: &Giet) -> (DMatrix<f64>, Vec<Vec<u64>>) {
        let d = self.d();
        let mut m = vec![vec![Mp::new(0.0); d]; d];
        let mut counts = vec![vec![0u64; d]; d];
        for a in 0..d {
            let br = &self.branches[a];
            let len = br.len();
            let mut x = br.a.clone();
            let mut y = br.b.clone();
            self.words[a].for_each(|beta| {
                m[beta][a] = &m[beta][a] + &((&y - &x) / &len);
                counts[beta][a] += 1;
                x = base.branch(beta).value(&x);
                y = base.branch(beta).value(&y);
            });
        }
        let mf = DMatrix::from_fn(d, d, |i, j| m[i][j].to_f64());
        (mf, counts)
    }

    /// Largest deviation between the induced branch and direct iteration of
    /// the base map along its itinerary (value, log-derivative), at `points`
    /// interior points per branch.
    pub fn consistency(&self, base: &Giet, points: usize) -> (f64, f64) {
        let mut ev = 0.0f64;
        let mut el = 0.0f64;
        for (a, br) in self.branches.iter().enumerate() {
            for i in 0..points {
                let t = (i as f64 + 0.5) / points as f64;
                let x0 = &br.a + &(br.len() * t);
                let mut x = x0.clone();
                let mut l = Mp::new(0.0);
                self.words[a].for_each(|beta| {
                    l = &l + &base.branch(beta).log_deriv(&x);
                    x = base.branch(beta).value(&x);
                });
                ev = ev.max((br.eval(&x0) - x).abs().to_f64());
                el = el.max((br.deriv(&x0).ln() - l).abs().to_f64());
            }
        }
        (ev, el)
    }

    pub fn lengths_f64(&self) -> Vec<f64> {
        f64_vec(&self.lengths())
    }
}

pub fn grid_points(grid: usize) -> Vec<f64> {
    match grid {
        0 => Vec::new(),
        1 => vec![0.5],
        m => (0..m).map(|i| i as f64 / (m - 1) as f64).collect(),
    }
}

/// `d_{C^1}` between two levels as given (normalize first for the
/// renormalized comparison).
pub fn d_c1(f: &Level, g: &Level, grid: usize) -> Result<f64> {
    if f.perm != g.perm {
        return Err(Error::InvalidData("permutation mismatch".into()));
    }
    let ts = grid_points(grid);
    let mut best = 0.0f64;
    for (bf, bg) in f.branches.iter().zip(&g.branches) {
        let v = ts
            .iter()
            .map(|&t| (bf.z.eval64(t) - bg.z.eval64(t)).abs())
            .fold(0.0, f64::max);
        let dv = ts
            .iter()
            .map(|&t| (bf.z.deriv64(t) - bg.z.deriv64(t)).abs())
            .fold(0.0, f64::max);
        let dl = (bf.len() - bg.len()).abs().to_f64();
        let di = (bf.img_len() - bg.img_len()).abs().to_f64();
        best = best.max(v + dv + dl + di);
    }
    Ok(best)
}

/// Per-level induced GIETs of one map.
#[derive(Clone, Debug)]
pub struct RenormState {
    pub base: Giet,
    /// Path the map traced, one type per Rauzy–Veech step.
    pub path: RauzyPath,
    /// Rauzy–Veech indices at which levels were recorded.
    pub stops: Vec<usize>,
    pub levels: Vec<Level>,
}

impl RenormState {
    pub fn level(&self, n: usize) -> &Level {
        &self.levels[n]
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }
}

/// Renormalizes `f`, recording the induced map at each Rauzy–Veech index in
/// `stops` (sorted). When a reference path is given, every step must agree
/// with it.
pub fn renormalize(
    f: &Giet,
    reference: Option<&RauzyPath>,
    stops: &[usize],
    opts: &RenormOptions,
) -> Result<RenormState> {
    let last = *stops.last().unwrap_or(&0);
    if let Some(r) = reference {
        if r.len() < last {
            return Err(Error::OutOfRange(format!(
                "reference path has {} steps, {last} needed",
                r.len()
            )));
        }
        if r.start != *f.perm() {
            return Err(Error::PathDivergence {
                step: 0,
                expected: 255,
                found: 255,
            });
        }
    }
    let mut cur = Level::from_giet(f)?;
    let mut types = Vec::with_capacity(last);
    let mut levels = Vec::with_capacity(stops.len());
    let mut k = 0;
    for step in 0..=last {
        while k < stops.len() && stops[k] == step {
            levels.push(cur.clone());
            k += 1;
        }
        if step == last {
            break;
        }
        let eps = cur.rv_type(opts.tie_tol)?;
        if let Some(r) = reference {
            if r.types[step] != eps {
                return Err(Error::PathDivergence {
                    step,
                    expected: r.types[step],
                    found: eps,
                });
            }
        }
        let (next, _) = cur.apply(eps, opts)?;
        let h = next.heights().into_iter().max().unwrap_or(0);
        if h > opts.height_cap {
            return Err(Error::HeightCap {
                level: step + 1,
                height: h as f64,
            });
        }
        types.push(eps);
        cur = next;
    }
    Ok(RenormState {
        base: f.clone(),
        path: RauzyPath::new(f.perm().clone(), types),
        stops: stops.to_vec(),
        levels,
    })
}

/// Every Rauzy–Veech step up to `n`, following the map's own comparisons.
pub fn renormalize_steps(f: &Giet, n: usize, opts: &RenormOptions) -> Result<RenormState> {
    let stops: Vec<usize> = (0..=n).collect();
    renormalize(f, None, &stops, opts)
}
