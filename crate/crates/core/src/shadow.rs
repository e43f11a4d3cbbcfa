//! Extraction of the central log-slope vector shadowing the renormalized
//! average log-slopes, and convergence diagnostics against affine models.

use crate::affine::{hilbert_metric, AffineModel};
use crate::combinat::Permutation;
use crate::error::{Error, Result};
use crate::fit::{fit_range, DecayFit};
use crate::giet::Level;
use crate::matrix::IntMatrix;
use crate::oseledets::{central_from_kernel, SplittingEstimate};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use crate::rauzy::CocycleWindow;
use nalgebra::DVector;
use serde::Serialize;

/// Series below this size are treated as round-off.
pub const NOISE_FLOOR: f64 = 1e-11;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Height cocycles `H_{0n}`, `n = 0..=windows.len()`.
pub fn cumulative_heights(windows: &[CocycleWindow]) -> Result<Vec<IntMatrix>> {
    let d = windows
        .first()
        .map(|w| w.matrix.dim())
        .ok_or_else(|| Error::InvalidData("no windows".into()))?;
    let mut q = IntMatrix::identity(d);
    let mut out = vec![q.clone()];
    for w in windows {
        q = &q * &w.matrix;
        out.push(q.transpose());
    }
    Ok(out)
}

fn apply(m: &IntMatrix, v: &[f64]) -> Vec<f64> {
    m.mul_vec_f64(&DVector::from_column_slice(v))
        .iter()
        .copied()
        .collect()
}

/// `(<x, M b>)_b` over the integer kernel basis of `perm`.
fn pairings(perm: &Permutation, m: &IntMatrix, x: &[f64]) -> Result<Vec<f64>> {
    let sing = perm.singularity()?;
    Ok(sing
        .kernel_basis
        .iter()
        .map(|b| {
            let bi: Vec<BigInt> = b.iter().map(|&v| BigInt::from(v)).collect();
            m.mul_vec_int(&bi)
                .iter()
                .zip(x)
                .map(|(k, y)| k.to_f64().unwrap_or(f64::NAN) * y)
                .sum()
        })
        .collect())
}

/// Vector of `Ker Omega_perm` with prescribed pairings against its integer basis.
fn kernel_vector(perm: &Permutation, p: &[f64]) -> Result<Vec<f64>> {
    let sing = perm.singularity()?;
    let d = perm.d();
    let c = sing.kernel_basis.len();
    if c == 0 {
        return Ok(vec![0.0; d]);
    }
    let b = DMatrix::from_fn(d, c, |i, j| sing.kernel_basis[j][i] as f64);
    let g = b.transpose() * &b;
    let y = g
        .lu()
        .solve(&DVector::from_column_slice(p))
        .ok_or_else(|| Error::InvalidData("singular kernel Gram matrix".into()))?;
    Ok((b * y).iter().copied().collect())
}

/// Kernel part of `H^{-1} x` computed through the bounded integer vectors
/// `H^{-T} b`, avoiding the growth of `H^{-1}` on the stable directions.
pub fn kernel_pullback(perm0: &Permutation, h_inv: &IntMatrix, x: &[f64]) -> Result<Vec<f64>> {
    let p = pairings(perm0, &h_inv.transpose(), x)?;
    kernel_vector(perm0, &p)
}

/// `H omega` for a central `omega`, rebuilt at the target level from its
/// kernel pairings and the splitting there.
pub fn central_push(perm_n: &Permutation, h: &IntMatrix, omega: &[f64], split_n: &SplittingEstimate) -> Result<Vec<f64>> {
    let p = pairings(perm_n, &h.transpose(), omega)?;
    let target = kernel_vector(perm_n, &p)?;
    central_from_kernel(perm_n, &target, split_n)
}

/// `r_n = |L^{n+1} - H_{n,n+1} L^n|` and `r_n / ||H_{n,n+1}||`.
pub fn pseudo_orbit_residuals(slopes: &[Vec<f64>], windows: &[CocycleWindow]) -> Vec<(f64, f64)> {
    slopes
        .windows(2)
        .zip(windows)
        .map(|(l, w)| {
            let h = w.height_cocycle();
            let r = norm(&diff(&l[1], &apply(&h, &l[0])));
            (r, r / h.norm_inf_f64())
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelShadow {
    pub n: usize,
    pub slope: Vec<f64>,
    pub stable: Vec<f64>,
    pub central: Vec<f64>,
    pub unstable: Vec<f64>,
    /// `|L^{n,u}|`.
    pub e2: f64,
    /// `|L^{n,s}|`.
    pub e3: f64,
    /// Kernel part of `H_{0n}^{-1} L^{n,c}`.
    pub pullback: Vec<f64>,
    /// `|v_n - v_{n-1}|` (0 at level 0).
    pub increment: f64,
    /// Pseudo-orbit residual towards the next level (`NaN` at the last level).
    pub residual: f64,
    pub residual_normalized: f64,
    /// `H_{0n} omega`.
    pub omega_n: Vec<f64>,
    /// `|omega^n - L^n|`.
    pub shadow_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShadowFits {
    pub residual: DecayFit,
    pub shadow_err: DecayFit,
    pub e2: DecayFit,
    pub e3: DecayFit,
    pub increment: DecayFit,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShadowReport {
    pub levels: Vec<LevelShadow>,
    pub omega: Vec<f64>,
    pub omega_f: Vec<f64>,
    pub cauchy_tail: f64,
    pub splitting_residual: f64,
    /// `cauchy_tail + splitting_residual`: accuracy claimed for `omega`.
    pub tolerance: f64,
    pub fits: ShadowFits,
}

/// Shadow extraction from per-level average log-slopes `slopes[n]`
/// (accelerated levels `0..=N`), the windows between them and the splitting
/// at each level. Fits use levels `fit_lo..`.
pub fn extract_omega(
    perms: &[Permutation],
    slopes: &[Vec<f64>],
    windows: &[CocycleWindow],
    splits: &[SplittingEstimate],
    fit_lo: usize,
) -> Result<ShadowReport> {
    let n_levels = slopes.len();
    if n_levels < 2 || windows.len() + 1 < n_levels || splits.len() < n_levels || perms.len() < n_levels {
        return Err(Error::InvalidData("shadow needs slopes, windows and splittings per level".into()));
    }
    let heights = cumulative_heights(&windows[..n_levels - 1])?;
    let residuals = pseudo_orbit_residuals(slopes, windows);
    let mut levels: Vec<LevelShadow> = Vec::with_capacity(n_levels);
    for n in 0..n_levels {
        let (s, c, u) = splits[n].decompose(&slopes[n])?;
        let inv = heights[n].inverse().ok_or_else(|| Error::InvalidData("window is not unimodular".into()))?;
        let pullback = kernel_pullback(&perms[0], &inv, &c)?;
        let increment = levels
            .last()
            .map(|p| norm(&diff(&pullback, &p.pullback)))
            .unwrap_or(0.0);
        let (residual, residual_normalized) = residuals.get(n).copied().unwrap_or((f64::NAN, f64::NAN));
        levels.push(LevelShadow {
            n,
            slope: slopes[n].clone(),
            e2: norm(&u),
            e3: norm(&s),
            stable: s,
            central: c,
            unstable: u,
            pullback,
            increment,
            residual,
            residual_normalized,
            omega_n: Vec::new(),
            shadow_err: 0.0,
        });
    }
    let res_series: Vec<f64> = levels.iter().map(|l| l.residual).collect();
    if let Some(i) = non_decreasing_run(&res_series[..n_levels - 1], 4) {
        return Err(Error::Diagnostic {
            module: "shadow",
            level: i,
            cause: "pseudo-orbit residuals stopped decreasing (EC condition likely violated)".into(),
        });
    }
    let incs: Vec<f64> = levels.iter().skip(1).map(|l| l.increment).collect();
    if let Some(i) = non_decreasing_run(&incs, 4) {
        return Err(Error::Diagnostic {
            module: "shadow",
            level: i + 1,
            cause: "pullbacks are not Cauchy".into(),
        });
    }
    let omega_f = levels[n_levels - 1].pullback.clone();
    let omega = central_from_kernel(&perms[0], &omega_f, &splits[0])?;
    for (n, l) in levels.iter_mut().enumerate() {
        l.omega_n = central_push(&perms[n], &heights[n], &omega, &splits[n])?;
        l.shadow_err = norm(&diff(&l.omega_n, &l.slope));
    }
    let splitting_residual = splits[..n_levels]
        .iter()
        .map(|s| s.residual())
        .fold(0.0, f64::max);
    let cauchy_tail = levels[n_levels - 1].increment;
    let hi = n_levels - 1;
    let series = |f: &dyn Fn(&LevelShadow) -> f64| -> Vec<f64> { levels.iter().map(f).collect() };
    let fits = ShadowFits {
        residual: fit_range(&res_series, fit_lo, hi - 1),
        shadow_err: fit_range(&series(&|l| l.shadow_err), fit_lo, hi),
        e2: fit_range(&series(&|l| l.e2), fit_lo, hi),
        e3: fit_range(&series(&|l| l.e3), fit_lo, hi),
        increment: fit_range(&series(&|l| l.increment), fit_lo.max(1), hi),
    };
    Ok(ShadowReport {
        levels,
        omega,
        omega_f,
        cauchy_tail,
        splitting_residual,
        tolerance: cauchy_tail + splitting_residual,
        fits,
    })
}

/// Start of the first run of `len` consecutive non-decreases above the noise floor.
fn non_decreasing_run(xs: &[f64], len: usize) -> Option<usize> {
    let mut run = 0;
    for i in 1..xs.len() {
        if xs[i] >= xs[i - 1] && xs[i - 1] > NOISE_FLOOR {
            run += 1;
            if run >= len {
                return Some(i - len);
            }
        } else {
            run = 0;
        }
    }
    None
}

#[derive(Clone, Debug, Serialize)]
pub struct IntervalLevel {
    pub n: usize,
    pub interval_gap: f64,
    pub image_gap: f64,
    pub d_p: f64,
    /// `|I^n(f)| / |I^n(S)|`.
    pub ratio: f64,
    /// `|ratio_{n+1} / ratio_n - 1|` (`NaN` at the last level).
    pub ratio_gap: f64,
    /// `max_alpha |(|I^n_alpha(f)| / |I^n_alpha(S)|) / ratio - 1|`.
    pub letter_ratio_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IntervalReport {
    pub levels: Vec<IntervalLevel>,
    /// Limit of `|I^n(f)| / |I^n(S)|` (last computed ratio).
    pub limit: f64,
    pub interval_fit: DecayFit,
    pub image_fit: DecayFit,
    pub d_p_fit: DecayFit,
    pub ratio_fit: DecayFit,
}

/// Normalized-interval, image-interval and ratio gaps between the levels of
/// `f` and an affine model over the same accelerated times. `s_total` is
/// the total length of the model's base interval.
pub fn interval_ratio_report(levels: &[Level], model: &AffineModel, s_total: f64, fit_lo: usize) -> Result<IntervalReport> {
    let n_levels = levels.len().min(model.depth() + 1);
    let mut out: Vec<IntervalLevel> = Vec::with_capacity(n_levels);
    for n in 0..n_levels {
        let lv = &levels[n];
        if lv.perm() != &model.perms[n] {
            return Err(Error::PathDivergence {
                step: lv.rv(),
                expected: 255,
                found: 255,
            });
        }
        let lf = lv.normalized_lengths();
        let ls = &model.lengths[n];
        let wf = lv.normalized_images();
        let ws = model.normalized_images(n);
        let interval_gap = lf.iter().zip(ls).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let image_gap = wf.iter().zip(&ws).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let d_p = hilbert_metric(&lf, ls)?;
        let tf = crate::real::Real::to_f64(&lv.total());
        let ts = model.scales[n] * s_total;
        let ratio = tf / ts;
        let letter_ratio_gap = lf
            .iter()
            .zip(ls)
            .map(|(a, b)| ((a * tf) / (b * ts) / ratio - 1.0).abs())
            .fold(0.0, f64::max);
        out.push(IntervalLevel {
            n,
            interval_gap,
            image_gap,
            d_p,
            ratio,
            ratio_gap: f64::NAN,
            letter_ratio_gap,
        });
    }
    for n in 0..n_levels.saturating_sub(1) {
        out[n].ratio_gap = (out[n + 1].ratio / out[n].ratio - 1.0).abs();
    }
    let hi = n_levels - 1;
    let s = |f: &dyn Fn(&IntervalLevel) -> f64| -> Vec<f64> { out.iter().map(f).collect() };
    Ok(IntervalReport {
        limit: out[hi].ratio,
        interval_fit: fit_range(&s(&|l| l.interval_gap), fit_lo, hi),
        image_fit: fit_range(&s(&|l| l.image_gap), fit_lo, hi),
        d_p_fit: fit_range(&s(&|l| l.d_p), fit_lo, hi),
        ratio_fit: fit_range(&s(&|l| l.ratio_gap), fit_lo, hi.saturating_sub(1)),
        levels: out,
    })
}
