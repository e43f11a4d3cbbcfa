//! Piecewise smooth circle homeomorphisms with breaks, stored as
//! rotation-type GIETs on `[0, 1)` with the parametrization `x -> e^{2 pi i x}`.

use crate::combinat::Permutation;
use crate::error::{Error, Result};
use crate::giet::{Chain, Giet, Prim};
use crate::real::{Mp, Real};
use serde::Serialize;

/// Tolerance below which `|sigma - 1|` is not a break.
pub const BREAK_TOL: f64 = 1e-10;
/// Tolerance of the jump-ratio product identity.
pub const PRODUCT_TOL: f64 = 1e-12;

/// Jump ratio `Df_-(x) / Df_+(x)` at the partition point `u_index`
/// (`u_0` identified with `u_d`).
#[derive(Clone, Debug, Serialize)]
pub struct Break {
    pub index: usize,
    pub x: f64,
    pub ratio: f64,
    pub log_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct CircleMapWithBreaks {
    giet: Giet,
    k: usize,
}

impl CircleMapWithBreaks {
    /// Circle map whose lift to `[0, 1)` is the given GIET.
    pub fn from_giet(giet: Giet) -> Result<Self> {
        let k = giet.perm().rotation_type().ok_or(Error::NotRotationType)?;
        Ok(CircleMapWithBreaks { giet, k })
    }

    pub fn giet(&self) -> &Giet {
        &self.giet
    }

    pub fn into_giet(self) -> Giet {
        self.giet
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Index of the partition point sent to `0`.
    pub fn zero_preimage(&self) -> usize {
        self.giet.d() - self.k - 1
    }

    /// Jump ratios at every partition point `u_0, ..., u_{d-1}`.
    pub fn jump_ratios(&self) -> Result<Vec<Break>> {
        let lim = self.giet.log_deriv_limits();
        let perm = self.giet.perm();
        let d = perm.d();
        let ends = self.giet.endpoints();
        (0..d)
            .map(|i| {
                let left = if i == 0 { d } else { i };
                let lo: Mp = lim[perm.letter_at(0, left)].1.clone() - lim[perm.letter_at(0, i + 1)].0.clone();
                let log_ratio = lo.to_f64();
                if !log_ratio.is_finite() {
                    return Err(Error::Diagnostic {
                        module: "circle",
                        level: 0,
                        cause: format!("vanishing one-sided derivative at u_{i}"),
                    });
                }
                Ok(Break {
                    index: i,
                    x: ends[i].to_f64(),
                    ratio: log_ratio.exp(),
                    log_ratio,
                })
            })
            .collect()
    }

    /// Points with `|sigma - 1| > BREAK_TOL`.
    pub fn breaks(&self) -> Result<Vec<Break>> {
        Ok(self
            .jump_ratios()?
            .into_iter()
            .filter(|b| (b.ratio - 1.0).abs() > BREAK_TOL)
            .collect())
    }

    /// `prod sigma - 1`; vanishes iff the mean non-linearity does.
    pub fn product_defect(&self) -> Result<f64> {
        let s: f64 = self.jump_ratios()?.iter().map(|b| b.log_ratio).sum();
        Ok(s.exp_m1())
    }

    /// Boundary recomputed from jump ratios: `B_o = -sum log sigma` over the
    /// partition points of singularity `o`, with `u_0 = u_d` counted once.
    pub fn boundary_from_jumps(&self) -> Result<Vec<f64>> {
        let perm = self.giet.perm();
        let d = perm.d();
        let sing = perm.singularity()?;
        if sing.orbit_of(0) != sing.orbit_of(d) {
            return Err(Error::Diagnostic {
                module: "circle",
                level: 0,
                cause: "interval ends lie on different singularities".into(),
            });
        }
        let mut out = vec![0.0; sing.kappa];
        for b in self.jump_ratios()? {
            out[sing.orbit_of(b.index)] -= b.log_ratio;
        }
        Ok(out)
    }

    /// Class with exactly `d - 1` breaks: no break at the preimage of `0`
    /// and every boundary component nonzero.
    pub fn in_break_class(&self) -> Result<bool> {
        let j = self.jump_ratios()?;
        let smooth_at_cut = (j[self.zero_preimage()].ratio - 1.0).abs() <= BREAK_TOL;
        let all = self.giet.boundary()?.iter().all(|b| b.abs() > BREAK_TOL);
        Ok(smooth_at_cut && all)
    }
}

/// Whether every break of `f` is sent by `h` to a break of `g` (circle
/// distance at most `resolution`) with the same ratio to `ratio_tol`, and
/// the break counts agree.
pub fn break_equivalent(
    f: &[Break],
    g: &[Break],
    h: &dyn Fn(f64) -> f64,
    resolution: f64,
    ratio_tol: f64,
) -> bool {
    if f.len() != g.len() {
        return false;
    }
    f.iter().all(|b| {
        let y = h(b.x);
        g.iter().any(|c| {
            let dist = (y - c.x).rem_euclid(1.0);
            dist.min(1.0 - dist) <= resolution && (b.ratio - c.ratio).abs() <= ratio_tol
        })
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct StableAdjustment {
    /// `omega + v`.
    pub omega: Vec<f64>,
    pub v: Vec<f64>,
    pub a: f64,
    pub t: f64,
}

/// Log jump ratio at the preimage of `0` for an affine map with log-slopes `omega`.
pub fn cut_log_ratio(perm: &Permutation, omega: &[f64]) -> Result<f64> {
    let k = perm.rotation_type().ok_or(Error::NotRotationType)?;
    let cut = perm.d() - k - 1;
    Ok(omega[perm.letter_at(0, cut)] - omega[perm.letter_at(0, cut + 1)])
}

/// The vector `v = a (1, .., 1, t, .., t)` of the two-block stable space
/// (blocks split at the preimage of `0`, `t` making `v` orthogonal to
/// `lambda`) that removes the break at the preimage of `0`.
pub fn stable_adjustment(lambda: &[f64], perm: &Permutation, omega: &[f64]) -> Result<StableAdjustment> {
    let k = perm.rotation_type().ok_or(Error::NotRotationType)?;
    let d = perm.d();
    let cut = d - k - 1;
    let first: f64 = (0..d).filter(|&a| perm.pos(0, a) <= cut).map(|a| lambda[a]).sum();
    let second: f64 = (0..d).filter(|&a| perm.pos(0, a) > cut).map(|a| lambda[a]).sum();
    let t = -first / second;
    let rho = cut_log_ratio(perm, omega)?;
    // log sigma after adjustment: rho + a (1 - t) = 0
    let a = rho / (t - 1.0);
    if !a.is_finite() {
        return Err(Error::Diagnostic {
            module: "circle",
            level: 0,
            cause: "jump equation has no solution".into(),
        });
    }
    let v: Vec<f64> = (0..d)
        .map(|b| if perm.pos(0, b) <= cut { a } else { a * t })
        .collect();
    Ok(StableAdjustment {
        omega: omega.iter().zip(&v).map(|(o, x)| o + x).collect(),
        v,
        a,
        t,
    })
}

/// Diffeomorphism of `[0, 1]` whose derivative agrees at both ends, so it
/// descends to a C^1 circle diffeomorphism: `P_{-s} o P_s`.
pub fn circle_smooth(s: f64) -> Chain {
    Chain::new(vec![Prim::profile(Mp::new(s)), Prim::profile(Mp::new(-s))])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjustment_solves_jump_equation() {
        let p = Permutation::rotation(3, 0).unwrap();
        let lam = [0.5, 0.25, 0.25];
        let om = [0.3, 0.1, -0.2];
        let adj = stable_adjustment(&lam, &p, &om).unwrap();
        assert!((adj.t + 3.0).abs() < 1e-15);
        assert!((adj.a - (0.1 - (-0.2)) / (-4.0)).abs() < 1e-15);
        assert!(cut_log_ratio(&p, &adj.omega).unwrap().abs() < 1e-15);
    }
}
