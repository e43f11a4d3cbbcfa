//! Generalized interval exchanges with closed-form smooth branches: the
//! boundary operator, mean non-linearity, zoom, constructors, and (in
//! `renorm`) renormalization with its diagnostics.

pub mod branch;
pub mod cheb;
pub mod renorm;

pub use branch::{affine_between, Chain, Prim, PrimSpec};
pub use cheb::Cheb;
pub use renorm::{
    d_c1, renormalize, renormalize_steps, Level, ProxyBranch, RenormOptions, RenormState, Word,
};

use crate::combinat::Permutation;
use crate::error::{Error, Result};
use crate::real::{f64_vec, Mp, Real};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Uniform};
use serde::{Deserialize, Serialize};

/// Relative tolerance for `|u| = |w|` and endpoint matching.
pub const CLOSURE_TOL: f64 = 1e-12;

/// A GIET on `[0, |u|)`: branch `alpha` maps `[a_alpha, b_alpha]` onto
/// `[c_alpha, d_alpha]`, domains ordered by `pi0`, images by `pi1`.
#[derive(Clone, Debug)]
pub struct Giet {
    perm: Permutation,
    u: Vec<Mp>,
    w: Vec<Mp>,
    branches: Vec<Chain>,
    dom: Vec<(Mp, Mp)>,
    img: Vec<(Mp, Mp)>,
}

/// Left endpoints of intervals laid out in the order given by `pos`.
pub fn layout(lengths: &[Mp], pos: &[usize]) -> Vec<(Mp, Mp)> {
    let d = lengths.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by_key(|&a| pos[a]);
    let mut out = vec![(Mp::new(0.0), Mp::new(0.0)); d];
    let mut x = Mp::new(0.0);
    for a in order {
        let y = &x + &lengths[a];
        out[a] = (x, y.clone());
        x = y;
    }
    out
}

impl Giet {
    pub fn new(perm: Permutation, u: Vec<Mp>, w: Vec<Mp>, branches: Vec<Chain>) -> Result<Self> {
        let d = perm.d();
        if u.len() != d || w.len() != d || branches.len() != d {
            return Err(Error::InvalidData("GIET data size mismatch".into()));
        }
        if u.iter().chain(&w).any(|x| !(*x > 0.0)) {
            return Err(Error::InvalidData("GIET lengths must be positive".into()));
        }
        let tu: Mp = u.iter().sum();
        let tw: Mp = w.iter().sum();
        if ((&tu - &tw) / &tu).abs().to_f64() > CLOSURE_TOL {
            return Err(Error::InvalidData(format!(
                "|u| = {} differs from |w| = {}",
                tu.to_f64(),
                tw.to_f64()
            )));
        }
        let dom = layout(&u, perm.pi0());
        let img = layout(&w, perm.pi1());
        let g = Giet {
            perm,
            u,
            w,
            branches,
            dom,
            img,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        let scale = self.total().to_f64();
        for a in 0..self.d() {
            let (x0, x1) = &self.dom[a];
            let (y0, y1) = &self.img[a];
            let e0 = (self.branches[a].value(x0) - y0).abs().to_f64();
            let e1 = (self.branches[a].value(x1) - y1).abs().to_f64();
            if e0.max(e1) > CLOSURE_TOL * scale {
                return Err(Error::InvalidData(format!(
                    "branch {a} does not map its interval onto its image (error {:e})",
                    e0.max(e1)
                )));
            }
            for i in 0..=32 {
                let x = x0 + &(&(x1 - x0) * (i as f64 / 32.0));
                let (_, d1, _) = self.branches[a].jet(&x);
                if !(d1 > 0.0) {
                    return Err(Error::InvalidData(format!(
                        "branch {a} has nonpositive derivative"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Branch `alpha` is `A_img o P_{s_alpha} o A_dom^{-1}`.
    pub fn from_profiles(perm: Permutation, u: Vec<Mp>, w: Vec<Mp>, s: &[Mp]) -> Result<Self> {
        let dom = layout(&u, perm.pi0());
        let img = layout(&w, perm.pi1());
        let (zero, one) = (Mp::new(0.0), Mp::new(1.0));
        let branches = (0..perm.d())
            .map(|a| {
                Chain::new(vec![
                    affine_between(&dom[a].0, &dom[a].1, &zero, &one),
                    Prim::profile(s[a].clone()),
                    affine_between(&zero, &one, &img[a].0, &img[a].1),
                ])
            })
            .collect();
        Giet::new(perm, u, w, branches)
    }

    /// Piecewise affine exchange with domain lengths `lambda` and slopes `e^omega`.
    pub fn affine(perm: Permutation, lambda: &[Mp], omega: &[Mp]) -> Result<Self> {
        let w: Vec<Mp> = lambda
            .iter()
            .zip(omega)
            .map(|(l, o)| l * &o.exp())
            .collect();
        let tl: Mp = lambda.iter().sum();
        let tw: Mp = w.iter().sum();
        // absorb the closure defect so images tile the same interval
        let w: Vec<Mp> = w.iter().map(|x| x * &tl / &tw).collect();
        let dom = layout(lambda, perm.pi0());
        let img = layout(&w, perm.pi1());
        let branches = (0..perm.d())
            .map(|a| Chain::new(vec![affine_between(&dom[a].0, &dom[a].1, &img[a].0, &img[a].1)]))
            .collect();
        Giet::new(perm, lambda.to_vec(), w, branches)
    }

    /// `h^{-1} o s o h` for a diffeomorphism `h` of `[0, |s|]` onto itself.
    pub fn conjugate(s: &Giet, h: &Chain) -> Result<Self> {
        let hinv = h.inverse();
        let d = s.d();
        let mut u = Vec::with_capacity(d);
        for a in 0..d {
            let (x0, x1) = &s.dom[a];
            u.push(hinv.value(x1) - hinv.value(x0));
        }
        let mut w = Vec::with_capacity(d);
        for a in 0..d {
            let (y0, y1) = &s.img[a];
            w.push(hinv.value(y1) - hinv.value(y0));
        }
        let branches = (0..d)
            .map(|a| h.then(&s.branches[a]).then(&hinv))
            .collect();
        Giet::new(s.perm.clone(), u, w, branches)
    }

    pub fn d(&self) -> usize {
        self.perm.d()
    }

    pub fn perm(&self) -> &Permutation {
        &self.perm
    }

    pub fn u(&self) -> &[Mp] {
        &self.u
    }

    pub fn w(&self) -> &[Mp] {
        &self.w
    }

    pub fn branch(&self, a: usize) -> &Chain {
        &self.branches[a]
    }

    pub fn dom(&self, a: usize) -> &(Mp, Mp) {
        &self.dom[a]
    }

    pub fn img(&self, a: usize) -> &(Mp, Mp) {
        &self.img[a]
    }

    pub fn total(&self) -> Mp {
        self.u.iter().sum()
    }

    /// Top endpoints `u_0 < ... < u_d`.
    pub fn endpoints(&self) -> Vec<Mp> {
        let mut v = vec![Mp::new(0.0)];
        for j in 1..=self.d() {
            v.push(self.dom[self.perm.letter_at(0, j)].1.clone());
        }
        v
    }

    pub fn letter_of(&self, x: &Mp) -> usize {
        let d = self.d();
        for j in 1..=d {
            let a = self.perm.letter_at(0, j);
            if *x < self.dom[a].1 {
                return a;
            }
        }
        self.perm.letter_at(0, d)
    }

    pub fn letter_of64(&self, x: f64) -> usize {
        let d = self.d();
        for j in 1..=d {
            let a = self.perm.letter_at(0, j);
            if x < self.dom[a].1.to_f64() {
                return a;
            }
        }
        self.perm.letter_at(0, d)
    }

    pub fn eval(&self, x: &Mp) -> Mp {
        self.branches[self.letter_of(x)].value(x)
    }

    pub fn eval64(&self, x: f64) -> f64 {
        self.branches[self.letter_of64(x)].value64(x)
    }

    /// `(log Df(a_alpha+), log Df(b_alpha-))` for every letter.
    pub fn log_deriv_limits(&self) -> Vec<(Mp, Mp)> {
        (0..self.d())
            .map(|a| {
                (
                    self.branches[a].log_deriv(&self.dom[a].0),
                    self.branches[a].log_deriv(&self.dom[a].1),
                )
            })
            .collect()
    }

    /// Mean non-linearity: per branch, the log-derivative at the right end
    /// minus the one at the left end.
    pub fn mean_nonlinearity(&self) -> f64 {
        self.log_deriv_limits()
            .iter()
            .map(|(l, r)| r - l)
            .sum::<Mp>()
            .to_f64()
    }

    pub fn boundary(&self) -> Result<Vec<f64>> {
        boundary_from_limits(&self.perm, &self.log_deriv_limits())
    }

    /// Zoomed branch `Xi(f|_{I_alpha})` on `[0, 1]` as an exact chain.
    pub fn zoom(&self, a: usize) -> Chain {
        zoom_chain(&self.branches[a], &self.dom[a], &self.img[a])
    }

    pub fn spec(&self) -> GietSpec {
        GietSpec {
            perm: self.perm.clone(),
            u: f64_vec(&self.u),
            w: f64_vec(&self.w),
            branches: self
                .branches
                .iter()
                .map(|c| BranchSpec::Chain { prims: c.specs() })
                .collect(),
        }
    }
}

/// `A_2 o m o A_1` with the affine bijections `[0,1] -> [a,b]` and `[c,d] -> [0,1]`.
pub fn zoom_chain(m: &Chain, dom: &(Mp, Mp), img: &(Mp, Mp)) -> Chain {
    let (zero, one) = (Mp::new(0.0), Mp::new(1.0));
    let pre = Chain::new(vec![affine_between(&zero, &one, &dom.0, &dom.1)]);
    let post = Chain::new(vec![affine_between(&img.0, &img.1, &zero, &one)]);
    pre.then(m).then(&post)
}

/// Boundary operator applied to a branchwise function given by its one-sided
/// limits `(phi(a_alpha+), phi(b_alpha-))`; one component per singularity,
/// in the orbit order of the singularity structure.
pub fn boundary_from_limits(perm: &Permutation, limits: &[(Mp, Mp)]) -> Result<Vec<f64>> {
    let sing = perm.singularity()?;
    let jumps = endpoint_jumps(perm, limits);
    let mut out = vec![Mp::new(0.0); sing.kappa];
    for (i, j) in jumps.into_iter().enumerate() {
        let o = sing.orbit_of(i);
        out[o] = &out[o] + &j;
    }
    Ok(f64_vec(&out))
}

/// Right-minus-left jumps at `u_0, ..., u_d`, treating the function as 0
/// outside the interval.
pub fn endpoint_jumps(perm: &Permutation, limits: &[(Mp, Mp)]) -> Vec<Mp> {
    let d = perm.d();
    (0..=d)
        .map(|i| {
            let right = if i < d {
                limits[perm.letter_at(0, i + 1)].0.clone()
            } else {
                Mp::new(0.0)
            };
            let left = if i > 0 {
                limits[perm.letter_at(0, i)].1.clone()
            } else {
                Mp::new(0.0)
            };
            right - left
        })
        .collect()
}

/// One branch in a GIET config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BranchSpec {
    Affine,
    Nonlin { s: f64 },
    /// Explicit chain in absolute coordinates.
    Chain { prims: Vec<PrimSpec> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GietSpec {
    pub perm: Permutation,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub branches: Vec<BranchSpec>,
}

impl GietSpec {
    pub fn build(&self) -> Result<Giet> {
        let d = self.perm.d();
        if self.branches.len() != d {
            return Err(Error::InvalidData("one branch per letter required".into()));
        }
        let u: Vec<Mp> = self.u.iter().map(|&x| Mp::new(x)).collect();
        let w: Vec<Mp> = self.w.iter().map(|&x| Mp::new(x)).collect();
        let dom = layout(&u, self.perm.pi0());
        let img = layout(&w, self.perm.pi1());
        let (zero, one) = (Mp::new(0.0), Mp::new(1.0));
        let branches = self
            .branches
            .iter()
            .enumerate()
            .map(|(a, b)| match b {
                BranchSpec::Affine => {
                    Chain::new(vec![affine_between(&dom[a].0, &dom[a].1, &img[a].0, &img[a].1)])
                }
                BranchSpec::Nonlin { s } => Chain::new(vec![
                    affine_between(&dom[a].0, &dom[a].1, &zero, &one),
                    Prim::profile(Mp::new(*s)),
                    affine_between(&zero, &one, &img[a].0, &img[a].1),
                ]),
                BranchSpec::Chain { prims } => Chain::new(prims.iter().map(Prim::from_spec).collect()),
            })
            .collect();
        Giet::new(self.perm.clone(), u, w, branches)
    }
}

/// Point of the open simplex from normalized exponential spacings.
pub fn simplex_point<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..d).map(|_| Exp1.sample(rng)).collect();
    let t: f64 = e.iter().sum();
    e.into_iter().map(|x| x / t).collect()
}

/// Random profile GIET: simplex lengths, `s` uniform in `[-0.5, 0.5]`
/// shifted to zero mean so that the mean non-linearity vanishes.
pub fn random_profile_giet<R: Rng>(perm: &Permutation, rng: &mut R, zero_mean: bool) -> Result<Giet> {
    let d = perm.d();
    let u = simplex_point(d, rng);
    let w = simplex_point(d, rng);
    let dist = Uniform::new_inclusive(-0.5, 0.5).expect("valid range");
    let mut s: Vec<f64> = (0..d).map(|_| dist.sample(rng)).collect();
    if zero_mean {
        let m = s.iter().sum::<f64>() / d as f64;
        s.iter_mut().for_each(|x| *x -= m);
    }
    Giet::from_profiles(
        perm.clone(),
        u.into_iter().map(Mp::new).collect(),
        w.into_iter().map(Mp::new).collect(),
        &s.into_iter().map(Mp::new).collect::<Vec<_>>(),
    )
}

/// Profile GIET with prescribed lengths whose boundary equals `target`
/// (which must sum to zero): Gauss–Newton with minimal-norm steps on the
/// profile parameters, starting from `s0`.
pub fn giet_with_boundary(
    perm: &Permutation,
    u: &[f64],
    w: &[f64],
    s0: &[f64],
    target: &[f64],
) -> Result<Giet> {
    let sum: f64 = target.iter().sum();
    if sum.abs() > 1e-12 {
        return Err(Error::InvalidData("target boundary must sum to zero".into()));
    }
    let d = perm.d();
    let sing = perm.singularity()?;
    if target.len() != sing.kappa {
        return Err(Error::InvalidData("target boundary has wrong size".into()));
    }
    let build = |s: &[f64]| {
        Giet::from_profiles(
            perm.clone(),
            u.iter().map(|&x| Mp::new(x)).collect(),
            w.iter().map(|&x| Mp::new(x)).collect(),
            &s.iter().map(|&x| Mp::new(x)).collect::<Vec<_>>(),
        )
    };
    let residual = |s: &[f64]| -> Result<DVector<f64>> {
        let b = build(s)?.boundary()?;
        Ok(DVector::from_iterator(
            b.len(),
            b.iter().zip(target).map(|(x, t)| x - t),
        ))
    };
    let mut s = s0.to_vec();
    for _ in 0..50 {
        let r = residual(&s)?;
        if r.amax() < 1e-13 {
            return build(&s);
        }
        let h = 1e-7;
        let mut jac = DMatrix::zeros(r.len(), d);
        for k in 0..d {
            let mut sp = s.clone();
            sp[k] += h;
            let rp = residual(&sp)?;
            jac.set_column(k, &((rp - &r) / h));
        }
        let step = jac
            .clone()
            .svd(true, true)
            .solve(&r, 1e-12)
            .map_err(|e| Error::InvalidData(e.to_string()))?;
        for k in 0..d {
            s[k] -= step[k];
        }
    }
    let r = residual(&s)?;
    if r.amax() < 1e-10 {
        build(&s)
    } else {
        Err(Error::Diagnostic {
            module: "giet",
            level: 0,
            cause: format!("boundary system not solvable (residual {:e})", r.amax()),
        })
    }
}
