//! Built-in cross-checks between independent code paths, plus the two
//! bundled golden experiments.

use crate::affine::{contraction_check, hilbert_metric, kernel_pairing, to_dmatrix, v_matrix, Aiet};
use crate::circle::{CircleMapWithBreaks, PRODUCT_TOL};
use crate::combinat::{irreducible_permutations, Permutation};
use crate::giet::{random_profile_giet, renormalize_steps, simplex_point, RenormOptions};
use crate::matrix::exact_rank;
use crate::pipeline::{build_reference, run_pipeline, series_csv, ExperimentConfig, PermRows, ReferenceSource};
use crate::rauzy::{continued_fraction, Iet, RauzyPath};
use crate::real::{f64_vec, Mp, Real};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::time::Instant;

pub const GOLDEN_RECOVERY: &str = include_str!("../../../configs/golden_recovery.json");
pub const GOLDEN_CIRCLE_PAIR: &str = include_str!("../../../configs/golden_circle_pair.json");

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub seconds: f64,
    pub detail: String,
}

type Outcome = std::result::Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().map(|x| x.abs()).fold(0.0, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn continued_fractions(seed: u64) -> Outcome {
    let swap = Permutation::from_rows("A B", "B A").map_err(err)?;
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10 {
        let q: BigInt = (0..4).fold(BigInt::one(), |a, _| (a << 64) + BigInt::from(r.random::<u64>()));
        let p: BigInt = (0..4).fold(BigInt::ZERO, |a, _| (a << 64) + BigInt::from(r.random::<u64>())) % &q;
        let x = BigRational::new(p, q);
        let log = Iet::new(vec![BigRational::one(), x.clone()], swap.clone())
            .map_err(err)?
            .zorich_log(20)
            .map_err(err)?;
        let z: Vec<BigInt> = log.iter().map(|rec| BigInt::from(rec.z)).collect();
        ensure!(z == continued_fraction(&x, 20), "Zorich times differ from partial quotients");
    }
    let path = RauzyPath::periodic(swap, &[1, 0], 50).map_err(err)?;
    let (mut a, mut b) = (BigInt::one(), BigInt::one());
    for n in 1..=100 {
        let c = &a + &b;
        a = b;
        b = c;
        let mut h = path.window(0, n).map_err(err)?.heights;
        h.sort();
        ensure!(h == vec![a.clone(), b.clone()], "golden heights at {n}");
    }
    Ok(())
}

fn exact_structure(seed: u64) -> Outcome {
    for p in (2..=5).flat_map(irreducible_permutations) {
        let om = p.translation_matrix();
        let d = p.d();
        ensure!((0..d).all(|i| (0..d).all(|j| om[i][j] == -om[j][i])), "not antisymmetric");
        let sing = p.singularity().map_err(err)?;
        ensure!(sing.kappa == d - exact_rank(&om) + 1, "kappa of {p:?}");
        for v in &sing.kernel_basis {
            ensure!(om.iter().all(|row| row.iter().zip(v).map(|(a, b)| a * b).sum::<i64>() == 0), "kernel vector");
        }
    }
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let perms: Vec<Permutation> = (3..=5).flat_map(irreducible_permutations).collect();
    for _ in 0..50 {
        let p = perms[r.random_range(0..perms.len())].clone();
        let (path, _) = Iet::new(simplex_point(p.d(), &mut r), p).map_err(err)?.rauzy_path(60).map_err(err)?;
        let m = r.random_range(0..30);
        let n = r.random_range(m + 1..=60);
        let det = path.window(m, n).map_err(err)?.det();
        ensure!(det == BigInt::one() || det == -BigInt::one(), "det {det}");
    }
    Ok(())
}

fn length_relation(seed: u64) -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let perms: Vec<Permutation> = (3..=4).flat_map(irreducible_permutations).collect();
    for _ in 0..20 {
        let p = perms[r.random_range(0..perms.len())].clone();
        let f = random_profile_giet(&p, &mut r, true).map_err(err)?;
        let state = renormalize_steps(&f, 8, &RenormOptions::default()).map_err(err)?;
        let u = f64_vec(f.u());
        for n in 1..=8 {
            let lv = state.level(n);
            let (a, _) = lv.length_matrix(&f);
            let pred: Vec<f64> = (a * nalgebra::DVector::from_vec(lv.lengths_f64())).iter().copied().collect();
            ensure!(rel_err(&pred, &u) < 1e-9, "length relation at {n}");
        }
    }
    for _ in 0..10 {
        let p = perms[r.random_range(0..perms.len())].clone();
        let omega: Vec<f64> = (0..p.d()).map(|_| r.random_range(-0.3..0.3)).collect();
        let s0 = Aiet::closed(p, simplex_point(omega.len(), &mut r), omega).map_err(err)?;
        let mut cur = s0.clone();
        let mut types = Vec::new();
        for n in 1..=10 {
            let (next, rec) = cur.rv_step().map_err(err)?;
            types.push(rec.epsilon);
            cur = next;
            let st = v_matrix(&RauzyPath::new(s0.perm.clone(), types.clone()), 0, n, &s0.omega).map_err(err)?;
            let pred: Vec<f64> = (0..s0.d())
                .map(|i| (0..s0.d()).map(|j| st.v[i][j] * cur.lambda[j]).sum())
                .collect();
            ensure!(rel_err(&pred, &s0.lambda) <= 1e-10, "slope transfer at {n}");
        }
    }
    Ok(())
}

fn boundary(seed: u64) -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let perms: Vec<Permutation> = (2..=5).flat_map(irreducible_permutations).collect();
    for i in 0..20 {
        let p = perms[r.random_range(0..perms.len())].clone();
        let f = random_profile_giet(&p, &mut r, i % 2 == 0).map_err(err)?;
        let b0 = f.boundary().map_err(err)?;
        let state = renormalize_steps(&f, 8, &RenormOptions::default()).map_err(err)?;
        let b8 = state.level(8).boundary().map_err(err)?;
        ensure!(sorted(&b0).iter().zip(sorted(&b8)).all(|(x, y)| (x - y).abs() < 1e-9), "boundary changed");
        let total: f64 = b0.iter().sum();
        ensure!((total.abs() < 1e-9) == (f.mean_nonlinearity().abs() < 1e-9), "boundary sum");
    }
    for p in &perms {
        let omega: Vec<f64> = (0..p.d()).map(|_| r.random_range(-0.5..0.5)).collect();
        let s = Aiet::closed(p.clone(), simplex_point(p.d(), &mut r), omega).map_err(err)?;
        let b = s.to_giet().map_err(err)?.boundary().map_err(err)?;
        let sing = p.singularity().map_err(err)?;
        let zero = sing.orbit_of(0);
        let rest = (0..sing.kappa).filter(|&o| o != zero).map(|o| b[o]);
        let pairing = kernel_pairing(p, &s.omega).map_err(err)?;
        ensure!(rest.zip(&pairing).all(|(x, y)| (x + y).abs() <= 1e-10), "affine boundary");
    }
    for d in 2..=5 {
        for k in 0..=d - 2 {
            let p = Permutation::rotation(d, k).map_err(err)?;
            let c = CircleMapWithBreaks::from_giet(random_profile_giet(&p, &mut r, true).map_err(err)?).map_err(err)?;
            ensure!(c.product_defect().map_err(err)?.abs() <= PRODUCT_TOL, "jump-ratio product");
        }
    }
    Ok(())
}

fn cone_contraction(seed: u64) -> Outcome {
    let golden = ReferenceSource::Periodic {
        perm: PermRows {
            top: "A B C".into(),
            bottom: "C A B".into(),
        },
        cycle: None,
        reps: None,
    };
    let reference = build_reference(&golden, 20, 10).map_err(err)?;
    let rv = &reference.schedule.rv_index;
    let mut omega = vec![0.1, -0.1, 0.0];
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..20 {
        let st = v_matrix(&reference.path, rv[k], rv[k + 1], &omega).map_err(err)?;
        let rep = contraction_check(&to_dmatrix(&st.v), 100, &mut r).map_err(err)?;
        ensure!(rep.positive && rep.empirical < 1.0, "window {k}: {}", rep.empirical);
        omega = st.omega_end;
    }
    let d = hilbert_metric(&[0.5, 0.5], &[0.25, 0.75]).map_err(err)?;
    ensure!((d - Mp::new(3.0).ln().to_f64()).abs() < 1e-15, "spot value {d}");
    Ok(())
}

fn experiment(text: &str, twice: bool) -> Outcome {
    let cfg = ExperimentConfig::from_json(text).map_err(err)?;
    let rep = run_pipeline(&cfg).map_err(err)?;
    let failed: Vec<&String> = rep.checks.iter().filter(|(_, &v)| !v).map(|(k, _)| k).collect();
    ensure!(rep.passed, "errors {:?}, failed {failed:?}", rep.errors);
    if twice {
        let again = run_pipeline(&cfg).map_err(err)?;
        for (a, b) in rep.maps.iter().zip(&again.maps) {
            ensure!(series_csv(&a.rows) == series_csv(&b.rows), "series differ between runs");
        }
    }
    Ok(())
}

/// Runs every check with the given seed for the randomized ones.
pub fn run(seed: u64) -> Vec<CheckResult> {
    let checks: [(&'static str, Box<dyn Fn() -> Outcome>); 8] = [
        ("continued fractions", Box::new(move || continued_fractions(seed))),
        ("exact structure", Box::new(move || exact_structure(seed))),
        ("length relation", Box::new(move || length_relation(seed))),
        ("boundary", Box::new(move || boundary(seed))),
        ("cone contraction", Box::new(move || cone_contraction(seed))),
        ("ground-truth recovery", Box::new(|| experiment(GOLDEN_RECOVERY, false))),
        ("golden circle pair", Box::new(|| experiment(GOLDEN_CIRCLE_PAIR, false))),
        ("determinism", Box::new(|| experiment(GOLDEN_CIRCLE_PAIR, true))),
    ];
    checks
        .into_iter()
        .map(|(name, f)| {
            let t0 = Instant::now();
            let out = f();
            CheckResult {
                name,
                passed: out.is_ok(),
                seconds: t0.elapsed().as_secs_f64(),
                detail: out.err().unwrap_or_default(),
            }
        })
        .collect()
}
