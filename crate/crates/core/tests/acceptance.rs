//! One pass/fail line per acceptance criterion.

mod common;

use common::{bareiss_det, cf_oracle, fibonacci, omega_matrix, path_product, rank, rel_err, rng, sorted};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use renormkit::affine::{contraction_check, hilbert_metric, kernel_pairing, to_dmatrix, v_matrix, Aiet};
use renormkit::circle::{CircleMapWithBreaks, PRODUCT_TOL};
use renormkit::combinat::irreducible_permutations;
use renormkit::giet::{random_profile_giet, renormalize_steps, simplex_point, RenormOptions};
use renormkit::pipeline::{build_reference, run_pipeline, series_csv, ExperimentConfig, PermRows, ReferenceSource};
use renormkit::real::{f64_vec, Mp, Real};
use renormkit::{Iet, Permutation, RauzyPath};
use std::path::PathBuf;
use std::time::{Duration, Instant};

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn config(name: &str) -> ExperimentConfig {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&p).expect("config loads")
}

fn golden() -> ReferenceSource {
    ReferenceSource::Periodic {
        perm: PermRows {
            top: "A B C".into(),
            bottom: "C A B".into(),
        },
        cycle: None,
        reps: None,
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn continued_fractions() -> Outcome {
    let swap = Permutation::from_rows("A B", "B A").map_err(err)?;
    let mut r = rng(11);
    for _ in 0..10 {
        let q: BigInt = (0..6).fold(BigInt::from(1), |a, _| (a << 64) + BigInt::from(r.random::<u64>()));
        let p: BigInt = (0..6).fold(BigInt::from(0), |a, _| (a << 64) + BigInt::from(r.random::<u64>())) % &q;
        let iet = Iet::new(vec![BigRational::from_integer(1.into()), BigRational::new(p.clone(), q.clone())], swap.clone())
            .map_err(err)?;
        let log = iet.zorich_log(20).map_err(err)?;
        let z: Vec<BigInt> = log.iter().map(|x| BigInt::from(x.z)).collect();
        ensure!(z == cf_oracle(&p, &q, 20), "Zorich times differ from partial quotients");
    }
    let x = (Mp::new(5.0).sqrt() - Mp::new(1.0)) / Mp::new(2.0);
    let (path, _) = Iet::new(vec![Mp::new(1.0), x], swap.clone()).map_err(err)?.rauzy_path(40).map_err(err)?;
    for n in 1..=40 {
        let mut h = path.window(0, n).map_err(err)?.heights;
        h.sort();
        ensure!(h == vec![fibonacci(n + 1), fibonacci(n + 2)], "golden heights at {n}");
    }
    let long = RauzyPath::periodic(swap, &[1, 0], 150).map_err(err)?;
    let mut h = long.window(0, 300).map_err(err)?.heights;
    h.sort();
    ensure!(h == vec![fibonacci(301), fibonacci(302)], "golden heights at 300");
    Ok(())
}

fn exact_structure() -> Outcome {
    for p in (2..=5).flat_map(irreducible_permutations) {
        let om = p.translation_matrix();
        ensure!(om == omega_matrix(&p), "translation matrix of {p:?}");
        ensure!((0..p.d()).all(|i| (0..p.d()).all(|j| om[i][j] == -om[j][i])), "not antisymmetric");
        let sing = p.singularity().map_err(err)?;
        ensure!(sing.kappa == p.d() - rank(&om) + 1, "kappa of {p:?}");
        for v in &sing.kernel_basis {
            ensure!(om.iter().all(|row| row.iter().zip(v).map(|(a, b)| a * b).sum::<i64>() == 0), "kernel vector");
        }
    }
    let mut r = rng(5);
    let perms: Vec<Permutation> = (3..=5).flat_map(irreducible_permutations).collect();
    for _ in 0..50 {
        let p = perms[r.random_range(0..perms.len())].clone();
        let (path, _) = Iet::new(simplex_point(p.d(), &mut r), p).map_err(err)?.rauzy_path(60).map_err(err)?;
        let m = r.random_range(0..30);
        let n = r.random_range(m + 1..=60);
        let q = path_product(&path.perms()[m], &path.types[m..n]);
        ensure!(path.window(m, n).map_err(err)?.matrix.rows() == q, "window matrix");
        let det = bareiss_det(&q);
        ensure!(det == BigInt::from(1) || det == BigInt::from(-1), "det {det}");
    }
    Ok(())
}

fn length_relation() -> Outcome {
    let mut r = rng(21);
    let perms: Vec<Permutation> = (3..=4).flat_map(irreducible_permutations).collect();
    for _ in 0..20 {
        let p = perms[r.random_range(0..perms.len())].clone();
        let f = random_profile_giet(&p, &mut r, true).map_err(err)?;
        ensure!(f.mean_nonlinearity().abs() < 1e-12, "nonzero mean non-linearity");
        let state = renormalize_steps(&f, 8, &RenormOptions::default()).map_err(err)?;
        let u = f64_vec(f.u());
        for n in 1..=8 {
            let lv = state.level(n);
            let (a, _) = lv.length_matrix(&f);
            let pred: Vec<f64> = (a * nalgebra::DVector::from_vec(lv.lengths_f64())).iter().copied().collect();
            ensure!(rel_err(&pred, &u) < 1e-9, "length relation at {n}: {:e}", rel_err(&pred, &u));
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
            let path = RauzyPath::new(s0.perm.clone(), types.clone());
            let st = v_matrix(&path, 0, n, &s0.omega).map_err(err)?;
            let pred: Vec<f64> = (0..s0.d())
                .map(|i| (0..s0.d()).map(|j| st.v[i][j] * cur.lambda[j]).sum())
                .collect();
            ensure!(rel_err(&pred, &s0.lambda) <= 1e-10, "V prediction at {n}");
        }
    }
    Ok(())
}

fn boundary() -> Outcome {
    let mut r = rng(31);
    let perms: Vec<Permutation> = (2..=5).flat_map(irreducible_permutations).collect();
    for i in 0..20 {
        let p = perms[r.random_range(0..perms.len())].clone();
        let f = random_profile_giet(&p, &mut r, i % 2 == 0).map_err(err)?;
        let b0 = f.boundary().map_err(err)?;
        let state = renormalize_steps(&f, 8, &RenormOptions::default()).map_err(err)?;
        let b8 = state.level(8).boundary().map_err(err)?;
        ensure!(sorted(&b0).iter().zip(sorted(&b8)).all(|(x, y)| (x - y).abs() < 1e-9), "boundary changed");
        let n = f.mean_nonlinearity();
        let total: f64 = b0.iter().sum();
        ensure!((total.abs() < 1e-9) == (n.abs() < 1e-9), "sum of boundary vs mean non-linearity");
    }
    for p in &perms {
        let omega: Vec<f64> = (0..p.d()).map(|_| r.random_range(-0.5..0.5)).collect();
        let s = Aiet::closed(p.clone(), simplex_point(p.d(), &mut r), omega).map_err(err)?;
        let b = s.to_giet().map_err(err)?.boundary().map_err(err)?;
        let sing = p.singularity().map_err(err)?;
        let zero = sing.orbit_of(0);
        let rest: Vec<f64> = (0..sing.kappa).filter(|&o| o != zero).map(|o| b[o]).collect();
        let pairing = kernel_pairing(p, &s.omega).map_err(err)?;
        // jump convention: right minus left limits, so the pairing enters negated
        ensure!(rest.iter().zip(&pairing).all(|(x, y)| (x + y).abs() <= 1e-10), "AIET boundary");
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

fn cone_contraction() -> Outcome {
    let reference = build_reference(&golden(), 20, 10).map_err(err)?;
    let rv = &reference.schedule.rv_index;
    let mut omega = vec![0.1, -0.1, 0.0];
    let mut r = rng(41);
    for k in 0..20 {
        let st = v_matrix(&reference.path, rv[k], rv[k + 1], &omega).map_err(err)?;
        let rep = contraction_check(&to_dmatrix(&st.v), 100, &mut r).map_err(err)?;
        ensure!(rep.positive && rep.empirical < 1.0, "window {k}: {}", rep.empirical);
        omega = st.omega_end;
    }
    let d = hilbert_metric(&[0.5, 0.5], &[0.25, 0.75]).map_err(err)?;
    ensure!((d - 3f64.ln()).abs() < 1e-15, "spot value {d}");
    Ok(())
}

fn failed_checks(rep: &renormkit::pipeline::PipelineReport) -> String {
    let f: Vec<&String> = rep.checks.iter().filter(|(_, &v)| !v).map(|(k, _)| k).collect();
    format!("errors {:?}, failed {:?}", rep.errors, f)
}

fn ground_truth() -> Outcome {
    let rep = run_pipeline(&config("golden_recovery.json")).map_err(err)?;
    ensure!(rep.passed, "{}", failed_checks(&rep));
    Ok(())
}

fn circle_pair() -> Outcome {
    let rep = run_pipeline(&config("golden_circle_pair.json")).map_err(err)?;
    ensure!(rep.passed, "{}", failed_checks(&rep));
    ensure!(rep.pair.as_ref().and_then(|p| p.break_equivalent) == Some(true), "break equivalence");
    Ok(())
}

fn determinism() -> Outcome {
    let cfg = config("golden_circle_pair.json");
    let a = run_pipeline(&cfg).map_err(err)?;
    let b = run_pipeline(&cfg).map_err(err)?;
    ensure!(a.maps.len() == b.maps.len() && !a.maps.is_empty(), "map count");
    for (x, y) in a.maps.iter().zip(&b.maps) {
        ensure!(series_csv(&x.rows) == series_csv(&y.rows), "series differ");
    }
    Ok(())
}

fn main() -> std::process::ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 8] = [
        ("1 continued-fraction oracle", continued_fractions, Duration::from_secs(1)),
        ("2 exact structure", exact_structure, Duration::from_secs(10)),
        ("3 length relation", length_relation, Duration::MAX),
        ("4 boundary", boundary, Duration::MAX),
        ("5 cone contraction", cone_contraction, Duration::MAX),
        ("6 ground-truth recovery", ground_truth, Duration::from_secs(60)),
        ("7 golden two-break circle pair", circle_pair, Duration::from_secs(120)),
        ("8 determinism", determinism, Duration::MAX),
    ];
    let mut all = true;
    for (name, run, budget) in criteria {
        let t0 = Instant::now();
        let mut outcome = run();
        let dt = t0.elapsed();
        if outcome.is_ok() && dt > budget {
            outcome = Err(format!("took {dt:?}, budget {budget:?}"));
        }
        match &outcome {
            Ok(()) => println!("PASS criterion {name} ({:.2} s)", dt.as_secs_f64()),
            Err(e) => println!("FAIL criterion {name} ({:.2} s): {e}", dt.as_secs_f64()),
        }
        all &= outcome.is_ok();
    }
    if all {
        std::process::ExitCode::SUCCESS
    } else {
        std::process::ExitCode::FAILURE
    }
}
