mod common;

use common::rng;
use rand::Rng;
use renormkit::circle::{cut_log_ratio, stable_adjustment, CircleMapWithBreaks};
use renormkit::giet::{random_profile_giet, simplex_point};
use renormkit::pipeline::{run_pipeline, series_csv, write_report, ExperimentConfig, MapSource, CSV_HEADER};
use renormkit::Permutation;
use std::path::PathBuf;

fn config(name: &str) -> ExperimentConfig {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&p).unwrap()
}

#[test]
fn recovery_matches_ground_truth() {
    let cfg = config("golden_recovery.json");
    let rep = run_pipeline(&cfg).unwrap();
    assert!(rep.errors.is_empty(), "{:?}", rep.errors);
    let failed: Vec<_> = rep.checks.iter().filter(|(_, &v)| !v).collect();
    assert!(rep.passed, "{failed:?}");
    let m = &rep.maps[0];
    let t = m.truth.as_ref().unwrap();
    assert!(t.omega_error <= 10.0 * m.shadow_tolerance.max(f64::EPSILON));
    assert!(t.psi_gap <= 1e-4 && t.dh_gap <= 1e-3);
    let c = m.conjugacy.as_ref().unwrap();
    assert!(c.conj_residual <= 1e-5 && c.cohom_residual <= 1e-6);
    assert!(c.resolution > 0.0 && c.floors > 1000);
}

#[test]
fn affine_map_is_its_own_model() {
    let mut cfg = config("golden_recovery.json");
    cfg.maps = vec![MapSource::Conjugate {
        omega: vec![0.1, -0.1, 0.0],
        h: vec![],
        stable_adjust: false,
    }];
    cfg.depth = 12;
    let rep = run_pipeline(&cfg).unwrap();
    assert!(rep.passed, "{:?} {:?}", rep.errors, rep.checks);
    let m = &rep.maps[0];
    // limited by the f64 tiling of the towers
    let tiling = m.conjugacy.as_ref().unwrap().tiling_error;
    assert!(tiling < 1e-8);
    assert!((m.c - 1.0).abs() < 1e-7);
    let t = m.truth.as_ref().unwrap();
    assert!(t.psi_gap < 1e-8 && t.dh_gap < 1e-7);
    for row in &m.rows {
        assert!(row.e1 < 1e-9 && row.dc1 < 1e-9, "{row:?}");
    }
}

#[test]
fn circle_pair_is_rigid() {
    let cfg = config("golden_circle_pair.json");
    let rep = run_pipeline(&cfg).unwrap();
    let failed: Vec<_> = rep.checks.iter().filter(|(_, &v)| !v).collect();
    assert!(rep.passed, "{:?} {failed:?}", rep.errors);
    let pair = rep.pair.as_ref().unwrap();
    assert!(pair.omega_gap <= 1e-6);
    assert_eq!(pair.break_equivalent, Some(true));
    for m in &rep.maps {
        let c = m.circle.as_ref().unwrap();
        assert_eq!(c.breaks, 2);
        assert!(c.in_break_class);
        assert!(c.model_sigma_gap <= 1e-8);
        assert!(c.dictionary_gap <= 1e-10);
        for key in ["e1", "e2", "e3", "r_n", "interval_gap", "image_gap", "dC1"] {
            assert!(rep.checks[&format!("map{}.decay.{key}", m.index)], "{key}");
        }
    }
}

#[test]
fn series_are_byte_identical_across_runs() {
    let cfg = config("golden_circle_pair.json");
    let a = run_pipeline(&cfg).unwrap();
    let b = run_pipeline(&cfg).unwrap();
    for (x, y) in a.maps.iter().zip(&b.maps) {
        let (sx, sy) = (series_csv(&x.rows), series_csv(&y.rows));
        assert!(sx.starts_with(CSV_HEADER));
        assert_eq!(sx.lines().count(), cfg.depth + 2);
        assert_eq!(sx, sy);
    }
    let dir = tempfile::tempdir().unwrap();
    write_report(&a, &dir.path().join("a")).unwrap();
    write_report(&b, &dir.path().join("b")).unwrap();
    for f in ["series_0.csv", "series_1.csv", "report.json"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn config_errors_are_reported() {
    assert!(ExperimentConfig::from_json("{}").is_err());
    let mut cfg = config("golden_recovery.json");
    cfg.maps.clear();
    assert!(cfg.validate().is_err());
    assert!(ExperimentConfig::load(std::path::Path::new("/nonexistent.json")).is_err());
}

#[test]
fn stable_adjustment_is_the_unique_break_remover() {
    let mut r = rng(61);
    for d in 3..=5 {
        for k in 0..=d - 2 {
            let p = Permutation::rotation(d, k).unwrap();
            let lam = simplex_point(d, &mut r);
            let om: Vec<f64> = (0..d).map(|_| r.random_range(-0.3..0.3)).collect();
            let adj = stable_adjustment(&lam, &p, &om).unwrap();
            assert!(cut_log_ratio(&p, &adj.omega).unwrap().abs() < 1e-14);
            let dot: f64 = adj.v.iter().zip(&lam).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-14);
            let sing = p.singularity().unwrap();
            for b in &sing.kernel_basis {
                let x: f64 = b.iter().zip(&adj.v).map(|(&a, v)| a as f64 * v).sum();
                assert!(x.abs() < 1e-14);
            }
            // any other multiple of the block vector leaves a break
            let other: Vec<f64> = om.iter().zip(&adj.v).map(|(o, v)| o + 1.5 * v).collect();
            let rho = cut_log_ratio(&p, &om).unwrap();
            if rho.abs() > 1e-6 {
                assert!(cut_log_ratio(&p, &other).unwrap().abs() > 1e-7);
            }
        }
    }
}

#[test]
fn circle_boundary_matches_jump_ratios() {
    let mut r = rng(62);
    for d in 2..=5 {
        for k in 0..=d - 2 {
            let p = Permutation::rotation(d, k).unwrap();
            let c = CircleMapWithBreaks::from_giet(random_profile_giet(&p, &mut r, true).unwrap()).unwrap();
            assert_eq!(c.k(), k);
            let j = c.jump_ratios().unwrap();
            assert_eq!(j.len(), d);
            let b = c.giet().boundary().unwrap();
            let sing = p.singularity().unwrap();
            // each singularity away from the cut holds exactly one break point
            for (o, orbit) in sing.orbits.iter().enumerate() {
                if !orbit.contains(&0) {
                    assert_eq!(orbit.len(), 1);
                    assert!((b[o] + j[orbit[0]].log_ratio).abs() < 1e-10);
                }
            }
        }
    }
    assert!(CircleMapWithBreaks::from_giet(
        random_profile_giet(&Permutation::from_rows("A B C D", "D C B A").unwrap(), &mut r, true).unwrap()
    )
    .is_err());
}
