mod common;

use common::{rng, sorted};
use proptest::prelude::*;
use rand::Rng;
use renormkit::affine::{kernel_pairing, Aiet};
use renormkit::circle::{CircleMapWithBreaks, PRODUCT_TOL};
use renormkit::combinat::irreducible_permutations;
use renormkit::giet::{random_profile_giet, renormalize_steps, simplex_point, RenormOptions};
use renormkit::real::Mp;
use renormkit::Permutation;

fn perms() -> Vec<Permutation> {
    (2..=5).flat_map(irreducible_permutations).collect()
}

#[test]
fn boundary_is_invariant_under_induction() {
    let mut r = rng(31);
    let ps = perms();
    for _ in 0..20 {
        let p = ps[r.random_range(0..ps.len())].clone();
        let f = random_profile_giet(&p, &mut r, false).unwrap();
        let b0 = sorted(&f.boundary().unwrap());
        let state = renormalize_steps(&f, 8, &RenormOptions::default()).unwrap();
        for n in 1..=8 {
            let b = sorted(&state.level(n).boundary().unwrap());
            assert!(b.iter().zip(&b0).all(|(x, y)| (x - y).abs() < 1e-9), "n = {n}: {b:?} vs {b0:?}");
        }
    }
}

/// Boundary of a piecewise affine map from its definition: per singularity,
/// right-minus-left jumps of the log-slope (zero outside the interval).
fn boundary_oracle(p: &Permutation, omega: &[f64]) -> Vec<f64> {
    let d = p.d();
    let sing = p.singularity().unwrap();
    let slope = |j: usize| if (1..=d).contains(&j) { omega[p.letter_at(0, j)] } else { 0.0 };
    let mut out = vec![0.0; sing.kappa];
    for i in 0..=d {
        out[sing.orbit_of(i)] += slope(i + 1) - slope(i);
    }
    out
}

#[test]
fn affine_boundary_is_negated_kernel_pairing() {
    let mut r = rng(32);
    for p in perms() {
        let omega: Vec<f64> = (0..p.d()).map(|_| r.random_range(-0.5..0.5)).collect();
        let s = Aiet::closed(p.clone(), simplex_point(p.d(), &mut r), omega).unwrap();
        let b = s.to_giet().unwrap().boundary().unwrap();
        let oracle = boundary_oracle(&p, &s.omega);
        assert!(b.iter().zip(&oracle).all(|(x, y)| (x - y).abs() < 1e-10));
        let pairing = kernel_pairing(&p, &s.omega).unwrap();
        let sing = p.singularity().unwrap();
        let zero = sing.orbit_of(0);
        let rest: Vec<f64> = (0..sing.kappa).filter(|&o| o != zero).map(|o| b[o]).collect();
        assert_eq!(rest.len(), pairing.len());
        for (x, y) in rest.iter().zip(&pairing) {
            assert!((x + y).abs() < 1e-10, "{x} vs {y}");
        }
    }
}

#[test]
fn boundary_sums_to_mean_nonlinearity() {
    let mut r = rng(33);
    let ps = perms();
    for i in 0..40 {
        let p = ps[r.random_range(0..ps.len())].clone();
        let f = random_profile_giet(&p, &mut r, i % 2 == 0).unwrap();
        let total: f64 = f.boundary().unwrap().iter().sum();
        // per-branch log-derivative oscillation, summed
        let n: f64 = f
            .log_deriv_limits()
            .iter()
            .map(|(a, b)| renormkit::real::Real::to_f64(b) - renormkit::real::Real::to_f64(a))
            .sum();
        assert_eq!(total.abs() < 1e-9, n.abs() < 1e-9);
        assert!((total + n).abs() < 1e-9);
        if i % 2 == 0 {
            assert!(n.abs() < 1e-9);
        }
    }
}

#[test]
fn jump_ratio_product_is_one_on_circle_maps() {
    let mut r = rng(34);
    for d in 2..=5 {
        for k in 0..=d - 2 {
            let p = Permutation::rotation(d, k).unwrap();
            for _ in 0..3 {
                let f = random_profile_giet(&p, &mut r, true).unwrap();
                let c = CircleMapWithBreaks::from_giet(f).unwrap();
                assert!(c.product_defect().unwrap().abs() <= PRODUCT_TOL);
                let b = c.boundary_from_jumps().unwrap();
                let direct = c.giet().boundary().unwrap();
                assert!(b.iter().zip(&direct).all(|(x, y)| (x - y).abs() < 1e-10));
            }
        }
    }
}

#[test]
fn jump_ratio_product_detects_mean_nonlinearity() {
    let mut r = rng(35);
    let p = Permutation::rotation(3, 1).unwrap();
    let f = random_profile_giet(&p, &mut r, false).unwrap();
    let c = CircleMapWithBreaks::from_giet(f.clone()).unwrap();
    let defect = c.product_defect().unwrap();
    assert!((defect.ln_1p() - f.mean_nonlinearity()).abs() < 1e-12);
    assert!(defect.abs() > PRODUCT_TOL);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn one_step_preserves_boundary(seed in 0u64..10_000, idx in 0usize..88) {
        let ps = perms();
        let p = ps[idx % ps.len()].clone();
        let mut r = rng(seed);
        let f = random_profile_giet(&p, &mut r, false).unwrap();
        let state = renormalize_steps(&f, 1, &RenormOptions::default()).unwrap();
        let a = sorted(&f.boundary().unwrap());
        let b = sorted(&state.level(1).boundary().unwrap());
        prop_assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9));
    }

    #[test]
    fn affine_maps_have_no_mean_nonlinearity(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let p = Permutation::from_rows("A B C D", "D C B A").unwrap();
        let lam: Vec<Mp> = simplex_point(4, &mut r).into_iter().map(Mp::new).collect();
        let om: Vec<Mp> = (0..4).map(|_| Mp::new(r.random_range(-1.0..1.0))).collect();
        let g = renormkit::giet::Giet::affine(p, &lam, &om).unwrap();
        prop_assert!(g.mean_nonlinearity().abs() < 1e-12);
    }
}
