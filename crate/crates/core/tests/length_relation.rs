mod common;

use common::{path_product, rel_err, rng};
use rand::Rng;
use renormkit::affine::{v_matrix, Aiet};
use renormkit::combinat::irreducible_permutations;
use renormkit::giet::{random_profile_giet, renormalize_steps, simplex_point, RenormOptions};
use num_traits::ToPrimitive;
use renormkit::real::f64_vec;
use renormkit::Permutation;

fn d34() -> Vec<Permutation> {
    (3..=4).flat_map(irreducible_permutations).collect()
}

#[test]
fn lengths_are_recovered_through_towers() {
    let mut r = rng(21);
    let perms = d34();
    for _ in 0..20 {
        let p = perms[r.random_range(0..perms.len())].clone();
        let f = random_profile_giet(&p, &mut r, true).unwrap();
        assert!(f.mean_nonlinearity().abs() < 1e-12);
        let state = renormalize_steps(&f, 8, &RenormOptions::default()).unwrap();
        let u = f64_vec(f.u());
        for n in 1..=8 {
            let lv = state.level(n);
            let (a, counts) = lv.length_matrix(&f);
            let q = path_product(&state.path.start, &state.path.types[..n]);
            for (i, row) in counts.iter().enumerate() {
                for (j, &c) in row.iter().enumerate() {
                    assert_eq!(num_bigint::BigInt::from(c), q[i][j]);
                }
            }
            let pred: Vec<f64> = (a * nalgebra::DVector::from_vec(lv.lengths_f64())).iter().copied().collect();
            assert!(rel_err(&pred, &u) < 1e-9, "n = {n}: {:e}", rel_err(&pred, &u));
            let (ev, el) = lv.consistency(&f, 5);
            assert!(ev < 1e-9 && el < 1e-9);
        }
    }
}

#[test]
fn affine_induction_matches_slope_transfer() {
    let mut r = rng(22);
    let perms = d34();
    for _ in 0..20 {
        let p = perms[r.random_range(0..perms.len())].clone();
        let omega: Vec<f64> = (0..p.d()).map(|_| r.random_range(-0.3..0.3)).collect();
        let s0 = Aiet::closed(p, simplex_point(omega.len(), &mut r), omega).unwrap();
        let mut cur = s0.clone();
        let mut types = Vec::new();
        let mut states = vec![s0.clone()];
        for _ in 0..10 {
            let (next, rec) = cur.rv_step().unwrap();
            types.push(rec.epsilon);
            states.push(next.clone());
            cur = next;
        }
        let path = renormkit::RauzyPath::new(s0.perm.clone(), types);
        for n in 1..=10 {
            let st = v_matrix(&path, 0, n, &s0.omega).unwrap();
            let pred: Vec<f64> = (0..s0.d())
                .map(|i| (0..s0.d()).map(|j| st.v[i][j] * states[n].lambda[j]).sum())
                .collect();
            assert!(rel_err(&pred, &s0.lambda) < 1e-10);
            assert!(st.omega_end.iter().zip(&states[n].omega).all(|(a, b)| (a - b).abs() < 1e-12));
            // slopes transport by the transposed length cocycle
            let q = path_product(&path.start, &path.types[..n]);
            let hw: Vec<f64> = (0..s0.d())
                .map(|j| (0..s0.d()).map(|i| q[i][j].to_f64().unwrap() * s0.omega[i]).sum())
                .collect();
            assert!(st.omega_end.iter().zip(&hw).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }
}

#[test]
fn affine_giet_lengths_match_aiet() {
    let mut r = rng(23);
    let p = Permutation::from_rows("A B C D", "D C B A").unwrap();
    let omega: Vec<f64> = (0..4).map(|_| r.random_range(-0.3..0.3)).collect();
    let s = Aiet::closed(p, simplex_point(4, &mut r), omega).unwrap();
    let g = s.to_giet().unwrap();
    let state = renormalize_steps(&g, 10, &RenormOptions::default()).unwrap();
    let mut cur = s.clone();
    for n in 1..=10 {
        cur = cur.rv_step().unwrap().0;
        let l = state.level(n).lengths_f64();
        assert!(rel_err(&l, &cur.lambda) < 1e-10);
        let slopes = state.level(n).avg_log_slope();
        assert!(slopes.iter().zip(&cur.omega).all(|(a, b)| (a - b).abs() < 1e-10));
    }
}
