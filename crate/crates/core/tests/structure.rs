mod common;

use common::{bareiss_det, omega_matrix, path_product, rank, rng};
use num_bigint::BigInt;
use proptest::prelude::*;
use rand::Rng;
use renormkit::combinat::irreducible_permutations;
use renormkit::giet::simplex_point;
use renormkit::{Iet, Permutation};

fn all_perms() -> Vec<Permutation> {
    (2..=5).flat_map(irreducible_permutations).collect()
}

#[test]
fn enumeration_counts_irreducible_permutations() {
    // irreducible permutations of 2..5 letters: 1, 3, 13, 71
    let counts: Vec<usize> = (2..=5).map(|d| irreducible_permutations(d).len()).collect();
    assert_eq!(counts, vec![1, 3, 13, 71]);
}

#[test]
fn translation_matrix_is_antisymmetric_and_matches_definition() {
    for p in all_perms() {
        let om = p.translation_matrix();
        assert_eq!(om, omega_matrix(&p));
        for (i, row) in om.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                assert_eq!(x, -om[j][i]);
            }
        }
    }
}

#[test]
fn singularity_count_is_kernel_dimension_plus_one() {
    for p in all_perms() {
        let sing = p.singularity().unwrap();
        let kernel = p.d() - rank(&omega_matrix(&p));
        assert_eq!(sing.kappa, kernel + 1, "{:?}", p);
        assert_eq!(sing.orbits.iter().map(|o| o.len()).sum::<usize>(), p.d() + 1);
    }
}

#[test]
fn kernel_basis_is_annihilated_and_independent() {
    for p in all_perms() {
        let om = omega_matrix(&p);
        let sing = p.singularity().unwrap();
        assert_eq!(sing.kernel_basis.len(), sing.kappa - 1);
        for v in &sing.kernel_basis {
            assert!(v.iter().all(|x| (-1..=1).contains(x)));
            for row in &om {
                assert_eq!(row.iter().zip(v).map(|(a, b)| a * b).sum::<i64>(), 0);
            }
        }
        assert_eq!(rank(&sing.kernel_basis), sing.kernel_basis.len());
    }
}

#[test]
fn rotation_type_singularities() {
    for d in 2..=6 {
        for k in 0..=d - 2 {
            let p = Permutation::rotation(d, k).unwrap();
            assert_eq!(p.rotation_type(), Some(k));
            let sing = p.singularity().unwrap();
            assert_eq!(sing.kappa, d - 1);
            assert_eq!(sing.orbit_of(0), sing.orbit_of(d));
            assert_eq!(sing.orbit_of(0), sing.orbit_of(d - k - 1));
        }
    }
}

#[test]
fn random_windows_are_unimodular() {
    let mut r = rng(5);
    let perms: Vec<Permutation> = (3..=5).flat_map(irreducible_permutations).collect();
    for _ in 0..50 {
        let p = perms[r.random_range(0..perms.len())].clone();
        let iet = Iet::new(simplex_point(p.d(), &mut r), p).unwrap();
        let (path, _) = iet.rauzy_path(60).unwrap();
        let m = r.random_range(0..30);
        let n = r.random_range(m + 1..=60);
        let w = path.window(m, n).unwrap();
        let q = path_product(&path.perms()[m], &path.types[m..n]);
        assert_eq!(w.matrix.rows(), q);
        let det = bareiss_det(&q);
        assert!(det == BigInt::from(1) || det == BigInt::from(-1));
        assert_eq!(w.det(), det);
        let qt = w.height_cocycle().rows();
        assert_eq!(bareiss_det(&qt), det);
    }
}

fn perm_strategy() -> impl Strategy<Value = Permutation> {
    let perms = all_perms();
    (0..perms.len()).prop_map(move |i| perms[i].clone())
}

proptest! {
    #[test]
    fn rauzy_moves_preserve_structure(p in perm_strategy(), eps in 0u8..2) {
        let q = p.rauzy_move(eps);
        prop_assert!(q.is_irreducible());
        prop_assert_eq!(q.singularity().unwrap().kappa, p.singularity().unwrap().kappa);
        prop_assert_eq!(q.genus(), p.genus());
        prop_assert!(p.rauzy_class().contains(&q));
    }

    #[test]
    fn induction_preserves_total_length(p in perm_strategy(), seed in 0u64..1000) {
        let mut r = rng(seed);
        let iet = Iet::new(simplex_point(p.d(), &mut r), p).unwrap();
        let (path, end) = iet.rauzy_path(20).unwrap();
        // lengths transform by the inverse of the path matrix
        let m = path.matrix().to_f64();
        let back = &m * nalgebra::DVector::from_vec(end.lengths().to_vec());
        for (a, b) in back.iter().zip(iet.lengths()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
