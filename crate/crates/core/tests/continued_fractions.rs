mod common;

use common::{cf_oracle, fibonacci, path_product, rng};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use renormkit::real::{Mp, Real};
use renormkit::{Iet, Permutation, RauzyPath};

fn swap() -> Permutation {
    Permutation::from_rows("A B", "B A").unwrap()
}

fn random_big<R: Rng>(r: &mut R, words: usize) -> BigInt {
    (0..words).fold(BigInt::from(0), |acc, _| (acc << 64) + BigInt::from(r.random::<u64>()))
}

#[test]
fn zorich_times_are_partial_quotients() {
    let mut r = rng(11);
    for _ in 0..10 {
        let q: BigInt = random_big(&mut r, 6) + 1;
        let p: BigInt = random_big(&mut r, 6) % &q;
        let x = BigRational::new(p.clone(), q.clone());
        let iet = Iet::new(vec![BigRational::from_integer(1.into()), x], swap()).unwrap();
        let log = iet.zorich_log(20).unwrap();
        let cf = cf_oracle(&p, &q, 20);
        assert_eq!(cf.len(), 20);
        for (rec, a) in log.iter().zip(&cf) {
            assert_eq!(BigInt::from(rec.z), *a);
        }
    }
}

#[test]
fn golden_heights_are_fibonacci() {
    let x = (Mp::new(5.0).sqrt() - Mp::new(1.0)) / Mp::new(2.0);
    let iet = Iet::new(vec![Mp::new(1.0), x], swap()).unwrap();
    let (path, _) = iet.rauzy_path(60).unwrap();
    assert!(path.zorich_times().windows(2).all(|w| w[1] - w[0] == 1));
    for n in 1..=60 {
        let h = path.window(0, n).unwrap().heights;
        let mut h = h.clone();
        h.sort();
        assert_eq!(h, vec![fibonacci(n + 1), fibonacci(n + 2)], "n = {n}");
    }
}

#[test]
fn long_golden_heights_need_big_integers() {
    let path = RauzyPath::periodic(swap(), &[1, 0], 150).unwrap();
    let n = path.len();
    let mut h = path.window(0, n).unwrap().heights;
    h.sort();
    assert_eq!(h, vec![fibonacci(n + 1), fibonacci(n + 2)]);
    assert!(h[1] > BigInt::from(u64::MAX));
    let q = path_product(&path.start, &path.types);
    let lib = path.matrix().rows();
    assert_eq!(lib, q);
}
