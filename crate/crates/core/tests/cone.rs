mod common;

use common::rng;
use proptest::prelude::*;
use renormkit::affine::{contraction_check, hilbert_metric, to_dmatrix, v_matrix};
use renormkit::pipeline::{build_reference, PermRows, ReferenceSource};

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

#[test]
fn golden_windows_contract() {
    let reference = build_reference(&golden(), 20, 10).unwrap();
    let rv = &reference.schedule.rv_index;
    let mut omega = vec![0.1, -0.1, 0.0];
    let mut r = rng(41);
    for k in 0..20 {
        let st = v_matrix(&reference.path, rv[k], rv[k + 1], &omega).unwrap();
        let v = to_dmatrix(&st.v);
        let rep = contraction_check(&v, 100, &mut r).unwrap();
        assert!(rep.positive);
        assert!(rep.empirical < 1.0, "window {k}: {}", rep.empirical);
        assert!(rep.empirical <= rep.birkhoff.unwrap() + 1e-12);
        omega = st.omega_end;
    }
}

#[test]
fn hilbert_spot_value() {
    // ratios 2 and 2/3
    let d = hilbert_metric(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
    assert!((d - 3f64.ln()).abs() < 1e-15);
    assert!(hilbert_metric(&[1.0, 0.0], &[0.5, 0.5]).is_err());
}

fn positive(d: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.01f64..10.0, d)
}

proptest! {
    #[test]
    fn hilbert_is_a_projective_metric(a in positive(4), b in positive(4), c in positive(4), t in 0.1f64..10.0) {
        let ab = hilbert_metric(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - hilbert_metric(&b, &a).unwrap()).abs() < 1e-12);
        let scaled: Vec<f64> = a.iter().map(|x| x * t).collect();
        prop_assert!((hilbert_metric(&scaled, &b).unwrap() - ab).abs() < 1e-12);
        let ac = hilbert_metric(&a, &c).unwrap();
        let cb = hilbert_metric(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
    }
}
