use renormkit::oseledets::{estimate_splitting, kernel_projection, HeightSeq};
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
fn golden_splitting_has_known_directions() {
    let r = build_reference(&golden(), 4, 10).unwrap();
    let seq = HeightSeq::from_windows(&r.windows, true).unwrap();
    let perms = r.perms();
    let s = estimate_splitting(&seq, &perms[0], 0, 30).unwrap();
    assert_eq!(s.dims(), (1, 1, 1));
    let c = &s.basis_c[0];
    // central direction spans the kernel of the translation matrix
    let tol = 10.0 * s.residual().max(f64::EPSILON);
    assert!((c[0] + c[1]).abs() < tol * c[0].abs() && c[2].abs() < tol * c[0].abs());
    assert!(s.exponents_c[0].abs() < 1e-8);
    // Perron-Frobenius eigenvalue of the window is 2 + sqrt 3
    assert!((s.exponents_u[0] - (2.0 + 3f64.sqrt()).ln()).abs() < 1e-8);
    assert!((s.exponents_s[0] + (2.0 + 3f64.sqrt()).ln()).abs() < 1e-8);
    // half-depth comparison bounds the error by about 3.73^-15
    assert!(s.residual() < 1e-7);
    let k = kernel_projection(&perms[0], &[0.3, 0.1, 0.2]).unwrap();
    assert!((k[0] + k[1]).abs() < 1e-14 && k[2].abs() < 1e-14);
}

#[test]
fn golden_lengths_are_perron_frobenius() {
    let r = build_reference(&golden(), 4, 10).unwrap();
    let w = r.windows[0].matrix.to_f64();
    let l = nalgebra::DVector::from_vec(r.lambda.clone());
    let img = &w * &l;
    let ratio = img[0] / l[0];
    assert!((ratio - (2.0 + 3f64.sqrt())).abs() < 1e-10);
    assert!(img.iter().zip(l.iter()).all(|(a, b)| (a / b - ratio).abs() < 1e-10));
}
