mod common;

use faer::c64;
use fsispectra::generator::random_state;
use fsispectra::linalg::{form, matvec_dense};
use fsispectra::spectrum::match_spectra;
use rand::Rng;

#[test]
fn apply_is_linear_and_kills_zero() {
    let f = common::annulus(6);
    let b = &f.bundle;
    assert!(b.apply(&vec![0.0; b.n]).iter().all(|&v| v == 0.0));
    let mut rng = common::rng(31);
    let (x, y) = (random_state(b, &mut rng), random_state(b, &mut rng));
    let (a, c) = (1.7, -0.4);
    let comb: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + c * q).collect();
    let lhs = b.apply(&comb);
    let rhs: Vec<f64> = b.apply(&x).iter().zip(b.apply(&y)).map(|(p, q)| a * p + c * q).collect();
    assert!(b.norm(&common::sub(&lhs, &rhs)) < 1e-12 * b.norm(&lhs));
    let dense = matvec_dense(b.generator_matrix().as_ref(), &x);
    assert!(b.norm(&common::sub(&dense, &b.apply(&x))) < 1e-12 * b.norm(&dense));
}

#[test]
fn dissipation_identity_against_the_full_fluid_form() {
    let f = common::annulus(6);
    let b = &f.bundle;
    let mut rng = common::rng(32);
    for _ in 0..10 {
        let x = random_state(b, &mut rng);
        let lhs = b.inner(&b.apply(&x), &x);
        let u = b.expand(&x).u;
        let diss = form(&b.forms.a_f, &u, &u);
        assert!((lhs + diss).abs() <= 1e-10 * b.inner(&x, &x), "{lhs} + {diss}");
        assert!(lhs <= 1e-12);
    }
}

#[test]
fn displacement_rate_is_the_interface_velocity() {
    let f = common::annulus(6);
    let b = &f.bundle;
    let x = random_state(b, &mut common::rng(33));
    let s = b.expand(&x);
    let sd = b.expand(&b.apply(&x));
    for (p, q) in sd.h0.iter().zip(&s.h1) {
        assert!((p - q).abs() <= 1e-13 * (1.0 + q.abs()));
    }
    for (p, q) in sd.w0.iter().zip(&s.w1) {
        assert!((p - q).abs() <= 1e-13 * (1.0 + q.abs()));
    }
}

#[test]
fn static_rows_match_direct_form_application() {
    // For x = [0, d] and a velocity-only test state v: <A x, v>_H = -(a_s(w0, v_w1) + s_Gamma(h0, v_h1)).
    let f = common::annulus(6);
    let b = &f.bundle;
    let mut rng = common::rng(34);
    let mut x = vec![0.0; b.n];
    for v in x[b.n_v..].iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let s = b.expand(&x);
    let ax = b.apply(&x);
    for _ in 0..5 {
        let mut v = vec![0.0; b.n];
        for t in v[..b.n_v].iter_mut() {
            *t = rng.gen_range(-1.0..1.0);
        }
        let sv = b.expand(&v);
        let lhs = b.inner(&ax, &v);
        let rhs = -(form(&b.forms.a_s, &s.w0, &sv.w1) + form(&b.forms.s_gamma, &s.h0, &sv.h1));
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
    }
}

#[test]
fn adjoint_is_the_energy_transpose() {
    let f = common::annulus(6);
    let b = &f.bundle;
    let mut rng = common::rng(35);
    for _ in 0..10 {
        let (x, y) = (random_state(b, &mut rng), random_state(b, &mut rng));
        let d = b.inner(&b.apply(&x), &y) - b.inner(&x, &b.apply_adjoint(&y));
        assert!(d.abs() < 1e-12, "{d:e}");
    }
}

#[test]
fn kernel_is_shared_with_the_adjoint() {
    let f = common::annulus(8);
    let b = &f.bundle;
    let phi = &f.null.x;
    assert!(b.norm(&b.apply(phi)) < 1e-8 * b.norm(phi));
    assert!(b.norm(&b.apply_adjoint(phi)) < 1e-8 * b.norm(phi));
}

#[test]
fn adjoint_spectrum_is_conjugate() {
    let f = common::annulus(6);
    let b = &f.bundle;
    let e: Vec<c64> = b.a_hat.eigenvalues().unwrap();
    let et: Vec<c64> = b.a_hat.transpose().to_owned().eigenvalues().unwrap();
    let conj: Vec<c64> = e.iter().map(|z| z.conj()).collect();
    assert!(match_spectra(&et, &conj) < 1e-8);
}
