mod common;

use faer::{c64, Side};
use fsispectra::fem::{NodeKind, StateVector};
use fsispectra::generator::{random_state, GeneratorBundle};
use fsispectra::linalg::form;
use fsispectra::mesh::Mesh;
use fsispectra::pressure::*;
use fsispectra::spectrum::match_spectra;
use rand::Rng;

/// Divergence-free fluid velocity from a stream function vanishing on the outer wall, with
/// smooth structure data.
fn smooth_state(b: &GeneratorBundle, mesh: &Mesh) -> Vec<f64> {
    let vel = |p: [f64; 3]| {
        let (x, y) = (p[0], p[1]);
        let q = 4.0 - x * x - y * y;
        let s = 1.0 + 0.5 * x + 0.3 * y;
        let px = -4.0 * x * q * s + q * q * 0.5;
        let py = -4.0 * y * q * s + q * q * 0.3;
        [py, -px, 0.0]
    };
    let u = interpolate_fluid(b, vel);
    let dims = b.dims;
    let mut y = vec![0.0; dims.n_y];
    for (n, k) in b.layout.node_kind.iter().enumerate() {
        if let NodeKind::Interior = k {
            let q = b.layout.interior_index[n].unwrap();
            y[2 * q] = u[2 * n];
            y[2 * q + 1] = u[2 * n + 1];
        }
    }
    let mut d = vec![0.0; dims.n_w];
    for (s, &v) in b.layout.solid_vertices.iter().enumerate() {
        let p = mesh.points[v];
        let w = vel(p);
        y[dims.n_u_int + 2 * s] = w[0];
        y[dims.n_u_int + 2 * s + 1] = w[1];
        d[2 * s] = 0.2 + 0.1 * p[1] + 0.05 * p[0] * p[0];
        d[2 * s + 1] = 0.1 * p[0] * p[0] - 0.07 * p[1];
    }
    let mut x = b.leray.coordinates(&y[..dims.n_u_free]);
    x.extend_from_slice(&y[dims.n_u_free..]);
    x.extend_from_slice(&d);
    x
}

#[test]
fn leray_basis_spans_the_discrete_kernel() {
    let f = common::annulus(6);
    let b = &f.bundle;
    let l = &b.leray;
    assert!(l.divergence_defect() < 1e-12);

    // Rank oracle: eigenvalues of B B^T.
    let bd = b.cf.b_u.to_dense();
    let bbt = &bd * bd.transpose();
    let ev = bbt.self_adjoint_eigenvalues(Side::Lower).unwrap();
    let top = ev.iter().cloned().fold(0.0, f64::max);
    let rank = ev.iter().filter(|&&e| e > 1e-20 * top).count();
    assert_eq!(rank, l.rank);
    assert_eq!(l.dim(), b.dims.n_u_free - rank);

    let gram = l.reduce_form(&b.cf.m_u);
    let mut dev = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            dev = dev.max((gram[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    assert!(dev < 1e-10, "Z^T M Z - I = {dev:e}");
}

#[test]
fn reduced_dissipation_is_a_congruence() {
    let f = common::annulus(6);
    let b = &f.bundle;
    let ar = b.leray.reduce_form(&b.cf.a_u);
    let ev = ar.self_adjoint_eigenvalues(Side::Lower).unwrap();
    let top = ev.iter().cloned().fold(0.0, f64::max);
    assert!(ev.iter().all(|&e| e > -1e-12 * top));
    let mut rng = common::rng(21);
    for _ in 0..5 {
        let zeta: Vec<f64> = (0..b.leray.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = b.leray.velocity(&zeta);
        let full = form(&b.cf.a_u, &u, &u);
        let col = faer::Col::from_fn(zeta.len(), |i| zeta[i]);
        let red = col.transpose() * &ar * &col;
        assert!((full - red).abs() < 1e-12 * full.abs().max(1.0));
        let back = b.leray.coordinates(&u);
        assert!(common::max_abs(&common::sub(&back, &zeta)) < 1e-10);
    }
}

#[test]
fn pressure_maps_vanish_on_trivial_data() {
    let f = common::annulus(6);
    let (b, mesh) = (&f.bundle, &f.mesh);
    for bc in [PressureBc::Robin, PressureBc::Dirichlet] {
        let maps = PressureMaps::new(b, mesh, bc).unwrap();
        let z = StateVector::zeros(&b.dims);
        assert!(maps.total(b, mesh, &z).unwrap().iter().all(|&p| p == 0.0));
        // Constant interface displacement has zero surface Laplacian.
        let h0: Vec<f64> = (0..b.dims.n_h).map(|i| if i % 2 == 0 { 0.4 } else { -0.9 }).collect();
        let p2 = maps.p2(b, mesh, &h0).unwrap();
        assert!(common::max_abs(&p2) < 1e-12, "{bc:?}: {:e}", common::max_abs(&p2));
    }
    let cp = ConsistentPressure::new(b).unwrap();
    let h0: Vec<f64> = (0..b.dims.n_h).map(|i| if i % 2 == 0 { 0.4 } else { -0.9 }).collect();
    assert!(common::max_abs(&cp.p2(b, &h0)) < 1e-12);
}

#[test]
fn pressure_maps_are_discretely_harmonic() {
    let f = common::annulus(6);
    let (b, mesh) = (&f.bundle, &f.mesh);
    let mut rng = common::rng(22);
    let x = random_state(b, &mut rng);
    let s = b.expand(&x);
    for bc in [PressureBc::Robin, PressureBc::Dirichlet] {
        let maps = PressureMaps::new(b, mesh, bc).unwrap();
        for p in [maps.p1(b, mesh, &s.u), maps.p2(b, mesh, &s.h0).unwrap(), maps.p3(b, mesh, &s.w0)] {
            assert!(maps.harmonic_residual(b, mesh, &p) <= 1e-10);
        }
    }
}

#[test]
fn algebraic_pressures_agree_with_the_multiplier() {
    let f = common::annulus(6);
    let (b, mesh) = (&f.bundle, &f.mesh);
    let mut rng = common::rng(23);
    let x = random_state(b, &mut rng);
    let pm = multiplier_pressure(b, &x).unwrap();
    let pl = leray_pressure(b, &x);
    assert!(relative_l2_mean_free(b, mesh, &pl, &pm) < 1e-8);
    let cp = ConsistentPressure::new(b).unwrap();
    let (y, d) = b.to_constrained(&x);
    let pc: Vec<f64> = cp.p1(b, &y).iter().zip(cp.p2(b, &d[..b.dims.n_h])).zip(cp.p3(b, &d)).map(|((a, c), e)| a + c + e).collect();
    assert!(relative_l2_mean_free(b, mesh, &pc, &pm) < 1e-8);
}

#[test]
fn robin_pressure_converges_to_the_multiplier() {
    let mut errs = Vec::new();
    for res in [6, 8, 12] {
        let f = common::annulus(res);
        let (b, mesh) = (&f.bundle, &f.mesh);
        let x = smooth_state(b, mesh);
        let pm = multiplier_pressure(b, &x).unwrap();
        let maps = PressureMaps::new(b, mesh, PressureBc::Robin).unwrap();
        let p = maps.total(b, mesh, &b.expand(&x)).unwrap();
        errs.push(relative_l2_mean_free(b, mesh, &p, &pm));
    }
    assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
}

#[test]
fn elimination_routes_share_a_spectrum() {
    let f = common::annulus(6);
    let b = &f.bundle;
    let cp = ConsistentPressure::new(b).unwrap();
    let explicit = cp.restricted_generator(b).unwrap();
    let e1: Vec<c64> = explicit.eigenvalues().unwrap();
    let e2: Vec<c64> = b.a_hat.eigenvalues().unwrap();
    assert_eq!(e1.len(), e2.len());
    let dist = match_spectra(&e1, &e2);
    assert!(dist < 1e-6, "spectra differ by {dist:e}");
}
