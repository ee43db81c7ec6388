mod common;

use fsispectra::fem::assemble_solid;
use fsispectra::generator::{random_state, GeneratorBundle};
use fsispectra::linalg::{dot, SparseChol};
use fsispectra::nullspace::*;
use rand::Rng;
use std::collections::HashMap;

/// `int_{GAMMA_S} nu . h0` facet by facet; exact for P1 data.
fn flux_oracle(b: &GeneratorBundle, x: &[f64]) -> f64 {
    let h0 = b.expand(x).h0;
    let d = b.dims.dim;
    let index: HashMap<usize, usize> = b.layout.interface_vertices.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut total = 0.0;
    for f in &b.layout.frame.facets {
        for &v in &f.vertices {
            let k = index[&v];
            let nh: f64 = (0..d).map(|i| f.normal[i] * h0[k * d + i]).sum();
            total += f.measure * nh / f.vertices.len() as f64;
        }
    }
    total
}

#[test]
fn nullvector_is_linear_in_the_load() {
    let f = common::annulus(6);
    let b = &f.bundle;
    let zero = build_nullvector(b, 0.0).unwrap();
    assert!(zero.x.iter().all(|&v| v == 0.0));
    let one = build_nullvector(b, 1.0).unwrap();
    let two = build_nullvector(b, 2.0).unwrap();
    for (p, q) in two.x.iter().zip(&one.x) {
        assert!((p - 2.0 * q).abs() <= 1e-12 * (1.0 + q.abs()));
    }
}

#[test]
fn nullvector_is_a_static_state_in_the_kernel() {
    let f = common::annulus(8);
    let b = &f.bundle;
    let phi = build_nullvector(b, 1.0).unwrap();
    assert!(b.norm(&b.apply(&phi.x)) < 1e-8 * b.norm(&phi.x));
    let s = b.expand(&phi.x);
    let scale = s.max_abs();
    for blk in [&s.u, &s.h1, &s.w1] {
        assert!(common::max_abs(blk) <= 1e-10 * scale);
    }
    // The load displaces the interface along nu.
    assert!(flux_oracle(b, &phi.x) > 0.0);
}

#[test]
fn kernel_complement_is_the_zero_flux_hyperplane() {
    let f = common::annulus(8);
    let b = &f.bundle;
    let mut rng = common::rng(41);
    let mut ratios = Vec::new();
    for _ in 0..100 {
        let x = random_state(b, &mut rng);
        ratios.push(b.inner(&x, &f.null.x) / flux_oracle(b, &x));
        let p = project_nperp(b, &f.null, &x);
        assert!(flux_oracle(b, &p).abs() < 1e-10 * b.norm(&x));
        assert!(b.inner(&p, &f.null.x).abs() < 1e-10 * b.norm(&x));
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    for r in &ratios {
        assert!((r - mean).abs() <= 1e-8 * mean.abs(), "{r} vs {mean}");
    }
}

#[test]
fn projection_is_idempotent_and_kills_the_kernel() {
    let f = common::annulus(6);
    let b = &f.bundle;
    let p = project_nperp(b, &f.null, &f.null.x);
    assert!(b.norm(&p) < 1e-12);
    let x = random_state(b, &mut common::rng(42));
    let once = project_nperp(b, &f.null, &x);
    let twice = project_nperp(b, &f.null, &once);
    assert!(b.norm(&common::sub(&once, &twice)) < 1e-14);
}

#[test]
fn dirichlet_map_extends_harmonically() {
    let f = common::annulus(6);
    let (b, mesh) = (&f.bundle, &f.mesh);
    let dm = dirichlet_map(b, mesh).unwrap();
    let nh = b.dims.n_h;
    let nw = b.dims.n_w;
    assert!(dm.apply(&vec![0.0; nh]).iter().all(|&v| v == 0.0));

    let c = [0.3, -1.1];
    let g: Vec<f64> = (0..nh).map(|i| c[i % 2]).collect();
    let ext = dm.apply(&g);
    for (i, v) in ext.iter().enumerate() {
        assert!((v - c[i % 2]).abs() < 1e-10, "translation not reproduced at {i}");
    }

    let (strain, _) = assemble_solid(mesh, &b.layout, b.forms.lambda, b.forms.mu);
    let mut rng = common::rng(43);
    let g: Vec<f64> = (0..nh).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let ext = dm.apply(&g);
    let r = strain.matvec(&ext);
    let interior = common::max_abs(&r[nh..nw]);
    assert!(interior < 1e-10 * strain.max_abs() * common::max_abs(&g), "{interior:e}");
    assert_eq!(&ext[..nh], &g[..]);
    assert!(dm.bound.is_finite() && dm.bound > 0.0);
}

#[test]
fn resolvent_round_trip_on_the_complement() {
    let f = common::annulus(8);
    let (b, mesh) = (&f.bundle, &f.mesh);
    let sp = SaddleProblem::new(b, mesh).unwrap();
    let zero = sp.solve(b, &f.null, &vec![0.0; b.n], 1e-8).unwrap();
    assert!(zero.x.iter().all(|v| v.abs() < 1e-300) && zero.c0 == 0.0);

    let mut rng = common::rng(44);
    for _ in 0..20 {
        let psi = common::nperp_state(&f, &mut rng);
        let rhs = b.apply(&psi);
        let sol = sp.solve(b, &f.null, &rhs, 1e-8).unwrap();
        assert!(b.norm(&common::sub(&sol.x, &psi)) <= 1e-7 * b.norm(&psi));
        assert!(sol.residual < 1e-8);
    }
    let kernel = sp.solve(b, &f.null, &f.null.x, 1e-8);
    assert!(kernel.is_err(), "kernel data must be rejected");
}

#[test]
fn bound_constant_is_finite_and_matches_a_lower_bound() {
    let f = common::annulus(6);
    let (b, mesh) = (&f.bundle, &f.mesh);
    let sp = SaddleProblem::new(b, mesh).unwrap();
    let c = sp.bound_constant(b, &f.null, 60, &mut common::rng(45)).unwrap();
    assert!(c.is_finite() && c > 0.0);
    // Any particular solution gives a lower bound on the operator norm.
    let mut rng = common::rng(46);
    for _ in 0..5 {
        let xs = common::nperp_state(&f, &mut rng);
        let sol = sp.solve(b, &f.null, &xs, 1e-8).unwrap();
        assert!(sol.ratio <= c * (1.0 + 1e-6), "{} > {c}", sol.ratio);
    }
}

#[test]
fn infsup_is_positive_and_stable_under_refinement() {
    let mut betas = Vec::new();
    for res in [6, 8, 12] {
        let f = common::annulus(res);
        let is = estimate_infsup(&f.bundle, &f.mesh).unwrap();
        assert!(is.beta > 0.0 && is.witness > 0.0);
        assert!(is.witness <= is.beta * (1.0 + 1e-10), "witness {} above sup {}", is.witness, is.beta);
        betas.push(is.beta);
    }
    let lo = betas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = betas.iter().cloned().fold(0.0, f64::max);
    assert!(hi / lo < 1.25, "{betas:?}");
}

#[test]
fn infsup_rescales_with_the_geometry() {
    // Under x -> s x in 2D: strain form fixed, masses times s^2, surface stiffness over s,
    // normal load times s.
    let s = 2.0;
    let f = common::annulus(6);
    let (b, mesh) = (&f.bundle, &f.mesh);
    let (strain, mass) = assemble_solid(mesh, &b.layout, 1.0, 1.0);
    let nw = b.dims.n_w;
    let k = strain.add(&mass.scaled(s * s)).add(&b.forms.s_gamma.scaled(1.0 / s).embed(nw, nw, 0, 0));
    let n: Vec<f64> = b.cf.n_d.iter().map(|v| v * s).collect();
    let predicted = dot(&SparseChol::new(&k).unwrap().solve(&n), &n).sqrt();

    let big = mesh.scaled(s);
    let bb = GeneratorBundle::new(&big, 1.0, 1.0).unwrap();
    let is = estimate_infsup(&bb, &big).unwrap();
    assert!((is.beta - predicted).abs() < 1e-10 * predicted, "{} vs {predicted}", is.beta);
    assert!(is.beta > 0.0);
}
