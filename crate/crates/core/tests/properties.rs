mod common;

use fsispectra::config::Config;
use fsispectra::evolution::{evolve, EvolutionOptions};
use fsispectra::mesh::{generate_mesh, GeometryKind, Mesh};
use fsispectra::nullspace::{flux_functional, project_nperp, SaddleProblem};
use fsispectra::report::{fmt_f64, from_json, parse_f64, parse_state_csv, state_csv, to_json};
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(RunnerConfig { cases, failure_persistence: None, ..RunnerConfig::default() })
}

fn state(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

#[test]
fn generator_is_dissipative_with_an_energy_adjoint() {
    let f = common::annulus(5);
    let b = &f.bundle;
    runner(64)
        .run(&(state(b.n), state(b.n)), |(x, y)| {
            let scale = b.inner(&x, &x).max(1e-300);
            prop_assert!(b.inner(&b.apply(&x), &x) <= 1e-12 * scale);
            let d = b.inner(&b.apply(&x), &y) - b.inner(&x, &b.apply_adjoint(&y));
            prop_assert!(d.abs() <= 1e-11 * (b.norm(&x) * b.norm(&y)).max(1.0));
            Ok(())
        })
        .unwrap();
}

#[test]
fn projection_is_idempotent_with_zero_flux() {
    let f = common::annulus(5);
    let b = &f.bundle;
    runner(64)
        .run(&state(b.n), |x| {
            let p = project_nperp(b, &f.null, &x);
            let q = project_nperp(b, &f.null, &p);
            let nx = b.norm(&x).max(1e-300);
            prop_assert!(b.norm(&common::sub(&p, &q)) <= 1e-13 * nx);
            prop_assert!(flux_functional(b, &p).abs() <= 1e-10 * nx);
            Ok(())
        })
        .unwrap();
}

#[test]
fn one_step_never_gains_energy() {
    let f = common::annulus(4);
    let b = &f.bundle;
    let o = EvolutionOptions { t_final: 0.1, dt: 0.1, record_every: 1, ..Default::default() };
    runner(32)
        .run(&(state(b.n), 0.01f64..1.0), |(x, dt)| {
            let o = EvolutionOptions { dt, t_final: dt, ..o.clone() };
            let (tr, _) = evolve(b, None, &[x], &o).unwrap();
            let e = &tr.trajectories[0].energy;
            prop_assert!(e[1] <= e[0] * (1.0 + 1e-12));
            prop_assert!(tr.identity_defect <= 1e-10);
            Ok(())
        })
        .unwrap();
}

#[test]
fn resolvent_inverts_the_generator_on_the_complement() {
    let f = common::annulus(5);
    let (b, mesh) = (&f.bundle, &f.mesh);
    let sp = SaddleProblem::new(b, mesh).unwrap();
    runner(24)
        .run(&state(b.n), |x| {
            let psi = project_nperp(b, &f.null, &x);
            let sol = sp.solve(b, &f.null, &b.apply(&psi), 1e-8).unwrap();
            prop_assert!(b.norm(&common::sub(&sol.x, &psi)) <= 1e-7 * b.norm(&psi).max(1e-300));
            Ok(())
        })
        .unwrap();
}

proptest! {
    #![proptest_config(RunnerConfig { failure_persistence: None, ..RunnerConfig::default() })]

    #[test]
    fn floats_round_trip_through_text(x in any::<f64>()) {
        let back = parse_f64(&fmt_f64(x)).unwrap();
        prop_assert!(back.to_bits() == x.to_bits() || (x.is_nan() && back.is_nan()));
        let v: Vec<f64> = from_json(&to_json(&vec![x]).unwrap()).unwrap();
        prop_assert!(v[0].to_bits() == x.to_bits() || (x.is_nan() && v[0].is_nan()));
    }

    #[test]
    fn configs_round_trip_through_toml(
        seed in any::<u64>(),
        res in 4usize..40,
        lambda in 1e-3f64..1e3,
        mu in 1e-3f64..1e3,
        dt in 1e-3f64..0.5,
        t in 1.0f64..1e3,
        samples in 1usize..10,
    ) {
        let mut c = Config { seed, ..Config::default() };
        c.geometry.resolution = res;
        c.material.lambda = lambda;
        c.material.mu = mu;
        c.evolution.dt = dt;
        c.evolution.t_final = t;
        c.evolution.samples = samples;
        let back = Config::from_toml(&c.to_toml()).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.hash(), c.hash());
    }
}

proptest! {
    #![proptest_config(RunnerConfig { cases: 12, failure_persistence: None, ..RunnerConfig::default() })]

    #[test]
    fn meshes_round_trip_through_text(kind in prop_oneof![Just(GeometryKind::AnnulusDisc), Just(GeometryKind::BoxInBox)], res in 4usize..10) {
        let m = generate_mesh(kind, res).unwrap();
        let back = Mesh::from_text(&m.to_text()).unwrap();
        prop_assert_eq!(&back, &m);
    }

    #[test]
    fn states_round_trip_through_csv(seed in any::<u64>()) {
        let f = common::annulus(4);
        let b = &f.bundle;
        let s = b.expand(&fsispectra::generator::random_state(b, &mut common::rng(seed)));
        let back = parse_state_csv(&state_csv(&s), &b.dims).unwrap();
        prop_assert_eq!(back, s);
    }
}
