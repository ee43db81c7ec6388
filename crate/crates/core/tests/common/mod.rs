#![allow(dead_code)]

use fsispectra::generator::{random_state, GeneratorBundle};
use fsispectra::mesh::{generate_mesh, GeometryKind, Mesh};
use fsispectra::nullspace::{build_nullvector, project_nperp, NullspaceData};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

pub struct Fixture {
    pub mesh: Mesh,
    pub bundle: GeneratorBundle,
    pub null: NullspaceData,
}

/// Annulus-disc problem with lambda = mu = 1, built once per resolution and test binary.
pub fn annulus(res: usize) -> Arc<Fixture> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fixture>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(res)
        .or_insert_with(|| {
            let mesh = generate_mesh(GeometryKind::AnnulusDisc, res).unwrap();
            let bundle = GeneratorBundle::new(&mesh, 1.0, 1.0).unwrap();
            let null = build_nullvector(&bundle, 1.0).unwrap().normalized();
            Arc::new(Fixture { mesh, bundle, null })
        })
        .clone()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn nperp_state(f: &Fixture, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let x = project_nperp(&f.bundle, &f.null, &random_state(&f.bundle, rng));
    let n = f.bundle.norm(&x);
    x.into_iter().map(|v| v / n).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}
