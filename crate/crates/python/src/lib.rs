//! Python bindings. Structured results come back as plain dicts decoded from the
//! same JSON the CLI writes, so non-finite numbers appear as the strings "nan"/"inf".

use fsispectra::config::Config;
use fsispectra::evolution::{self, EvolutionOptions, Scheme};
use fsispectra::generator::{random_state, GeneratorBundle};
use fsispectra::mesh::{generate_mesh, GeometryKind, Mesh};
use fsispectra::nullspace::{self, NullspaceData, SaddleProblem};
use fsispectra::pipeline::{self, Context};
use fsispectra::report;
use fsispectra::spectrum::{self, SpectrumMode};
use fsispectra::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::PathBuf;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Factorization(_) | Error::RankDeficient(_) | Error::Assembly(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = report::to_json(v).map_err(py_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse<T: std::str::FromStr<Err = String>>(s: &str) -> PyResult<T> {
    s.parse().map_err(PyValueError::new_err)
}

#[pyclass(name = "Mesh", module = "fsispectra_py", frozen)]
struct PyMesh {
    inner: Mesh,
}

#[pymethods]
impl PyMesh {
    /// Generate a mesh: `annulus_disc`, `box_in_box` or `box_in_box_3d`.
    #[staticmethod]
    #[pyo3(signature = (kind = "annulus_disc", resolution = 8))]
    fn generate(kind: &str, resolution: usize) -> PyResult<Self> {
        let kind: GeometryKind = parse(kind)?;
        let inner = generate_mesh(kind, resolution).map_err(py_err)?;
        Ok(PyMesh { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyMesh { inner: Mesh::load(&path).map_err(py_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let s = self.inner.validate().map_err(py_err)?;
        to_py(py, &s)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn n_vertices(&self) -> usize {
        self.inner.n_vertices()
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.inner.cells.len()
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.points.iter().map(|p| p[..self.inner.dim].to_vec()).collect()
    }

    #[getter]
    fn cells(&self) -> Vec<Vec<usize>> {
        self.inner.cells.clone()
    }

    fn __repr__(&self) -> String {
        format!("Mesh(dim={}, vertices={}, cells={})", self.inner.dim, self.inner.n_vertices(), self.inner.cells.len())
    }
}

/// Assembled generator on a mesh, with states in reduced coordinates.
#[pyclass(name = "Generator", module = "fsispectra_py", frozen)]
struct PyGenerator {
    mesh: Mesh,
    bundle: GeneratorBundle,
    null: NullspaceData,
}

impl PyGenerator {
    fn check_len(&self, x: &[f64]) -> PyResult<()> {
        if x.len() != self.bundle.n {
            return Err(PyValueError::new_err(format!("state has {} entries, expected {}", x.len(), self.bundle.n)));
        }
        Ok(())
    }
}

#[pymethods]
impl PyGenerator {
    #[new]
    #[pyo3(signature = (mesh, lam = 1.0, mu = 1.0))]
    fn new(py: Python<'_>, mesh: &PyMesh, lam: f64, mu: f64) -> PyResult<Self> {
        let mesh = mesh.inner.clone();
        py.detach(|| {
            mesh.validate()?;
            let bundle = GeneratorBundle::new(&mesh, lam, mu)?;
            let null = nullspace::build_nullvector(&bundle, 1.0)?.normalized();
            Ok(PyGenerator { mesh, bundle, null })
        })
        .map_err(py_err)
    }

    /// Dimension of the reduced state space.
    #[getter]
    fn n(&self) -> usize {
        self.bundle.n
    }

    #[getter]
    fn dims<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = &self.bundle.dims;
        let out = PyDict::new(py);
        out.set_item("dim", d.dim)?;
        out.set_item("n_u", d.n_u)?;
        out.set_item("n_p", d.n_p)?;
        out.set_item("n_h", d.n_h)?;
        out.set_item("n_w", d.n_w)?;
        out.set_item("n_reduced", self.bundle.n)?;
        Ok(out)
    }

    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check_len(&x)?;
        Ok(self.bundle.apply(&x))
    }

    fn apply_adjoint(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check_len(&x)?;
        Ok(self.bundle.apply_adjoint(&x))
    }

    fn inner(&self, a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
        self.check_len(&a)?;
        self.check_len(&b)?;
        Ok(self.bundle.inner(&a, &b))
    }

    fn energy(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check_len(&x)?;
        Ok(self.bundle.energy(&x))
    }

    fn dissipation(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check_len(&x)?;
        Ok(self.bundle.dissipation(&x))
    }

    fn random_state(&self, seed: u64) -> Vec<f64> {
        random_state(&self.bundle, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Random state on the kernel complement with unit energy norm.
    fn random_nperp(&self, seed: u64) -> Vec<f64> {
        pipeline::random_nperp(&self.bundle, &self.null, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Physical fields `{u, h0, h1, w0, w1}` of a reduced state.
    fn expand<'py>(&self, py: Python<'py>, x: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        self.check_len(&x)?;
        let s = self.bundle.expand(&x);
        let out = PyDict::new(py);
        for (name, block) in s.blocks() {
            out.set_item(name, block.clone())?;
        }
        Ok(out)
    }

    #[pyo3(signature = (alpha = 1.0))]
    fn nullvector(&self, alpha: f64) -> PyResult<Vec<f64>> {
        Ok(nullspace::build_nullvector(&self.bundle, alpha).map_err(py_err)?.x)
    }

    /// Flux of the interface displacement through GAMMA_S.
    fn flux(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check_len(&x)?;
        Ok(nullspace::flux_functional(&self.bundle, &x))
    }

    fn project_nperp(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check_len(&x)?;
        Ok(nullspace::project_nperp(&self.bundle, &self.null, &x))
    }

    /// Eigenvalues (complex, sorted by modulus) and per-pair residuals.
    #[pyo3(signature = (n_eigs = None, shift = None))]
    fn spectrum<'py>(&self, py: Python<'py>, n_eigs: Option<usize>, shift: Option<(f64, f64)>) -> PyResult<Bound<'py, PyDict>> {
        let mode = match shift {
            Some((re, im)) => SpectrumMode::ShiftInvert { shift_re: re, shift_im: im },
            None => SpectrumMode::Dense,
        };
        let r = py.detach(|| spectrum::compute_spectrum(&self.bundle, n_eigs, mode)).map_err(py_err)?;
        let out = PyDict::new(py);
        let eigs: Vec<(f64, f64)> = r.eigenvalues.iter().map(|z| (z.re, z.im)).collect();
        let complex = py.import("builtins")?.getattr("complex")?;
        let eigs: Vec<Bound<'py, PyAny>> = eigs.into_iter().map(|(re, im)| complex.call1((re, im))).collect::<PyResult<_>>()?;
        out.set_item("eigenvalues", eigs)?;
        out.set_item("residuals", r.residuals.clone())?;
        out.set_item("zero_count", r.zero_count())?;
        out.set_item("spectral_abscissa", r.abscissa())?;
        Ok(out)
    }

    /// `||(i beta - A)^{-1}||` restricted to the kernel complement, `None` where singular.
    fn resolvent_norms(&self, py: Python<'_>, betas: Vec<f64>) -> Vec<Option<f64>> {
        let a = spectrum::restrict_to_nperp(&self.bundle, &self.null);
        py.detach(|| betas.iter().map(|&b| spectrum::resolvent_norm(&a, b)).collect())
    }

    #[pyo3(signature = (modes = 10, tol = 1e-3))]
    fn check_assumption<'py>(&self, py: Python<'py>, modes: usize, tol: f64) -> PyResult<Bound<'py, PyAny>> {
        let r = py.detach(|| spectrum::check_assumption(&self.bundle, modes, tol)).map_err(py_err)?;
        to_py(py, &r)
    }

    /// Solve `A x = xs` for `xs` on the kernel complement.
    fn resolvent<'py>(&self, py: Python<'py>, xs: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        self.check_len(&xs)?;
        let sol = py
            .detach(|| {
                let sp = SaddleProblem::new(&self.bundle, &self.mesh)?;
                sp.solve(&self.bundle, &self.null, &xs, 1e-8)
            })
            .map_err(py_err)?;
        let out = PyDict::new(py);
        out.set_item("x", sol.x)?;
        out.set_item("pressure", sol.pressure)?;
        out.set_item("c0", sol.c0)?;
        out.set_item("residual", sol.residual)?;
        out.set_item("ratio", sol.ratio)?;
        Ok(out)
    }

    /// Integrate every initial state; returns the energy trace and the final states.
    #[pyo3(signature = (states, t_final = 10.0, dt = 0.05, scheme = "midpoint", record_every = 1))]
    fn evolve<'py>(&self, py: Python<'py>, states: Vec<Vec<f64>>, t_final: f64, dt: f64, scheme: &str, record_every: usize) -> PyResult<(Bound<'py, PyAny>, Vec<Vec<f64>>)> {
        for s in &states {
            self.check_len(s)?;
        }
        let scheme: Scheme = parse(scheme)?;
        let opts = EvolutionOptions { dt, t_final, scheme, record_every, ..EvolutionOptions::default() };
        let (trace, fin) = py.detach(|| evolution::evolve(&self.bundle, Some(&self.null), &states, &opts)).map_err(py_err)?;
        Ok((to_py(py, &trace)?, fin))
    }

    fn __repr__(&self) -> String {
        format!("Generator(n={}, dim={})", self.bundle.n, self.bundle.dims.dim)
    }
}

/// Default configuration as TOML text.
#[pyfunction]
fn default_config() -> String {
    Config::default().to_toml()
}

/// Run the verification suite for a TOML configuration (defaults when omitted).
#[pyfunction]
#[pyo3(signature = (config = None))]
fn verify<'py>(py: Python<'py>, config: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = match config {
        Some(t) => Config::from_toml(t).map_err(py_err)?,
        None => Config::default(),
    };
    let suite = py
        .detach(|| {
            let mut ctx = Context::new(&cfg)?;
            pipeline::verification_suite(&mut ctx)
        })
        .map_err(py_err)?;
    to_py(py, &suite)
}

#[pymodule]
fn fsispectra_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyGenerator>()?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
