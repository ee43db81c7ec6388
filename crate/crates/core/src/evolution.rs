//! Energy-stable time stepping of `x' = A_h x`.

use crate::error::{Error, Result};
use crate::generator::GeneratorBundle;
use crate::linalg::{col_to_vec, dot};
use crate::mesh::Mesh;
use crate::nullspace::NullspaceData;
use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Implicit midpoint (Crank-Nicolson). Reproduces the quadratic energy balance exactly.
    #[default]
    Midpoint,
    BackwardEuler,
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "midpoint" => Ok(Scheme::Midpoint),
            "backward_euler" | "backward-euler" => Ok(Scheme::BackwardEuler),
            _ => Err(format!("unknown time scheme '{s}' (expected midpoint or backward_euler)")),
        }
    }
}

impl Scheme {
    fn theta(self) -> f64 {
        match self {
            Scheme::Midpoint => 0.5,
            Scheme::BackwardEuler => 1.0,
        }
    }
}

/// Energy split by physical component. The five parts sum to `E = 1/2 ||x||_H^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct EnergyComponents {
    pub fluid_kinetic: f64,
    pub interface_kinetic: f64,
    pub interface_elastic: f64,
    pub structure_kinetic: f64,
    pub structure_elastic: f64,
}

impl EnergyComponents {
    pub const NAMES: [&'static str; 5] = ["fluid_kinetic", "interface_kinetic", "interface_elastic", "structure_kinetic", "structure_elastic"];

    pub fn values(&self) -> [f64; 5] {
        [self.fluid_kinetic, self.interface_kinetic, self.interface_elastic, self.structure_kinetic, self.structure_elastic]
    }

    pub fn total(&self) -> f64 {
        self.values().iter().sum()
    }
}

pub fn energy_components(bundle: &GeneratorBundle, x: &[f64]) -> EnergyComponents {
    let f = &bundle.forms;
    let zeta = &x[..bundle.n_zeta];
    let (y, d) = bundle.to_constrained(x);
    let ws = bundle.cf.structure_velocity(&y);
    let h1 = &ws[..bundle.dims.n_h];
    let h0 = &d[..bundle.dims.n_h];
    EnergyComponents {
        fluid_kinetic: 0.5 * dot(zeta, zeta),
        interface_kinetic: 0.5 * dot(&f.m_gamma.matvec(h1), h1),
        interface_elastic: 0.5 * dot(&f.s_gamma.matvec(h0), h0),
        structure_kinetic: 0.5 * dot(&f.m_s.matvec(ws), ws),
        structure_elastic: 0.5 * dot(&f.a_s.matvec(&d), &d),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionOptions {
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    /// Record the trace every this many steps (the last step is always recorded).
    pub record_every: usize,
    /// Stop once every trajectory has `E(t)/E(0)` below this value.
    pub stop_ratio: Option<f64>,
    pub project_each_step: bool,
    /// Keep full reduced states every this many steps.
    pub snapshot_every: Option<usize>,
}

impl Default for EvolutionOptions {
    fn default() -> Self {
        EvolutionOptions { dt: 0.05, t_final: 200.0, scheme: Scheme::Midpoint, record_every: 20, stop_ratio: None, project_each_step: false, snapshot_every: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub energy: Vec<f64>,
    /// Viscous dissipation rate `u^T A_f u`.
    pub dissipation: Vec<f64>,
    /// `<x, phi_N>_H / (||x||_H ||phi_N||_H)`, zero when no kernel vector is supplied.
    pub l_defect: Vec<f64>,
    pub components: Vec<EnergyComponents>,
    /// First recorded time with `E(t) < stop_ratio E(0)`.
    pub horizon: Option<f64>,
    /// `max_n |<x_n, phi_N>_H - <x_0, phi_N>_H| / (||x_0||_H ||phi_N||_H)`.
    pub kernel_drift: f64,
}

impl Trajectory {
    pub fn decay_ratio(&self) -> f64 {
        self.energy.last().copied().unwrap_or(f64::NAN) / self.energy[0]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
    /// Largest `|E_{n+1} - E_n + dt D(x_{n+1/2})| / E_n` over all steps (midpoint only).
    pub identity_defect: f64,
    /// Largest `(E_{n+1} - E_n) / E_0` over all steps.
    pub max_increase: f64,
    pub steps: usize,
    pub final_time: f64,
    #[serde(skip)]
    pub snapshots: Vec<Snapshot>,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    /// Reduced coordinates, one per trajectory.
    pub states: Vec<Vec<f64>>,
}

fn unit_hat(bundle: &GeneratorBundle, null: &NullspaceData) -> Vec<f64> {
    let v = bundle.to_hat(&null.x);
    let nr = v.iter().map(|t| t * t).sum::<f64>().sqrt();
    v.into_iter().map(|t| t / nr).collect()
}

/// Advances all initial states together with a one-step theta scheme in orthonormal coordinates.
pub fn evolve(bundle: &GeneratorBundle, null: Option<&NullspaceData>, x0: &[Vec<f64>], opts: &EvolutionOptions) -> Result<(EnergyTrace, Vec<Vec<f64>>)> {
    let mut bad = Vec::new();
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        bad.push(format!("dt must be positive, got {}", opts.dt));
    }
    if !(opts.t_final >= 0.0 && opts.t_final.is_finite()) {
        bad.push(format!("final time must be non-negative, got {}", opts.t_final));
    }
    if !bad.is_empty() {
        return Err(Error::Config(bad));
    }
    if opts.project_each_step && null.is_none() {
        return Err(Error::Config(vec!["per-step projection needs the kernel vector".into()]));
    }
    for x in x0 {
        if x.len() != bundle.n {
            return Err(Error::Domain(format!("state has dimension {}, expected {}", x.len(), bundle.n)));
        }
    }
    let n = bundle.n;
    let nv = bundle.n_v;
    let a = &bundle.a_hat;
    let theta = opts.scheme.theta();
    let eye = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let lhs = Mat::from_fn(n, n, |i, j| eye(i, j) - theta * opts.dt * a[(i, j)]);
    let rhs = Mat::from_fn(n, n, |i, j| eye(i, j) + (1.0 - theta) * opts.dt * a[(i, j)]);
    let prop = lhs.partial_piv_lu().solve(&rhs);
    let diss_block = Mat::from_fn(nv, nv, |i, j| -a[(i, j)]);
    let ns = x0.len();
    let mut x = Mat::from_fn(n, ns, |_, _| 0.0);
    for (s, xs) in x0.iter().enumerate() {
        x.col_mut(s).copy_from(crate::linalg::vec_to_col(&bundle.to_hat(xs)));
    }
    let phi = null.map(|nd| unit_hat(bundle, nd));
    let project = |x: &mut Mat<f64>| {
        if let Some(p) = &phi {
            for s in 0..ns {
                let c: f64 = (0..n).map(|i| x[(i, s)] * p[i]).sum();
                for i in 0..n {
                    x[(i, s)] -= c * p[i];
                }
            }
        }
    };
    let energies = |x: &Mat<f64>| -> Vec<f64> { (0..ns).map(|s| 0.5 * x.col(s).squared_norm_l2()).collect() };
    let dissipations = |x: &Mat<f64>| -> Vec<f64> {
        let v = x.subrows(0, nv);
        let dv = &diss_block * v;
        (0..ns).map(|s| (0..nv).map(|i| v[(i, s)] * dv[(i, s)]).sum()).collect()
    };
    let kernel = |x: &Mat<f64>| -> Vec<f64> {
        match &phi {
            Some(p) => (0..ns).map(|s| (0..n).map(|i| x[(i, s)] * p[i]).sum()).collect(),
            None => vec![0.0; ns],
        }
    };
    let e0 = energies(&x);
    let norm0: Vec<f64> = e0.iter().map(|e| (2.0 * e).sqrt().max(f64::MIN_POSITIVE)).collect();
    let k0 = kernel(&x);
    let mut trace = EnergyTrace {
        times: Vec::new(),
        trajectories: (0..ns)
            .map(|_| Trajectory { energy: vec![], dissipation: vec![], l_defect: vec![], components: vec![], horizon: None, kernel_drift: 0.0 })
            .collect(),
        identity_defect: 0.0,
        max_increase: 0.0,
        steps: 0,
        final_time: 0.0,
        snapshots: Vec::new(),
    };
    let snapshot = |trace: &mut EnergyTrace, x: &Mat<f64>, step: usize| {
        let states = (0..ns).map(|s| bundle.from_hat(&col_to_vec(x.col(s)))).collect();
        trace.snapshots.push(Snapshot { step, time: step as f64 * opts.dt, states });
    };
    let record = |trace: &mut EnergyTrace, x: &Mat<f64>, t: f64| {
        trace.times.push(t);
        let (e, d, k) = (energies(x), dissipations(x), kernel(x));
        for s in 0..ns {
            let tr = &mut trace.trajectories[s];
            tr.energy.push(e[s]);
            tr.dissipation.push(d[s]);
            tr.l_defect.push(k[s].abs() / (2.0 * e[s]).sqrt().max(f64::MIN_POSITIVE));
            tr.components.push(energy_components(bundle, &bundle.from_hat(&col_to_vec(x.col(s)))));
            if tr.horizon.is_none() && opts.stop_ratio.is_some_and(|r| e[s] < r * e0[s]) {
                tr.horizon = Some(t);
            }
        }
    };
    record(&mut trace, &x, 0.0);
    if opts.snapshot_every.is_some() {
        snapshot(&mut trace, &x, 0);
    }
    let n_steps = (opts.t_final / opts.dt).round() as usize;
    let every = opts.record_every.max(1);
    let mut e_old = e0.clone();
    for step in 1..=n_steps {
        let mut next = &prop * &x;
        if opts.project_each_step {
            project(&mut next);
        }
        let e_new = energies(&next);
        if e_new.iter().any(|e| !e.is_finite()) {
            return Err(Error::Domain(format!("non-finite state at step {step}")));
        }
        if opts.scheme == Scheme::Midpoint {
            let mid = Mat::from_fn(n, ns, |i, s| 0.5 * (x[(i, s)] + next[(i, s)]));
            let dm = dissipations(&mid);
            for s in 0..ns {
                let scale = e_old[s].max(f64::MIN_POSITIVE);
                trace.identity_defect = trace.identity_defect.max((e_new[s] - e_old[s] + opts.dt * dm[s]).abs() / scale);
            }
        }
        let k = kernel(&next);
        for s in 0..ns {
            trace.max_increase = trace.max_increase.max((e_new[s] - e_old[s]) / e0[s].max(f64::MIN_POSITIVE));
            let drift = (k[s] - k0[s]).abs() / norm0[s];
            trace.trajectories[s].kernel_drift = trace.trajectories[s].kernel_drift.max(drift);
        }
        x = next;
        e_old = e_new;
        trace.steps = step;
        trace.final_time = step as f64 * opts.dt;
        let done = opts.stop_ratio.is_some_and(|r| (0..ns).all(|s| e_old[s] < r * e0[s]));
        if step % every == 0 || step == n_steps || done {
            let t = trace.final_time;
            record(&mut trace, &x, t);
        }
        if opts.snapshot_every.is_some_and(|k| k > 0 && step % k == 0) {
            snapshot(&mut trace, &x, step);
        }
        if done {
            break;
        }
    }
    let finals = (0..ns).map(|s| bundle.from_hat(&col_to_vec(x.col(s)))).collect();
    Ok((trace, finals))
}

/// Interface displacement bump centred at the interface vertex with largest `x`, all other
/// fields zero, scaled to unit energy norm.
pub fn pluck_state(bundle: &GeneratorBundle, mesh: &Mesh, width: f64) -> Vec<f64> {
    let dim = bundle.dims.dim;
    let verts = &bundle.layout.interface_vertices;
    let centre = verts.iter().map(|&v| mesh.points[v]).max_by(|a, b| a[0].total_cmp(&b[0])).unwrap_or([0.0; 3]);
    let mut x = vec![0.0; bundle.n];
    for (k, &v) in verts.iter().enumerate() {
        let p = mesh.points[v];
        let r2: f64 = (0..3).map(|i| (p[i] - centre[i]).powi(2)).sum();
        x[bundle.n_v + k * dim] = (-r2 / (width * width)).exp();
    }
    let nrm = bundle.norm(&x);
    x.into_iter().map(|v| v / nrm).collect()
}
