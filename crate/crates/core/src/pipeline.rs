//! Command pipelines: each command computes its module outputs, writes them into the output
//! directory and finishes with a manifest.

use crate::config::Config;
use crate::error::{Error, Result};
use crate::evolution::{evolve, pluck_state, EnergyComponents, EnergyTrace, EvolutionOptions, Scheme};
use crate::fem::StateVector;
use crate::generator::{random_state, GeneratorBundle};
use crate::linalg::{form, Csr};
use crate::mesh::{generate_mesh, Mesh};
use crate::nullspace::{build_nullvector, estimate_infsup, flux_functional, project_nperp, NullspaceData, SaddleProblem};
use crate::pressure::PressureMaps;
use crate::report::{matrix_market, parse_state_csv, pressure_csv, state_csv, ArtifactWriter, Cell, Manifest, Table, Timing};
use crate::spectrum::*;
use faer::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

/// Largest state dimension handled by the dense eigensolver.
pub const DENSE_LIMIT: usize = 6000;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumArgs {
    pub n_eigs: Option<usize>,
    pub shift: Option<(f64, f64)>,
    pub dense: bool,
    pub scan: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Random,
    Pluck,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveArgs {
    pub init: Init,
    pub project_initial: bool,
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Mesh,
    Assemble,
    Nullspace { alpha: f64 },
    Spectrum(SpectrumArgs),
    CheckAssumption { modes: usize, tol: Option<f64> },
    Resolvent { state: Option<PathBuf> },
    Evolve(EvolveArgs),
    Verify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Mesh => "mesh",
            Command::Assemble => "assemble",
            Command::Nullspace { .. } => "nullspace",
            Command::Spectrum(_) => "spectrum",
            Command::CheckAssumption { .. } => "check-assumption",
            Command::Resolvent { .. } => "resolvent",
            Command::Evolve(_) => "evolve",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub manifest: Manifest,
    /// Human-readable lines for the terminal.
    pub summary: Vec<String>,
}

/// Mesh and generator built once per run, with stage timings.
pub struct Context<'a> {
    pub cfg: &'a Config,
    pub mesh: Mesh,
    pub bundle: GeneratorBundle,
    pub timings: Vec<Timing>,
    pub rng: ChaCha8Rng,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a Config) -> Result<Self> {
        let mut timings = Vec::new();
        let t = Instant::now();
        let mesh = load_mesh(cfg)?;
        timings.push(Timing { stage: "mesh".into(), seconds: t.elapsed().as_secs_f64() });
        let t = Instant::now();
        let bundle = GeneratorBundle::new(&mesh, cfg.material.lambda, cfg.material.mu)?;
        timings.push(Timing { stage: "assemble".into(), seconds: t.elapsed().as_secs_f64() });
        Ok(Context { cfg, mesh, bundle, timings, rng: ChaCha8Rng::seed_from_u64(cfg.seed) })
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f(self);
        self.timings.push(Timing { stage: stage.into(), seconds: t.elapsed().as_secs_f64() });
        out
    }

    pub fn random_nperp(&mut self, null: &NullspaceData) -> Vec<f64> {
        random_nperp(&self.bundle, null, &mut self.rng)
    }
}

/// Random state projected onto the kernel complement, unit energy norm.
pub fn random_nperp(bundle: &GeneratorBundle, null: &NullspaceData, rng: &mut impl rand::Rng) -> Vec<f64> {
    let x = project_nperp(bundle, null, &random_state(bundle, rng));
    let n = bundle.norm(&x);
    x.into_iter().map(|v| v / n).collect()
}

pub fn load_mesh(cfg: &Config) -> Result<Mesh> {
    let mesh = match &cfg.geometry.mesh_file {
        Some(p) => Mesh::load(p)?,
        None => generate_mesh(cfg.geometry.kind, cfg.geometry.resolution)?,
    };
    mesh.validate()?;
    Ok(mesh)
}

pub fn run(cfg: &Config, cmd: &Command) -> Result<Outcome> {
    cfg.validate()?;
    let mut out = ArtifactWriter::new(&cfg.output.directory)?;
    out.text("config.toml", &cfg.to_toml())?;
    let (passed, summary, timings) = if let Command::Mesh = cmd {
        let t = Instant::now();
        let mesh = load_mesh(cfg)?;
        let s = mesh.validate()?;
        out.text("mesh.msh", &mesh.to_text())?;
        out.json("mesh.json", &s)?;
        let line = format!("mesh: {} vertices, {} cells, {} interface facets", s.n_vertices, s.n_cells, s.n_gamma_s_facets);
        (true, vec![line], vec![Timing { stage: "mesh".into(), seconds: t.elapsed().as_secs_f64() }])
    } else {
        let mut ctx = Context::new(cfg)?;
        let (passed, summary) = match cmd {
            Command::Mesh => unreachable!(),
            Command::Assemble => run_assemble(&mut ctx, &mut out)?,
            Command::Nullspace { alpha } => run_nullspace(&mut ctx, &mut out, *alpha)?,
            Command::Spectrum(a) => run_spectrum(&mut ctx, &mut out, a)?,
            Command::CheckAssumption { modes, tol } => run_assumption(&mut ctx, &mut out, *modes, *tol)?,
            Command::Resolvent { state } => run_resolvent(&mut ctx, &mut out, state.as_ref())?,
            Command::Evolve(a) => run_evolve(&mut ctx, &mut out, a)?,
            Command::Verify => {
                let suite = ctx.timed("verify", verification_suite)?;
                out.json("suite.json", &suite)?;
                let lines = suite.checks.iter().map(|c| format!("{:<24} {}  {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.note)).collect();
                (suite.passed, lines)
            }
        };
        (passed, summary, ctx.timings)
    };
    let manifest = Manifest {
        command: cmd.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        status: if passed { "pass" } else { "fail" }.into(),
        outputs: out.outputs.clone(),
        non_finite: out.non_finite.clone(),
        timings,
    };
    out.json("manifest.json", &manifest)?;
    Ok(Outcome { passed, manifest, summary })
}

fn dense_to_csr(a: &Mat<f64>) -> Csr {
    let mut t = Vec::new();
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if a[(i, j)] != 0.0 {
                t.push((i, j, a[(i, j)]));
            }
        }
    }
    Csr::from_triplets(a.nrows(), a.ncols(), t)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixInfo {
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    /// `max |A - A^T|` for square matrices.
    pub asymmetry: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssembleSummary {
    pub dim: usize,
    pub state_dim: usize,
    pub n_u: usize,
    pub n_p: usize,
    pub n_h: usize,
    pub n_w: usize,
    pub divergence_free_dim: usize,
    pub constraint_rank: usize,
    pub matrices: BTreeMap<String, MatrixInfo>,
    /// `max |(K + K^T)/2 + diag(A_r, 0)|`: the symmetric part of `K` is exactly the dissipation.
    pub k_dissipation_residual: f64,
}

fn run_assemble(ctx: &mut Context, out: &mut ArtifactWriter) -> Result<(bool, Vec<String>)> {
    let b = &ctx.bundle;
    let f = &b.forms;
    let mh = dense_to_csr(&b.m_h);
    let k = dense_to_csr(&b.k);
    let mut matrices = BTreeMap::new();
    let mut add = |name: &str, m: &Csr, out: &mut ArtifactWriter| -> Result<()> {
        out.text(&format!("{name}.mtx"), &matrix_market(m))?;
        let asym = (m.nrows == m.ncols).then(|| m.asymmetry());
        matrices.insert(name.to_string(), MatrixInfo { rows: m.nrows, cols: m.ncols, nnz: m.nnz(), asymmetry: asym });
        Ok(())
    };
    add("M_H", &mh, out)?;
    add("K", &k, out)?;
    for (name, m) in [("A_f", &f.a_f), ("B", &f.b), ("M_f", &f.m_f), ("S_gamma", &f.s_gamma), ("M_gamma", &f.m_gamma), ("A_s", &f.a_s), ("M_s", &f.m_s)] {
        add(name, m, out)?;
    }
    let n = b.n;
    let mut resid: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let sym = 0.5 * (b.k[(i, j)] + b.k[(j, i)]);
            let d = if i < b.n_v && j < b.n_v { b.a_r[(i, j)] } else { 0.0 };
            resid = resid.max((sym + d).abs());
        }
    }
    let s = AssembleSummary {
        dim: b.dims.dim,
        state_dim: n,
        n_u: b.dims.n_u,
        n_p: b.dims.n_p,
        n_h: b.dims.n_h,
        n_w: b.dims.n_w,
        divergence_free_dim: b.n_zeta,
        constraint_rank: b.leray.rank,
        matrices,
        k_dissipation_residual: resid,
    };
    out.json("assemble.json", &s)?;
    let ok = s.matrices["M_H"].asymmetry.unwrap_or(0.0) <= 1e-12 * b.m_h.norm_max() && resid <= 1e-12 * b.k.norm_max();
    Ok((ok, vec![format!("assemble: state dimension {n}, M_H nnz {}, K nnz {}", mh.nnz(), k.nnz())]))
}

fn spectrum_auto(b: &GeneratorBundle, n_eigs: Option<usize>) -> Result<SpectrumResult> {
    if b.n <= DENSE_LIMIT {
        compute_spectrum(b, n_eigs, SpectrumMode::Dense)
    } else {
        compute_spectrum(b, Some(n_eigs.unwrap_or(12)), SpectrumMode::ShiftInvert { shift_re: 0.0, shift_im: 0.0 })
    }
}

/// `|<v, phi>_H| / (||v|| ||phi||)` for a complex eigenvector `v`.
fn cosine(b: &GeneratorBundle, v: &[c64], phi: &[f64]) -> f64 {
    let pc: Vec<c64> = phi.iter().map(|x| c64::new(*x, 0.0)).collect();
    b.inner(v, &pc).norm() / (b.norm(v) * b.norm(phi))
}

fn column(m: &Mat<c64>, j: usize) -> Vec<c64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NullspaceReport {
    pub alpha: f64,
    pub h_norm: f64,
    pub generator_residual: f64,
    /// Smallest modulus among the nonzero eigenvalues.
    pub eigen_gap: f64,
    pub zero_count: usize,
    /// Cosine between the near-zero eigenvector and the constructed kernel vector.
    pub cosine: f64,
    /// Largest entry of the `u`, `h1`, `w1` blocks relative to the largest entry of the state.
    pub velocity_blocks: f64,
}

fn nullspace_report(b: &GeneratorBundle, null: &NullspaceData, sp: &SpectrumResult) -> NullspaceReport {
    let ax = b.apply(&null.x);
    let zero = sp.eigenvalues.iter().position(|z| z.norm() < sp.zero_tol);
    let cos = zero.map(|j| cosine(b, &column(&sp.vectors, j), &null.x)).unwrap_or(0.0);
    let s = b.expand(&null.x);
    let vel = [&s.u, &s.h1, &s.w1].iter().flat_map(|v| v.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    NullspaceReport {
        alpha: null.alpha,
        h_norm: null.h_norm,
        generator_residual: b.norm(&ax) / null.h_norm,
        eigen_gap: sp.nonzero().map(|z| z.norm()).fold(f64::INFINITY, f64::min),
        zero_count: sp.zero_count(),
        cosine: cos,
        velocity_blocks: vel / s.max_abs().max(f64::MIN_POSITIVE),
    }
}

fn run_nullspace(ctx: &mut Context, out: &mut ArtifactWriter, alpha: f64) -> Result<(bool, Vec<String>)> {
    let null = build_nullvector(&ctx.bundle, alpha)?;
    let sp = ctx.timed("spectrum", |c| spectrum_auto(&c.bundle, None))?;
    let r = nullspace_report(&ctx.bundle, &null, &sp);
    out.text("phi_n.csv", &state_csv(&ctx.bundle.expand(&null.x)))?;
    out.json("nullspace.json", &r)?;
    let ok = r.generator_residual < 1e-8 && r.zero_count == 1;
    Ok((ok, vec![format!("nullspace: ||A phi_N||/||phi_N|| = {:.3e}, zero eigenvalues {}, eigen gap {:.4e}", r.generator_residual, r.zero_count, r.eigen_gap)]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanSummary {
    pub points: usize,
    pub max_norm: f64,
    pub singular: Vec<f64>,
    /// Largest `|norm * dist - 1|`: departure from the normal-operator value `1/dist`.
    pub max_normality_deviation: f64,
    pub beta_at_max_deviation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumOutput {
    pub report: SpectrumReport,
    pub axis: AxisVerdict,
    pub verdict: SpectrumVerdict,
    pub chain: Vec<ChainMagnitudes>,
    pub scan: Option<ScanSummary>,
}

pub fn scan_summary(scan: &ScanResult, eigs: &[c64]) -> ScanSummary {
    let mut dev = (0.0f64, f64::NAN);
    for p in &scan.points {
        if let Some(nv) = p.norm {
            let d = (nv / inverse_distance(eigs, p.beta) - 1.0).abs();
            if d > dev.0 {
                dev = (d, p.beta);
            }
        }
    }
    ScanSummary {
        points: scan.points.len(),
        max_norm: scan.points.iter().filter_map(|p| p.norm).fold(0.0, f64::max),
        singular: scan.singular.clone(),
        max_normality_deviation: dev.0,
        beta_at_max_deviation: dev.1,
    }
}

fn run_spectrum(ctx: &mut Context, out: &mut ArtifactWriter, a: &SpectrumArgs) -> Result<(bool, Vec<String>)> {
    let b = &ctx.bundle;
    let mode = match (a.dense, a.shift) {
        (false, Some((re, im))) => SpectrumMode::ShiftInvert { shift_re: re, shift_im: im },
        (true, _) => SpectrumMode::Dense,
        (false, None) if b.n <= DENSE_LIMIT => SpectrumMode::Dense,
        _ => SpectrumMode::ShiftInvert { shift_re: 0.0, shift_im: 0.0 },
    };
    if mode == SpectrumMode::Dense && b.n > DENSE_LIMIT {
        return Err(Error::Config(vec![format!("dense mode needs state dimension <= {DENSE_LIMIT}, got {}", b.n)]));
    }
    let n_eigs = match mode {
        SpectrumMode::Dense => a.n_eigs,
        _ => Some(a.n_eigs.unwrap_or(12)),
    };
    let sp = ctx.timed("eigensolve", |c| compute_spectrum(&c.bundle, n_eigs, mode))?;
    let b = &ctx.bundle;
    let gap_tol = ctx.cfg.solver.gap_tol;
    let report = sp.report(gap_tol);
    let mut t = Table::new(&["re", "im", "residual"]);
    for (z, r) in sp.eigenvalues.iter().zip(&sp.residuals) {
        t.push(vec![z.re.into(), z.im.into(), (*r).into()]);
    }
    out.text("spectrum.csv", &t.to_csv())?;
    let axis = verify_no_imaginary_point_spectrum(&report, gap_tol);
    let chain = axis_chain(b, &sp, gap_tol);
    let mut lines = vec![format!(
        "spectrum: {} eigenvalues, {} at zero, gap {:.4e}, max residual {:.2e}",
        report.n, report.zero_count, report.gap, report.max_residual
    )];
    let scan = match &a.scan {
        Some(grid) => {
            let null = build_nullvector(b, 1.0)?;
            let ap = restrict_to_nperp(b, &null);
            let s = ctx.timed("scan", |_| Ok(scan_imaginary_axis(&ap, grid)))?;
            let eigs: Vec<c64> = match mode {
                SpectrumMode::Dense => sp.nonzero().cloned().collect(),
                _ => ap.eigenvalues().map_err(|e| Error::Factorization(format!("{e:?}")))?,
            };
            let mut t = Table::new(&["beta", "norm", "inverse_distance"]);
            for p in &s.points {
                t.push(vec![p.beta.into(), p.norm.unwrap_or(f64::INFINITY).into(), inverse_distance(&eigs, p.beta).into()]);
            }
            out.text("scan.csv", &t.to_csv())?;
            let sum = scan_summary(&s, &eigs);
            lines.push(format!(
                "scan: {} points, max norm {:.4e}, {} singular, largest departure from 1/dist {:.3} at beta {:.3}",
                sum.points,
                sum.max_norm,
                sum.singular.len(),
                sum.max_normality_deviation,
                sum.beta_at_max_deviation
            ));
            Some(sum)
        }
        None => None,
    };
    let verdict = classify_spectrum_verdict(&report, None);
    let ok = axis.pass && report.max_residual <= 1e-8 && scan.as_ref().map_or(true, |s| s.singular.is_empty());
    lines.push(format!("verdict: {verdict:?}, axis check {}", if axis.pass { "pass" } else { "fail" }));
    out.json("spectrum.json", &SpectrumOutput { report, axis, verdict, chain, scan })?;
    Ok((ok, lines))
}

fn run_assumption(ctx: &mut Context, out: &mut ArtifactWriter, modes: usize, tol: Option<f64>) -> Result<(bool, Vec<String>)> {
    if modes == 0 {
        return Err(Error::Config(vec!["--modes must be at least 1".into()]));
    }
    let tol = tol.unwrap_or(ctx.cfg.solver.assumption_tol);
    let r = ctx.timed("assumption", |c| check_assumption(&c.bundle, modes, tol))?;
    let mut t = Table::new(&["k", "beta2", "c", "delta", "cluster"]);
    for (k, m) in r.modes.iter().enumerate() {
        t.push(vec![k.into(), m.beta2.into(), m.c.into(), m.delta.into(), m.cluster.into()]);
    }
    out.text("assumption.csv", &t.to_csv())?;
    out.json("assumption.json", &r)?;
    Ok((r.verdict != AssumptionVerdict::Violated, vec![format!("assumption: {} modes, min delta {:.4e}, verdict {:?}", r.modes.len(), r.min_delta, r.verdict)]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolventReport {
    pub c0_star: f64,
    pub bound_constant: f64,
    pub residual: f64,
    pub ratio: f64,
    pub mean_multiplier: f64,
    pub infsup: f64,
    pub infsup_witness: f64,
}

fn read_state(ctx: &Context, path: &PathBuf) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let s = parse_state_csv(&text, &ctx.bundle.dims).map_err(|e| match e {
        Error::Incompatible(m) => Error::Incompatible(format!("{}: {m}", path.display())),
        other => other,
    })?;
    ctx.bundle.restrict(&s, 1e-8)
}

fn total_pressure(ctx: &Context, q: &[f64], c0: f64) -> String {
    let pts: Vec<[f64; 3]> = ctx.bundle.layout.pressure_vertices.iter().map(|&v| ctx.mesh.points[v]).collect();
    let p: Vec<f64> = q.iter().map(|v| v + c0).collect();
    pressure_csv(ctx.bundle.dims.dim, &pts, &p)
}

fn run_resolvent(ctx: &mut Context, out: &mut ArtifactWriter, state: Option<&PathBuf>) -> Result<(bool, Vec<String>)> {
    let null = build_nullvector(&ctx.bundle, 1.0)?;
    let xs = match state {
        Some(p) => read_state(ctx, p)?,
        None => ctx.random_nperp(&null),
    };
    let saddle = ctx.timed("saddle", |c| SaddleProblem::new(&c.bundle, &c.mesh))?;
    let tol = ctx.cfg.solver.null_tol;
    let sol = saddle.solve(&ctx.bundle, &null, &xs, tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed.wrapping_add(1));
    let c = ctx.timed("bound_constant", |c| saddle.bound_constant(&c.bundle, &null, 200, &mut rng))?;
    let inf = estimate_infsup(&ctx.bundle, &ctx.mesh)?;
    out.text("resolvent_input.csv", &state_csv(&ctx.bundle.expand(&xs)))?;
    out.text("resolvent_solution.csv", &state_csv(&ctx.bundle.expand(&sol.x)))?;
    out.text("resolvent_pressure.csv", &total_pressure(ctx, &sol.pressure, sol.c0))?;
    let r = ResolventReport {
        c0_star: sol.c0,
        bound_constant: c,
        residual: sol.residual,
        ratio: sol.ratio,
        mean_multiplier: sol.mean_multiplier,
        infsup: inf.beta,
        infsup_witness: inf.witness,
    };
    out.json("resolvent.json", &r)?;
    let ok = r.residual <= ctx.cfg.solver.linear_tol && r.bound_constant.is_finite() && r.infsup > 1e-12;
    Ok((ok, vec![format!("resolvent: residual {:.3e}, c0* {:.6e}, bound constant {:.4}, inf-sup {:.4}", r.residual, r.c0_star, r.bound_constant, r.infsup)]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolveReport {
    pub scheme: Scheme,
    pub dt: f64,
    pub final_time: f64,
    pub steps: usize,
    pub decay_ratios: Vec<f64>,
    pub horizons: Vec<Option<f64>>,
    pub identity_defect: f64,
    pub max_increase: f64,
    pub kernel_drift: Vec<f64>,
    /// Component sums against `E`, largest relative mismatch over the trace.
    pub component_defect: f64,
}

pub fn energy_table(trace: &EnergyTrace) -> Table {
    let mut header = vec!["sample", "t", "E", "D", "l_defect"];
    header.extend(EnergyComponents::NAMES);
    let mut t = Table::new(&header);
    for (s, tr) in trace.trajectories.iter().enumerate() {
        for k in 0..trace.times.len() {
            let mut row: Vec<Cell> = vec![s.into(), trace.times[k].into(), tr.energy[k].into(), tr.dissipation[k].into(), tr.l_defect[k].into()];
            row.extend(tr.components[k].values().iter().map(|v| Cell::Num(*v)));
            t.push(row);
        }
    }
    t
}

fn component_defect(trace: &EnergyTrace) -> f64 {
    let mut worst: f64 = 0.0;
    for tr in &trace.trajectories {
        for (e, c) in tr.energy.iter().zip(&tr.components) {
            worst = worst.max((c.total() - e).abs() / e.abs().max(f64::MIN_POSITIVE));
        }
    }
    worst
}

fn run_evolve(ctx: &mut Context, out: &mut ArtifactWriter, a: &EvolveArgs) -> Result<(bool, Vec<String>)> {
    let null = build_nullvector(&ctx.bundle, 1.0)?;
    let mut x0: Vec<Vec<f64>> = match &a.init {
        Init::Random => (0..ctx.cfg.evolution.samples).map(|_| random_state(&ctx.bundle, &mut ctx.rng)).collect(),
        Init::Pluck => vec![pluck_state(&ctx.bundle, &ctx.mesh, 0.5)],
        Init::File(p) => vec![read_state(ctx, p)?],
    };
    if a.project_initial {
        x0 = x0.iter().map(|x| project_nperp(&ctx.bundle, &null, x)).collect();
    }
    let e = &ctx.cfg.evolution;
    let opts = EvolutionOptions {
        dt: e.dt,
        t_final: e.t_final,
        scheme: e.scheme,
        record_every: e.record_every,
        stop_ratio: Some(1e-3),
        project_each_step: false,
        snapshot_every: a.snapshot_every,
    };
    let (trace, finals) = ctx.timed("evolve", |c| evolve(&c.bundle, Some(&null), &x0, &opts))?;
    out.text("energy.csv", &energy_table(&trace).to_csv())?;
    for snap in &trace.snapshots {
        for (s, x) in snap.states.iter().enumerate() {
            out.text(&format!("state_{s}_{:06}.csv", snap.step), &state_csv(&ctx.bundle.expand(x)))?;
        }
    }
    let maps = ctx.timed("pressure", |c| PressureMaps::new(&c.bundle, &c.mesh, c.cfg.pressure.bc))?;
    for (s, x) in finals.iter().enumerate() {
        let st = ctx.bundle.expand(x);
        out.text(&format!("final_state_{s}.csv"), &state_csv(&st))?;
        let p = maps.total(&ctx.bundle, &ctx.mesh, &st)?;
        let pts: Vec<[f64; 3]> = ctx.bundle.layout.pressure_vertices.iter().map(|&v| ctx.mesh.points[v]).collect();
        out.text(&format!("final_pressure_{s}.csv"), &pressure_csv(ctx.bundle.dims.dim, &pts, &p))?;
    }
    let r = EvolveReport {
        scheme: opts.scheme,
        dt: opts.dt,
        final_time: trace.final_time,
        steps: trace.steps,
        decay_ratios: trace.trajectories.iter().map(|t| t.decay_ratio()).collect(),
        horizons: trace.trajectories.iter().map(|t| t.horizon).collect(),
        identity_defect: trace.identity_defect,
        max_increase: trace.max_increase,
        kernel_drift: trace.trajectories.iter().map(|t| t.kernel_drift).collect(),
        component_defect: component_defect(&trace),
    };
    out.json("evolve.json", &r)?;
    let ok = r.max_increase <= 1e-12 && (opts.scheme != Scheme::Midpoint || r.identity_defect <= 1e-10) && r.kernel_drift.iter().all(|d| *d <= 1e-9);
    let lines = vec![
        format!("evolve: {} steps to t = {}, identity defect {:.2e}, max increase {:.2e}", r.steps, r.final_time, r.identity_defect, r.max_increase),
        format!("decay ratios E(T)/E(0): {}", r.decay_ratios.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")),
    ];
    Ok((ok, lines))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Module invariant this check exercises.
    pub invariant: String,
    pub passed: bool,
    pub measured: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub note: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationSuite {
    pub seed: u64,
    pub resolution: usize,
    pub state_dim: usize,
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn check(name: &str, invariant: &str, passed: bool, measured: &[(&str, f64)], tolerances: &[(&str, f64)], note: String) -> Check {
    let map = |v: &[(&str, f64)]| v.iter().map(|(k, x)| (k.to_string(), *x)).collect();
    Check { name: name.into(), invariant: invariant.into(), passed, measured: map(measured), tolerances: map(tolerances), note }
}

/// The eight named checks on the configured mesh.
pub fn verification_suite(ctx: &mut Context) -> Result<VerificationSuite> {
    let cfg = ctx.cfg;
    let null = build_nullvector(&ctx.bundle, 1.0)?;
    let sp = compute_spectrum(&ctx.bundle, None, SpectrumMode::Dense)?;
    let b = &ctx.bundle;
    let rng = &mut ctx.rng;
    let mut checks = Vec::new();

    let nr = nullspace_report(b, &null, &sp);
    checks.push(check(
        "nullspace-dim",
        "nullspace_resolvent: dim Null(A_h) = 1, spanned by phi_N = [0, h0, 0, w0, 0]",
        nr.zero_count == 1 && nr.cosine >= 1.0 - 1e-6 && nr.velocity_blocks <= 1e-10,
        &[("zero_count", nr.zero_count as f64), ("cosine", nr.cosine), ("velocity_blocks", nr.velocity_blocks), ("generator_residual", nr.generator_residual)],
        &[("cosine", 1.0 - 1e-6), ("velocity_blocks", 1e-10)],
        format!("{} zero eigenvalue(s), cosine {:.12}", nr.zero_count, nr.cosine),
    ));

    let mut ratios = Vec::new();
    let mut proj: f64 = 0.0;
    for _ in 0..100 {
        let x = random_state(b, &mut *rng);
        ratios.push(b.inner(&x, &null.x) / flux_functional(b, &x));
        let p = project_nperp(b, &null, &x);
        proj = proj.max(flux_functional(b, &p).abs() / b.norm(&p));
    }
    let spread = ratios.iter().map(|r| (r / null.alpha - 1.0).abs()).fold(0.0, f64::max);
    checks.push(check(
        "nperp-characterization",
        "nullspace_resolvent: <x, phi_N>_H = alpha * integral of nu . h0",
        spread <= 1e-8 && proj <= 1e-10,
        &[("ratio_spread", spread), ("projected_flux", proj)],
        &[("ratio_spread", 1e-8), ("projected_flux", 1e-10)],
        format!("proportionality spread {spread:.2e} over 100 states"),
    ));

    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = random_state(b, &mut *rng);
        let ax = b.apply(&x);
        let u = b.expand(&x).u;
        worst = worst.max((b.inner(&ax, &x) + form(&b.forms.a_f, &u, &u)).abs() / b.inner(&x, &x));
    }
    checks.push(check(
        "dissipativity",
        "generator: Re <A_h x, x>_H = -u^T A_f u",
        worst <= 1e-10,
        &[("identity_defect", worst)],
        &[("identity_defect", 1e-10)],
        format!("worst relative defect {worst:.2e} over 100 states"),
    ));

    let report = sp.report(cfg.solver.gap_tol);
    let axis = verify_no_imaginary_point_spectrum(&report, cfg.solver.gap_tol);
    let ap = restrict_to_nperp(b, &null);
    let mut grid = vec![0.0];
    grid.extend(uniform_grid(0.1, 50.0, 200));
    let scan = scan_imaginary_axis(&ap, &grid);
    let eigs: Vec<c64> = sp.nonzero().cloned().collect();
    let ss = scan_summary(&scan, &eigs);
    let saddle = SaddleProblem::new(b, &ctx.mesh)?;
    let mut power_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let bound = saddle.bound_constant(b, &null, 200, &mut power_rng)?;
    let beta0 = scan.points[0].norm.unwrap_or(f64::INFINITY);
    let beta0_match = (beta0 / bound - 1.0).abs();
    checks.push(check(
        "spectrum-axis",
        "spectrum: sigma(A_h) meets the imaginary axis only at 0; resolvent finite along i*beta on the kernel complement",
        axis.pass && report.gap > 0.0 && report.max_residual <= 1e-8 && ss.singular.is_empty() && beta0_match <= 0.1,
        &[
            ("gap", report.gap),
            ("max_residual", report.max_residual),
            ("singular_points", ss.singular.len() as f64),
            ("max_resolvent_norm", ss.max_norm),
            ("normality_deviation", ss.max_normality_deviation),
            ("beta0_vs_bound_constant", beta0_match),
        ],
        &[("max_residual", 1e-8), ("beta0_vs_bound_constant", 0.1)],
        format!("gap {:.4e}, departure from 1/dist up to {:.3}", report.gap, ss.max_normality_deviation),
    ));

    let ar = check_assumption(b, 10, cfg.solver.assumption_tol)?;
    checks.push(check(
        "assumption",
        "spectrum: no clamped Lame eigenfunction has traction parallel to a constant times nu",
        ar.verdict != AssumptionVerdict::Violated,
        &[("min_delta", ar.min_delta)],
        &[("assumption_tol", ar.tol)],
        format!("min delta {:.4e} ({:?})", ar.min_delta, ar.verdict),
    ));

    let mut rt: f64 = 0.0;
    let mut res: f64 = 0.0;
    for _ in 0..20 {
        let psi = random_nperp(b, &null, &mut *rng);
        let sol = saddle.solve(b, &null, &b.apply(&psi), 1e-8)?;
        let d: Vec<f64> = sol.x.iter().zip(&psi).map(|(p, q)| p - q).collect();
        rt = rt.max(b.norm(&d) / b.norm(&psi));
        res = res.max(sol.residual);
    }
    let inf = estimate_infsup(b, &ctx.mesh)?;
    checks.push(check(
        "resolvent-roundtrip",
        "nullspace_resolvent: A_h is boundedly invertible on the kernel complement",
        rt <= 1e-7 && res <= cfg.solver.linear_tol && bound.is_finite() && inf.beta > 1e-12,
        &[("roundtrip", rt), ("residual", res), ("bound_constant", bound), ("infsup", inf.beta)],
        &[("roundtrip", 1e-7), ("residual", cfg.solver.linear_tol)],
        format!("round trip {rt:.2e}, bound constant {bound:.4}, inf-sup {:.4}", inf.beta),
    ));

    let x0: Vec<Vec<f64>> = (0..cfg.evolution.samples).map(|_| random_nperp(b, &null, &mut *rng)).collect();
    let opts = EvolutionOptions {
        dt: cfg.evolution.dt,
        t_final: cfg.evolution.t_final,
        scheme: Scheme::Midpoint,
        record_every: cfg.evolution.record_every,
        stop_ratio: Some(1e-3),
        project_each_step: false,
        snapshot_every: None,
    };
    let (trace, _) = evolve(b, Some(&null), &x0, &opts)?;
    let worst_ratio = trace.trajectories.iter().map(|t| t.decay_ratio()).fold(0.0, f64::max);
    let drift = trace.trajectories.iter().map(|t| t.kernel_drift).fold(0.0, f64::max);
    checks.push(check(
        "decay",
        "evolution: E(t) -> 0 for data in the kernel complement, monotone, with the kernel component conserved",
        worst_ratio < 1e-3 && trace.max_increase <= 1e-12 && trace.identity_defect <= 1e-10 && drift <= 1e-9,
        &[("worst_decay_ratio", worst_ratio), ("max_increase", trace.max_increase), ("identity_defect", trace.identity_defect), ("kernel_drift", drift), ("final_time", trace.final_time)],
        &[("decay_ratio", 1e-3), ("max_increase", 1e-12), ("identity_defect", 1e-10), ("kernel_drift", 1e-9)],
        format!("worst E(T)/E(0) = {worst_ratio:.3e} at T = {}", trace.final_time),
    ));

    let adj = b.apply_adjoint(&null.x);
    let adj_res = b.norm(&adj) / null.h_norm;
    let at = b.a_hat.transpose().to_owned();
    let adj_eigs: Vec<c64> = at.eigenvalues().map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let conj: Vec<c64> = sp.eigenvalues.iter().map(|z| z.conj()).collect();
    let mismatch = match_spectra(&adj_eigs, &conj);
    checks.push(check(
        "adjoint-null",
        "spectrum: A_h^* phi_N = 0 and sigma(A_h^*) is the conjugate of sigma(A_h)",
        adj_res <= 1e-8 && mismatch <= 1e-8,
        &[("adjoint_residual", adj_res), ("spectrum_mismatch", mismatch)],
        &[("adjoint_residual", 1e-8), ("spectrum_mismatch", 1e-8)],
        format!("||A* phi_N|| / ||phi_N|| = {adj_res:.2e}, spectra differ by {mismatch:.2e}"),
    ));

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerificationSuite { seed: cfg.seed, resolution: cfg.geometry.resolution, state_dim: b.n, passed, checks })
}

/// Reads a state file and reduces it to the generator's coordinates.
pub fn load_state(bundle: &GeneratorBundle, path: &std::path::Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let s: StateVector = parse_state_csv(&text, &bundle.dims)?;
    bundle.restrict(&s, 1e-8)
}
