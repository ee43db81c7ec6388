//! Kernel of the generator, the flux functional and the inverse on the orthogonal complement.

use crate::error::{Error, Result};
use crate::generator::GeneratorBundle;
use crate::linalg::{dot, Csr, SparseChol, SparseLu};
use crate::mesh::Mesh;
use serde::{Deserialize, Serialize};

/// Kernel vector `phi_N = [0, 0, d]` with `K_d d = alpha N`.
#[derive(Debug, Clone)]
pub struct NullspaceData {
    pub x: Vec<f64>,
    pub alpha: f64,
    pub h_norm: f64,
}

impl NullspaceData {
    /// Copy scaled to unit energy norm.
    pub fn normalized(&self) -> NullspaceData {
        let s = 1.0 / self.h_norm;
        NullspaceData { x: self.x.iter().map(|v| v * s).collect(), alpha: self.alpha * s, h_norm: 1.0 }
    }
}

pub fn build_nullvector(bundle: &GeneratorBundle, alpha: f64) -> Result<NullspaceData> {
    let chol = SparseChol::new(&bundle.cf.k_d)?;
    let rhs: Vec<f64> = bundle.cf.n_d.iter().map(|v| alpha * v).collect();
    let d = chol.solve(&rhs);
    let mut x = vec![0.0; bundle.n_v];
    x.extend_from_slice(&d);
    let h_norm = bundle.norm(&x);
    Ok(NullspaceData { x, alpha, h_norm })
}

/// `l(Phi) = integral of nu . h0` over GAMMA_S.
pub fn flux_functional(bundle: &GeneratorBundle, x: &[f64]) -> f64 {
    dot(&bundle.cf.n_d, &x[bundle.n_v..])
}

/// Energy-orthogonal projection onto the complement of the kernel.
pub fn project_nperp(bundle: &GeneratorBundle, null: &NullspaceData, x: &[f64]) -> Vec<f64> {
    let c = bundle.inner(x, &null.x) / bundle.inner(&null.x, &null.x);
    x.iter().zip(&null.x).map(|(a, b)| a - c * b).collect()
}

/// `|<x, phi_N>_H| / (||x||_H ||phi_N||_H)`.
pub fn nperp_defect(bundle: &GeneratorBundle, null: &NullspaceData, x: &[f64]) -> f64 {
    bundle.inner(x, &null.x).abs() / (bundle.norm(x) * null.h_norm).max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolventSolution {
    pub x: Vec<f64>,
    /// Mean-free part of the pressure on the P1 pressure space.
    pub pressure: Vec<f64>,
    /// Constant pressure mode, equal to the multiplier of the flux constraint.
    pub c0: f64,
    /// Multiplier of the pressure mean constraint; vanishes for compatible data.
    pub mean_multiplier: f64,
    /// `||A x - x*||_H / ||x*||_H`.
    pub residual: f64,
    /// `||x||_H / ||x*||_H`.
    pub ratio: f64,
}

/// Sparse saddle-point machinery for `A Phi = Phi*` on the complement of the kernel.
pub struct SaddleProblem {
    n_int: usize,
    n_p: usize,
    stokes: SparseLu,
    structure: SparseLu,
    /// `int psi_j` for the P1 pressure basis.
    pub pressure_mass: Vec<f64>,
}

impl SaddleProblem {
    pub fn new(bundle: &GeneratorBundle, mesh: &Mesh) -> Result<Self> {
        let cf = &bundle.cf;
        let dims = bundle.dims;
        let n_int = dims.n_u_int;
        let n_p = dims.n_p;
        let pressure_mass = pressure_mass_vector(bundle, mesh);
        let int: Vec<usize> = (0..n_int).collect();
        let prow: Vec<usize> = (0..n_p).collect();
        let a_ii = cf.a_y.submatrix(&int, &int);
        let b_i = cf.b_y.submatrix(&prow, &int);
        let n = n_int + n_p + 1;
        let mut t = a_ii.triplets();
        for (i, j, v) in b_i.triplets() {
            t.push((j, n_int + i, -v));
            t.push((n_int + i, j, -v));
        }
        for (j, m) in pressure_mass.iter().enumerate() {
            t.push((n_int + j, n - 1, *m));
            t.push((n - 1, n_int + j, *m));
        }
        let stokes = SparseLu::new(&Csr::from_triplets(n, n, t))?;
        let nw = dims.n_w;
        let mut t = cf.k_d.triplets();
        for (i, v) in cf.n_d.iter().enumerate() {
            if *v != 0.0 {
                t.push((i, nw, -v));
                t.push((nw, i, -v));
            }
        }
        let structure = SparseLu::new(&Csr::from_triplets(nw + 1, nw + 1, t))?;
        Ok(SaddleProblem { n_int, n_p, stokes, structure, pressure_mass })
    }

    /// Solves `A_h x = x*` for `x*` energy-orthogonal to the kernel.
    pub fn solve(&self, bundle: &GeneratorBundle, null: &NullspaceData, xs: &[f64], tol: f64) -> Result<ResolventSolution> {
        let defect = nperp_defect(bundle, null, xs);
        if defect > tol {
            return Err(Error::Incompatible(format!("right-hand side is not orthogonal to the kernel (relative defect {defect:.3e})")));
        }
        let cf = &bundle.cf;
        let dims = bundle.dims;
        let (ys, ds) = bundle.to_constrained(xs);
        // Velocity: trace and interior structure velocity are fixed by d' = E y = d*.
        let mut y = vec![0.0; dims.n_y];
        y[dims.n_u_int..].copy_from_slice(&ds);
        let my = cf.m_y.matvec(&ys);
        let ay_fixed = cf.a_y.matvec(&y);
        let by_fixed = cf.b_y.matvec(&y);
        let n = self.n_int + self.n_p + 1;
        let mut rhs = vec![0.0; n];
        for i in 0..self.n_int {
            rhs[i] = -my[i] - ay_fixed[i];
        }
        for j in 0..self.n_p {
            rhs[self.n_int + j] = by_fixed[j];
        }
        let sol = self.stokes.solve(&rhs);
        y[..self.n_int].copy_from_slice(&sol[..self.n_int]);
        let q = sol[self.n_int..self.n_int + self.n_p].to_vec();
        let mean_multiplier = sol[n - 1];

        // Structure rows: K_d d - c0 N = -(M_y y*)_s - (A_y y)_s + (B_y^T q)_s.
        let ay = cf.a_y.matvec(&y);
        let btq = cf.b_y.transpose().matvec(&q);
        let nw = dims.n_w;
        let s0 = dims.n_u_int;
        let mut f = vec![0.0; nw + 1];
        for i in 0..nw {
            f[i] = -my[s0 + i] - ay[s0 + i] + btq[s0 + i];
        }
        let sd = self.structure.solve(&f);
        let d = sd[..nw].to_vec();
        let c0 = sd[nw];
        let x = bundle.from_constrained(&y, &d, 1e-6)?;
        let ax = bundle.apply(&x);
        let diff: Vec<f64> = ax.iter().zip(xs).map(|(a, b)| a - b).collect();
        let xs_norm = bundle.norm(xs);
        Ok(ResolventSolution { residual: bundle.norm(&diff) / xs_norm, ratio: bundle.norm(&x) / xs_norm, x, pressure: q, c0, mean_multiplier })
    }

    /// Largest `||A^{-1} x||_H / ||x||_H` over the kernel complement: Lanczos in the energy
    /// inner product on `(A^{-1})^* A^{-1}`, with `(A^{-1})^* = J A^{-1} J`. `iters` caps the
    /// total number of operator applications.
    pub fn bound_constant(&self, bundle: &GeneratorBundle, null: &NullspaceData, iters: usize, rng: &mut impl rand::Rng) -> Result<f64> {
        let op = |x: &[f64]| -> Result<Vec<f64>> {
            let y = project_nperp(bundle, null, &self.solve(bundle, null, x, 1e-6)?.x);
            let z = self.solve(bundle, null, &bundle.flip(&y), 1e-6)?.x;
            Ok(project_nperp(bundle, null, &bundle.flip(&z)))
        };
        let m = iters.clamp(2, 40);
        let mut start = project_nperp(bundle, null, &crate::generator::random_state(bundle, rng));
        let mut theta = 0.0;
        let mut used = 0;
        while used < iters.max(2) {
            let nrm = bundle.norm(&start);
            let mut q: Vec<Vec<f64>> = vec![start.iter().map(|v| v / nrm).collect()];
            let (mut alpha, mut off) = (Vec::new(), Vec::new());
            for j in 0..m {
                let mut w = op(&q[j])?;
                used += 1;
                alpha.push(bundle.inner(&q[j], &w));
                for _pass in 0..2 {
                    for qi in &q {
                        let c = bundle.inner(&w, qi);
                        w.iter_mut().zip(qi).for_each(|(a, b)| *a -= c * b);
                    }
                }
                let b = bundle.norm(&w);
                off.push(b);
                if b <= 1e-14 * alpha[j].abs() || j + 1 == m || used >= iters {
                    break;
                }
                q.push(w.iter().map(|v| v / b).collect());
            }
            let k = alpha.len();
            let t = faer::Mat::from_fn(k, k, |i, j| if i == j { alpha[i] } else if i + 1 == j || j + 1 == i { off[i.min(j)] } else { 0.0 });
            let evd = t.self_adjoint_eigen(faer::Side::Lower).map_err(|e| Error::Factorization(format!("Lanczos: {e:?}")))?;
            theta = evd.S().column_vector()[k - 1];
            let u = evd.U();
            if (off[k - 1] * u[(k - 1, k - 1)]).abs() <= 1e-12 * theta || k < m {
                break;
            }
            start = vec![0.0; bundle.n];
            for (i, qi) in q.iter().enumerate().take(k) {
                start.iter_mut().zip(qi).for_each(|(a, b)| *a += u[(i, k - 1)] * b);
            }
        }
        Ok(theta.max(0.0).sqrt())
    }
}

pub fn pressure_mass_vector(bundle: &GeneratorBundle, mesh: &Mesh) -> Vec<f64> {
    let layout = &bundle.layout;
    let mut m = vec![0.0; bundle.dims.n_p];
    for &c in &layout.fluid_cells {
        let vol = mesh.cell_geom(c).measure;
        let nv = mesh.cells[c].len();
        for v in &mesh.cells[c] {
            m[layout.pressure_index[v]] += vol / nv as f64;
        }
    }
    m
}

pub fn solve_resolvent_at_zero(bundle: &GeneratorBundle, mesh: &Mesh, xs: &[f64]) -> Result<ResolventSolution> {
    let null = build_nullvector(bundle, 1.0)?;
    SaddleProblem::new(bundle, mesh)?.solve(bundle, &null, xs, 1e-8)
}

/// Discrete harmonic extension of GAMMA_S data into the structure (`div sigma(f) = 0`).
#[derive(Debug, Clone)]
pub struct DirichletMap {
    /// Extension matrix columns for each interface dof, stored as full structure vectors.
    pub columns: Vec<Vec<f64>>,
    /// `sup ||f||_{H^1} / ||g||_{L^2(GAMMA_S)}`.
    pub bound: f64,
}

pub fn dirichlet_map(bundle: &GeneratorBundle, mesh: &Mesh) -> Result<DirichletMap> {
    let dims = bundle.dims;
    let (a_strain, m_s) = crate::fem::assemble_solid(mesh, &bundle.layout, bundle.forms.lambda, bundle.forms.mu);
    let nh = dims.n_h;
    let int: Vec<usize> = (nh..dims.n_w).collect();
    let gam: Vec<usize> = (0..nh).collect();
    let a_ii = a_strain.submatrix(&int, &int);
    let a_ig = a_strain.submatrix(&int, &gam);
    let chol = SparseChol::new(&a_ii)?;
    let mut columns = Vec::with_capacity(nh);
    for k in 0..nh {
        let mut e = vec![0.0; nh];
        e[k] = 1.0;
        let rhs: Vec<f64> = a_ig.matvec(&e).into_iter().map(|v| -v).collect();
        let fi = chol.solve(&rhs);
        let mut f = e;
        f.extend(fi);
        columns.push(f);
    }
    // H1 Gram on the structure: strain-free gradient norm plus mass.
    let (grad, _) = crate::fem::assemble_solid(mesh, &bundle.layout, 0.0, 0.5);
    let h1 = grad.add(&m_s);
    let g = faer::Mat::from_fn(nh, nh, |i, j| dot(&h1.matvec(&columns[j]), &columns[i]));
    let mg = bundle.forms.m_gamma.to_dense();
    let l = crate::linalg::cholesky_lower(mg.as_ref())?;
    let mut t = g.clone();
    crate::linalg::lower_solve(l.as_ref(), &mut t);
    let mut t = t.transpose().to_owned();
    crate::linalg::lower_solve(l.as_ref(), &mut t);
    crate::linalg::symmetrize(&mut t);
    let ev = t.self_adjoint_eigenvalues(faer::Side::Lower).map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let bound = ev.iter().cloned().fold(0.0, f64::max).sqrt();
    Ok(DirichletMap { columns, bound })
}

impl DirichletMap {
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.columns[0].len()];
        for (c, gk) in self.columns.iter().zip(g) {
            for (fi, ci) in f.iter_mut().zip(c) {
                *fi += gk * ci;
            }
        }
        f
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfSup {
    /// `sup_s b(s, 1) / ||s||_a`.
    pub beta: f64,
    /// Value attained by the explicit witness `[eta, D eta]` with `Delta_Gamma eta = nu`.
    pub witness: f64,
}

/// Discrete inf-sup constant of the one-dimensional multiplier space.
pub fn estimate_infsup(bundle: &GeneratorBundle, mesh: &Mesh) -> Result<InfSup> {
    let null = build_nullvector(bundle, 1.0)?;
    let beta = null.h_norm;
    // Witness: -S eta = N on GAMMA_S with eta mean free per component.
    let dims = bundle.dims;
    let d = dims.dim;
    let nh = dims.n_h;
    let mut t = bundle.forms.s_gamma.triplets();
    let mg = &bundle.forms.m_gamma;
    let ones: Vec<Vec<f64>> = (0..d).map(|c| (0..nh).map(|i| if i % d == c { 1.0 } else { 0.0 }).collect()).collect();
    for (c, o) in ones.iter().enumerate() {
        let w = mg.matvec(o);
        for (i, wi) in w.iter().enumerate() {
            if *wi != 0.0 {
                t.push((i, nh + c, *wi));
                t.push((nh + c, i, *wi));
            }
        }
    }
    let lu = SparseLu::new(&Csr::from_triplets(nh + d, nh + d, t))?;
    let mut rhs: Vec<f64> = bundle.forms.n_gamma.iter().map(|v| -v).collect();
    rhs.extend(vec![0.0; d]);
    let eta = lu.solve(&rhs)[..nh].to_vec();
    let dm = dirichlet_map(bundle, mesh)?;
    let s = dm.apply(&eta);
    let b = dot(&bundle.cf.n_d, &s);
    let a = dot(&bundle.cf.k_d.matvec(&s), &s).sqrt();
    Ok(InfSup { beta, witness: b.abs() / a })
}
