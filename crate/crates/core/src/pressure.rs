//! Pressure recovery.
//!
//! Two families of pressure maps are provided:
//!
//! * [`PressureMaps`]: P1 finite element solutions of the harmonic boundary value problems
//!   defining `P1(u)`, `P2(h0)` and `P3(w0)`, with either Dirichlet or Robin
//!   (`p + dp/dnu = data`) conditions on GAMMA_S and Neumann conditions on GAMMA_F. Second
//!   derivatives come from elementwise P2 Hessians, the surface Laplacian from `-M^{-1} S`.
//! * [`ConsistentPressure`]: the algebraic pressure of the discrete scheme,
//!   `p = -(B M^{-1} B^T)^{-1} B M^{-1} r`, split into the same three contributions. It makes
//!   the explicit-pressure generator coincide with the divergence-free reduction.
//!
//! [`multiplier_pressure`] solves the monolithic saddle point problem directly.

use crate::error::{Error, Result};
use crate::fem::{p2_basis, p2_hessians, NodeKind, StateVector};
use crate::generator::GeneratorBundle;
use crate::linalg::{col_to_vec, dot, Csr, SparseChol, SparseLu};
use crate::mesh::{face_key, FacetTag, Mesh};
use crate::simplex::{dot as vdot, grundmann_moller, SimplexGeom};
use faer::{linalg::solvers::Solve, Mat, Side};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PressureBc {
    #[default]
    Dirichlet,
    Robin,
}

impl std::str::FromStr for PressureBc {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dirichlet" => Ok(PressureBc::Dirichlet),
            "robin" => Ok(PressureBc::Robin),
            _ => Err(format!("unknown pressure boundary condition '{s}'")),
        }
    }
}

/// Boundary data of one pressure problem: facet-wise functions evaluated at facet quadrature points.
struct BoundaryData {
    gamma_s: Vec<f64>,
    gamma_f: Vec<f64>,
}

#[derive(Debug, Clone)]
struct BoundaryFacet {
    vertices: Vec<usize>,
    normal: [f64; 3],
    geom: SimplexGeom,
    fluid_cell_local: usize,
    solid_cell: Option<usize>,
}

pub struct PressureMaps {
    pub bc: PressureBc,
    n_p: usize,
    laplace: Csr,
    mass_s: Csr,
    lu: SparseLu,
    gamma_s: Vec<BoundaryFacet>,
    gamma_f: Vec<BoundaryFacet>,
    /// Pressure dofs on GAMMA_S (Dirichlet rows).
    dirichlet_rows: Vec<usize>,
    mass_s_chol: SparseChol,
    surface_dofs: Vec<usize>,
}

fn facet_rule(dim: usize) -> crate::simplex::Quadrature {
    grundmann_moller(dim - 1, 2)
}

impl PressureMaps {
    pub fn new(bundle: &GeneratorBundle, mesh: &Mesh, bc: PressureBc) -> Result<Self> {
        let layout = &bundle.layout;
        let n_p = bundle.dims.n_p;
        let dim = mesh.dim;
        let mut tl = Vec::new();
        for &c in &layout.fluid_cells {
            let g = mesh.cell_geom(c);
            let idx: Vec<usize> = mesh.cells[c].iter().map(|v| layout.pressure_index[v]).collect();
            for a in 0..idx.len() {
                for b in 0..idx.len() {
                    tl.push((idx[a], idx[b], g.measure * vdot(g.grad[a], g.grad[b])));
                }
            }
        }
        let laplace = Csr::from_triplets(n_p, n_p, tl);
        let local_of: HashMap<usize, usize> = layout.fluid_cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let fc = mesh.face_cells();
        let mut gamma_s = Vec::new();
        for f in &layout.frame.facets {
            let pts: Vec<[f64; 3]> = f.vertices.iter().map(|&v| mesh.points[v]).collect();
            gamma_s.push(BoundaryFacet { vertices: f.vertices.clone(), normal: f.normal, geom: SimplexGeom::new(dim, &pts), fluid_cell_local: local_of[&f.fluid_cell], solid_cell: Some(f.solid_cell) });
        }
        let mut gamma_f = Vec::new();
        for (_, f) in mesh.facets_with(FacetTag::GammaF) {
            let c = fc[&face_key(&f.vertices)][0];
            let pts: Vec<[f64; 3]> = f.vertices.iter().map(|&v| mesh.points[v]).collect();
            let geom = SimplexGeom::new(dim, &pts);
            let opposite = mesh.cells[c].iter().find(|v| !f.vertices.contains(v)).copied().unwrap();
            let normal = outward_normal(dim, &pts, mesh.points[opposite]);
            gamma_f.push(BoundaryFacet { vertices: f.vertices.clone(), normal, geom, fluid_cell_local: local_of[&c], solid_cell: None });
        }
        let mut tm = Vec::new();
        for f in &gamma_s {
            let idx: Vec<usize> = f.vertices.iter().map(|v| layout.pressure_index[v]).collect();
            let k = dim - 1;
            for a in 0..idx.len() {
                for b in 0..idx.len() {
                    let m = f.geom.measure * if a == b { 2.0 } else { 1.0 } / ((k + 1) * (k + 2)) as f64;
                    tm.push((idx[a], idx[b], m));
                }
            }
        }
        let mass_s = Csr::from_triplets(n_p, n_p, tm);
        let surface_dofs: Vec<usize> = layout.interface_vertices.iter().map(|v| layout.pressure_index[v]).collect();
        let mass_s_chol = SparseChol::new(&mass_s.submatrix(&surface_dofs, &surface_dofs))?;
        let dirichlet_rows = surface_dofs.clone();
        let system = match bc {
            PressureBc::Robin => laplace.add(&mass_s),
            PressureBc::Dirichlet => {
                let mut is_d = vec![false; n_p];
                dirichlet_rows.iter().for_each(|&r| is_d[r] = true);
                let mut t: Vec<_> = laplace.triplets().into_iter().filter(|(i, _, _)| !is_d[*i]).collect();
                t.extend(dirichlet_rows.iter().map(|&r| (r, r, 1.0)));
                Csr::from_triplets(n_p, n_p, t)
            }
        };
        let lu = SparseLu::new(&system)?;
        Ok(PressureMaps { bc, n_p, laplace, mass_s, lu, gamma_s, gamma_f, dirichlet_rows, mass_s_chol, surface_dofs })
    }

    fn solve(&self, bundle: &GeneratorBundle, data: &BoundaryData, dim: usize) -> Vec<f64> {
        let layout = &bundle.layout;
        let q = facet_rule(dim);
        let load = |facets: &[BoundaryFacet], vals: &[f64]| {
            let mut r = vec![0.0; self.n_p];
            let mut k = 0;
            for f in facets {
                for (l, w) in q.points.iter().zip(&q.weights) {
                    for (a, v) in f.vertices.iter().enumerate() {
                        r[layout.pressure_index[v]] += w * f.geom.measure * vals[k] * l[a];
                    }
                    k += 1;
                }
            }
            r
        };
        let rs = load(&self.gamma_s, &data.gamma_s);
        let rf = load(&self.gamma_f, &data.gamma_f);
        match self.bc {
            PressureBc::Robin => self.lu.solve(&rs.iter().zip(&rf).map(|(a, b)| a + b).collect::<Vec<_>>()),
            PressureBc::Dirichlet => {
                let sd: Vec<f64> = self.surface_dofs.iter().map(|&i| rs[i]).collect();
                let proj = self.mass_s_chol.solve(&sd);
                let mut rhs = rf;
                for (k, &r) in self.dirichlet_rows.iter().enumerate() {
                    rhs[r] = proj[k];
                }
                self.lu.solve(&rhs)
            }
        }
    }

    /// `P1(u)` for a full P2 fluid velocity.
    pub fn p1(&self, bundle: &GeneratorBundle, mesh: &Mesh, u: &[f64]) -> Vec<f64> {
        let d = mesh.dim;
        let q = facet_rule(d);
        let layout = &bundle.layout;
        let eval = |facets: &[BoundaryFacet], with_normal_stress: bool| -> Vec<f64> {
            let mut out = Vec::new();
            for f in facets {
                let ci = f.fluid_cell_local;
                let cell = layout.fluid_cells[ci];
                let geom = mesh.cell_geom(cell);
                let nodes = &layout.cell_nodes[ci];
                let hess = p2_hessians(&geom);
                // div(grad u + grad u^T)_i = sum_j d_j d_j u_i + d_i d_j u_j.
                let mut c = [0.0; 3];
                for (a, &n) in nodes.iter().enumerate() {
                    for i in 0..d {
                        for j in 0..d {
                            c[i] += hess[a][j][j] * u[n * d + i] + hess[a][i][j] * u[n * d + j];
                        }
                    }
                }
                let base = vdot(c, f.normal);
                for l in &q.points {
                    let x = f.geom.point(l);
                    let bary = barycentric(&geom, &x);
                    let (_, grad) = p2_basis(&geom, &bary);
                    let mut gu = [[0.0; 3]; 3];
                    for (a, &n) in nodes.iter().enumerate() {
                        for i in 0..d {
                            for j in 0..d {
                                gu[i][j] += u[n * d + i] * grad[a][j];
                            }
                        }
                    }
                    let mut extra = 0.0;
                    if with_normal_stress {
                        for i in 0..d {
                            for j in 0..d {
                                extra += (gu[i][j] + gu[j][i]) * f.normal[i] * f.normal[j];
                            }
                        }
                    }
                    out.push(base + extra);
                }
            }
            out
        };
        let data = BoundaryData { gamma_s: eval(&self.gamma_s, true), gamma_f: eval(&self.gamma_f, false) };
        self.solve(bundle, &data, d)
    }

    /// `P2(h0)` with the discrete surface Laplacian `-M^{-1} S h0`.
    pub fn p2(&self, bundle: &GeneratorBundle, mesh: &Mesh, h0: &[f64]) -> Result<Vec<f64>> {
        let d = mesh.dim;
        let f = &bundle.forms;
        let chol = SparseChol::new(&f.m_gamma)?;
        let lap: Vec<f64> = chol.solve(&f.s_gamma.matvec(h0)).into_iter().map(|v| -v).collect();
        let iface: HashMap<usize, usize> = bundle.layout.interface_vertices.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let q = facet_rule(d);
        let mut gs = Vec::new();
        for fa in &self.gamma_s {
            for l in &q.points {
                let mut val = 0.0;
                for (a, v) in fa.vertices.iter().enumerate() {
                    let k = iface[v];
                    for i in 0..d {
                        val -= l[a] * lap[k * d + i] * fa.normal[i];
                    }
                }
                gs.push(val);
            }
        }
        let gf = vec![0.0; self.gamma_f.len() * q.points.len()];
        Ok(self.solve(bundle, &BoundaryData { gamma_s: gs, gamma_f: gf }, d))
    }

    /// `P3(w0)` from the elementwise Lame stress of the adjacent solid cell.
    pub fn p3(&self, bundle: &GeneratorBundle, mesh: &Mesh, w0: &[f64]) -> Vec<f64> {
        let d = mesh.dim;
        let (lambda, mu) = (bundle.forms.lambda, bundle.forms.mu);
        let q = facet_rule(d);
        let mut gs = Vec::new();
        for fa in &self.gamma_s {
            let c = fa.solid_cell.unwrap();
            let geom = mesh.cell_geom(c);
            let mut gw = [[0.0; 3]; 3];
            for (a, v) in mesh.cells[c].iter().enumerate() {
                let s = bundle.layout.solid_index[v];
                for i in 0..d {
                    for j in 0..d {
                        gw[i][j] += w0[s * d + i] * geom.grad[a][j];
                    }
                }
            }
            let tr: f64 = (0..d).map(|i| gw[i][i]).sum();
            let mut nsn = 0.0;
            for i in 0..d {
                for j in 0..d {
                    let sigma = mu * (gw[i][j] + gw[j][i]) + if i == j { lambda * tr } else { 0.0 };
                    nsn += fa.normal[i] * sigma * fa.normal[j];
                }
            }
            gs.extend(std::iter::repeat_n(-nsn, q.points.len()));
        }
        let gf = vec![0.0; self.gamma_f.len() * q.points.len()];
        self.solve(bundle, &BoundaryData { gamma_s: gs, gamma_f: gf }, d)
    }

    pub fn total(&self, bundle: &GeneratorBundle, mesh: &Mesh, s: &StateVector) -> Result<Vec<f64>> {
        let p1 = self.p1(bundle, mesh, &s.u);
        let p2 = self.p2(bundle, mesh, &s.h0)?;
        let p3 = self.p3(bundle, mesh, &s.w0);
        Ok((0..self.n_p).map(|i| p1[i] + p2[i] + p3[i]).collect())
    }

    /// Relative residual of the discrete Laplace equation at vertices off GAMMA_S and GAMMA_F.
    pub fn harmonic_residual(&self, bundle: &GeneratorBundle, mesh: &Mesh, p: &[f64]) -> f64 {
        let layout = &bundle.layout;
        let mut boundary = vec![false; self.n_p];
        for v in mesh.vertices_on(FacetTag::GammaS).into_iter().chain(mesh.vertices_on(FacetTag::GammaF)) {
            boundary[layout.pressure_index[&v]] = true;
        }
        let r = self.laplace.matvec(p);
        let scale = self.laplace.max_abs() * p.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        r.iter().zip(&boundary).filter(|(_, b)| !**b).fold(0.0f64, |m, (v, _)| m.max(v.abs())) / scale
    }

    pub fn boundary_mass(&self) -> &Csr {
        &self.mass_s
    }
}

fn outward_normal(dim: usize, pts: &[[f64; 3]], inside: [f64; 3]) -> [f64; 3] {
    let n = if dim == 2 {
        let t = crate::simplex::sub(pts[1], pts[0]);
        [t[1], -t[0], 0.0]
    } else {
        crate::simplex::cross(crate::simplex::sub(pts[1], pts[0]), crate::simplex::sub(pts[2], pts[0]))
    };
    let l = crate::simplex::norm(n);
    let mut n = [n[0] / l, n[1] / l, n[2] / l];
    if vdot(crate::simplex::sub(inside, pts[0]), n) > 0.0 {
        n = [-n[0], -n[1], -n[2]];
    }
    n
}

/// Barycentric coordinates of `x` in a full-dimensional simplex.
pub fn barycentric(geom: &SimplexGeom, x: &[f64; 3]) -> Vec<f64> {
    let x0 = geom.vertices[0];
    let r = crate::simplex::sub(*x, x0);
    let mut l: Vec<f64> = geom.grad.iter().skip(1).map(|g| vdot(*g, r)).collect();
    let l0 = 1.0 - l.iter().sum::<f64>();
    l.insert(0, l0);
    l
}

/// Pressure of the monolithic saddle point problem
/// `M_y y' - B^T p = -A_y y - E^T K_d d`, `B y' = 0`, for a reduced state `x`.
pub fn multiplier_pressure(bundle: &GeneratorBundle, x: &[f64]) -> Result<Vec<f64>> {
    let cf = &bundle.cf;
    let dims = bundle.dims;
    let (y, d) = bundle.to_constrained(x);
    let r = momentum_rhs(bundle, &y, &d);
    let n = dims.n_y + dims.n_p;
    let mut t = cf.m_y.triplets();
    for (i, j, v) in cf.b_y.triplets() {
        t.push((j, dims.n_y + i, -v));
        t.push((dims.n_y + i, j, -v));
    }
    let lu = SparseLu::new(&Csr::from_triplets(n, n, t))?;
    let mut rhs = r;
    rhs.extend(vec![0.0; dims.n_p]);
    Ok(lu.solve(&rhs)[dims.n_y..].to_vec())
}

/// `-A_y y - E^T K_d d`.
pub fn momentum_rhs(bundle: &GeneratorBundle, y: &[f64], d: &[f64]) -> Vec<f64> {
    let cf = &bundle.cf;
    let mut r: Vec<f64> = cf.a_y.matvec(y).into_iter().map(|v| -v).collect();
    let kd = cf.k_d.matvec(d);
    for (i, v) in kd.iter().enumerate() {
        r[bundle.dims.n_u_int + i] -= v;
    }
    r
}

/// Pressure from the divergence-free reduction: the momentum residual of the reduced rate lies in
/// the range of `B^T`, and the lifting recovers `p` from it.
pub fn leray_pressure(bundle: &GeneratorBundle, x: &[f64]) -> Vec<f64> {
    let (y, d) = bundle.to_constrained(x);
    let (yd, _) = bundle.to_constrained(&bundle.apply(x));
    let my = bundle.cf.m_y.matvec(&yd);
    let rhs = momentum_rhs(bundle, &y, &d);
    let res: Vec<f64> = my.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    // The residual equals B^T p; only the fluid rows carry B^T.
    bundle.leray.lift_pressure(&res[..bundle.dims.n_u_free])
}

/// The algebraic pressure maps of the discrete scheme.
pub struct ConsistentPressure {
    /// `M_y^{-1} B^T`, `n_y x n_p`.
    minv_bt: Mat<f64>,
    schur: faer::linalg::solvers::Llt<f64>,
    my_chol: SparseChol,
}

impl ConsistentPressure {
    pub fn new(bundle: &GeneratorBundle) -> Result<Self> {
        let cf = &bundle.cf;
        let my_chol = SparseChol::new(&cf.m_y)?;
        let bt = cf.b_y.transpose().to_dense();
        let minv_bt = my_chol.solve_mat(bt.as_ref());
        let mut s = cf.b_y.to_dense() * &minv_bt;
        crate::linalg::symmetrize(&mut s);
        let schur = s.llt(Side::Lower).map_err(|e| Error::Factorization(format!("pressure Schur complement: {e:?}")))?;
        Ok(ConsistentPressure { minv_bt, schur, my_chol })
    }

    /// `-(B M^{-1} B^T)^{-1} B M^{-1} r` for a momentum right-hand side `r` on `y`.
    pub fn from_rhs(&self, r: &[f64]) -> Vec<f64> {
        let b = self.minv_bt.transpose() * crate::linalg::vec_to_col(r);
        let p = self.schur.solve(&b);
        col_to_vec(p.as_ref()).into_iter().map(|v| -v).collect()
    }

    pub fn p1(&self, bundle: &GeneratorBundle, y: &[f64]) -> Vec<f64> {
        self.from_rhs(&bundle.cf.a_y.matvec(y).into_iter().map(|v| -v).collect::<Vec<_>>())
    }

    pub fn p2(&self, bundle: &GeneratorBundle, h0: &[f64]) -> Vec<f64> {
        let s = bundle.forms.s_gamma.matvec(h0);
        let mut r = vec![0.0; bundle.dims.n_y];
        for (i, v) in s.iter().enumerate() {
            r[bundle.dims.n_u_int + i] = -v;
        }
        self.from_rhs(&r)
    }

    pub fn p3(&self, bundle: &GeneratorBundle, w0: &[f64]) -> Vec<f64> {
        let s = bundle.forms.a_s.matvec(w0);
        let mut r = vec![0.0; bundle.dims.n_y];
        for (i, v) in s.iter().enumerate() {
            r[bundle.dims.n_u_int + i] = -v;
        }
        self.from_rhs(&r)
    }

    /// Explicit-pressure rates `y' = M^{-1}(-A y - E^T K d + B^T (P1 + P2 + P3))`, `d' = E y`.
    pub fn explicit_rate(&self, bundle: &GeneratorBundle, y: &[f64], d: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let dims = bundle.dims;
        let p1 = self.p1(bundle, y);
        let p2 = self.p2(bundle, &d[..dims.n_h]);
        let p3 = self.p3(bundle, d);
        let p: Vec<f64> = (0..dims.n_p).map(|i| p1[i] + p2[i] + p3[i]).collect();
        let mut r = momentum_rhs(bundle, y, d);
        let btp = bundle.cf.b_y.transpose().matvec(&p);
        r.iter_mut().zip(&btp).for_each(|(a, b)| *a += b);
        (self.my_chol.solve(&r), y[dims.n_u_int..].to_vec())
    }

    /// Matrix of the explicit-pressure generator restricted to `ker B x (all d)` in a
    /// Euclidean-orthonormal basis of `ker B` from a QR factorization of `B^T`.
    pub fn restricted_generator(&self, bundle: &GeneratorBundle) -> Result<Mat<f64>> {
        let dims = bundle.dims;
        let bt = bundle.cf.b_u.transpose().to_dense();
        let q = bt.qr().compute_Q();
        let rank = bundle.leray.rank;
        let qn = q.subcols(rank, dims.n_u_free - rank);
        let m = qn.ncols() + dims.n_w_int + dims.n_w;
        let nk = qn.ncols() + dims.n_w_int;
        let mut out = Mat::zeros(m, m);
        for col in 0..m {
            let mut y = vec![0.0; dims.n_y];
            let mut d = vec![0.0; dims.n_w];
            if col < qn.ncols() {
                for i in 0..dims.n_u_free {
                    y[i] = qn[(i, col)];
                }
            } else if col < nk {
                y[dims.n_u_free + col - qn.ncols()] = 1.0;
            } else {
                d[col - nk] = 1.0;
            }
            let (yd, dd) = self.explicit_rate(bundle, &y, &d);
            for k in 0..qn.ncols() {
                out[(k, col)] = (0..dims.n_u_free).map(|i| qn[(i, k)] * yd[i]).sum();
            }
            for k in 0..dims.n_w_int {
                out[(qn.ncols() + k, col)] = yd[dims.n_u_free + k];
            }
            for k in 0..dims.n_w {
                out[(nk + k, col)] = dd[k];
            }
        }
        Ok(out)
    }
}

/// Interpolates a vector field at the P2 fluid nodes.
pub fn interpolate_fluid(bundle: &GeneratorBundle, f: impl Fn([f64; 3]) -> [f64; 3]) -> Vec<f64> {
    let d = bundle.dims.dim;
    let mut u = vec![0.0; bundle.dims.n_u];
    for (n, p) in bundle.layout.node_points.iter().enumerate() {
        if bundle.layout.node_kind[n] == NodeKind::Wall {
            continue;
        }
        let v = f(*p);
        u[n * d..(n + 1) * d].copy_from_slice(&v[..d]);
    }
    u
}

/// Relative L2(fluid) distance between two P1 pressures after removing their means.
pub fn relative_l2_mean_free(bundle: &GeneratorBundle, mesh: &Mesh, a: &[f64], b: &[f64]) -> f64 {
    let layout = &bundle.layout;
    let n_p = bundle.dims.n_p;
    let mut t = Vec::new();
    for &c in &layout.fluid_cells {
        let g = mesh.cell_geom(c);
        let idx: Vec<usize> = mesh.cells[c].iter().map(|v| layout.pressure_index[v]).collect();
        let k = mesh.dim;
        for x in 0..idx.len() {
            for y in 0..idx.len() {
                t.push((idx[x], idx[y], g.measure * if x == y { 2.0 } else { 1.0 } / ((k + 1) * (k + 2)) as f64));
            }
        }
    }
    let m = Csr::from_triplets(n_p, n_p, t);
    let ones = vec![1.0; n_p];
    let vol = dot(&m.matvec(&ones), &ones);
    let center = |p: &[f64]| -> Vec<f64> {
        let mean = dot(&m.matvec(p), &ones) / vol;
        p.iter().map(|v| v - mean).collect()
    };
    let (ca, cb) = (center(a), center(b));
    let diff: Vec<f64> = ca.iter().zip(&cb).map(|(x, y)| x - y).collect();
    (dot(&m.matvec(&diff), &diff) / dot(&m.matvec(&cb), &cb)).sqrt()
}
