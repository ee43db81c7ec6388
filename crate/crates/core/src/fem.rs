//! Finite element spaces, trace-sharing layout and the bilinear forms of the energy space.
//!
//! Spaces: P2 fluid velocity vanishing on GAMMA_F, P1 pressure, P1 interface field and P1
//! structure displacement. The fluid velocity trace on GAMMA_S is constrained to be P1, so a
//! GAMMA_S edge node carries the mean of its endpoints. With this constraint the fluid velocity,
//! interface velocity and structure velocity share one set of coefficients on GAMMA_S.
//!
//! Velocity coordinates `y = [u_int, g, w1_int]`: interior fluid dofs, GAMMA_S vertex dofs and
//! interior structure dofs. Displacement coordinates `d = w0` on all structure vertices, ordered
//! with the GAMMA_S vertices first, so `h0 = d[..n_h]`.

use crate::error::{Error, Result};
use crate::linalg::{form, Csr, Scalar};
use crate::mesh::{face_key, FacetTag, InterfaceFrame, Mesh, Region};
use crate::simplex::{grundmann_moller, Quadrature, SimplexGeom};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Interior,
    /// GAMMA_S vertex with its interface index.
    InterfaceVertex(usize),
    /// GAMMA_S edge midpoint with the interface indices of its endpoints.
    InterfaceEdge(usize, usize),
    Wall,
}

#[derive(Debug, Clone)]
pub struct SpaceLayout {
    pub dim: usize,
    pub fluid_cells: Vec<usize>,
    pub solid_cells: Vec<usize>,
    /// P2 node ids of each fluid cell: d+1 vertex nodes followed by edge nodes (i<j lexicographic).
    pub cell_nodes: Vec<Vec<usize>>,
    pub node_points: Vec<[f64; 3]>,
    pub node_kind: Vec<NodeKind>,
    /// Index of an interior node among interior nodes.
    pub interior_index: Vec<Option<usize>>,
    /// GAMMA_S mesh vertices; position = interface index.
    pub interface_vertices: Vec<usize>,
    /// Structure mesh vertices; the first `n_gamma` are `interface_vertices`.
    pub solid_vertices: Vec<usize>,
    pub solid_index: HashMap<usize, usize>,
    /// Fluid mesh vertices carrying pressure dofs.
    pub pressure_vertices: Vec<usize>,
    pub pressure_index: HashMap<usize, usize>,
    pub fluid_vertex_node: HashMap<usize, usize>,
    /// Fluid P2 dofs -> independent fluid dofs `[u_int, g]`.
    pub prolongation: Csr,
    pub frame: InterfaceFrame,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub struct Dims {
    pub dim: usize,
    /// All P2 fluid velocity dofs including wall and constrained ones.
    pub n_u: usize,
    /// Independent fluid dofs `[u_int, g]`.
    pub n_u_free: usize,
    pub n_u_int: usize,
    pub n_p: usize,
    pub n_h: usize,
    pub n_w: usize,
    pub n_w_int: usize,
    /// Velocity coordinates `[u_int, g, w1_int]`.
    pub n_y: usize,
}

impl SpaceLayout {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let d = mesh.dim;
        let frame = mesh.interface_frame()?;
        let fluid_cells: Vec<usize> = (0..mesh.cells.len()).filter(|&c| mesh.regions[c] == Region::Fluid).collect();
        let solid_cells: Vec<usize> = (0..mesh.cells.len()).filter(|&c| mesh.regions[c] == Region::Solid).collect();
        let interface_vertices = frame.vertices.clone();
        let iface_index: HashMap<usize, usize> = interface_vertices.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let wall_vertices: HashSet<usize> = mesh.vertices_on(FacetTag::GammaF).into_iter().collect();
        let mut s_edges = HashSet::new();
        let mut f_edges = HashSet::new();
        for f in &mesh.facets {
            let target = match f.tag {
                FacetTag::GammaS => &mut s_edges,
                FacetTag::GammaF => &mut f_edges,
                FacetTag::Interior => continue,
            };
            for (i, j) in local_edges(f.vertices.len()) {
                target.insert(face_key(&[f.vertices[i], f.vertices[j]]));
            }
        }

        let mut node_points = Vec::new();
        let mut node_kind = Vec::new();
        let mut fluid_vertex_node = HashMap::new();
        let mut edge_node: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut cell_nodes = Vec::with_capacity(fluid_cells.len());
        let mut pressure_vertices = Vec::new();
        let mut pressure_index = HashMap::new();
        for &c in &fluid_cells {
            let cell = &mesh.cells[c];
            let mut nodes = Vec::with_capacity(cell.len() * (cell.len() + 1) / 2);
            for &v in cell {
                let id = *fluid_vertex_node.entry(v).or_insert_with(|| {
                    node_points.push(mesh.points[v]);
                    node_kind.push(if let Some(&k) = iface_index.get(&v) {
                        NodeKind::InterfaceVertex(k)
                    } else if wall_vertices.contains(&v) {
                        NodeKind::Wall
                    } else {
                        NodeKind::Interior
                    });
                    node_points.len() - 1
                });
                pressure_index.entry(v).or_insert_with(|| {
                    pressure_vertices.push(v);
                    pressure_vertices.len() - 1
                });
                nodes.push(id);
            }
            for (i, j) in local_edges(cell.len()) {
                let key = face_key(&[cell[i], cell[j]]);
                let id = *edge_node.entry(key.clone()).or_insert_with(|| {
                    let (a, b) = (mesh.points[key[0]], mesh.points[key[1]]);
                    node_points.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])]);
                    node_kind.push(if s_edges.contains(&key) {
                        NodeKind::InterfaceEdge(iface_index[&key[0]], iface_index[&key[1]])
                    } else if f_edges.contains(&key) {
                        NodeKind::Wall
                    } else {
                        NodeKind::Interior
                    });
                    node_points.len() - 1
                });
                nodes.push(id);
            }
            cell_nodes.push(nodes);
        }

        let mut interior_index = vec![None; node_kind.len()];
        let mut n_int = 0;
        for (n, k) in node_kind.iter().enumerate() {
            if *k == NodeKind::Interior {
                interior_index[n] = Some(n_int);
                n_int += 1;
            }
        }
        let n_u_int = n_int * d;
        let n_u_free = n_u_int + interface_vertices.len() * d;
        let mut t = Vec::new();
        for (n, k) in node_kind.iter().enumerate() {
            for c in 0..d {
                match *k {
                    NodeKind::Interior => t.push((n * d + c, interior_index[n].unwrap() * d + c, 1.0)),
                    NodeKind::InterfaceVertex(k) => t.push((n * d + c, n_u_int + k * d + c, 1.0)),
                    NodeKind::InterfaceEdge(a, b) => {
                        t.push((n * d + c, n_u_int + a * d + c, 0.5));
                        t.push((n * d + c, n_u_int + b * d + c, 0.5));
                    }
                    NodeKind::Wall => {}
                }
            }
        }
        let prolongation = Csr::from_triplets(node_kind.len() * d, n_u_free, t);

        let mut solid_vertices = interface_vertices.clone();
        let mut seen: HashSet<usize> = solid_vertices.iter().copied().collect();
        for &c in &solid_cells {
            for &v in &mesh.cells[c] {
                if seen.insert(v) {
                    solid_vertices.push(v);
                }
            }
        }
        let solid_index = solid_vertices.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        Ok(SpaceLayout {
            dim: d,
            fluid_cells,
            solid_cells,
            cell_nodes,
            node_points,
            node_kind,
            interior_index,
            interface_vertices,
            solid_vertices,
            solid_index,
            pressure_vertices,
            pressure_index,
            fluid_vertex_node,
            prolongation,
            frame,
        })
    }

    pub fn dims(&self) -> Dims {
        let d = self.dim;
        let n_h = self.interface_vertices.len() * d;
        let n_w = self.solid_vertices.len() * d;
        let n_u_free = self.prolongation.ncols;
        Dims {
            dim: d,
            n_u: self.node_kind.len() * d,
            n_u_free,
            n_u_int: n_u_free - n_h,
            n_p: self.pressure_vertices.len(),
            n_h,
            n_w,
            n_w_int: n_w - n_h,
            n_y: n_u_free + n_w - n_h,
        }
    }

    pub fn n_gamma(&self) -> usize {
        self.interface_vertices.len()
    }
}

pub fn local_edges(nv: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for i in 0..nv {
        for j in i + 1..nv {
            e.push((i, j));
        }
    }
    e
}

/// P2 basis values and gradients on a simplex at barycentric point `l`.
pub fn p2_basis(geom: &SimplexGeom, l: &[f64]) -> (Vec<f64>, Vec<[f64; 3]>) {
    let nv = l.len();
    let mut val = Vec::with_capacity(nv * (nv + 1) / 2);
    let mut grad = Vec::with_capacity(val.capacity());
    for i in 0..nv {
        val.push(l[i] * (2.0 * l[i] - 1.0));
        let s = 4.0 * l[i] - 1.0;
        grad.push([s * geom.grad[i][0], s * geom.grad[i][1], s * geom.grad[i][2]]);
    }
    for (i, j) in local_edges(nv) {
        val.push(4.0 * l[i] * l[j]);
        let (gi, gj) = (geom.grad[i], geom.grad[j]);
        grad.push([
            4.0 * (l[i] * gj[0] + l[j] * gi[0]),
            4.0 * (l[i] * gj[1] + l[j] * gi[1]),
            4.0 * (l[i] * gj[2] + l[j] * gi[2]),
        ]);
    }
    (val, grad)
}

/// Constant Hessians of the P2 basis functions.
pub fn p2_hessians(geom: &SimplexGeom) -> Vec<[[f64; 3]; 3]> {
    let nv = geom.grad.len();
    let outer = |a: [f64; 3], b: [f64; 3], s: f64| {
        let mut h = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                h[r][c] = s * a[r] * b[c];
            }
        }
        h
    };
    let mut out: Vec<[[f64; 3]; 3]> = (0..nv).map(|i| outer(geom.grad[i], geom.grad[i], 4.0)).collect();
    for (i, j) in local_edges(nv) {
        let a = outer(geom.grad[i], geom.grad[j], 4.0);
        let b = outer(geom.grad[j], geom.grad[i], 4.0);
        let mut h = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                h[r][c] = a[r][c] + b[r][c];
            }
        }
        out.push(h);
    }
    out
}

/// Assembled matrices of the energy space.
#[derive(Debug, Clone)]
pub struct FormSet {
    pub dims: Dims,
    pub lambda: f64,
    pub mu: f64,
    /// `1/2 <grad u + grad u^T, grad v + grad v^T>` on all P2 fluid dofs.
    pub a_f: Csr,
    /// `<div u, q>`, pressure rows by fluid velocity columns.
    pub b: Csr,
    pub m_f: Csr,
    pub s_gamma: Csr,
    pub m_gamma: Csr,
    /// `<nu, phi>` on GAMMA_S.
    pub n_gamma: Vec<f64>,
    /// `<sigma(w), eps(psi)> + <w, psi>`.
    pub a_s: Csr,
    pub m_s: Csr,
}

pub fn cell_quadrature(dim: usize) -> Quadrature {
    grundmann_moller(dim, 2)
}

pub fn assemble_forms(mesh: &Mesh, layout: &SpaceLayout, lambda: f64, mu: f64) -> Result<FormSet> {
    if !(mu > 0.0) || !(lambda > 0.0) || !lambda.is_finite() || !mu.is_finite() {
        return Err(Error::Assembly(format!("Lame parameters must be positive, got lambda={lambda}, mu={mu}")));
    }
    let d = layout.dim;
    let dims = layout.dims();
    let quad = cell_quadrature(d);

    let mut ta = Vec::new();
    let mut tm = Vec::new();
    let mut tb = Vec::new();
    for (ci, &c) in layout.fluid_cells.iter().enumerate() {
        let geom = mesh.cell_geom(c);
        let nodes = &layout.cell_nodes[ci];
        let pv: Vec<usize> = mesh.cells[c].iter().map(|v| layout.pressure_index[v]).collect();
        let nn = nodes.len();
        let mut ka = vec![0.0; nn * nn * d * d];
        let mut km = vec![0.0; nn * nn];
        let mut kb = vec![0.0; (d + 1) * nn * d];
        for (l, w) in quad.points.iter().zip(&quad.weights) {
            let wq = w * geom.measure;
            let (phi, gphi) = p2_basis(&geom, l);
            for a in 0..nn {
                for b in 0..nn {
                    km[a * nn + b] += wq * phi[a] * phi[b];
                    let gg: f64 = (0..d).map(|k| gphi[a][k] * gphi[b][k]).sum();
                    for i in 0..d {
                        for j in 0..d {
                            let mut v = gphi[a][j] * gphi[b][i];
                            if i == j {
                                v += gg;
                            }
                            ka[((a * d + i) * nn + b) * d + j] += wq * v;
                        }
                    }
                }
                for q in 0..=d {
                    for i in 0..d {
                        kb[(q * nn + a) * d + i] += wq * gphi[a][i] * l[q];
                    }
                }
            }
        }
        for a in 0..nn {
            for b in 0..nn {
                for i in 0..d {
                    tm.push((nodes[a] * d + i, nodes[b] * d + i, km[a * nn + b]));
                    for j in 0..d {
                        ta.push((nodes[a] * d + i, nodes[b] * d + j, ka[((a * d + i) * nn + b) * d + j]));
                    }
                }
            }
            for q in 0..=d {
                for i in 0..d {
                    tb.push((pv[q], nodes[a] * d + i, kb[(q * nn + a) * d + i]));
                }
            }
        }
    }
    let a_f = Csr::from_triplets(dims.n_u, dims.n_u, ta);
    let m_f = Csr::from_triplets(dims.n_u, dims.n_u, tm);
    let b = Csr::from_triplets(dims.n_p, dims.n_u, tb);

    let (a_strain, m_s) = assemble_solid(mesh, layout, lambda, mu);
    let a_s = a_strain.add(&m_s);
    let (s_gamma, m_gamma, n_gamma) = assemble_interface(mesh, layout);
    Ok(FormSet { dims, lambda, mu, a_f, b, m_f, s_gamma, m_gamma, n_gamma, a_s, m_s })
}

/// Lame strain form `<sigma(w), eps(psi)>` and the P1 mass on the structure.
pub fn assemble_solid(mesh: &Mesh, layout: &SpaceLayout, lambda: f64, mu: f64) -> (Csr, Csr) {
    let d = layout.dim;
    let n_w = layout.solid_vertices.len() * d;
    let (mut ta, mut tm) = (Vec::new(), Vec::new());
    for &c in &layout.solid_cells {
        let geom = mesh.cell_geom(c);
        let idx: Vec<usize> = mesh.cells[c].iter().map(|v| layout.solid_index[v]).collect();
        let nv = idx.len();
        let g = &geom.grad;
        for a in 0..nv {
            for b in 0..nv {
                let gg: f64 = (0..d).map(|k| g[a][k] * g[b][k]).sum();
                // Exact P1 mass: |T| (1 + delta_ab) / ((d+1)(d+2)).
                let m = geom.measure * if a == b { 2.0 } else { 1.0 } / ((d + 1) * (d + 2)) as f64;
                for i in 0..d {
                    tm.push((idx[a] * d + i, idx[b] * d + i, m));
                    for j in 0..d {
                        let mut v = mu * g[a][j] * g[b][i] + lambda * g[a][i] * g[b][j];
                        if i == j {
                            v += mu * gg;
                        }
                        ta.push((idx[a] * d + i, idx[b] * d + j, geom.measure * v));
                    }
                }
            }
        }
    }
    (Csr::from_triplets(n_w, n_w, ta), Csr::from_triplets(n_w, n_w, tm))
}

/// Tangential stiffness, mass and normal load of the P1 interface space.
pub fn assemble_interface(mesh: &Mesh, layout: &SpaceLayout) -> (Csr, Csr, Vec<f64>) {
    let d = layout.dim;
    let n_h = layout.n_gamma() * d;
    let index: HashMap<usize, usize> = layout.interface_vertices.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let (mut ts, mut tm) = (Vec::new(), Vec::new());
    let mut n = vec![0.0; n_h];
    let k = d - 1;
    for f in &layout.frame.facets {
        let pts: Vec<[f64; 3]> = f.vertices.iter().map(|&v| mesh.points[v]).collect();
        let geom = SimplexGeom::new(d, &pts);
        let idx: Vec<usize> = f.vertices.iter().map(|v| index[v]).collect();
        let nv = idx.len();
        for a in 0..nv {
            for i in 0..d {
                n[idx[a] * d + i] += f.normal[i] * geom.measure / nv as f64;
            }
            for b in 0..nv {
                let gg: f64 = (0..3).map(|c| geom.grad[a][c] * geom.grad[b][c]).sum();
                let m = geom.measure * if a == b { 2.0 } else { 1.0 } / ((k + 1) * (k + 2)) as f64;
                for i in 0..d {
                    ts.push((idx[a] * d + i, idx[b] * d + i, geom.measure * gg));
                    tm.push((idx[a] * d + i, idx[b] * d + i, m));
                }
            }
        }
    }
    (Csr::from_triplets(n_h, n_h, ts), Csr::from_triplets(n_h, n_h, tm), n)
}

/// Full state with every block on its finite element space. `u` holds all P2 fluid dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T: Scalar = f64> {
    pub u: Vec<T>,
    pub h0: Vec<T>,
    pub h1: Vec<T>,
    pub w0: Vec<T>,
    pub w1: Vec<T>,
}

impl<T: Scalar> StateVector<T> {
    pub fn zeros(dims: &Dims) -> Self {
        StateVector {
            u: vec![T::default(); dims.n_u],
            h0: vec![T::default(); dims.n_h],
            h1: vec![T::default(); dims.n_h],
            w0: vec![T::default(); dims.n_w],
            w1: vec![T::default(); dims.n_w],
        }
    }

    pub fn blocks(&self) -> [(&'static str, &Vec<T>); 5] {
        [("u", &self.u), ("h0", &self.h0), ("h1", &self.h1), ("w0", &self.w0), ("w1", &self.w1)]
    }

    pub fn axpy(&mut self, a: T, x: &Self) {
        for (dst, src) in [(&mut self.u, &x.u), (&mut self.h0, &x.h0), (&mut self.h1, &x.h1), (&mut self.w0, &x.w0), (&mut self.w1, &x.w1)] {
            for (p, q) in dst.iter_mut().zip(src) {
                *p += a * *q;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks().iter().flat_map(|(_, b)| b.iter()).fold(0.0, |m, x| m.max(x.abs2().sqrt()))
    }
}

/// `<Phi, Psi>_H`, conjugate-linear in the second argument.
pub fn energy_inner_product<T: Scalar>(forms: &FormSet, a: &StateVector<T>, b: &StateVector<T>) -> T {
    form(&forms.m_f, &a.u, &b.u) + form(&forms.s_gamma, &a.h0, &b.h0) + form(&forms.m_gamma, &a.h1, &b.h1) + form(&forms.a_s, &a.w0, &b.w0) + form(&forms.m_s, &a.w1, &b.w1)
}

pub fn energy_norm<T: Scalar>(forms: &FormSet, a: &StateVector<T>) -> f64 {
    energy_inner_product(forms, a, a).re().max(0.0).sqrt()
}

/// Matrices in the trace-constrained coordinates `(y, d)`.
#[derive(Debug, Clone)]
pub struct ConstrainedForms {
    pub dims: Dims,
    /// Kinetic mass on `y`: fluid, interface and structure velocity masses with shared traces.
    pub m_y: Csr,
    /// Fluid dissipation on `y`.
    pub a_y: Csr,
    /// Displacement stiffness `A_s + S_Gamma` on `d`.
    pub k_d: Csr,
    /// Divergence `[B T, 0]` on `y`.
    pub b_y: Csr,
    /// Normal load on `d` (zero away from GAMMA_S).
    pub n_d: Vec<f64>,
    /// Fluid-only blocks on the independent fluid dofs: `T^T M_f T`, `T^T A_f T`, `B T`.
    pub m_u: Csr,
    pub a_u: Csr,
    pub b_u: Csr,
}

impl ConstrainedForms {
    pub fn new(forms: &FormSet, layout: &SpaceLayout) -> Self {
        let dims = forms.dims;
        let t = &layout.prolongation;
        let tt = t.transpose();
        let n_y = dims.n_y;
        let s0 = dims.n_u_int;
        let m_u = tt.matmul(&forms.m_f).matmul(t);
        let a_u = tt.matmul(&forms.a_f).matmul(t);
        let m_y = m_u.embed(n_y, n_y, 0, 0).add(&forms.m_s.embed(n_y, n_y, s0, s0)).add(&forms.m_gamma.embed(n_y, n_y, s0, s0));
        let a_y = a_u.embed(n_y, n_y, 0, 0);
        let k_d = forms.a_s.add(&forms.s_gamma.embed(dims.n_w, dims.n_w, 0, 0));
        let b_u = forms.b.matmul(t);
        let b_y = b_u.embed(dims.n_p, n_y, 0, 0);
        let mut n_d = vec![0.0; dims.n_w];
        n_d[..dims.n_h].copy_from_slice(&forms.n_gamma);
        ConstrainedForms { dims, m_y, a_y, k_d, b_y, n_d, m_u, a_u, b_u }
    }

    /// Gram matrix of the energy inner product on `(y, d)`.
    pub fn gram(&self) -> Csr {
        let n = self.dims.n_y + self.dims.n_w;
        self.m_y.embed(n, n, 0, 0).add(&self.k_d.embed(n, n, self.dims.n_y, self.dims.n_y))
    }

    /// Structure velocity `E y` (the trailing `n_w` entries of `y`).
    pub fn structure_velocity<'a, T: Scalar>(&self, y: &'a [T]) -> &'a [T] {
        &y[self.dims.n_u_int..]
    }
}

pub fn assemble_gram(forms: &FormSet, layout: &SpaceLayout) -> Csr {
    ConstrainedForms::new(forms, layout).gram()
}

/// Expands trace-constrained coordinates into a full state.
pub fn expand<T: Scalar>(layout: &SpaceLayout, dims: &Dims, y: &[T], d: &[T]) -> StateVector<T> {
    let u = layout.prolongation.matvec(&y[..dims.n_u_free]);
    let w1 = y[dims.n_u_int..].to_vec();
    StateVector { u, h0: d[..dims.n_h].to_vec(), h1: w1[..dims.n_h].to_vec(), w0: d.to_vec(), w1 }
}

/// Inverse of `expand`; fails unless the traces agree to `tol` (relative).
pub fn restrict<T: Scalar>(layout: &SpaceLayout, dims: &Dims, s: &StateVector<T>, tol: f64) -> Result<(Vec<T>, Vec<T>)> {
    let dd = dims.dim;
    let scale = s.max_abs().max(f64::MIN_POSITIVE);
    let mut y = vec![T::default(); dims.n_y];
    for (n, k) in layout.node_kind.iter().enumerate() {
        if let NodeKind::Interior = k {
            let q = layout.interior_index[n].unwrap();
            y[q * dd..(q + 1) * dd].copy_from_slice(&s.u[n * dd..(n + 1) * dd]);
        }
    }
    y[dims.n_u_int..].copy_from_slice(&s.w1);
    let (yd, d) = (y, s.w0.clone());
    let back = expand(layout, dims, &yd, &d);
    let mut worst: f64 = 0.0;
    for ((_, a), (_, b)) in back.blocks().iter().zip(s.blocks().iter()) {
        for (p, q) in a.iter().zip(b.iter()) {
            worst = worst.max((*p - *q).abs2().sqrt());
        }
    }
    if worst > tol * scale {
        return Err(Error::Domain(format!("trace mismatch {:.3e} relative to state size {:.3e}", worst, scale)));
    }
    Ok((yd, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, GeometryKind};

    fn setup(res: usize) -> (Mesh, SpaceLayout, FormSet) {
        let mesh = generate_mesh(GeometryKind::AnnulusDisc, res).unwrap();
        let layout = SpaceLayout::new(&mesh).unwrap();
        let forms = assemble_forms(&mesh, &layout, 1.0, 1.0).unwrap();
        (mesh, layout, forms)
    }

    #[test]
    fn forms_are_symmetric() {
        let (_, _, f) = setup(6);
        for m in [&f.a_f, &f.m_f, &f.s_gamma, &f.m_gamma, &f.a_s, &f.m_s] {
            assert!(m.asymmetry() < 1e-12);
        }
    }

    #[test]
    fn normal_load_integrates_normal() {
        let (_, layout, f) = setup(6);
        // Closed interface: integral of nu vanishes; integral of nu . x equals -|solid| * dim.
        let d = layout.dim;
        let tot: Vec<f64> = (0..d).map(|c| (0..layout.n_gamma()).map(|k| f.n_gamma[k * d + c]).sum()).collect();
        assert!(tot.iter().all(|t| t.abs() < 1e-13));
    }

    #[test]
    fn rigid_motions_have_zero_strain() {
        let (mesh, layout, f) = setup(6);
        let (a_strain, _) = assemble_solid(&mesh, &layout, 1.0, 1.0);
        let d = layout.dim;
        let mut rot = vec![0.0; f.dims.n_w];
        for (s, &v) in layout.solid_vertices.iter().enumerate() {
            let p = mesh.points[v];
            rot[s * d] = -p[1];
            rot[s * d + 1] = p[0];
        }
        let e = form(&a_strain, &rot, &rot);
        assert!(e.abs() < 1e-12);
    }

    #[test]
    fn layout_counts() {
        let (_, layout, f) = setup(8);
        let dims = f.dims;
        assert_eq!(dims.n_h, 2 * 16);
        assert_eq!(dims.n_p, layout.pressure_vertices.len());
        let n_iface_edges = layout.node_kind.iter().filter(|k| matches!(k, NodeKind::InterfaceEdge(..))).count();
        assert_eq!(n_iface_edges, 16);
        assert_eq!(&layout.solid_vertices[..16], &layout.interface_vertices[..]);
    }
}
