mod common;

use faer::c64;
use faer::linalg::solvers::Solve;
use fsispectra::fem::{assemble_forms, energy_inner_product, FormSet, NodeKind, SpaceLayout, StateVector};
use fsispectra::linalg::form;
use fsispectra::mesh::{generate_mesh, FacetTag, GeometryKind, Mesh, Region};
use rand::Rng;

fn setup(kind: GeometryKind, res: usize, lambda: f64, mu: f64) -> (Mesh, SpaceLayout, FormSet) {
    let mesh = generate_mesh(kind, res).unwrap();
    let layout = SpaceLayout::new(&mesh).unwrap();
    let forms = assemble_forms(&mesh, &layout, lambda, mu).unwrap();
    (mesh, layout, forms)
}

/// Barycentric coordinate gradients from the inverse Jacobian of the affine map.
fn bary_grads(p: &[[f64; 3]]) -> Vec<[f64; 2]> {
    let (a, b, c, d) = (p[1][0] - p[0][0], p[2][0] - p[0][0], p[1][1] - p[0][1], p[2][1] - p[0][1]);
    let det = a * d - b * c;
    let g1 = [d / det, -b / det];
    let g2 = [-c / det, a / det];
    vec![[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2]
}

fn tri_area(p: &[[f64; 3]]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])).abs()
}

/// `2 |eps(u)|^2` integrated with the edge-midpoint rule, exact for the quadratic integrand.
fn fluid_strain_oracle(mesh: &Mesh, layout: &SpaceLayout, u: &[f64]) -> f64 {
    let mut total = 0.0;
    for (ci, &c) in layout.fluid_cells.iter().enumerate() {
        let p: Vec<[f64; 3]> = mesh.cells[c].iter().map(|&v| mesh.points[v]).collect();
        let g = bary_grads(&p);
        let area = tri_area(&p);
        let nodes = &layout.cell_nodes[ci];
        let edges = [(0, 1), (0, 2), (1, 2)];
        for &(qa, qb) in &edges {
            let mut l = [0.0; 3];
            l[qa] = 0.5;
            l[qb] = 0.5;
            let mut grads: Vec<[f64; 2]> = (0..3).map(|i| [(4.0 * l[i] - 1.0) * g[i][0], (4.0 * l[i] - 1.0) * g[i][1]]).collect();
            for &(i, j) in &edges {
                grads.push([4.0 * (l[j] * g[i][0] + l[i] * g[j][0]), 4.0 * (l[j] * g[i][1] + l[i] * g[j][1])]);
            }
            let mut du = [[0.0; 2]; 2];
            for (a, gr) in grads.iter().enumerate() {
                for comp in 0..2 {
                    for k in 0..2 {
                        du[comp][k] += u[nodes[a] * 2 + comp] * gr[k];
                    }
                }
            }
            let mut e2 = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    let e = 0.5 * (du[i][j] + du[j][i]);
                    e2 += e * e;
                }
            }
            total += area / 3.0 * 2.0 * e2;
        }
    }
    total
}

/// `int 2 mu |eps|^2 + lambda (tr eps)^2 + |w|^2` over the structure, P1 in 2D.
fn solid_oracle(mesh: &Mesh, layout: &SpaceLayout, lambda: f64, mu: f64, w: &[f64]) -> f64 {
    let mut total = 0.0;
    for &c in &layout.solid_cells {
        let p: Vec<[f64; 3]> = mesh.cells[c].iter().map(|&v| mesh.points[v]).collect();
        let g = bary_grads(&p);
        let area = tri_area(&p);
        let idx: Vec<usize> = mesh.cells[c].iter().map(|v| layout.solid_index[v]).collect();
        let mut dw = [[0.0; 2]; 2];
        for (a, &s) in idx.iter().enumerate() {
            for comp in 0..2 {
                for k in 0..2 {
                    dw[comp][k] += w[s * 2 + comp] * g[a][k];
                }
            }
        }
        let e01 = 0.5 * (dw[0][1] + dw[1][0]);
        let eps2 = dw[0][0] * dw[0][0] + dw[1][1] * dw[1][1] + 2.0 * e01 * e01;
        let tr = dw[0][0] + dw[1][1];
        total += area * (2.0 * mu * eps2 + lambda * tr * tr);
        for (qa, qb) in [(0, 1), (0, 2), (1, 2)] {
            for comp in 0..2 {
                let v = 0.5 * (w[idx[qa] * 2 + comp] + w[idx[qb] * 2 + comp]);
                total += area / 3.0 * v * v;
            }
        }
    }
    total
}

#[test]
fn fluid_dissipation_matches_quadrature_oracle() {
    let (mesh, layout, f) = setup(GeometryKind::AnnulusDisc, 4, 1.0, 1.0);
    let mut rng = common::rng(11);
    for _ in 0..3 {
        let u: Vec<f64> = (0..f.dims.n_u).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = form(&f.a_f, &u, &u);
        let o = fluid_strain_oracle(&mesh, &layout, &u);
        assert!((a - o).abs() <= 1e-10 * o, "{a} vs {o}");
    }
}

#[test]
fn solid_energy_matches_quadrature_oracle() {
    let (lambda, mu) = (1.7, 0.6);
    let (mesh, layout, f) = setup(GeometryKind::AnnulusDisc, 4, lambda, mu);
    let mut rng = common::rng(12);
    for _ in 0..3 {
        let w: Vec<f64> = (0..f.dims.n_w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = form(&f.a_s, &w, &w);
        let o = solid_oracle(&mesh, &layout, lambda, mu, &w);
        assert!((a - o).abs() <= 1e-10 * o, "{a} vs {o}");
    }
}

#[test]
fn solid_energy_matches_oracle_in_3d() {
    // Four-point degree-2 rule on tetrahedra; strain constant per cell.
    let (lambda, mu) = (1.3, 0.8);
    let (mesh, layout, f) = setup(GeometryKind::BoxInBox3d, 4, lambda, mu);
    let mut rng = common::rng(13);
    let w: Vec<f64> = (0..f.dims.n_w).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (qa, qb) = (0.585_410_196_624_968_5, 0.138_196_601_125_010_5);
    let mut total = 0.0;
    for &c in &layout.solid_cells {
        let p: Vec<[f64; 3]> = mesh.cells[c].iter().map(|&v| mesh.points[v]).collect();
        let j = faer::Mat::from_fn(3, 3, |r, k| p[k + 1][r] - p[0][r]);
        let vol = j.determinant().abs() / 6.0;
        let jinv = j.partial_piv_lu().solve(faer::Mat::<f64>::identity(3, 3));
        let mut g = vec![[0.0; 3]; 4];
        for k in 0..3 {
            for r in 0..3 {
                g[k + 1][r] = jinv[(k, r)];
                g[0][r] -= jinv[(k, r)];
            }
        }
        let idx: Vec<usize> = mesh.cells[c].iter().map(|v| layout.solid_index[v]).collect();
        let mut dw = [[0.0; 3]; 3];
        for (a, &s) in idx.iter().enumerate() {
            for comp in 0..3 {
                for k in 0..3 {
                    dw[comp][k] += w[s * 3 + comp] * g[a][k];
                }
            }
        }
        let mut eps2 = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                let e = 0.5 * (dw[a][b] + dw[b][a]);
                eps2 += e * e;
            }
        }
        let tr = dw[0][0] + dw[1][1] + dw[2][2];
        total += vol * (2.0 * mu * eps2 + lambda * tr * tr);
        for q in 0..4 {
            let l: Vec<f64> = (0..4).map(|k| if k == q { qa } else { qb }).collect();
            for comp in 0..3 {
                let v: f64 = (0..4).map(|k| l[k] * w[idx[k] * 3 + comp]).sum();
                total += vol / 4.0 * v * v;
            }
        }
    }
    let a = form(&f.a_s, &w, &w);
    assert!((a - total).abs() <= 1e-10 * total, "{a} vs {total}");
}

fn solid_area(mesh: &Mesh) -> f64 {
    (0..mesh.cells.len()).filter(|&c| mesh.regions[c] == Region::Solid).map(|c| tri_area(&mesh.cell_points(c))).sum()
}

#[test]
fn constant_displacement_sees_only_the_mass_term() {
    let (mesh, _, f) = setup(GeometryKind::AnnulusDisc, 6, 1.0, 1.0);
    let c = [0.7, -1.3];
    let w: Vec<f64> = (0..f.dims.n_w).map(|i| c[i % 2]).collect();
    let expect = (c[0] * c[0] + c[1] * c[1]) * solid_area(&mesh);
    assert!((form(&f.a_s, &w, &w) - expect).abs() < 1e-12 * expect);

    let mut s = StateVector::zeros(&f.dims);
    s.w1 = w;
    assert!((energy_inner_product(&f, &s, &s) - expect).abs() < 1e-12 * expect);
    let z = StateVector::<f64>::zeros(&f.dims);
    assert_eq!(energy_inner_product(&f, &z, &z), 0.0);
}

#[test]
fn rigid_rotation_has_no_fluid_dissipation() {
    let (_, layout, f) = setup(GeometryKind::AnnulusDisc, 6, 1.0, 1.0);
    let mut u = vec![0.0; f.dims.n_u];
    for (n, p) in layout.node_points.iter().enumerate() {
        u[2 * n] = -p[1];
        u[2 * n + 1] = p[0];
    }
    let scale = form(&f.m_f, &u, &u);
    assert!(form(&f.a_f, &u, &u).abs() < 1e-12 * scale);
}

#[test]
fn energy_product_is_hermitian() {
    let (_, _, f) = setup(GeometryKind::AnnulusDisc, 5, 1.0, 1.0);
    let mut rng = common::rng(14);
    let mut rand_state = || {
        let mut s = StateVector::<c64>::zeros(&f.dims);
        for b in [&mut s.u, &mut s.h0, &mut s.h1, &mut s.w0, &mut s.w1] {
            for v in b.iter_mut() {
                *v = c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        s
    };
    let (a, b) = (rand_state(), rand_state());
    let ab = energy_inner_product(&f, &a, &b);
    let ba = energy_inner_product(&f, &b, &a);
    assert!((ab - ba.conj()).norm() < 1e-12 * ab.norm().max(1.0));
    assert!(energy_inner_product(&f, &a, &a).im.abs() < 1e-12);
}

#[test]
fn gram_matrix_is_positive_definite_and_consistent() {
    let fx = common::annulus(6);
    let b = &fx.bundle;
    let ev = b.m_h.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
    let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min > 0.0, "smallest Gram eigenvalue {min}");

    let mut rng = common::rng(15);
    for _ in 0..5 {
        let x = fsispectra::generator::random_state(b, &mut rng);
        let col = faer::Col::from_fn(b.n, |i| x[i]);
        let quad = (col.transpose() * &b.m_h * &col).to_owned();
        let s = b.expand(&x);
        let e = energy_inner_product(&b.forms, &s, &s);
        assert!((quad - e).abs() < 1e-12 * e, "{quad} vs {e}");
    }
}

#[test]
fn interface_vertices_appear_in_every_trace() {
    let (mesh, layout, f) = setup(GeometryKind::AnnulusDisc, 8, 1.0, 1.0);
    let gamma = mesh.vertices_on(FacetTag::GammaS);
    assert_eq!(f.dims.n_h, 2 * gamma.len());
    for (k, v) in layout.interface_vertices.iter().enumerate() {
        assert!(gamma.contains(v));
        assert_eq!(layout.solid_vertices[k], *v);
        let node = layout.fluid_vertex_node[v];
        assert_eq!(layout.node_kind[node], NodeKind::InterfaceVertex(k));
    }
}

#[test]
fn wall_dofs_cover_the_outer_boundary() {
    let (mesh, layout, f) = setup(GeometryKind::BoxInBox, 4, 1.0, 1.0);
    // Oracle: GAMMA_F vertices plus one midpoint per GAMMA_F edge.
    let verts = mesh.vertices_on(FacetTag::GammaF).len();
    let edges = mesh.facets_with(FacetTag::GammaF).count();
    let wall: Vec<usize> = (0..layout.node_kind.len()).filter(|&n| layout.node_kind[n] == NodeKind::Wall).collect();
    assert_eq!(wall.len(), verts + edges);
    for &n in &wall {
        let p = layout.node_points[n];
        assert!((p[0].abs() - 2.0).abs() < 1e-12 || (p[1].abs() - 2.0).abs() < 1e-12, "{p:?}");
    }
    let iface_edges = layout.node_kind.iter().filter(|k| matches!(k, NodeKind::InterfaceEdge(..))).count();
    assert_eq!(f.dims.n_u, 2 * layout.node_kind.len());
    assert_eq!(f.dims.n_u_free, f.dims.n_u - 2 * (wall.len() + iface_edges));
}
