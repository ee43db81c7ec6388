//! Geometry of k-simplices embedded in R^d and Grundmann-Moller quadrature.

/// Affine data of a simplex with `k + 1` vertices in R^d.
#[derive(Debug, Clone)]
pub struct SimplexGeom {
    pub dim: usize,
    /// k-dimensional measure.
    pub measure: f64,
    /// Tangential gradients of the barycentric coordinates, one `[f64; 3]` per vertex.
    pub grad: Vec<[f64; 3]>,
    pub vertices: Vec<[f64; 3]>,
}

impl SimplexGeom {
    pub fn new(dim: usize, vertices: &[[f64; 3]]) -> Self {
        let k = vertices.len() - 1;
        let x0 = vertices[0];
        // J columns are edge vectors, G = J^T J is the metric.
        let cols: Vec<[f64; 3]> = (1..=k).map(|i| sub(vertices[i], x0)).collect();
        let mut g = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                g[i * k + j] = dot(cols[i], cols[j]);
            }
        }
        let (det, ginv) = small_inverse(&g, k);
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        let measure = det.max(0.0).sqrt() / fact;
        let mut grad = vec![[0.0; 3]; k + 1];
        for i in 0..k {
            let mut v = [0.0; 3];
            for j in 0..k {
                let c = ginv[i * k + j];
                for a in 0..3 {
                    v[a] += c * cols[j][a];
                }
            }
            grad[i + 1] = v;
            for a in 0..3 {
                grad[0][a] -= v[a];
            }
        }
        let _ = dim;
        SimplexGeom { dim, measure, grad, vertices: vertices.to_vec() }
    }

    pub fn point(&self, bary: &[f64]) -> [f64; 3] {
        let mut p = [0.0; 3];
        for (l, v) in bary.iter().zip(&self.vertices) {
            for a in 0..3 {
                p[a] += l * v[a];
            }
        }
        p
    }
}

/// Signed volume of a full-dimensional simplex (triangle in 2D, tetrahedron in 3D).
pub fn signed_volume(dim: usize, v: &[[f64; 3]]) -> f64 {
    match dim {
        2 => {
            let a = sub(v[1], v[0]);
            let b = sub(v[2], v[0]);
            0.5 * (a[0] * b[1] - a[1] * b[0])
        }
        3 => {
            let a = sub(v[1], v[0]);
            let b = sub(v[2], v[0]);
            let c = sub(v[3], v[0]);
            dot(a, cross(b, c)) / 6.0
        }
        _ => panic!("unsupported dimension {dim}"),
    }
}

pub fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Determinant and inverse of a k x k row-major matrix, k <= 3.
fn small_inverse(g: &[f64], k: usize) -> (f64, Vec<f64>) {
    match k {
        0 => (1.0, vec![]),
        1 => (g[0], vec![1.0 / g[0]]),
        2 => {
            let det = g[0] * g[3] - g[1] * g[2];
            (det, vec![g[3] / det, -g[1] / det, -g[2] / det, g[0] / det])
        }
        3 => {
            let m = |i: usize, j: usize| g[i * 3 + j];
            let c00 = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
            let c01 = m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2);
            let c02 = m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0);
            let det = m(0, 0) * c00 + m(0, 1) * c01 + m(0, 2) * c02;
            let inv = vec![
                c00 / det,
                (m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2)) / det,
                (m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1)) / det,
                c01 / det,
                (m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0)) / det,
                (m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2)) / det,
                c02 / det,
                (m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1)) / det,
                (m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)) / det,
            ];
            (det, inv)
        }
        _ => panic!("simplex dimension {k} not supported"),
    }
}

/// Quadrature rule on a reference simplex in barycentric coordinates.
/// Weights sum to one, so integrals are `measure * sum(w_q f(x_q))`.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Grundmann-Moller rule of degree `2s + 1` on the k-simplex.
pub fn grundmann_moller(k: usize, s: usize) -> Quadrature {
    let deg = 2 * s + 1;
    let kf: f64 = (1..=k).map(|i| i as f64).product();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for i in 0..=s {
        let denom = (deg + k - 2 * i) as f64;
        let num = denom.powi(deg as i32);
        let fi: f64 = (1..=i).map(|t| t as f64).product();
        let fdi: f64 = (1..=(deg + k - i)).map(|t| t as f64).product();
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let w = sign * num / (fi * fdi) / 4f64.powi(s as i32) * kf;
        for beta in compositions(s - i, k + 1) {
            points.push(beta.iter().map(|&b| (2 * b + 1) as f64 / denom).collect());
            weights.push(w);
        }
    }
    Quadrature { points, weights }
}

/// All vectors of `parts` non-negative integers summing to `total`.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}
