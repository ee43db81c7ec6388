//! The discrete generator on reduced coordinates `x = [zeta, w1_int, d]`.
//!
//! `zeta` are coefficients of the divergence-free fluid velocity in the Leray basis, `w1_int`
//! the interior structure velocity and `d` the structure displacement. With `v = [zeta, w1_int]`
//! the semi-discrete system reads
//!
//! ```text
//!   M_v v' = -A_r v - E_r^T K_d d
//!       d' =  E_r v
//! ```
//!
//! so `M_H x' = K x` with `M_H = diag(M_v, K_d)` the energy Gram matrix and
//! `K = [[-A_r, -E_r^T K_d], [K_d E_r, 0]]`.

use crate::error::{Error, Result};
use crate::fem::{self, ConstrainedForms, Dims, FormSet, SpaceLayout, StateVector};
use crate::leray::LerayReducer;
use crate::linalg::{cholesky_lower, col_to_vec, lower_solve, lower_transpose_solve, matvec_dense, Scalar};
use faer::{c64, Mat};

#[derive(Debug, Clone)]
pub struct GeneratorBundle {
    pub dims: Dims,
    pub layout: SpaceLayout,
    pub forms: FormSet,
    pub cf: ConstrainedForms,
    pub leray: LerayReducer,
    /// Sizes of the `zeta`, `v = [zeta, w1_int]` and full reduced blocks.
    pub n_zeta: usize,
    pub n_v: usize,
    pub n: usize,
    pub m_v: Mat<f64>,
    pub a_r: Mat<f64>,
    pub e_r: Mat<f64>,
    pub k_d: Mat<f64>,
    pub l_v: Mat<f64>,
    pub l_d: Mat<f64>,
    /// `M_H` and `K` assembled densely.
    pub m_h: Mat<f64>,
    pub k: Mat<f64>,
    /// Generator in `M_H`-orthonormal coordinates: `L^{-1} K L^{-T}`.
    pub a_hat: Mat<f64>,
}

impl GeneratorBundle {
    pub fn new(mesh: &crate::mesh::Mesh, lambda: f64, mu: f64) -> Result<Self> {
        let layout = SpaceLayout::new(mesh)?;
        let forms = fem::assemble_forms(mesh, &layout, lambda, mu)?;
        Self::from_forms(layout, forms)
    }

    pub fn from_forms(layout: SpaceLayout, forms: FormSet) -> Result<Self> {
        let dims = forms.dims;
        let cf = ConstrainedForms::new(&forms, &layout);
        let leray = LerayReducer::new(&cf)?;
        let n_zeta = leray.dim();
        let n_v = n_zeta + dims.n_w_int;
        let n = n_v + dims.n_w;

        // V maps v to y: y = [Z zeta, w1_int].
        let mut v = Mat::<f64>::zeros(dims.n_y, n_v);
        v.as_mut().submatrix_mut(0, 0, dims.n_u_free, n_zeta).copy_from(&leray.z);
        for i in 0..dims.n_w_int {
            v[(dims.n_u_free + i, n_zeta + i)] = 1.0;
        }
        let m_v = sym(v.transpose() * (cf.m_y.to_dense() * &v));
        let a_r = sym(v.transpose() * (cf.a_y.to_dense() * &v));
        let e_r = v.subrows(dims.n_u_int, dims.n_w).to_owned();
        let k_d = cf.k_d.to_dense();
        let l_v = cholesky_lower(m_v.as_ref()).map_err(|e| Error::Factorization(format!("kinetic mass: {e}")))?;
        let l_d = cholesky_lower(k_d.as_ref()).map_err(|e| Error::Factorization(format!("displacement stiffness: {e}")))?;

        let mut m_h = Mat::<f64>::zeros(n, n);
        m_h.as_mut().submatrix_mut(0, 0, n_v, n_v).copy_from(&m_v);
        m_h.as_mut().submatrix_mut(n_v, n_v, dims.n_w, dims.n_w).copy_from(&k_d);
        let kde = &k_d * &e_r;
        let mut k = Mat::<f64>::zeros(n, n);
        k.as_mut().submatrix_mut(0, 0, n_v, n_v).copy_from(-&a_r);
        k.as_mut().submatrix_mut(0, n_v, n_v, dims.n_w).copy_from(-kde.transpose());
        k.as_mut().submatrix_mut(n_v, 0, dims.n_w, n_v).copy_from(&kde);

        // D = L_v^{-1} A_r L_v^{-T},  C = L_d^T E_r L_v^{-T}.
        let mut dmat = a_r.clone();
        lower_solve(l_v.as_ref(), &mut dmat);
        let mut dmat = dmat.transpose().to_owned();
        lower_solve(l_v.as_ref(), &mut dmat);
        let dmat = sym(dmat);
        let mut ct = (l_d.transpose() * &e_r).transpose().to_owned();
        lower_solve(l_v.as_ref(), &mut ct);
        let mut a_hat = Mat::<f64>::zeros(n, n);
        a_hat.as_mut().submatrix_mut(0, 0, n_v, n_v).copy_from(-&dmat);
        a_hat.as_mut().submatrix_mut(0, n_v, n_v, dims.n_w).copy_from(-&ct);
        a_hat.as_mut().submatrix_mut(n_v, 0, dims.n_w, n_v).copy_from(ct.transpose());

        Ok(GeneratorBundle { dims, layout, forms, cf, leray, n_zeta, n_v, n, m_v, a_r, e_r, k_d, l_v, l_d, m_h, k, a_hat })
    }

    /// `A_h x = M_H^{-1} K x`; the displacement rows are evaluated directly as `E_r v`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let (v, d) = x.split_at(self.n_v);
        let kd = matvec_dense(self.k_d.as_ref(), d);
        let mut rhs = matvec_dense(self.a_r.as_ref(), v);
        let et = matvec_dense(self.e_r.transpose(), &kd);
        for (r, e) in rhs.iter_mut().zip(&et) {
            *r = -*r - e;
        }
        let mut out = self.solve_m_v(&rhs);
        out.extend(matvec_dense(self.e_r.as_ref(), v));
        out
    }

    pub fn apply_complex(&self, x: &[c64]) -> Vec<c64> {
        let re: Vec<f64> = x.iter().map(|z| z.re).collect();
        let im: Vec<f64> = x.iter().map(|z| z.im).collect();
        self.apply(&re).into_iter().zip(self.apply(&im)).map(|(a, b)| c64::new(a, b)).collect()
    }

    /// `A_h^* x = M_H^{-1} K^T x`, the adjoint in the energy inner product.
    pub fn apply_adjoint(&self, x: &[f64]) -> Vec<f64> {
        let (v, d) = x.split_at(self.n_v);
        let kd = matvec_dense(self.k_d.as_ref(), d);
        let mut rhs = matvec_dense(self.a_r.as_ref(), v);
        let et = matvec_dense(self.e_r.transpose(), &kd);
        for (r, e) in rhs.iter_mut().zip(&et) {
            *r = -*r + e;
        }
        let mut out = self.solve_m_v(&rhs);
        out.extend(matvec_dense(self.e_r.as_ref(), v).into_iter().map(|z| -z));
        out
    }

    fn solve_m_v(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        lower_solve(self.l_v.as_ref(), &mut m);
        lower_transpose_solve(self.l_v.as_ref(), &mut m);
        col_to_vec(m.col(0))
    }

    pub fn inner<T: Scalar>(&self, a: &[T], b: &[T]) -> T {
        let (av, ad) = a.split_at(self.n_v);
        let (bv, bd) = b.split_at(self.n_v);
        dense_form(&self.m_v, av, bv) + dense_form(&self.k_d, ad, bd)
    }

    pub fn norm<T: Scalar>(&self, a: &[T]) -> f64 {
        self.inner(a, a).re().max(0.0).sqrt()
    }

    /// Energy of a state, `||x||_H^2 / 2`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        0.5 * self.inner(x, x)
    }

    /// Fluid dissipation `u^T A_f u`.
    pub fn dissipation(&self, x: &[f64]) -> f64 {
        dense_form(&self.a_r, &x[..self.n_v], &x[..self.n_v])
    }

    /// Orthonormal coordinates `L^T x`.
    pub fn to_hat(&self, x: &[f64]) -> Vec<f64> {
        let (v, d) = x.split_at(self.n_v);
        let mut out = matvec_dense(self.l_v.transpose(), v);
        out.extend(matvec_dense(self.l_d.transpose(), d));
        out
    }

    pub fn from_hat(&self, xh: &[f64]) -> Vec<f64> {
        let mut v = Mat::from_fn(self.n_v, 1, |i, _| xh[i]);
        lower_transpose_solve(self.l_v.as_ref(), &mut v);
        let mut d = Mat::from_fn(self.dims.n_w, 1, |i, _| xh[self.n_v + i]);
        lower_transpose_solve(self.l_d.as_ref(), &mut d);
        let mut out = col_to_vec(v.col(0));
        out.extend(col_to_vec(d.col(0)));
        out
    }

    /// Maps the columns of an orthonormal-coordinate matrix back to reduced coordinates.
    pub fn from_hat_mat(&self, xh: &Mat<f64>) -> Mat<f64> {
        let mut v = xh.subrows(0, self.n_v).to_owned();
        lower_transpose_solve(self.l_v.as_ref(), &mut v);
        let mut d = xh.subrows(self.n_v, self.dims.n_w).to_owned();
        lower_transpose_solve(self.l_d.as_ref(), &mut d);
        let mut out = Mat::zeros(self.n, xh.ncols());
        out.as_mut().subrows_mut(0, self.n_v).copy_from(&v);
        out.as_mut().subrows_mut(self.n_v, self.dims.n_w).copy_from(&d);
        out
    }

    /// Velocity coordinates `y` and displacement `d` of a reduced state.
    pub fn to_constrained(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut y = self.leray.velocity(&x[..self.n_zeta]);
        y.extend_from_slice(&x[self.n_zeta..self.n_v]);
        (y, x[self.n_v..].to_vec())
    }

    /// Inverse of `to_constrained`; fails if `y` is not discretely divergence free.
    pub fn from_constrained(&self, y: &[f64], d: &[f64], tol: f64) -> Result<Vec<f64>> {
        let u = &y[..self.dims.n_u_free];
        let zeta = self.leray.coordinates(u);
        let back = self.leray.velocity(&zeta);
        let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let err = back.iter().zip(u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if err > tol * scale.max(y.iter().chain(d).fold(0.0f64, |m, v| m.max(v.abs()))) {
            return Err(Error::Domain(format!("fluid velocity is not discretely divergence free (defect {err:.3e})")));
        }
        let mut x = zeta;
        x.extend_from_slice(&y[self.dims.n_u_free..]);
        x.extend_from_slice(d);
        Ok(x)
    }

    pub fn expand(&self, x: &[f64]) -> StateVector {
        let (y, d) = self.to_constrained(x);
        fem::expand(&self.layout, &self.dims, &y, &d)
    }

    pub fn restrict(&self, s: &StateVector, tol: f64) -> Result<Vec<f64>> {
        let (y, d) = fem::restrict(&self.layout, &self.dims, s, tol)?;
        self.from_constrained(&y, &d, tol)
    }

    /// `J = diag(I, -I)`, with `A^* = J A J`.
    pub fn flip<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        x.iter().enumerate().map(|(i, &v)| if i < self.n_v { v } else { -v }).collect()
    }

    /// Explicit matrix `M_H^{-1} K`.
    pub fn generator_matrix(&self) -> Mat<f64> {
        let mut out = self.k.clone();
        let mut top = out.subrows(0, self.n_v).to_owned();
        lower_solve(self.l_v.as_ref(), &mut top);
        lower_transpose_solve(self.l_v.as_ref(), &mut top);
        out.as_mut().subrows_mut(0, self.n_v).copy_from(&top);
        let mut low = Mat::<f64>::zeros(self.dims.n_w, self.n);
        low.as_mut().subcols_mut(0, self.n_v).copy_from(&self.e_r);
        out.as_mut().subrows_mut(self.n_v, self.dims.n_w).copy_from(&low);
        out
    }
}

fn sym(mut a: Mat<f64>) -> Mat<f64> {
    crate::linalg::symmetrize(&mut a);
    a
}

fn dense_form<T: Scalar>(m: &Mat<f64>, a: &[T], b: &[T]) -> T {
    let mut s = T::default();
    for j in 0..m.ncols() {
        let mut col = T::default();
        for i in 0..m.nrows() {
            col += a[i] * m[(i, j)];
        }
        s += col * b[j].conj();
    }
    s
}

pub fn random_state(bundle: &GeneratorBundle, rng: &mut impl rand::Rng) -> Vec<f64> {
    let x: Vec<f64> = (0..bundle.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nrm = bundle.norm(&x);
    x.into_iter().map(|v| v / nrm).collect()
}
