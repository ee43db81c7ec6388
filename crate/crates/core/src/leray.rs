//! Discretely divergence-free reduction of the fluid velocity.

use crate::error::{Error, Result};
use crate::fem::ConstrainedForms;
use crate::linalg::{cholesky_lower, col_to_vec, matvec_dense, vec_to_col, Csr};
use faer::{Mat, MatRef};

/// Basis `Z` of `ker B` on the independent fluid dofs, orthonormal in the fluid mass.
#[derive(Debug, Clone)]
pub struct LerayReducer {
    pub z: Mat<f64>,
    pub rank: usize,
    pub n_p: usize,
    pub singular_values: Vec<f64>,
    pub m_u: Csr,
    pub b_u: Csr,
    u_range: Mat<f64>,
    v_range: Mat<f64>,
}

impl LerayReducer {
    pub fn new(cf: &ConstrainedForms) -> Result<Self> {
        let dims = cf.dims;
        let (b_u, m_u) = (cf.b_u.clone(), cf.m_u.clone());
        let svd = b_u.to_dense().svd().map_err(|e| Error::Factorization(format!("SVD of B: {e:?}")))?;
        let s = svd.S().column_vector();
        let sv: Vec<f64> = (0..s.nrows()).map(|i| s[i]).collect();
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let rank = sv.iter().filter(|&&x| x > 1e-10 * smax).count();
        if rank + 1 < dims.n_p {
            return Err(Error::RankDeficient(format!("rank(B) = {rank} but n_p = {}", dims.n_p)));
        }
        let v = svd.V();
        let z0 = v.subcols(rank, dims.n_u_free - rank).to_owned();
        let c = z0.transpose() * (m_u.to_dense() * &z0);
        let l = cholesky_lower(c.as_ref())?;
        // Z = Z0 L^{-T}  <=>  Z^T = L^{-1} Z0^T
        let mut zt = z0.transpose().to_owned();
        crate::linalg::lower_solve(l.as_ref(), &mut zt);
        let z = zt.transpose().to_owned();
        Ok(LerayReducer {
            z,
            rank,
            n_p: dims.n_p,
            singular_values: sv,
            m_u,
            b_u,
            u_range: svd.U().subcols(0, rank).to_owned(),
            v_range: v.subcols(0, rank).to_owned(),
        })
    }

    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    /// `Z^T A Z` for a bilinear form on the independent fluid dofs.
    pub fn reduce_form(&self, a: &Csr) -> Mat<f64> {
        self.z.transpose() * (a.to_dense() * &self.z)
    }

    /// `Z^T M O Z` for an operator `O` on the independent fluid dofs.
    pub fn reduce_operator(&self, o: MatRef<'_, f64>) -> Mat<f64> {
        self.z.transpose() * (self.m_u.to_dense() * (o * &self.z))
    }

    pub fn coordinates(&self, u: &[f64]) -> Vec<f64> {
        let mu = self.m_u.matvec(u);
        matvec_dense(self.z.transpose(), &mu)
    }

    pub fn velocity(&self, zeta: &[f64]) -> Vec<f64> {
        matvec_dense(self.z.as_ref(), zeta)
    }

    /// Least-squares pressure `p` with `B^T p = r` for a momentum residual annihilated by `Z`.
    pub fn lift_pressure(&self, r: &[f64]) -> Vec<f64> {
        let vr = self.v_range.transpose() * vec_to_col(r);
        let scaled = faer::Col::from_fn(self.rank, |k| vr[k] / self.singular_values[k]);
        col_to_vec((&self.u_range * scaled).as_ref())
    }

    pub fn divergence_defect(&self) -> f64 {
        let bz = self.b_u.to_dense() * &self.z;
        bz.norm_max()
    }
}
