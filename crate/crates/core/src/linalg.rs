//! Small sparse CSR type, a real/complex scalar abstraction and dense helpers on top of faer.

use crate::error::{Error, Result};
use faer::sparse::{SparseColMat, Triplet};
use faer::{c64, Col, Mat, MatRef, Side};
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

pub trait Scalar:
    Copy + Default + Debug + PartialEq + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> + AddAssign + Mul<f64, Output = Self> + Send + Sync + 'static
{
    fn conj(self) -> Self;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn from_f64(x: f64) -> Self;
    fn abs2(self) -> f64;
}

impl Scalar for f64 {
    fn conj(self) -> Self {
        self
    }
    fn re(self) -> f64 {
        self
    }
    fn im(self) -> f64 {
        0.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn abs2(self) -> f64 {
        self * self
    }
}

impl Scalar for c64 {
    fn conj(self) -> Self {
        c64::new(self.re, -self.im)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn im(self) -> f64 {
        self.im
    }
    fn from_f64(x: f64) -> Self {
        c64::new(x, 0.0)
    }
    fn abs2(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Duplicate entries are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in t {
            debug_assert!(i < nrows && j < ncols);
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Csr { nrows, ncols, indptr, indices, values }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Csr { nrows, ncols, indptr: vec![0; nrows + 1], indices: vec![], values: vec![] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                out.push((i, self.indices[k], self.values[k]));
            }
        }
        out
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = &self.indices[self.indptr[i]..self.indptr[i + 1]];
        match r.binary_search(&j) {
            Ok(k) => self.values[self.indptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| {
                let mut s = T::default();
                for k in self.indptr[i]..self.indptr[i + 1] {
                    s += x[self.indices[k]] * self.values[k];
                }
                s
            })
            .collect()
    }

    pub fn transpose(&self) -> Csr {
        Csr::from_triplets(self.ncols, self.nrows, self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect())
    }

    pub fn scaled(&self, s: f64) -> Csr {
        let mut c = self.clone();
        c.values.iter_mut().for_each(|v| *v *= s);
        c
    }

    pub fn add(&self, other: &Csr) -> Csr {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = self.triplets();
        t.extend(other.triplets());
        Csr::from_triplets(self.nrows, self.ncols, t)
    }

    pub fn matmul(&self, other: &Csr) -> Csr {
        assert_eq!(self.ncols, other.nrows);
        let mut t = Vec::new();
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut cols = Vec::new();
        for i in 0..self.nrows {
            cols.clear();
            for k in self.indptr[i]..self.indptr[i + 1] {
                let (j, a) = (self.indices[k], self.values[k]);
                for l in other.indptr[j]..other.indptr[j + 1] {
                    let c = other.indices[l];
                    if mark[c] != i {
                        mark[c] = i;
                        acc[c] = 0.0;
                        cols.push(c);
                    }
                    acc[c] += a * other.values[l];
                }
            }
            for &c in &cols {
                t.push((i, c, acc[c]));
            }
        }
        Csr::from_triplets(self.nrows, other.ncols, t)
    }

    /// Rows in `rows` and columns in `cols`, renumbered in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Csr {
        let mut cmap = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            cmap[c] = k;
        }
        let mut t = Vec::new();
        for (ri, &r) in rows.iter().enumerate() {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = cmap[self.indices[k]];
                if c != usize::MAX {
                    t.push((ri, c, self.values[k]));
                }
            }
        }
        Csr::from_triplets(rows.len(), cols.len(), t)
    }

    /// Places `self` at offset (r0, c0) inside a larger zero matrix.
    pub fn embed(&self, nrows: usize, ncols: usize, r0: usize, c0: usize) -> Csr {
        Csr::from_triplets(nrows, ncols, self.triplets().into_iter().map(|(i, j, v)| (i + r0, j + c0, v)).collect())
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn to_faer(&self) -> SparseColMat<usize, f64> {
        let t: Vec<Triplet<usize, usize, f64>> = self.triplets().into_iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t).expect("valid triplets")
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max |A - A^T| relative to max |A|.
    pub fn asymmetry(&self) -> f64 {
        let d = self.add(&self.transpose().scaled(-1.0));
        d.max_abs() / self.max_abs().max(f64::MIN_POSITIVE)
    }
}

/// Sparse LU factorization of a square real matrix.
pub struct SparseLu {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

impl SparseLu {
    pub fn new(a: &Csr) -> Result<Self> {
        let lu = a.to_faer().sp_lu().map_err(|e| Error::Factorization(format!("sparse LU: {e:?}")))?;
        Ok(SparseLu { lu, n: a.nrows })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        use faer::linalg::solvers::Solve;
        let rhs = Col::from_fn(self.n, |i| b[i]);
        let x = self.lu.solve(&rhs);
        (0..self.n).map(|i| x[i]).collect()
    }

    pub fn solve_mat(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        use faer::linalg::solvers::Solve;
        self.lu.solve(b)
    }
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct SparseChol {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    n: usize,
}

impl SparseChol {
    pub fn new(a: &Csr) -> Result<Self> {
        let llt = a.to_faer().sp_cholesky(Side::Lower).map_err(|e| Error::Factorization(format!("sparse Cholesky: {e:?}")))?;
        Ok(SparseChol { llt, n: a.nrows })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        use faer::linalg::solvers::Solve;
        let rhs = Col::from_fn(self.n, |i| b[i]);
        let x = self.llt.solve(&rhs);
        (0..self.n).map(|i| x[i]).collect()
    }

    pub fn solve_mat(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        use faer::linalg::solvers::Solve;
        self.llt.solve(b)
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::default();
    for (x, y) in a.iter().zip(b) {
        s += *x * y.conj();
    }
    s
}

pub fn norm2<T: Scalar>(a: &[T]) -> f64 {
    a.iter().map(|x| x.abs2()).sum::<f64>().sqrt()
}

/// `a^T M conj(b)` for a symmetric real `M`.
pub fn form<T: Scalar>(m: &Csr, a: &[T], b: &[T]) -> T {
    dot(&m.matvec(a), b)
}

pub fn col_to_vec(c: faer::ColRef<'_, f64>) -> Vec<f64> {
    (0..c.nrows()).map(|i| c[i]).collect()
}

pub fn vec_to_col(v: &[f64]) -> Col<f64> {
    Col::from_fn(v.len(), |i| v[i])
}

pub fn matvec_dense(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    let y = a * vec_to_col(x);
    col_to_vec(y.as_ref())
}

/// Dense Cholesky factor L (lower) with A = L L^T.
pub fn cholesky_lower(a: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let llt = a.llt(Side::Lower).map_err(|e| Error::Factorization(format!("dense Cholesky: {e:?}")))?;
    Ok(llt.L().to_owned())
}

/// Solves L X = B in place for lower-triangular L.
pub fn lower_solve(l: MatRef<'_, f64>, b: &mut Mat<f64>) {
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, b.as_mut(), faer::Par::rayon(0));
}

/// Solves L^T X = B in place for lower-triangular L.
pub fn lower_transpose_solve(l: MatRef<'_, f64>, b: &mut Mat<f64>) {
    faer::linalg::triangular_solve::solve_upper_triangular_in_place(l.transpose(), b.as_mut(), faer::Par::rayon(0));
}

pub fn symmetrize(a: &mut Mat<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_products_match_dense() {
        let a = Csr::from_triplets(3, 2, vec![(0, 0, 1.0), (2, 1, 2.0), (0, 0, 0.5), (1, 1, -1.0)]);
        let b = Csr::from_triplets(2, 3, vec![(0, 2, 3.0), (1, 0, 4.0)]);
        let c = a.matmul(&b).to_dense();
        let d = a.to_dense() * b.to_dense();
        assert!((c - d).norm_l2() < 1e-15);
        assert_eq!(a.get(0, 0), 1.5);
        assert_eq!(a.transpose().get(1, 2), 2.0);
        let y = a.matvec(&[1.0, 2.0]);
        assert_eq!(y, vec![1.5, -2.0, 4.0]);
    }

    #[test]
    fn sparse_solvers() {
        let a = Csr::from_triplets(3, 3, vec![(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (2, 2, 2.0)]);
        let b = [1.0, 2.0, 3.0];
        for x in [SparseLu::new(&a).unwrap().solve(&b), SparseChol::new(&a).unwrap().solve(&b)] {
            let r = a.matvec(&x);
            assert!(r.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-14));
        }
    }
}
