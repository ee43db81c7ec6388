//! Eigenvalues of the discrete generator, resolvent scans along the imaginary axis and the
//! overdetermined Lame eigenvalue diagnostic.

use crate::error::{Error, Result};
use crate::generator::GeneratorBundle;
use crate::linalg::{cholesky_lower, lower_solve, lower_transpose_solve, Csr};
use crate::nullspace::NullspaceData;
use faer::linalg::solvers::Solve;
use faer::{c64, Mat, Side};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SpectrumMode {
    Dense,
    ShiftInvert { shift_re: f64, shift_im: f64 },
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Sorted by increasing modulus.
    pub eigenvalues: Vec<c64>,
    /// Eigenvectors in reduced coordinates with unit energy norm, one per column.
    pub vectors: Mat<c64>,
    /// `||A v - lambda v||_H` by explicit application of the generator.
    pub residuals: Vec<f64>,
    pub zero_tol: f64,
}

impl SpectrumResult {
    pub fn zero_count(&self) -> usize {
        self.eigenvalues.iter().filter(|z| z.norm() < self.zero_tol).count()
    }

    pub fn nonzero(&self) -> impl Iterator<Item = &c64> {
        self.eigenvalues.iter().filter(move |z| z.norm() >= self.zero_tol)
    }

    /// Largest real part among nonzero eigenvalues.
    pub fn abscissa(&self) -> f64 {
        self.nonzero().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn report(&self, gap_tol: f64) -> SpectrumReport {
        let abscissa = self.abscissa();
        SpectrumReport {
            n: self.eigenvalues.len(),
            eigenvalues: self.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
            residuals: self.residuals.clone(),
            zero_count: self.zero_count(),
            zero_tol: self.zero_tol,
            spectral_abscissa: abscissa,
            gap: -abscissa,
            near_axis: self.nonzero().filter(|z| z.re.abs() < gap_tol).count(),
            gap_tol,
            max_residual: self.residuals.iter().cloned().fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub n: usize,
    pub eigenvalues: Vec<[f64; 2]>,
    pub residuals: Vec<f64>,
    pub zero_count: usize,
    pub zero_tol: f64,
    /// Largest real part over nonzero eigenvalues.
    pub spectral_abscissa: f64,
    /// `-spectral_abscissa`.
    pub gap: f64,
    pub near_axis: usize,
    pub gap_tol: f64,
    pub max_residual: f64,
}

/// Complex columns of an orthonormal-coordinate matrix mapped back to reduced coordinates.
fn back_transform(bundle: &GeneratorBundle, v: &Mat<c64>) -> Mat<c64> {
    let re = Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)].re);
    let im = Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)].im);
    let (re, im) = (bundle.from_hat_mat(&re), bundle.from_hat_mat(&im));
    Mat::from_fn(re.nrows(), re.ncols(), |i, j| c64::new(re[(i, j)], im[(i, j)]))
}

fn residual(bundle: &GeneratorBundle, lambda: c64, x: &[c64]) -> f64 {
    let ax = bundle.apply_complex(x);
    let r: Vec<c64> = ax.iter().zip(x).map(|(a, b)| *a - lambda * *b).collect();
    bundle.norm(&r) / bundle.norm(x)
}

pub fn compute_spectrum(bundle: &GeneratorBundle, n_eigs: Option<usize>, mode: SpectrumMode) -> Result<SpectrumResult> {
    let (vals, vecs) = match mode {
        SpectrumMode::Dense => {
            let evd = bundle.a_hat.eigen().map_err(|e| Error::Factorization(format!("eigendecomposition: {e:?}")))?;
            let s = evd.S().column_vector();
            let vals: Vec<c64> = (0..s.nrows()).map(|i| s[i]).collect();
            (vals, evd.U().to_owned())
        }
        SpectrumMode::ShiftInvert { shift_re, shift_im } => {
            let k = n_eigs.unwrap_or(6).min(bundle.n);
            shift_invert_arnoldi(&bundle.a_hat, c64::new(shift_re, shift_im), k, 1e-10)?
        }
    };
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].norm().total_cmp(&vals[b].norm()).then(vals[a].im.total_cmp(&vals[b].im)));
    if let (SpectrumMode::Dense, Some(k)) = (mode, n_eigs) {
        order.truncate(k);
    }
    let vh = Mat::from_fn(bundle.n, order.len(), |i, j| vecs[(i, order[j])]);
    let mut vectors = back_transform(bundle, &vh);
    let eigenvalues: Vec<c64> = order.iter().map(|&i| vals[i]).collect();
    let mut residuals = Vec::with_capacity(order.len());
    for j in 0..order.len() {
        let mut x: Vec<c64> = (0..bundle.n).map(|i| vectors[(i, j)]).collect();
        let nrm = bundle.norm(&x);
        x.iter_mut().for_each(|v| *v = *v * (1.0 / nrm));
        for i in 0..bundle.n {
            vectors[(i, j)] = x[i];
        }
        residuals.push(residual(bundle, eigenvalues[j], &x));
    }
    Ok(SpectrumResult { eigenvalues, vectors, residuals, zero_tol: 1e-6 })
}

/// Eigenvalues of `a` nearest `shift` by Arnoldi on `(a - shift)^{-1}` with explicit restarts.
/// A shift sitting on an eigenvalue is retried with small perturbations.
pub fn shift_invert_arnoldi(a: &Mat<f64>, shift: c64, k: usize, tol: f64) -> Result<(Vec<c64>, Mat<c64>)> {
    let scale = 1.0 + shift.norm() + a.norm_max();
    let mut last = None;
    for eps in [0.0, 1e-8, 1e-6, 1e-4] {
        let s = shift + c64::new(eps, eps) * scale;
        match shift_invert_once(a, s, k, tol) {
            Ok(r) => return Ok(r),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap())
}

fn shift_invert_once(a: &Mat<f64>, shift: c64, k: usize, tol: f64) -> Result<(Vec<c64>, Mat<c64>)> {
    let n = a.nrows();
    let shifted = Mat::from_fn(n, n, |i, j| c64::new(a[(i, j)], 0.0) - if i == j { shift } else { c64::new(0.0, 0.0) });
    let lu = shifted.partial_piv_lu();
    let m = n.min((3 * k).max(k + 20));
    let mut start: Vec<c64> = (0..n).map(|i| c64::new(1.0 + (i as f64 * 0.618).sin(), 0.3 * (i as f64 * 1.3).cos())).collect();
    let ac = Mat::from_fn(n, n, |i, j| c64::new(a[(i, j)], 0.0));
    let mut best: Option<(Vec<c64>, Mat<c64>)> = None;
    for _restart in 0..50 {
        let (q, h, steps) = arnoldi(&lu, &start, m);
        if (0..=steps.min(m)).any(|i| (0..steps).any(|j| !(h[(i, j)].re.is_finite() && h[(i, j)].im.is_finite()))) {
            return Err(Error::Factorization(format!("shifted operator is singular at {shift}")));
        }
        let hm = Mat::from_fn(steps, steps, |i, j| h[(i, j)]);
        let evd = hm.eigen().map_err(|e| Error::Factorization(format!("Ritz values: {e:?}")))?;
        let s = evd.S().column_vector();
        let mut idx: Vec<usize> = (0..steps).collect();
        idx.sort_by(|&x, &y| s[y].norm().total_cmp(&s[x].norm()));
        idx.truncate(k.min(steps));
        let u = evd.U();
        let qm = q.subcols(0, steps);
        let mut vals = Vec::new();
        let mut vecs = Mat::<c64>::zeros(n, idx.len());
        let mut worst: f64 = 0.0;
        for (c, &i) in idx.iter().enumerate() {
            let lam = shift + c64::new(1.0, 0.0) / s[i];
            let y = qm * u.col(i);
            let nrm = y.norm_l2();
            let y = y * faer::Scale(c64::new(1.0 / nrm, 0.0));
            let r = &ac * &y - &y * faer::Scale(lam);
            worst = worst.max(r.norm_l2() / lam.norm().max(1.0));
            vecs.as_mut().col_mut(c).copy_from(&y);
            vals.push(lam);
        }
        let done = worst < tol;
        start = (0..n).map(|i| (0..vecs.ncols()).fold(c64::new(0.0, 0.0), |acc, c| acc + vecs[(i, c)])).collect();
        best = Some((vals, vecs));
        if done || steps < m {
            break;
        }
    }
    best.ok_or_else(|| Error::Factorization("Arnoldi produced no Ritz pairs".into()))
}

fn arnoldi(lu: &faer::linalg::solvers::PartialPivLu<c64>, start: &[c64], m: usize) -> (Mat<c64>, Mat<c64>, usize) {
    let n = start.len();
    let mut q = Mat::<c64>::zeros(n, m + 1);
    let mut h = Mat::<c64>::zeros(m + 1, m);
    let v = faer::Col::from_fn(n, |i| start[i]);
    let nrm = v.norm_l2();
    q.as_mut().col_mut(0).copy_from(v * faer::Scale(c64::new(1.0 / nrm, 0.0)));
    for j in 0..m {
        let mut w = lu.solve(q.col(j).as_mat()).col(0).to_owned();
        for _pass in 0..2 {
            for i in 0..=j {
                let c = q.col(i).adjoint() * &w;
                h[(i, j)] += c;
                w -= q.col(i) * faer::Scale(c);
            }
        }
        let beta = w.norm_l2();
        h[(j + 1, j)] = c64::new(beta, 0.0);
        if beta < 1e-14 {
            return (q, h, j + 1);
        }
        q.as_mut().col_mut(j + 1).copy_from(w * faer::Scale(c64::new(1.0 / beta, 0.0)));
    }
    (q, h, m)
}

/// Generator restricted to the energy-orthogonal complement of the kernel, in orthonormal coordinates.
pub fn restrict_to_nperp(bundle: &GeneratorBundle, null: &NullspaceData) -> Mat<f64> {
    let a = &bundle.a_hat;
    let n = a.nrows();
    let mut phi = bundle.to_hat(&null.x);
    let nrm = phi.iter().map(|v| v * v).sum::<f64>().sqrt();
    phi.iter_mut().for_each(|v| *v /= nrm);
    // Householder reflector mapping phi to sign * e_1.
    let sign = if phi[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut w = phi.clone();
    w[0] += sign;
    let wn = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    w.iter_mut().for_each(|v| *v /= wn);
    let wc = faer::Col::from_fn(n, |i| w[i]);
    let aw = a * &wc;
    let wta = wc.transpose() * a;
    let wtaw = wc.transpose() * &aw;
    let h = Mat::from_fn(n, n, |i, j| a[(i, j)] - 2.0 * w[i] * wta[j] - 2.0 * aw[i] * w[j] + 4.0 * wtaw * w[i] * w[j]);
    h.submatrix(1, 1, n - 1, n - 1).to_owned()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanPoint {
    pub beta: f64,
    /// `||(i beta - A)^{-1}||`, `None` when the shifted operator is numerically singular.
    pub norm: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanResult {
    pub points: Vec<ScanPoint>,
    pub singular: Vec<f64>,
}

/// Resolvent norms along `i beta` for a matrix in orthonormal coordinates.
pub fn scan_imaginary_axis(a: &Mat<f64>, grid: &[f64]) -> ScanResult {
    let points: Vec<ScanPoint> = grid.iter().map(|&beta| ScanPoint { beta, norm: resolvent_norm(a, beta) }).collect();
    let singular = points.iter().filter(|p| p.norm.is_none()).map(|p| p.beta).collect();
    ScanResult { points, singular }
}

/// `1 / sigma_min(i beta - A)`: restarted Lanczos with full reorthogonalization on `(R^* R)^{-1}`.
pub fn resolvent_norm(a: &Mat<f64>, beta: f64) -> Option<f64> {
    let n = a.nrows();
    let anorm = a.norm_max() * n as f64;
    let r = Mat::from_fn(n, n, |i, j| c64::new(-a[(i, j)], if i == j { beta } else { 0.0 }));
    let lu = r.partial_piv_lu();
    let op = |x: &Mat<c64>| lu.solve(lu.solve_adjoint(x));
    let m = n.min(40);
    let mut start = Mat::from_fn(n, 1, |i, _| c64::new(1.0 + 0.1 * (i as f64).sin(), 0.05 * (i as f64 * 0.7).cos()));
    let mut theta = 0.0;
    for _restart in 0..20 {
        let mut q: Vec<Mat<c64>> = Vec::with_capacity(m + 1);
        let nrm = start.norm_l2();
        q.push(&start * faer::Scale(c64::new(1.0 / nrm, 0.0)));
        let (mut alpha, mut off) = (Vec::with_capacity(m), Vec::with_capacity(m));
        for j in 0..m {
            let mut w = op(&q[j]);
            if !w.norm_l2().is_finite() {
                return None;
            }
            alpha.push((q[j].adjoint() * &w)[(0, 0)].re);
            for _pass in 0..2 {
                for qi in &q {
                    let c = (qi.adjoint() * &w)[(0, 0)];
                    w -= qi * faer::Scale(c);
                }
            }
            let b = w.norm_l2();
            off.push(b);
            if b <= 1e-14 * alpha[j].abs() || j + 1 == m {
                break;
            }
            q.push(w * faer::Scale(c64::new(1.0 / b, 0.0)));
        }
        let k = alpha.len();
        let t = Mat::from_fn(k, k, |i, j| if i == j { alpha[i] } else if i + 1 == j || j + 1 == i { off[i.min(j)] } else { 0.0 });
        let evd = t.self_adjoint_eigen(faer::Side::Lower).ok()?;
        let s = evd.S().column_vector();
        theta = s[k - 1];
        let u = evd.U();
        if !(theta.is_finite() && theta > 0.0) || theta.sqrt() * anorm > 1e15 {
            return None;
        }
        // Residual of the top Ritz pair is |b_k u_{k,top}|.
        if (off[k - 1] * u[(k - 1, k - 1)]).abs() <= 1e-12 * theta || k < m {
            break;
        }
        start = Mat::zeros(n, 1);
        for (i, qi) in q.iter().enumerate().take(k) {
            start += qi * faer::Scale(c64::new(u[(i, k - 1)], 0.0));
        }
    }
    Some(theta.sqrt())
}

/// `1 / dist(i beta, eigenvalues)`.
pub fn inverse_distance(eigenvalues: &[c64], beta: f64) -> f64 {
    let p = c64::new(0.0, beta);
    1.0 / eigenvalues.iter().map(|z| (*z - p).norm()).fold(f64::INFINITY, f64::min)
}

pub fn parse_grid(spec: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("scan grid '{spec}' must be min:max:steps"));
    }
    let lo: f64 = parts[0].parse().map_err(|_| format!("bad scan minimum '{}'", parts[0]))?;
    let hi: f64 = parts[1].parse().map_err(|_| format!("bad scan maximum '{}'", parts[1]))?;
    let steps: usize = parts[2].parse().map_err(|_| format!("bad scan step count '{}'", parts[2]))?;
    if steps < 1 || !(hi >= lo) {
        return Err(format!("scan grid '{spec}' is empty"));
    }
    Ok(uniform_grid(lo, hi, steps))
}

pub fn uniform_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![lo];
    }
    (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeDefect {
    /// Clamped eigenvalue `beta^2` of `-div sigma(w) + w = beta^2 w`.
    pub beta2: f64,
    /// Relative defect `||t + c nu|| / ||t||` minimized over `c` (and over the eigenspace for
    /// clustered eigenvalues).
    pub delta: f64,
    /// Best-fit constant for this mode alone.
    pub c: f64,
    pub cluster: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionVerdict {
    /// Every defect above the strong threshold.
    Supported,
    /// Some defect between the thresholds.
    Marginal,
    /// Some defect below the violation tolerance: an eigenfunction nearly solves the
    /// overdetermined problem.
    Violated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub modes: Vec<ModeDefect>,
    pub min_delta: f64,
    pub tol: f64,
    pub strong: f64,
    pub verdict: AssumptionVerdict,
}

/// Clamped Lame eigenpairs and the traction defect against constant multiples of the normal.
pub fn check_assumption(bundle: &GeneratorBundle, n_modes: usize, tol: f64) -> Result<AssumptionReport> {
    let dims = bundle.dims;
    let f = &bundle.forms;
    let nh = dims.n_h;
    let int: Vec<usize> = (nh..dims.n_w).collect();
    let a = f.a_s.submatrix(&int, &int).to_dense();
    let m = f.m_s.submatrix(&int, &int).to_dense();
    let l = cholesky_lower(m.as_ref())?;
    let mut c = a.clone();
    lower_solve(l.as_ref(), &mut c);
    let mut c = c.transpose().to_owned();
    lower_solve(l.as_ref(), &mut c);
    crate::linalg::symmetrize(&mut c);
    let evd = c.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let mut w = evd.U().to_owned();
    lower_transpose_solve(l.as_ref(), &mut w);
    let k = n_modes.min(int.len());
    let perimeter: f64 = bundle.layout.frame.facets.iter().map(|x| x.measure).sum();
    let mg_chol = crate::linalg::SparseChol::new(&f.m_gamma)?;
    let gam: Vec<usize> = (0..nh).collect();
    let a_gi = f.a_s.submatrix(&gam, &int);
    let m_gi = f.m_s.submatrix(&gam, &int);
    // Tractions as L2 functions on GAMMA_S via the interface mass.
    let tractions: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let wj: Vec<f64> = (0..int.len()).map(|i| w[(i, j)]).collect();
            let r: Vec<f64> = a_gi.matvec(&wj).iter().zip(m_gi.matvec(&wj)).map(|(p, q)| p - s[j] * q).collect();
            mg_chol.solve(&r)
        })
        .collect();
    let mut clusters = vec![0usize; k];
    for j in 1..k {
        clusters[j] = if (s[j] - s[j - 1]).abs() <= 1e-2 * s[j].abs() { clusters[j - 1] } else { clusters[j - 1] + 1 };
    }
    let mut modes = Vec::with_capacity(k);
    for j in 0..k {
        let members: Vec<usize> = (0..k).filter(|&i| clusters[i] == clusters[j]).collect();
        let delta = span_defect(&f.m_gamma, &f.n_gamma, perimeter, &members.iter().map(|&i| tractions[i].clone()).collect::<Vec<_>>());
        let t = &tractions[j];
        let cbest = -crate::linalg::dot(&f.n_gamma, t) / perimeter;
        modes.push(ModeDefect { beta2: s[j], delta, c: cbest, cluster: clusters[j] });
    }
    let min_delta = modes.iter().map(|m| m.delta).fold(f64::INFINITY, f64::min);
    let strong = 0.1;
    let verdict = if min_delta < tol {
        AssumptionVerdict::Violated
    } else if min_delta < strong {
        AssumptionVerdict::Marginal
    } else {
        AssumptionVerdict::Supported
    };
    Ok(AssumptionReport { modes, min_delta, tol, strong, verdict })
}

/// `min over t in span(T) of min_c ||t + c nu|| / ||t||`, i.e. `sqrt(1 - g^T G^{-1} g / |Gamma|)`.
fn span_defect(m_gamma: &Csr, n_gamma: &[f64], perimeter: f64, t: &[Vec<f64>]) -> f64 {
    let k = t.len();
    let g = Mat::from_fn(k, k, |i, j| crate::linalg::dot(&m_gamma.matvec(&t[i]), &t[j]));
    let gv = faer::Col::from_fn(k, |i| crate::linalg::dot(n_gamma, &t[i]));
    let Ok(llt) = g.llt(Side::Lower) else {
        return 0.0;
    };
    let sol = llt.solve(&gv);
    let q = (gv.transpose() * &sol) / perimeter;
    (1.0 - q).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumVerdict {
    /// Uniform gap and no evidence against the assumption.
    Gapped,
    /// Gap present on this mesh but the assumption check failed, so it need not persist
    /// under refinement.
    Downgraded,
    /// Nonzero eigenvalues within the gap tolerance of the imaginary axis.
    NearAxis,
}

pub fn classify_spectrum_verdict(report: &SpectrumReport, assumption: Option<&AssumptionReport>) -> SpectrumVerdict {
    if report.near_axis > 0 || !(report.gap > 0.0) {
        return SpectrumVerdict::NearAxis;
    }
    match assumption.map(|a| a.verdict) {
        Some(AssumptionVerdict::Violated) => SpectrumVerdict::Downgraded,
        _ => SpectrumVerdict::Gapped,
    }
}

/// Largest distance from an eigenvalue of `a` to its partner in `b`, matched greedily.
pub fn match_spectra(a: &[c64], b: &[c64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[i].norm().total_cmp(&a[j].norm()));
    for i in order {
        let mut best = (f64::INFINITY, usize::MAX);
        for (j, z) in b.iter().enumerate() {
            if !used[j] {
                let d = (a[i] - *z).norm();
                if d < best.0 {
                    best = (d, j);
                }
            }
        }
        if best.1 == usize::MAX {
            return f64::INFINITY;
        }
        used[best.1] = true;
        worst = worst.max(best.0);
    }
    worst
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxisVerdict {
    pub pass: bool,
    /// Indices into the report of nonzero eigenvalues with `|Re| < tol`.
    pub offending: Vec<usize>,
}

/// Passes iff the only eigenvalues within `tol` of the imaginary axis are within `tol` of zero.
pub fn verify_no_imaginary_point_spectrum(report: &SpectrumReport, tol: f64) -> AxisVerdict {
    let offending: Vec<usize> = report
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, z)| {
            let r = z[0].abs();
            let m = (z[0] * z[0] + z[1] * z[1]).sqrt();
            (r < tol || (tol == 0.0 && r == 0.0)) && !(m < tol || (tol == 0.0 && m == 0.0))
        })
        .map(|(i, _)| i)
        .collect();
    AxisVerdict { pass: offending.is_empty(), offending }
}

/// Component sizes of an eigenvector along the chain that rules out imaginary eigenvalues:
/// fluid velocity, then interface velocity, then interface displacement. An exact imaginary
/// eigenvector would need all three to vanish.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainMagnitudes {
    pub index: usize,
    pub eigenvalue: [f64; 2],
    pub u: f64,
    pub h1: f64,
    pub h0: f64,
}

pub fn axis_chain(bundle: &GeneratorBundle, result: &SpectrumResult, tol: f64) -> Vec<ChainMagnitudes> {
    let f = &bundle.forms;
    let mut out = Vec::new();
    for (j, z) in result.eigenvalues.iter().enumerate() {
        if z.re.abs() >= tol || z.norm() < result.zero_tol {
            continue;
        }
        let x: Vec<c64> = (0..bundle.n).map(|i| result.vectors[(i, j)]).collect();
        let total = bundle.norm(&x);
        let re = bundle.expand(&x.iter().map(|v| v.re).collect::<Vec<_>>());
        let im = bundle.expand(&x.iter().map(|v| v.im).collect::<Vec<_>>());
        let rel = |m: &Csr, a: &[f64], b: &[f64]| (crate::linalg::form(m, a, a) + crate::linalg::form(m, b, b)).max(0.0).sqrt() / total;
        let sh = f.s_gamma.add(&f.m_gamma);
        out.push(ChainMagnitudes {
            index: j,
            eigenvalue: [z.re, z.im],
            u: rel(&f.m_f, &re.u, &im.u),
            h1: rel(&f.m_gamma, &re.h1, &im.h1),
            h0: rel(&sh, &re.h0, &im.h0),
        });
    }
    out
}
