//! Linear solvers and the numerical certificates for the assembled matrices.
//!
//! Direct solves reorder the unknowns by coordinate, where every system is
//! banded with half-bandwidth `2r` (shifted) or `2r+1` (standard).

use std::sync::Arc;
use std::time::Instant;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::assembly::{CollocationSystem, DenseMatrix, Scheme};
use crate::error::{Error, Result};

/// A square linear map given by its action.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64]) -> Vec<f64>;
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.size()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matvec(v)
    }
}

pub const CG_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Direct,
    Cg,
}

impl SolveMethod {
    pub fn label(self) -> &'static str {
        match self {
            SolveMethod::Direct => "direct",
            SolveMethod::Cg => "cg",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    pub method: SolveMethod,
    pub iterations: usize,
    /// `‖b − Ax‖₂ / ‖b‖₂` (zero when `b = 0`).
    pub residual: f64,
    pub seconds: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn relative_residual(op: &dyn LinearOperator, x: &[f64], b: &[f64]) -> f64 {
    let ax = op.apply(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let nb = norm2(b);
    if nb == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / nb
    }
}

/// Largest `|i − j|` over the nonzeros of `a`.
pub fn bandwidth(a: &DenseMatrix) -> usize {
    let n = a.size();
    let mut b = 0;
    for i in 0..n {
        for j in 0..n {
            if a.get(i, j) != 0.0 {
                b = b.max(i.abs_diff(j));
            }
        }
    }
    b
}

/// Banded LU with partial pivoting, stored densely; `L` is kept unpermuted
/// (row interchanges are applied to trailing columns only).
#[derive(Debug, Clone)]
pub struct BandLu {
    lu: DenseMatrix,
    piv: Vec<usize>,
    kl: usize,
    ku: usize,
}

impl BandLu {
    pub fn factor(mut a: DenseMatrix, kl: usize, ku: usize) -> Result<Self> {
        let n = a.size();
        let ku_fill = kl + ku;
        let scale = (0..n).flat_map(|i| a.row(i).iter().map(|v| v.abs())).fold(0.0, f64::max);
        let mut piv = vec![0; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            for i in k + 1..=last {
                if a.get(i, k).abs() > a.get(p, k).abs() {
                    p = i;
                }
            }
            piv[k] = p;
            let pivot = a.get(p, k);
            if pivot.abs() <= f64::EPSILON * scale * n as f64 || pivot == 0.0 {
                return Err(Error::Singular { pivot: k });
            }
            let cend = (k + ku_fill).min(n - 1);
            if p != k {
                for j in k..=cend {
                    let t = a.get(k, j);
                    a.set(k, j, a.get(p, j));
                    a.set(p, j, t);
                }
            }
            for i in k + 1..=last {
                let l = a.get(i, k) / pivot;
                a.set(i, k, l);
                if l != 0.0 {
                    for j in k + 1..=cend {
                        let v = a.get(k, j);
                        if v != 0.0 {
                            a.add(i, j, -l * v);
                        }
                    }
                }
            }
        }
        Ok(BandLu { lu: a, piv, kl, ku: ku_fill })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.size();
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    x[i] -= self.lu.get(i, k) * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + self.ku).min(n - 1) {
                s -= self.lu.get(k, j) * x[j];
            }
            x[k] = s / self.lu.get(k, k);
        }
        x
    }
}

/// Banded Cholesky `A = L Lᵀ`; fails on the first nonpositive pivot.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    l: DenseMatrix,
    bw: usize,
}

impl BandCholesky {
    pub fn factor(a: &DenseMatrix, bw: usize) -> Result<Self> {
        let n = a.size();
        let mut l = DenseMatrix::zeros(n);
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            let mut d = a.get(j, j);
            for k in lo..j {
                d -= l.get(j, k) * l.get(j, k);
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { iteration: j, curvature: d });
            }
            let d = d.sqrt();
            l.set(j, j, d);
            for i in j + 1..=(j + bw).min(n - 1) {
                let mut s = a.get(i, j);
                for k in i.saturating_sub(bw).max(lo)..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / d);
            }
        }
        Ok(BandCholesky { l, bw })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.size();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.l.get(i, k) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..=(i + self.bw).min(n - 1) {
                s -= self.l.get(k, i) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
        y
    }
}

enum Factor {
    Cholesky(BandCholesky),
    Lu(BandLu),
}

/// Factorization of a 1D system in coordinate order.
pub struct DirectFactor {
    perm: Vec<usize>,
    factor: Factor,
}

impl DirectFactor {
    pub fn new(sys: &CollocationSystem) -> Result<Self> {
        let perm = sys.x_order();
        let a = sys.matrix.permuted(&perm);
        let bw = bandwidth(&a);
        let factor = match sys.scheme {
            Scheme::ShiftedSymmetric => Factor::Cholesky(BandCholesky::factor(&a, bw)?),
            Scheme::Standard => Factor::Lu(BandLu::factor(a, bw, bw)?),
        };
        Ok(DirectFactor { perm, factor })
    }

    /// Solve with a right-hand side in unknown order.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let pb: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        let px = match &self.factor {
            Factor::Cholesky(c) => c.solve(&pb),
            Factor::Lu(lu) => lu.solve(&pb),
        };
        let mut x = vec![0.0; b.len()];
        for (a, &p) in self.perm.iter().enumerate() {
            x[p] = px[a];
        }
        x
    }
}

pub fn solve_direct(sys: &CollocationSystem) -> Result<SolveReport> {
    let t0 = Instant::now();
    let f = DirectFactor::new(sys)?;
    let solution = f.solve(&sys.rhs);
    let residual = relative_residual(&sys.matrix, &solution, &sys.rhs);
    Ok(SolveReport {
        solution,
        method: SolveMethod::Direct,
        iterations: 0,
        residual,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

/// Conjugate gradients from a zero initial guess.
pub fn solve_cg(op: &dyn LinearOperator, rhs: &[f64], tol: f64, max_iter: usize) -> Result<SolveReport> {
    let t0 = Instant::now();
    let n = op.dim();
    if rhs.len() != n {
        return Err(Error::Dimension { expected: n, got: rhs.len() });
    }
    let mut x = vec![0.0; n];
    let nb = norm2(rhs);
    let finish = |x: Vec<f64>, it: usize, res: f64| SolveReport {
        solution: x,
        method: SolveMethod::Cg,
        iterations: it,
        residual: res,
        seconds: t0.elapsed().as_secs_f64(),
    };
    if nb == 0.0 {
        return Ok(finish(x, 0, 0.0));
    }
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut history = Vec::new();
    for it in 1..=max_iter {
        let ap = op.apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NotPositiveDefinite { iteration: it, curvature: pap / dot(&p, &p) });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let rel = rr_new.sqrt() / nb;
        history.push(rel);
        if rel <= tol {
            let true_res = relative_residual(op, &x, rhs);
            return Ok(finish(x, it, true_res));
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: *history.last().unwrap_or(&1.0),
        history,
    })
}

/// A Toeplitz block `T[i][j] = t(i − j)` with a precomputed circulant spectrum.
#[derive(Clone)]
pub struct ToeplitzBlock {
    rows: usize,
    cols: usize,
    len: usize,
    spectrum: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ToeplitzBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ToeplitzBlock({}x{}, embed {})", self.rows, self.cols, self.len)
    }
}

impl ToeplitzBlock {
    /// `first_col[i] = t(i)`, `first_row[j] = t(−j)`, with `first_col[0] == first_row[0]`.
    pub fn new(first_col: &[f64], first_row: &[f64], planner: &mut FftPlanner<f64>) -> Self {
        let rows = first_col.len();
        let cols = first_row.len();
        let len = (rows + cols - 1).next_power_of_two();
        let mut c = vec![Complex64::new(0.0, 0.0); len];
        for (i, &v) in first_col.iter().enumerate() {
            c[i].re = v;
        }
        for (j, &v) in first_row.iter().enumerate().skip(1) {
            c[len - j].re = v;
        }
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        fwd.process(&mut c);
        ToeplitzBlock { rows, cols, len, spectrum: c, fwd, inv }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for (b, &v) in buf.iter_mut().zip(x) {
            b.re = v;
        }
        self.fwd.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.inv.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        buf[..self.rows].iter().map(|c| c.re * scale).collect()
    }
}

/// The 2×2 block-Toeplitz structure `[[𝒜, ℬ], [𝒞, 𝒟]]` of a 1D system.
#[derive(Debug, Clone)]
pub struct BlockToeplitz {
    n: usize,
    blocks: [ToeplitzBlock; 4],
}

impl BlockToeplitz {
    /// Extract and verify the four Toeplitz blocks.
    pub fn from_system(sys: &CollocationSystem) -> Result<Self> {
        let a = &sys.matrix;
        let n = sys.mesh.n();
        let mut planner = FftPlanner::new();
        let spans = [(0, 0, n, n), (0, n, n, n + 1), (n, 0, n + 1, n), (n, n, n + 1, n + 1)];
        let mut out = Vec::with_capacity(4);
        for (r0, c0, rows, cols) in spans {
            let col: Vec<f64> = (0..rows).map(|i| a.get(r0 + i, c0)).collect();
            let row: Vec<f64> = (0..cols).map(|j| a.get(r0, c0 + j)).collect();
            for i in 1..rows {
                for j in 1..cols {
                    if a.get(r0 + i, c0 + j) != a.get(r0 + i - 1, c0 + j - 1) {
                        return Err(Error::Domain(format!(
                            "block at ({r0}, {c0}) is not Toeplitz at entry ({i}, {j})"
                        )));
                    }
                }
            }
            out.push(ToeplitzBlock::new(&col, &row, &mut planner));
        }
        let blocks: [ToeplitzBlock; 4] = out.try_into().expect("four blocks");
        Ok(BlockToeplitz { n, blocks })
    }
}

impl LinearOperator for BlockToeplitz {
    fn dim(&self) -> usize {
        2 * self.n + 1
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        toeplitz_matvec_fft(self, v)
    }
}

pub fn toeplitz_matvec_fft(bt: &BlockToeplitz, v: &[f64]) -> Vec<f64> {
    let n = bt.n;
    let (vw, vh) = v.split_at(n);
    let [a, b, c, d] = &bt.blocks;
    let top: Vec<f64> = a.matvec(vw).iter().zip(b.matvec(vh)).map(|(x, y)| x + y).collect();
    let bottom: Vec<f64> = c.matvec(vw).iter().zip(d.matvec(vh)).map(|(x, y)| x + y).collect();
    [top, bottom].concat()
}

/// Smallest Ritz value of a symmetric operator after `steps` Lanczos iterations
/// with full reorthogonalization.
pub fn lanczos_min_ritz(op: &dyn LinearOperator, steps: usize, seed_vec: &[f64]) -> f64 {
    let n = op.dim();
    let steps = steps.min(n).max(1);
    let mut q = seed_vec.to_vec();
    let nq = norm2(&q);
    q.iter_mut().for_each(|v| *v /= nq);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    for k in 0..steps {
        let mut w = op.apply(&basis[k]);
        let a = dot(&w, &basis[k]);
        alpha.push(a);
        for _ in 0..2 {
            for qb in &basis {
                let c = dot(&w, qb);
                w.iter_mut().zip(qb).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = norm2(&w);
        if k + 1 == steps || b <= 1e-14 * a.abs().max(1e-300) {
            break;
        }
        beta.push(b);
        basis.push(w.into_iter().map(|x| x / b).collect());
    }
    tridiagonal_min_eigenvalue(&alpha, &beta[..alpha.len() - 1])
}

/// Smallest eigenvalue of the symmetric tridiagonal `(diag, off)` by Sturm bisection.
pub fn tridiagonal_min_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let m = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < m { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let tiny = -f64::EPSILON * (hi - lo).abs().max(1.0);
    // number of eigenvalues < x
    let count = |x: f64| {
        let mut c = 0;
        let mut d = 1.0;
        for i in 0..m {
            let o2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
            d = diag[i] - x - if i > 0 { o2 / d } else { 0.0 };
            if d == 0.0 {
                d = tiny;
            }
            if d < 0.0 {
                c += 1;
            }
        }
        c
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Numerical certificate of the structural claims about a 1D matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixCertificate {
    pub symmetric: bool,
    pub max_asymmetry: f64,
    pub diagonally_dominant: bool,
    /// Symmetric factorization succeeded and the smallest Ritz value is positive.
    pub positive_definite: bool,
    pub min_ritz: f64,
    /// Off-diagonal entries all nonpositive.
    pub z_pattern: bool,
    /// Explicit inverse entrywise positive; `None` above the size limit.
    pub inverse_positive: Option<bool>,
    pub min_inverse_entry: Option<f64>,
    /// `‖A⁻¹‖_∞`.
    pub inv_inf_norm: f64,
    /// `(1 + 4δ(1+δ))/8`.
    pub inv_norm_bound: f64,
}

impl MatrixCertificate {
    pub fn bound_ratio(&self) -> f64 {
        self.inv_inf_norm / self.inv_norm_bound
    }

    /// Every claim holds for the shifted scheme.
    pub fn all_pass(&self) -> bool {
        self.symmetric
            && self.diagonally_dominant
            && self.positive_definite
            && self.z_pattern
            && self.inverse_positive.unwrap_or(true)
            && self.inv_inf_norm <= self.inv_norm_bound * (1.0 + 1e-10)
    }
}

pub const INVERSE_CHECK_LIMIT: usize = 400;

pub fn inv_norm_bound(delta: f64) -> f64 {
    (1.0 + 4.0 * delta * (1.0 + delta)) / 8.0
}

pub fn certify_matrix(sys: &CollocationSystem) -> Result<MatrixCertificate> {
    let a = &sys.matrix;
    let n = a.size();
    let max_asymmetry = a.max_asymmetry();
    let symmetric = max_asymmetry == 0.0;

    let mut diagonally_dominant = true;
    let mut strict_somewhere = false;
    let mut z_pattern = true;
    for i in 0..n {
        let row = a.row(i);
        let off: f64 = row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v.abs()).sum();
        let d = row[i];
        z_pattern &= row.iter().enumerate().all(|(j, v)| j == i || *v <= 0.0);
        // rounding allowance on the zero row sums of interior rows
        if d < off * (1.0 - 1e-13) {
            diagonally_dominant = false;
        }
        if d > off * (1.0 + 1e-13) {
            strict_somewhere = true;
        }
    }
    diagonally_dominant &= strict_somewhere;

    let factor = if symmetric { DirectFactor::new(sys).ok() } else { None };
    let seed: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
    let min_ritz = if symmetric { lanczos_min_ritz(a, 60, &seed) } else { f64::NAN };
    let positive_definite = factor.is_some() && min_ritz > 0.0;
    let solver = match factor {
        Some(f) => f,
        None => DirectFactor::new(sys)?,
    };

    let (inverse_positive, min_inverse_entry, inv_inf_norm) = if sys.mesh.n() <= INVERSE_CHECK_LIMIT {
        let mut row_abs = vec![0.0; n];
        let mut min_entry = f64::INFINITY;
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = solver.solve(&e);
            e[j] = 0.0;
            for (i, v) in col.iter().enumerate() {
                row_abs[i] += v.abs();
                min_entry = min_entry.min(*v);
            }
        }
        let norm = row_abs.iter().cloned().fold(0.0, f64::max);
        (Some(min_entry > 0.0), Some(min_entry), norm)
    } else {
        // For a nonsingular Z-matrix with positive inverse, ‖A⁻¹‖_∞ = max(A⁻¹𝟙).
        let ones = vec![1.0; n];
        let w = solver.solve(&ones);
        let norm = w.iter().map(|v| v.abs()).fold(0.0, f64::max);
        (None, None, norm)
    };

    Ok(MatrixCertificate {
        symmetric,
        max_asymmetry,
        diagonally_dominant,
        positive_definite,
        min_ritz,
        z_pattern,
        inverse_positive,
        min_inverse_entry,
        inv_inf_norm,
        inv_norm_bound: inv_norm_bound(sys.spec.delta),
    })
}

/// Extremes of the discrete maximum principle.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPrincipleReport {
    pub holds: bool,
    /// `max g − max u` for `f ≤ 0`, `min u − min g` for `f ≥ 0` (the smaller when `f ≡ 0`).
    pub slack: f64,
}

pub fn max_principle_check(sys: &CollocationSystem, solution: &[f64]) -> Result<MaxPrincipleReport> {
    let fmin = sys.source.iter().cloned().fold(f64::INFINITY, f64::min);
    let fmax = sys.source.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if fmin < 0.0 && fmax > 0.0 {
        return Err(Error::NotSignDefinite { min: fmin, max: fmax });
    }
    let gmax = sys.constraint_values.values().cloned().fold(f64::NEG_INFINITY, f64::max);
    let gmin = sys.constraint_values.values().cloned().fold(f64::INFINITY, f64::min);
    let umax = solution.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let umin = solution.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut slack = f64::INFINITY;
    if fmax <= 0.0 {
        slack = slack.min(gmax - umax);
    }
    if fmin >= 0.0 {
        slack = slack.min(umin - gmin);
    }
    // solutions of f ≡ 0 reproduce g only up to rounding
    let allowance = if fmin == 0.0 && fmax == 0.0 {
        1e-12 * gmax.abs().max(gmin.abs()).max(1.0)
    } else {
        0.0
    };
    Ok(MaxPrincipleReport { holds: slack >= -allowance, slack })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_1d;
    use crate::grid::{horizon_decompose, Mesh1D, VolumeConstraint};

    fn system(scheme: Scheme, n: usize, r: usize, f: &(dyn Fn(f64) -> f64 + Sync + Send), g: VolumeConstraint) -> CollocationSystem {
        let h = 1.0 / (n as f64 + 1.0);
        let spec = horizon_decompose(r as f64 * h, h).unwrap();
        let mesh = Mesh1D::with_overlap(n, &spec).unwrap();
        assemble_1d(scheme, &mesh, &spec, &|x| f(x), &g).unwrap()
    }

    fn dense_gauss(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
        let n = a.size();
        let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
        let mut x = b.to_vec();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
            m.swap(k, p);
            x.swap(k, p);
            for i in k + 1..n {
                let l = m[i][k] / m[k][k];
                for j in k..n {
                    m[i][j] -= l * m[k][j];
                }
                x[i] -= l * x[k];
            }
        }
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
            x[k] = (x[k] - s) / m[k][k];
        }
        x
    }

    #[test]
    fn hand_system_matches_elimination() {
        let sys = system(Scheme::ShiftedSymmetric, 2, 1, &|x| 1.0 + x, VolumeConstraint::from_fn(|x| x * x));
        let direct = solve_direct(&sys).unwrap();
        let want = dense_gauss(&sys.matrix, &sys.rhs);
        for (a, b) in direct.solution.iter().zip(&want) {
            assert!((a - b).abs() < 1e-13 * b.abs().max(1.0));
        }
    }

    #[test]
    fn band_lu_matches_dense_for_standard() {
        for (n, r) in [(12, 2), (9, 4), (3, 2)] {
            let sys = system(Scheme::Standard, n, r, &|x| (3.0 * x).cos(), VolumeConstraint::from_fn(|x| x));
            let got = solve_direct(&sys).unwrap();
            let want = dense_gauss(&sys.matrix, &sys.rhs);
            for (a, b) in got.solution.iter().zip(&want) {
                assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "{a} vs {b}");
            }
            assert!(got.residual < 1e-12);
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let sys = system(Scheme::ShiftedSymmetric, 10, 2, &|_| 0.0, VolumeConstraint::zero());
        assert!(solve_direct(&sys).unwrap().solution.iter().all(|&v| v == 0.0));
        let cg = solve_cg(&sys.matrix, &sys.rhs, CG_TOL, 10).unwrap();
        assert_eq!(cg.iterations, 0);
    }

    #[test]
    fn cg_matches_direct() {
        let sys = system(Scheme::ShiftedSymmetric, 63, 5, &|x| 12.0 * x * x - 2.0, VolumeConstraint::from_fn(|x| x * x * (1.0 - x * x)));
        let d = solve_direct(&sys).unwrap();
        let c = solve_cg(&sys.matrix, &sys.rhs, CG_TOL, 5000).unwrap();
        let scale = d.solution.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let diff = d.solution.iter().zip(&c.solution).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-9 * scale, "{diff}");
    }

    #[test]
    fn cg_detects_indefinite_operator() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        match solve_cg(&a, &[0.0, 1.0], 1e-12, 10) {
            Err(Error::NotPositiveDefinite { .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cg_reports_history_on_budget_exhaustion() {
        let sys = system(Scheme::ShiftedSymmetric, 63, 1, &|_| 1.0, VolumeConstraint::zero());
        match solve_cg(&sys.matrix, &sys.rhs, 1e-14, 3) {
            Err(Error::NotConverged { history, iterations, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(history.len(), 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fft_matvec_matches_dense() {
        for scheme in [Scheme::ShiftedSymmetric, Scheme::Standard] {
            let sys = system(scheme, 257, 7, &|_| 0.0, VolumeConstraint::zero());
            let bt = BlockToeplitz::from_system(&sys).unwrap();
            let v: Vec<f64> = (0..sys.size()).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect();
            let fast = toeplitz_matvec_fft(&bt, &v);
            let dense = sys.matrix.matvec(&v);
            let scale = norm2(&dense);
            let diff: Vec<f64> = fast.iter().zip(&dense).map(|(a, b)| a - b).collect();
            assert!(norm2(&diff) <= 1e-12 * scale);
            let mut e1 = vec![0.0; sys.size()];
            e1[0] = 1.0;
            let col = toeplitz_matvec_fft(&bt, &e1);
            for i in 0..sys.size() {
                assert!((col[i] - sys.matrix.get(i, 0)).abs() < 1e-12 * sys.spec.eta());
            }
        }
    }

    #[test]
    fn tridiagonal_bisection() {
        // eigenvalues of tridiag(-1, 2, -1) of size m: 2 - 2cos(kπ/(m+1))
        let m = 10;
        let got = tridiagonal_min_eigenvalue(&vec![2.0; m], &vec![-1.0; m - 1]);
        let want = 2.0 - 2.0 * (std::f64::consts::PI / (m as f64 + 1.0)).cos();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn certificates_shifted_and_standard() {
        let sys = system(Scheme::ShiftedSymmetric, 32, 3, &|_| 0.0, VolumeConstraint::zero());
        let c = certify_matrix(&sys).unwrap();
        assert!(c.all_pass(), "{c:?}");
        assert!(c.min_inverse_entry.unwrap() > 0.0);
        let sys = system(Scheme::Standard, 32, 3, &|_| 0.0, VolumeConstraint::zero());
        assert!(!certify_matrix(&sys).unwrap().symmetric);
        assert_eq!(inv_norm_bound(0.25), 0.28125);
    }

    #[test]
    fn quarter_horizon_bound() {
        let h = 1.0 / 64.0;
        let spec = horizon_decompose(0.25, h).unwrap();
        let mesh = Mesh1D::new(63, &spec).unwrap();
        let sys = assemble_1d(Scheme::ShiftedSymmetric, &mesh, &spec, &|_| 0.0, &VolumeConstraint::zero()).unwrap();
        let c = certify_matrix(&sys).unwrap();
        assert!(c.inv_inf_norm <= 0.28125, "{}", c.inv_inf_norm);
    }

    #[test]
    fn max_principle_cases() {
        let sys = system(Scheme::ShiftedSymmetric, 31, 3, &|_| -1.0, VolumeConstraint::zero());
        let u = solve_direct(&sys).unwrap().solution;
        assert!(max_principle_check(&sys, &u).unwrap().holds);
        assert!(u.iter().all(|&v| v <= 0.0));

        let sys = system(Scheme::ShiftedSymmetric, 31, 3, &|_| 0.0, VolumeConstraint::constant(5.0));
        let u = solve_direct(&sys).unwrap().solution;
        assert!(u.iter().all(|&v| (v - 5.0).abs() < 1e-11));
        assert!(max_principle_check(&sys, &u).unwrap().holds);

        let sys = system(Scheme::ShiftedSymmetric, 31, 3, &|x| x - 0.5, VolumeConstraint::zero());
        let u = solve_direct(&sys).unwrap().solution;
        assert!(matches!(max_principle_check(&sys, &u), Err(Error::NotSignDefinite { .. })));
    }
}
