//! Assembly of the collocation systems.
//!
//! Every row is produced by applying the row's stencil to the extended field:
//! taps landing on an unknown become matrix entries `−η·w`, taps landing on
//! the collar move to the right-hand side as `+η·w·g` and are logged.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{HalfIndex, HorizonSpec, Mesh1D, VolumeConstraint};
use crate::oracle::Source;
use crate::solver::LinearOperator;
use crate::stencil::{halfpoint_weights, symmetric_weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Whole-point stencil reused at half points; symmetric positive definite.
    ShiftedSymmetric,
    /// Half points collocated with their own `(c, d)` weights; nonsymmetric.
    Standard,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::ShiftedSymmetric => "shifted",
            Scheme::Standard => "standard",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "shifted" | "shifted_symmetric" => Ok(Scheme::ShiftedSymmetric),
            "standard" => Ok(Scheme::Standard),
            other => Err(Error::Config(format!("unknown scheme '{other}' (expected shifted or standard)"))),
        }
    }
}

/// Square row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension { expected: n, got: row.len() });
            }
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        Ok(m)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `max |a_ij − a_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `B = P A Pᵀ` with `B[a][b] = A[perm[a]][perm[b]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n);
        let mut b = Self::zeros(self.n);
        for (a, &pa) in perm.iter().enumerate() {
            for (c, &pc) in perm.iter().enumerate() {
                b.set(a, c, self.get(pa, pc));
            }
        }
        b
    }

    /// Nonzeros as `row col value` lines (1-based indices).
    pub fn to_coordinate_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.get(i, j);
                if v != 0.0 {
                    writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v).unwrap();
                }
            }
        }
        out
    }
}

/// One collar contribution moved to the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterEntry {
    pub row: usize,
    pub point: HalfIndex,
    /// Coefficient multiplying `g(point)` on the right-hand side (`η·w`).
    pub weight: f64,
}

/// An assembled 1D system in unknown order `[u_1 … u_N, u_{1/2} … u_{N+1/2}]`.
#[derive(Debug, Clone)]
pub struct CollocationSystem {
    pub scheme: Scheme,
    pub mesh: Mesh1D,
    pub spec: HorizonSpec,
    pub matrix: DenseMatrix,
    pub rhs: Vec<f64>,
    /// `f` sampled at the collocation points.
    pub source: Vec<f64>,
    pub scatter: Vec<ScatterEntry>,
    /// `g` at every collar point referenced by some stencil.
    pub constraint_values: BTreeMap<HalfIndex, f64>,
}

impl CollocationSystem {
    pub fn size(&self) -> usize {
        self.matrix.size()
    }

    pub fn points(&self) -> Vec<f64> {
        self.mesh.interior_points()
    }

    /// Unknown positions listed by increasing coordinate.
    pub fn x_order(&self) -> Vec<usize> {
        self.mesh
            .interior_by_x()
            .map(|j| self.mesh.position(j).expect("interior index"))
            .collect()
    }

    /// Collar contribution to the right-hand side (`F_{V,L} + F_{V,R}`).
    pub fn constraint_rhs(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.size()];
        for e in &self.scatter {
            v[e.row] += e.weight * self.constraint_values[&e.point];
        }
        v
    }

    /// Sum of scatter weights moved out of `row`.
    pub fn scatter_mass(&self, row: usize) -> f64 {
        self.scatter.iter().filter(|e| e.row == row).map(|e| e.weight).sum()
    }
}

/// Assemble `−L_{δ̃,h} u = f` with `u = g` on the collar.
pub fn assemble_1d(
    scheme: Scheme,
    mesh: &Mesh1D,
    spec: &HorizonSpec,
    f: &dyn Source,
    g: &VolumeConstraint,
) -> Result<CollocationSystem> {
    if mesh.r() != spec.r || ((mesh.h() - spec.h) / mesh.h()).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "mesh (h = {}, r = {}) inconsistent with horizon spec (h = {}, r = {})",
            mesh.h(),
            mesh.r(),
            spec.h,
            spec.r
        )));
    }
    let whole = symmetric_weights(spec.r, mesh.h())?.stencil();
    let half = halfpoint_weights(spec.r, mesh.h())?.stencil();
    let n = mesh.unknowns();
    let mut matrix = DenseMatrix::zeros(n);
    let mut rhs = vec![0.0; n];
    let mut source = vec![0.0; n];
    let mut scatter = Vec::new();
    let mut constraint_values = BTreeMap::new();

    for (row, j) in mesh.interior().enumerate() {
        let st = if scheme == Scheme::Standard && !j.is_whole() { &half } else { &whole };
        let fx = f.eval(mesh.point(j))?;
        source[row] = fx;
        rhs[row] = fx;
        for &(off, w) in &st.taps {
            let k = j.offset(off);
            let coef = st.eta * w;
            match mesh.position(k) {
                Some(col) => matrix.add(row, col, -coef),
                None => {
                    let gv = match constraint_values.get(&k) {
                        Some(&v) => v,
                        None => {
                            let v = g.require(k, mesh.point(k))?;
                            constraint_values.insert(k, v);
                            v
                        }
                    };
                    rhs[row] += coef * gv;
                    scatter.push(ScatterEntry { row, point: k, weight: coef });
                }
            }
        }
    }

    if scheme == Scheme::ShiftedSymmetric {
        for i in 0..n {
            for c in i + 1..n {
                let v = matrix.get(i, c);
                matrix.set(c, i, v);
            }
        }
    }

    Ok(CollocationSystem { scheme, mesh: *mesh, spec: *spec, matrix, rhs, source, scatter, constraint_values })
}

pub fn assemble_standard_1d(
    mesh: &Mesh1D,
    spec: &HorizonSpec,
    f: &dyn Source,
    g: &VolumeConstraint,
) -> Result<CollocationSystem> {
    assemble_1d(Scheme::Standard, mesh, spec, f, g)
}

/// Outcome of comparing the generic scatter against the closed-form collar vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterCheck {
    pub max_diff: f64,
    /// `(row, generic, closed_form)` for every row differing by more than `1e-14`.
    pub mismatches: Vec<(usize, f64, f64)>,
}

impl ScatterCheck {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// `triu(toeplitz(c)) · w`, i.e. `out_i = Σ_{j≥i} c_{j−i} w_j`.
fn triu_toeplitz_mul(c: &[f64], w: &[f64]) -> Vec<f64> {
    (0..w.len())
        .map(|i| (i..w.len()).map(|j| c[j - i] * w[j]).sum())
        .collect()
}

/// Compare the shifted scheme's generic scatter with the block closed form built
/// from upper-triangular Toeplitz matrices of collar values.
pub fn scatter_equivalence_check(mesh: &Mesh1D, spec: &HorizonSpec, g: &VolumeConstraint) -> Result<ScatterCheck> {
    let n = mesh.n();
    let r = spec.r;
    if n < 2 * r {
        return Err(Error::MeshTooSmall { n, r, need: 2 * r });
    }
    let zero = |_: f64| 0.0;
    let sys = assemble_1d(Scheme::ShiftedSymmetric, mesh, spec, &zero, g)?;
    let generic = sys.rhs;

    let w = symmetric_weights(r, mesh.h())?;
    let w1: Vec<f64> = w.a_whole[1..].to_vec();
    let w2: Vec<f64> = w.a_half.clone();
    let w3: Vec<f64> = w.a_half[1..].to_vec();
    let gv = |j2: i64| g.require(HalfIndex(j2), mesh.point(HalfIndex(j2)));
    let ni = n as i64;
    let ri = r as i64;

    // Columns of the Toeplitz generators, in doubled indices.
    let col = |start2: i64, step2: i64, len: i64| -> Result<Vec<f64>> {
        (0..len).map(|k| gv(start2 + step2 * k)).collect()
    };
    let g1 = col(0, -2, ri)?;
    let g2 = col(-1, -2, ri - 1)?;
    let g3 = col(2 * ni + 2, 2, ri)?;
    let g4 = col(2 * ni + 3, 2, ri - 1)?;
    let g5 = col(-1, -2, ri)?;
    let g6 = col(2 * ni + 3, 2, ri)?;

    let mut left_whole = triu_toeplitz_mul(&g1, &w1);
    for (i, v) in triu_toeplitz_mul(&g2, &w3).into_iter().enumerate() {
        left_whole[i] += v;
    }
    let mut right_whole = triu_toeplitz_mul(&g3, &w1);
    for (i, v) in triu_toeplitz_mul(&g4, &w3).into_iter().enumerate() {
        right_whole[i] += v;
    }
    let left_half: Vec<f64> = triu_toeplitz_mul(&g1, &w2)
        .into_iter()
        .zip(triu_toeplitz_mul(&g5, &w1))
        .map(|(a, b)| a + b)
        .collect();
    let right_half: Vec<f64> = triu_toeplitz_mul(&g3, &w2)
        .into_iter()
        .zip(triu_toeplitz_mul(&g6, &w1))
        .map(|(a, b)| a + b)
        .collect();

    let mut closed = vec![0.0; mesh.unknowns()];
    for i in 0..r {
        closed[i] += left_whole[i];
        closed[n - 1 - i] += right_whole[i];
        closed[n + i] += left_half[i];
        closed[2 * n - i] += right_half[i];
    }
    for v in &mut closed {
        *v *= w.eta;
    }

    let mut max_diff = 0.0f64;
    let mut mismatches = Vec::new();
    for (row, (a, b)) in generic.iter().zip(&closed).enumerate() {
        let d = (a - b).abs();
        max_diff = max_diff.max(d);
        if d > 1e-14 * a.abs().max(b.abs()).max(1.0) {
            mismatches.push((row, *a, *b));
        }
    }
    Ok(ScatterCheck { max_diff, mismatches })
}

/// Matrix-free 2D operator `(K⊗I + I⊗K) − (δ̃²/6) K⊗K` acting on the tensor grid
/// of collocation points, with `K` the positive 1D shifted-symmetric operator.
///
/// Vectors are laid out `v[ix·n + iy]` with both axes in coordinate order.
#[derive(Debug, Clone)]
pub struct Kron2DOperator {
    n: usize,
    pad: usize,
    /// 1D taps of `K` (already scaled), indexed by `offset2 + pad`.
    kernel: Vec<f64>,
    cross: f64,
}

impl Kron2DOperator {
    pub fn new(spec: &HorizonSpec, n_axis: usize) -> Result<Self> {
        let st = symmetric_weights(spec.r, spec.h)?.stencil();
        let pad = 2 * spec.r;
        let mut kernel = vec![0.0; 2 * pad + 1];
        for &(off, w) in &st.taps {
            kernel[(off + pad as i64) as usize] = -st.eta * w;
        }
        Ok(Kron2DOperator { n: n_axis, pad, kernel, cross: spec.delta_tilde * spec.delta_tilde / 6.0 })
    }

    /// Points per axis, `2N+1`.
    pub fn axis_len(&self) -> usize {
        self.n
    }

    /// Points per axis of the extended field, `2N+1+4r`.
    pub fn extended_len(&self) -> usize {
        self.n + 2 * self.pad
    }

    pub fn cross_coefficient(&self) -> f64 {
        self.cross
    }

    /// Apply to an extended field `e[ix·m + iy]` (`m = extended_len()`); returns
    /// the interior values.
    pub fn apply_extended(&self, e: &[f64]) -> Vec<f64> {
        let n = self.n;
        let m = self.extended_len();
        let p = self.pad;
        assert_eq!(e.len(), m * m);
        let ker = &self.kernel;

        // t[ix][iy] = (K_y e)(ix, p+iy) for every extended ix.
        let sweep_y = || -> Vec<f64> {
            let mut t = vec![0.0; m * n];
            t.par_chunks_mut(n).enumerate().for_each(|(ix, row)| {
                let src = &e[ix * m..(ix + 1) * m];
                for (iy, out) in row.iter_mut().enumerate() {
                    *out = ker.iter().zip(&src[iy..iy + ker.len()]).map(|(k, v)| k * v).sum();
                }
            });
            t
        };
        // K_x applied to the field restricted to interior columns.
        let sweep_x = |field: &[f64], stride: usize, col0: usize| -> Vec<f64> {
            let mut out = vec![0.0; n * n];
            out.par_chunks_mut(n).enumerate().for_each(|(ix, row)| {
                for (k, &kv) in ker.iter().enumerate() {
                    if kv == 0.0 {
                        continue;
                    }
                    let src = &field[(ix + k) * stride + col0..(ix + k) * stride + col0 + n];
                    for (o, v) in row.iter_mut().zip(src) {
                        *o += kv * v;
                    }
                }
            });
            out
        };

        let (t, ax) = rayon::join(sweep_y, || sweep_x(e, m, p));
        let axy = sweep_x(&t, n, 0);
        let mut out = vec![0.0; n * n];
        for ix in 0..n {
            for iy in 0..n {
                let k = ix * n + iy;
                out[k] = ax[k] + t[(ix + p) * n + iy] - self.cross * axy[k];
            }
        }
        out
    }

    /// Embed interior values into an extended field with zero collar.
    pub fn embed(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let m = self.extended_len();
        let p = self.pad;
        let mut e = vec![0.0; m * m];
        for ix in 0..n {
            e[(ix + p) * m + p..(ix + p) * m + p + n].copy_from_slice(&v[ix * n..(ix + 1) * n]);
        }
        e
    }
}

impl LinearOperator for Kron2DOperator {
    fn dim(&self) -> usize {
        self.n * self.n
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.apply_extended(&self.embed(v))
    }
}

/// A 2D system: operator, right-hand side and the per-axis coordinates.
#[derive(Debug, Clone)]
pub struct System2D {
    pub op: Kron2DOperator,
    pub rhs: Vec<f64>,
    pub spec: HorizonSpec,
    /// Collocation coordinates along each axis, ascending.
    pub axis: Vec<f64>,
}

/// Assemble the 2D problem on `Ω = (0,1)²` with `u = g` on the collar frame.
pub fn assemble_2d(
    mesh: &Mesh1D,
    spec: &HorizonSpec,
    f2d: &(dyn Fn(f64, f64) -> f64 + Sync),
    g2d: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> Result<System2D> {
    let op = Kron2DOperator::new(spec, mesh.unknowns())?;
    let n = op.axis_len();
    let m = op.extended_len();
    let p = op.pad;
    let coord = |i: usize| (i as f64 - p as f64 + 1.0) * mesh.h() / 2.0;
    let mut frame = vec![0.0; m * m];
    for ix in 0..m {
        for iy in 0..m {
            let interior = (p..p + n).contains(&ix) && (p..p + n).contains(&iy);
            if !interior {
                let (x, y) = (coord(ix), coord(iy));
                let v = g2d(x, y);
                if !v.is_finite() {
                    return Err(Error::ConstraintUnavailable2d { x, y });
                }
                frame[ix * m + iy] = v;
            }
        }
    }
    let affine = op.apply_extended(&frame);
    let axis: Vec<f64> = (0..n).map(|i| coord(i + p)).collect();
    let mut rhs = vec![0.0; n * n];
    for ix in 0..n {
        for iy in 0..n {
            let k = ix * n + iy;
            rhs[k] = f2d(axis[ix], axis[iy]) - affine[k];
        }
    }
    Ok(System2D { op, rhs, spec: *spec, axis })
}
