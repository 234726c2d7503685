//! Uniform meshes on the unit interval, horizon/mesh alignment bookkeeping and
//! the canonical unknown ordering used by every assembled system.
//!
//! Collocation points live on the half-grid `x = j·h` with `j` a multiple of
//! 1/2. Indices are carried as [`HalfIndex`], which stores `2j` so that all
//! index arithmetic stays in integers.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Relative tolerance below which the misalignment fraction is snapped to zero.
pub const ALIGNMENT_TOL: f64 = 1e-12;

/// A half-integer grid index `j ∈ ½ℤ`, stored doubled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfIndex(pub i64);

impl HalfIndex {
    /// Whole point `x_i`.
    pub const fn whole(i: i64) -> Self {
        HalfIndex(2 * i)
    }

    /// Half point `x_{i+1/2}`.
    pub const fn half(i: i64) -> Self {
        HalfIndex(2 * i + 1)
    }

    pub const fn doubled(self) -> i64 {
        self.0
    }

    pub const fn is_whole(self) -> bool {
        self.0 % 2 == 0
    }

    /// Shift by `offset2 / 2` grid steps.
    pub const fn offset(self, offset2: i64) -> Self {
        HalfIndex(self.0 + offset2)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl fmt::Display for HalfIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_whole() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Decomposition of a horizon `δ` against a mesh width `h`.
///
/// For `δ ≥ h`: `r = ⌊δ/h⌋`, `δ̃ = r·h` and `δ = δ̃ + r0·h`.
/// For `δ < h`: `r = 1`, `δ̃ = h` and `δ = δ̃ − r0·h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonSpec {
    pub delta: f64,
    pub h: f64,
    pub r: usize,
    pub r0: f64,
    pub delta_tilde: f64,
    pub aligned: bool,
    /// Exponent in `δ = c·h^β`; carried for reporting only.
    pub beta_hint: Option<f64>,
}

impl HorizonSpec {
    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta_hint = Some(beta);
        self
    }

    /// `η = h / (2 δ̃³)`, the common prefactor of every stencil.
    pub fn eta(&self) -> f64 {
        self.h / (2.0 * self.delta_tilde.powi(3))
    }

    /// True when the horizon is shorter than one mesh cell.
    pub fn sub_cell(&self) -> bool {
        self.delta < self.h && !self.aligned
    }
}

/// Split `delta` into a grid-aligned part `δ̃ = r·h` and a misalignment fraction.
pub fn horizon_decompose(delta: f64, h: f64) -> Result<HorizonSpec> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("horizon must be positive and finite, got {delta}")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("mesh width must be positive and finite, got {h}")));
    }

    let ratio = delta / h;
    let nearest = ratio.round();
    if nearest >= 1.0 && (ratio - nearest).abs() < ALIGNMENT_TOL * nearest.max(1.0) {
        let r = nearest as usize;
        return Ok(HorizonSpec {
            delta,
            h,
            r,
            r0: 0.0,
            delta_tilde: r as f64 * h,
            aligned: true,
            beta_hint: None,
        });
    }

    let spec = if ratio >= 1.0 {
        let r = ratio.floor() as usize;
        let delta_tilde = r as f64 * h;
        HorizonSpec {
            delta,
            h,
            r,
            r0: (delta - delta_tilde) / h,
            delta_tilde,
            aligned: false,
            beta_hint: None,
        }
    } else {
        HorizonSpec {
            delta,
            h,
            r: 1,
            r0: 1.0 - ratio,
            delta_tilde: h,
            aligned: false,
            beta_hint: None,
        }
    };
    Ok(spec)
}

/// Uniform mesh of `[0, 1]` with `N` interior whole points, `h = 1/(N+1)`.
///
/// Interior set `N_in = {1/2, 1, …, N, N+1/2}`; constraint set `N_out` is the
/// half-grid on `[−r, 0] ∪ [N+1, N+r+1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh1D {
    n: usize,
    h: f64,
    r: usize,
}

impl Mesh1D {
    /// Mesh whose interior contains at least one point untouched by either collar
    /// (`N ≥ 2r+1`).
    pub fn new(n: usize, spec: &HorizonSpec) -> Result<Self> {
        let need = 2 * spec.r + 1;
        if n < need {
            return Err(Error::MeshTooSmall { n, r: spec.r, need });
        }
        Self::with_overlap(n, spec)
    }

    /// Like [`Mesh1D::new`] but allows stencils that reach both collars (`N ≥ 1`).
    pub fn with_overlap(n: usize, spec: &HorizonSpec) -> Result<Self> {
        if n == 0 || spec.r == 0 {
            return Err(Error::Domain(format!("need N >= 1 and r >= 1, got N = {n}, r = {}", spec.r)));
        }
        let h = 1.0 / (n as f64 + 1.0);
        if ((spec.h - h) / h).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "horizon was decomposed with h = {} but N = {n} implies h = {h}",
                spec.h
            )));
        }
        Ok(Mesh1D { n, h, r: spec.r })
    }

    /// `N` such that `h = 1/(N+1)`; fails unless `1/h` is an integer.
    pub fn interior_count_for(h: f64) -> Result<usize> {
        let inv = 1.0 / h;
        let k = inv.round();
        if k < 2.0 || (inv - k).abs() > 1e-9 * k {
            return Err(Error::Config(format!("h = {h} is not 1/(N+1) for an integer N >= 1")));
        }
        Ok(k as usize - 1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Number of unknowns, `2N + 1`.
    pub fn unknowns(&self) -> usize {
        2 * self.n + 1
    }

    pub fn point(&self, j: HalfIndex) -> f64 {
        j.doubled() as f64 * self.h / 2.0
    }

    pub fn is_interior(&self, j: HalfIndex) -> bool {
        (1..=2 * self.n as i64 + 1).contains(&j.doubled())
    }

    pub fn is_constraint(&self, j: HalfIndex) -> bool {
        let d = j.doubled();
        let r = self.r as i64;
        let n = self.n as i64;
        (-2 * r..=0).contains(&d) || (2 * n + 2..=2 * (n + r + 1)).contains(&d)
    }

    /// Position of an interior index in the unknown vector
    /// `[u_1 … u_N, u_{1/2} … u_{N+1/2}]`.
    pub fn position(&self, j: HalfIndex) -> Option<usize> {
        if !self.is_interior(j) {
            return None;
        }
        let d = j.doubled();
        if j.is_whole() {
            Some((d / 2 - 1) as usize)
        } else {
            Some(self.n + ((d - 1) / 2) as usize)
        }
    }

    /// Inverse of [`Mesh1D::position`].
    pub fn index_at(&self, pos: usize) -> HalfIndex {
        assert!(pos < self.unknowns(), "unknown position {pos} out of range");
        if pos < self.n {
            HalfIndex::whole(pos as i64 + 1)
        } else {
            HalfIndex::half((pos - self.n) as i64)
        }
    }

    /// Interior indices in unknown order (whole points first, then half points).
    pub fn interior(&self) -> impl Iterator<Item = HalfIndex> + '_ {
        (0..self.unknowns()).map(move |p| self.index_at(p))
    }

    /// Interior indices sorted by coordinate.
    pub fn interior_by_x(&self) -> impl Iterator<Item = HalfIndex> {
        (1..=2 * self.n as i64 + 1).map(HalfIndex)
    }

    /// Constraint indices, left collar then right collar, each ascending.
    pub fn constraint(&self) -> Vec<HalfIndex> {
        let r = self.r as i64;
        let n = self.n as i64;
        (-2 * r..=0)
            .chain(2 * n + 2..=2 * (n + r + 1))
            .map(HalfIndex)
            .collect()
    }

    /// Extended index range `[-2r, 2(N+r+1)]` covering interior and both collars.
    pub fn extended_range(&self) -> std::ops::RangeInclusive<i64> {
        -2 * self.r as i64..=2 * (self.n + self.r + 1) as i64
    }

    /// Collocation coordinates in unknown order.
    pub fn interior_points(&self) -> Vec<f64> {
        self.interior().map(|j| self.point(j)).collect()
    }
}

type ConstraintFn = dyn Fn(HalfIndex, f64) -> Option<f64> + Send + Sync;

/// Values prescribed on the constraint collar.
#[derive(Clone)]
pub struct VolumeConstraint {
    eval: Arc<ConstraintFn>,
}

impl fmt::Debug for VolumeConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("VolumeConstraint(..)")
    }
}

impl VolumeConstraint {
    pub fn from_fn<F>(g: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        VolumeConstraint {
            eval: Arc::new(move |_, x| Some(g(x)).filter(|v| v.is_finite())),
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        VolumeConstraint {
            eval: Arc::new(move |_, _| Some(c)),
        }
    }

    /// Tabulated values keyed by half-index; any other point is unavailable.
    pub fn from_values(values: BTreeMap<HalfIndex, f64>) -> Self {
        VolumeConstraint {
            eval: Arc::new(move |j, _| values.get(&j).copied()),
        }
    }

    pub fn value(&self, j: HalfIndex, x: f64) -> Option<f64> {
        (self.eval)(j, x)
    }

    pub fn require(&self, j: HalfIndex, x: f64) -> Result<f64> {
        self.value(j, x).ok_or(Error::ConstraintUnavailable { index2: j.doubled(), x })
    }
}
