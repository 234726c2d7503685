//! Quadrature weight families for the piecewise-quadratic collocation schemes.
//!
//! All weights are small rationals generated from closed forms. The `a`, `c`,
//! `d` families are dyadic, so their identities hold exactly in `f64`; the
//! `p`, `q` families contain thirds and hold them to rounding.
//!
//! Stencils are expressed as taps `(offset2, weight)` where `offset2` is the
//! offset from the collocation point in half-steps (see [`HalfIndex`]).

use crate::error::{Error, Result};
use crate::grid::HalfIndex;

fn check_radius(r: usize) -> Result<()> {
    if r < 1 {
        return Err(Error::Domain("stencil radius r must be >= 1".into()));
    }
    Ok(())
}

fn eta_for(r: usize, h: f64) -> f64 {
    let delta_tilde = r as f64 * h;
    h / (2.0 * delta_tilde.powi(3))
}

/// `a`-weights shared by the whole-point and shifted half-point stencils.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricWeights {
    pub r: usize,
    /// `a_0 … a_r` at whole-step offsets.
    pub a_whole: Vec<f64>,
    /// `a_{1/2} … a_{r−1/2}` at half-step offsets.
    pub a_half: Vec<f64>,
    /// `h / (2 δ̃³)`.
    pub eta: f64,
}

pub fn symmetric_weights(r: usize, h: f64) -> Result<SymmetricWeights> {
    check_radius(r)?;
    let mut a_whole = vec![2.0; r + 1];
    a_whole[0] = 2.0 - 12.0 * r as f64;
    a_whole[r] = 1.0;
    Ok(SymmetricWeights {
        r,
        a_whole,
        a_half: vec![4.0; r],
        eta: eta_for(r, h),
    })
}

impl SymmetricWeights {
    /// `a_0 + 2Σ a_m + 2Σ a_{m+1/2}`; zero for every `r`.
    pub fn zero_sum(&self) -> f64 {
        self.a_whole[0] + 2.0 * self.a_whole[1..].iter().sum::<f64>() + 2.0 * self.a_half.iter().sum::<f64>()
    }

    /// `Σ a_m m² + Σ a_{m+1/2} (m+1/2)²`, which equals `1/(η h²)`.
    pub fn second_moment(&self) -> f64 {
        let whole: f64 = self.a_whole.iter().enumerate().map(|(m, a)| a * (m * m) as f64).sum();
        let half: f64 = self
            .a_half
            .iter()
            .enumerate()
            .map(|(m, a)| a * (m as f64 + 0.5).powi(2))
            .sum();
        whole + half
    }

    /// Taps of the stencil centred on any collocation point (whole, or half in
    /// the shifted scheme).
    pub fn stencil(&self) -> Stencil {
        let r = self.r as i64;
        let mut taps = Vec::with_capacity(4 * self.r + 1);
        for m in -r..=r {
            taps.push((2 * m, self.a_whole[m.unsigned_abs() as usize]));
        }
        for m in -r..r {
            // |m + 1/2| - 1/2
            let k = if m >= 0 { m } else { -m - 1 };
            taps.push((2 * m + 1, self.a_half[k as usize]));
        }
        taps.sort_by_key(|t| t.0);
        Stencil { taps, eta: self.eta }
    }
}

/// `(c, d)`-weights of the standard half-point stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfPointWeights {
    pub r: usize,
    /// `c_0 … c_r`, applied to whole points.
    pub c: Vec<f64>,
    /// `d_0 … d_r`, applied to half points.
    pub d: Vec<f64>,
    pub eta: f64,
}

/// For `r = 1` the interior range of `c` is empty and `c = (9/4, −1/4)`.
pub fn halfpoint_weights(r: usize, h: f64) -> Result<HalfPointWeights> {
    check_radius(r)?;
    let mut c = vec![2.0; r + 1];
    c[r - 1] = 9.0 / 4.0;
    c[r] = -1.0 / 4.0;
    let mut d = vec![4.0; r + 1];
    d[0] = 4.0 - 12.0 * r as f64;
    d[r] = 2.0;
    Ok(HalfPointWeights { r, c, d, eta: eta_for(r, h) })
}

impl HalfPointWeights {
    /// `2Σ c_m + d_0 + 2Σ_{m≥1} d_m`; zero for every `r`.
    pub fn zero_sum(&self) -> f64 {
        2.0 * self.c.iter().sum::<f64>() + self.d[0] + 2.0 * self.d[1..].iter().sum::<f64>()
    }

    pub fn stencil(&self) -> Stencil {
        let r = self.r as i64;
        let mut taps = Vec::with_capacity(4 * self.r + 3);
        // whole points x_{i+m}, m = -r..=r+1, seen from x_{i+1/2}
        for m in -r..=r + 1 {
            let k = if m >= 1 { m - 1 } else { -m };
            taps.push((2 * m - 1, self.c[k as usize]));
        }
        for m in -r..=r {
            taps.push((2 * m, self.d[m.unsigned_abs() as usize]));
        }
        taps.sort_by_key(|t| t.0);
        Stencil { taps, eta: self.eta }
    }
}

/// Weights of the difference between the standard and shifted half-point stencils.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationWeights {
    pub r: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// `C_r = (2/15) r⁴ + (2/9) r² + 29/720`.
    pub bound_const: f64,
}

pub fn perturbation_weights(r: usize) -> Result<PerturbationWeights> {
    check_radius(r)?;
    let mut p = vec![1.0 / 3.0; r + 1];
    p[r] = 1.0 / 6.0;
    let mut q = vec![-1.0 / 3.0; r + 1];
    q[r - 1] = -7.0 / 24.0;
    q[r] = -1.0 / 24.0;
    let rf = r as f64;
    Ok(PerturbationWeights {
        r,
        p,
        q,
        bound_const: 2.0 / 15.0 * rf.powi(4) + 2.0 / 9.0 * rf * rf + 29.0 / 720.0,
    })
}

impl PerturbationWeights {
    /// `p_0 + 2Σ_{m≥1} p_m + 2Σ_{m=1}^{r+1} q_{m−1}`.
    pub fn zero_sum(&self) -> f64 {
        self.p[0] + 2.0 * self.p[1..].iter().sum::<f64>() + 2.0 * self.q.iter().sum::<f64>()
    }

    /// `Σ p_m m² + Σ q_{m−1} (m − 1/2)²`.
    pub fn second_moment(&self) -> f64 {
        let p: f64 = self.p.iter().enumerate().map(|(m, v)| v * (m * m) as f64).sum();
        let q: f64 = self
            .q
            .iter()
            .enumerate()
            .map(|(k, v)| v * (k as f64 + 0.5).powi(2))
            .sum();
        p + q
    }

    /// `Σ |p_m| m⁴ + Σ |q_{m−1}| (m − 1/2)⁴`, equal to `r·C_r`.
    pub fn fourth_moment_abs(&self) -> f64 {
        let p: f64 = self.p.iter().enumerate().map(|(m, v)| v.abs() * (m as f64).powi(4)).sum();
        let q: f64 = self
            .q
            .iter()
            .enumerate()
            .map(|(k, v)| v.abs() * (k as f64 + 0.5).powi(4))
            .sum();
        p + q
    }

    /// `(3h/δ̃³)·[Σ p_m (f(c+m) + f(c−m)) + p_0 f(c) + Σ q_{m−1} (f(c−1/2+m) + f(c+1/2−m))]`
    /// around the half point `center`.
    pub fn expand<F: Field + ?Sized>(&self, field: &F, center: HalfIndex, h: f64) -> Result<f64> {
        let delta_tilde = self.r as f64 * h;
        let at = |off: i64| fetch(field, center, off);
        let mut acc = self.p[0] * at(0)?;
        for m in 1..=self.r as i64 {
            acc += self.p[m as usize] * (at(2 * m)? + at(-2 * m)?);
        }
        for m in 1..=self.r as i64 + 1 {
            acc += self.q[(m - 1) as usize] * (at(2 * m - 1)? + at(-(2 * m - 1))?);
        }
        Ok(3.0 * h / delta_tilde.powi(3) * acc)
    }
}

/// Composite-Simpson weights (in units of `h/6`) over `[x − δ̃, x + δ̃]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpsonWeights {
    pub r: usize,
    pub b_whole: Vec<f64>,
    pub b_half: f64,
}

pub fn simpson_weights(r: usize) -> Result<SimpsonWeights> {
    check_radius(r)?;
    let mut b_whole = vec![2.0; r + 1];
    b_whole[r] = 1.0;
    Ok(SimpsonWeights { r, b_whole, b_half: 4.0 })
}

impl SimpsonWeights {
    /// Sum of all taps; `(h/6)·mass = 2δ̃`.
    pub fn mass(&self) -> f64 {
        self.b_whole[0] + 2.0 * self.b_whole[1..].iter().sum::<f64>() + 2.0 * self.r as f64 * self.b_half
    }
}

/// Read access to a function sampled on the half-grid.
pub trait Field {
    fn at(&self, j: HalfIndex) -> Option<f64>;
}

/// A continuous function sampled at `x = j·h`.
pub struct SampledFn<F> {
    f: F,
    h: f64,
}

impl<F: Fn(f64) -> f64> SampledFn<F> {
    pub fn new(f: F, h: f64) -> Self {
        SampledFn { f, h }
    }
}

impl<F: Fn(f64) -> f64> Field for SampledFn<F> {
    fn at(&self, j: HalfIndex) -> Option<f64> {
        Some((self.f)(j.doubled() as f64 * self.h / 2.0))
    }
}

fn fetch<F: Field + ?Sized>(field: &F, center: HalfIndex, offset2: i64) -> Result<f64> {
    let j = center.offset(offset2);
    field.at(j).ok_or(Error::MissingFieldValue {
        center2: center.doubled(),
        offset2,
        index2: j.doubled(),
    })
}

/// A scaled stencil: `η · Σ w_k u(center + offset_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub taps: Vec<(i64, f64)>,
    pub eta: f64,
}

impl Stencil {
    pub fn apply<F: Field + ?Sized>(&self, field: &F, center: HalfIndex) -> Result<f64> {
        let mut acc = 0.0;
        for &(off, w) in &self.taps {
            acc += w * fetch(field, center, off)?;
        }
        Ok(self.eta * acc)
    }

    /// `η · Σ |w_k u(center + offset_k)|`, the rounding scale of [`Stencil::apply`].
    pub fn magnitude<F: Field + ?Sized>(&self, field: &F, center: HalfIndex) -> Result<f64> {
        let mut acc = 0.0;
        for &(off, w) in &self.taps {
            acc += (w * fetch(field, center, off)?).abs();
        }
        Ok(self.eta * acc)
    }

    /// Largest `|offset2|`.
    pub fn reach(&self) -> i64 {
        self.taps.iter().map(|t| t.0.abs()).max().unwrap_or(0)
    }

    pub fn weight_sum(&self) -> f64 {
        self.taps.iter().map(|t| t.1).sum()
    }
}

pub fn apply_stencil_whole<F: Field + ?Sized>(w: &SymmetricWeights, field: &F, center: HalfIndex) -> Result<f64> {
    debug_assert!(center.is_whole());
    w.stencil().apply(field, center)
}

pub fn apply_stencil_half_shifted<F: Field + ?Sized>(
    w: &SymmetricWeights,
    field: &F,
    center: HalfIndex,
) -> Result<f64> {
    debug_assert!(!center.is_whole());
    w.stencil().apply(field, center)
}

pub fn apply_stencil_half_standard<F: Field + ?Sized>(
    cw: &HalfPointWeights,
    field: &F,
    center: HalfIndex,
) -> Result<f64> {
    debug_assert!(!center.is_whole());
    cw.stencil().apply(field, center)
}
