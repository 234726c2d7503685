//! Reference evaluations of the continuum operator
//!
//! `L_δ u(x) = (3/δ³) ∫_0^δ [u(x+z) − 2u(x) + u(x−z)] dz`
//!
//! and of the right-hand sides derived from manufactured solutions. Everything
//! here is independent of the discrete stencils and serves as ground truth.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 12;

/// A polynomial in the monomial basis, `Σ c_k x^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFn {
    coeffs: Vec<f64>,
}

impl PolynomialFn {
    pub fn new(mut coeffs: Vec<f64>) -> Result<Self> {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        if coeffs.len() > MAX_DEGREE + 1 {
            return Err(Error::Domain(format!(
                "polynomial degree {} exceeds supported maximum {MAX_DEGREE}",
                coeffs.len() - 1
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("polynomial coefficients must be finite".into()));
        }
        Ok(PolynomialFn { coeffs })
    }

    pub fn zero() -> Self {
        PolynomialFn { coeffs: vec![0.0] }
    }

    /// `x²(1 − x²)`, the manufactured solution of the reference experiments.
    pub fn quartic_bump() -> Self {
        PolynomialFn { coeffs: vec![0.0, 0.0, 1.0, 0.0, -1.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::zero();
        }
        let coeffs = self.coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
        PolynomialFn { coeffs }
    }

    pub fn nth_derivative(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |p, _| p.derivative())
    }
}

impl fmt::Display for PolynomialFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(k, c)| match k {
                0 => format!("{c}"),
                1 => format!("{c}x"),
                _ => format!("{c}x^{k}"),
            })
            .collect();
        if terms.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&terms.join(" + "))
        }
    }
}

/// Constant interaction kernel, normalised to unit second moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub dimension: u8,
    pub delta: f64,
    pub value: f64,
}

impl KernelSpec {
    /// `γ = 3/δ³`.
    pub fn one_d(delta: f64) -> Self {
        KernelSpec { dimension: 1, delta, value: 3.0 / delta.powi(3) }
    }

    /// `γ = 3/(2δ⁴)` on the square `[−δ, δ]²`.
    pub fn two_d(delta: f64) -> Self {
        KernelSpec { dimension: 2, delta, value: 3.0 / (2.0 * delta.powi(4)) }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Closed form `L_δ u(x) = 6 Σ_{k≥1} u^{(2k)}(x) δ^{2k−2} / ((2k)! (2k+1))`,
/// exact (finite) for polynomials.
pub fn apply_exact_1d(u: &PolynomialFn, delta: f64, x: f64) -> f64 {
    let even: Vec<f64> = (1..=u.degree() / 2)
        .map(|k| u.nth_derivative(2 * k).eval(x))
        .collect();
    series_from_even_derivatives(&even, delta)
}

/// Same series from supplied even derivatives `[u''(x), u''''(x), …]`.
pub fn series_from_even_derivatives(even: &[f64], delta: f64) -> f64 {
    even.iter()
        .enumerate()
        .map(|(i, d)| {
            let k = i + 1;
            6.0 * d * delta.powi(2 * k as i32 - 2) / (factorial(2 * k) * (2 * k + 1) as f64)
        })
        .sum()
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn gl8() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(8))
}

/// Composite 8-point Gauss–Legendre sum of `f` on `[a, b]`, also returning `∫|f|`.
fn composite_gl<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> (f64, f64) {
    let (nodes, weights) = gl8();
    let width = (b - a) / panels as f64;
    let mut sum = 0.0;
    let mut abs = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * width;
        for (t, w) in nodes.iter().zip(weights) {
            let v = f(mid + 0.5 * width * t);
            sum += w * v;
            abs += w * v.abs();
        }
    }
    (0.5 * width * sum, 0.5 * width * abs)
}

/// Quadrature value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureEstimate {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

pub const QUADRATURE_RTOL: f64 = 1e-12;
pub const QUADRATURE_MAX_PANELS: usize = 1 << 16;

/// Panel-doubling Gauss–Legendre evaluation of `L_δ u(x)` for any smooth `u`.
///
/// Stops once successive levels agree to `1e-12·|value|`, or to the rounding
/// level of the second difference. Never returns an unconverged value silently.
pub fn apply_quadrature_1d<F>(u: &F, delta: f64, x: f64, panels: usize) -> Result<QuadratureEstimate>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    let ux = u(x);
    let integrand = |z: f64| u(x + z) - 2.0 * ux + u(x - z);
    let scale = 3.0 / delta.powi(3);
    let mut n = panels.max(4);
    let (mut prev, _) = composite_gl(&integrand, 0.0, delta, n);
    prev *= scale;
    loop {
        let next_n = 2 * n;
        let (v, _) = composite_gl(&integrand, 0.0, delta, next_n);
        let value = v * scale;
        // rounding floor of the cancelling second difference
        let (mag, _) = composite_gl(&|z: f64| u(x + z).abs() + 2.0 * ux.abs() + u(x - z).abs(), 0.0, delta, next_n);
        let abs = mag * scale;
        let error = (value - prev).abs();
        let tol = (QUADRATURE_RTOL * value.abs()).max(64.0 * f64::EPSILON * abs);
        if error <= tol {
            return Ok(QuadratureEstimate { value, error, panels: next_n });
        }
        if next_n >= QUADRATURE_MAX_PANELS {
            return Err(Error::QuadratureNotConverged { value, estimate: error, panels: next_n });
        }
        prev = value;
        n = next_n;
    }
}

/// `L u(x, y) = (3/(2δ⁴)) ∬_{[−δ,δ]²} [u(x+s, y+t) − u(x, y)] ds dt` for `u = p(x) + q(y)`.
pub fn apply_exact_2d_additive(p: &PolynomialFn, q: &PolynomialFn, delta: f64, x: f64, y: f64) -> f64 {
    apply_exact_1d(p, delta, x) + apply_exact_1d(q, delta, y)
}

/// Tensor Gauss–Legendre evaluation of the 2D square-neighbourhood operator.
pub fn apply_quadrature_2d<F>(u: &F, delta: f64, x: f64, y: f64, panels: usize) -> f64
where
    F: Fn(f64, f64) -> f64 + ?Sized,
{
    let (nodes, weights) = gl8();
    let uxy = u(x, y);
    let width = 2.0 * delta / panels as f64;
    let mut sum = 0.0;
    for ps in 0..panels {
        let ms = -delta + (ps as f64 + 0.5) * width;
        for (ts, ws) in nodes.iter().zip(weights) {
            let s = ms + 0.5 * width * ts;
            for pt in 0..panels {
                let mt = -delta + (pt as f64 + 0.5) * width;
                for (tt, wt) in nodes.iter().zip(weights) {
                    let t = mt + 0.5 * width * tt;
                    sum += ws * wt * (u(x + s, y + t) - uxy);
                }
            }
        }
    }
    KernelSpec::two_d(delta).value * sum * 0.25 * width * width
}

/// Something that can be sampled as a right-hand side.
pub trait Source: Send + Sync {
    fn eval(&self, x: f64) -> Result<f64>;
}

impl<F> Source for F
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    fn eval(&self, x: f64) -> Result<f64> {
        Ok(self(x))
    }
}

pub type SmoothFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A manufactured solution: polynomial (closed-form path) or any smooth function
/// (quadrature path).
#[derive(Clone)]
pub enum Manufactured {
    Polynomial(PolynomialFn),
    Smooth(SmoothFn),
}

impl fmt::Debug for Manufactured {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Manufactured::Polynomial(p) => write!(f, "Polynomial({p})"),
            Manufactured::Smooth(_) => f.write_str("Smooth(..)"),
        }
    }
}

impl Manufactured {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Manufactured::Polynomial(p) => p.eval(x),
            Manufactured::Smooth(u) => u(x),
        }
    }
}

/// `f_δ = −L_δ u`.
#[derive(Clone, Debug)]
pub struct NonlocalRhs {
    u: Manufactured,
    delta: f64,
}

impl Source for NonlocalRhs {
    fn eval(&self, x: f64) -> Result<f64> {
        match &self.u {
            Manufactured::Polynomial(p) => Ok(-apply_exact_1d(p, self.delta, x)),
            Manufactured::Smooth(u) => Ok(-apply_quadrature_1d(u.as_ref(), self.delta, x, 8)?.value),
        }
    }
}

/// `f_0 = −C_0 u''` with `C_0 = 1`.
#[derive(Clone, Debug)]
pub struct LocalRhs {
    second: PolynomialFn,
}

impl Source for LocalRhs {
    fn eval(&self, x: f64) -> Result<f64> {
        Ok(-self.second.eval(x))
    }
}

/// Right-hand sides induced by a manufactured solution.
#[derive(Clone, Debug)]
pub struct RhsPair {
    pub f_delta: NonlocalRhs,
    /// Local-limit source; only available on the polynomial path.
    pub f_local: Option<LocalRhs>,
}

pub fn rhs_builder(u: &Manufactured, kernel: &KernelSpec) -> RhsPair {
    let f_local = match u {
        Manufactured::Polynomial(p) => Some(LocalRhs { second: p.nth_derivative(2) }),
        Manufactured::Smooth(_) => None,
    };
    RhsPair {
        f_delta: NonlocalRhs { u: u.clone(), delta: kernel.delta },
        f_local,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gives_two() {
        let u = PolynomialFn::new(vec![0.0, 0.0, 1.0]).unwrap();
        for &(d, x) in &[(0.1, 0.3), (1.0, -2.0), (1e-4, 7.0)] {
            assert_eq!(apply_exact_1d(&u, d, x), 2.0);
        }
    }

    #[test]
    fn quartic_at_origin() {
        let u = PolynomialFn::new(vec![0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((apply_exact_1d(&u, 0.5, 0.0) - 0.3).abs() < 1e-15);
        let q = apply_quadrature_1d(&|x: f64| x.powi(4), 0.5, 0.0, 4).unwrap();
        assert!((q.value - 0.3).abs() < 1e-12, "{q:?}");
    }

    #[test]
    fn bump_rhs_closed_form() {
        let u = PolynomialFn::quartic_bump();
        for &(d, x) in &[(0.25, 0.0), (1.0 / 3.0, 0.7), (0.01, 0.2)] {
            let got = -apply_exact_1d(&u, d, x);
            let want = 12.0 * x * x - 2.0 + 1.2 * d * d;
            assert!((got - want).abs() < 1e-13, "{got} vs {want}");
        }
    }

    #[test]
    fn constant_is_annihilated() {
        let q = apply_quadrature_1d(&|_| 5.0, 0.3, 0.1, 4).unwrap();
        assert_eq!(q.value, 0.0);
        assert_eq!(apply_exact_1d(&PolynomialFn::new(vec![5.0]).unwrap(), 0.3, 0.1), 0.0);
    }

    #[test]
    fn sine_matches_truncated_series() {
        let pi = std::f64::consts::PI;
        let (d, x) = (0.1, 0.5);
        let even: Vec<f64> = (1..=8)
            .map(|k| (-1f64).powi(k) * pi.powi(2 * k) * (pi * x).sin())
            .collect();
        let series = series_from_even_derivatives(&even, d);
        let q = apply_quadrature_1d(&|t: f64| (pi * t).sin(), d, x, 4).unwrap();
        assert!((q.value - series).abs() < 1e-10, "{} vs {series}", q.value);
    }

    #[test]
    fn kernel_second_moment() {
        for &d in &[1e-3, 0.1, 1.0 / 3.0, 2.0] {
            let k = KernelSpec::one_d(d);
            let (m, _) = composite_gl(&|z: f64| z * z * k.value, 0.0, d, 4);
            assert!((m - 1.0).abs() < 1e-13, "{m}");
        }
    }

    #[test]
    fn gauss_legendre_exact_to_degree_fifteen() {
        let (x, w) = gauss_legendre(8);
        for p in 0..=15 {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            let want = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert!((got - want).abs() < 1e-14, "p={p}");
        }
    }

    #[test]
    fn additive_two_d() {
        let sq = PolynomialFn::new(vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(apply_exact_2d_additive(&sq, &sq, 0.2, 0.3, 0.4), 4.0);
        let b = PolynomialFn::quartic_bump();
        let d = 0.25;
        let (x, y) = (0.3, 0.8);
        let got = -apply_exact_2d_additive(&b, &b, d, x, y);
        let want = (12.0 * x * x - 2.0 + 1.2 * d * d) + (12.0 * y * y - 2.0 + 1.2 * d * d);
        assert!((got - want).abs() < 1e-12);
        let quad = -apply_quadrature_2d(&|s: f64, t: f64| b.eval(s) + b.eval(t), d, x, y, 2);
        assert!((quad - want).abs() < 1e-11, "{quad} vs {want}");
        let z = PolynomialFn::zero();
        assert_eq!(apply_exact_2d_additive(&b, &z, d, x, y), apply_exact_1d(&b, d, x));
    }

    #[test]
    fn rhs_pair_for_bump() {
        let u = Manufactured::Polynomial(PolynomialFn::quartic_bump());
        let rhs = rhs_builder(&u, &KernelSpec::one_d(0.25));
        assert!((rhs.f_delta.eval(0.0).unwrap() + 1.925).abs() < 1e-15);
        let f0 = rhs.f_local.unwrap();
        for x in [0.0, 0.3, 1.0] {
            assert!((f0.eval(x).unwrap() - (12.0 * x * x - 2.0)).abs() < 1e-14);
        }
        let zero = rhs_builder(&Manufactured::Polynomial(PolynomialFn::zero()), &KernelSpec::one_d(0.1));
        assert_eq!(zero.f_delta.eval(0.4).unwrap(), 0.0);
    }

    #[test]
    fn degree_limit() {
        assert!(PolynomialFn::new(vec![1.0; 13]).is_ok());
        assert!(PolynomialFn::new(vec![1.0; 14]).is_err());
        assert_eq!(PolynomialFn::new(vec![1.0, 0.0, 0.0]).unwrap().degree(), 0);
    }
}
