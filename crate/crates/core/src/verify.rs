//! Seeded invariant suites: weight identities, matrix certificates, oracle
//! agreement and truncation behaviour.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{perturbation_probe, truncation_probe, truncation_sweep, HorizonRule};
use crate::assembly::{assemble_1d, Scheme};
use crate::error::{Error, Result};
use crate::grid::{horizon_decompose, HalfIndex, Mesh1D, VolumeConstraint};
use crate::oracle::{apply_exact_1d, apply_quadrature_1d, gauss_legendre, KernelSpec, Manufactured, PolynomialFn};
use crate::solver::{certify_matrix, max_principle_check, solve_direct};
use crate::stencil::{halfpoint_weights, perturbation_weights, symmetric_weights, simpson_weights, SampledFn};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Weights,
    Matrix,
    Oracle,
    Truncation,
    All,
}

impl Suite {
    pub fn label(self) -> &'static str {
        match self {
            Suite::Weights => "weights",
            Suite::Matrix => "matrix",
            Suite::Oracle => "oracle",
            Suite::Truncation => "truncation",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weights" => Ok(Suite::Weights),
            "matrix" => Ok(Suite::Matrix),
            "oracle" => Ok(Suite::Oracle),
            "truncation" => Ok(Suite::Truncation),
            "all" => Ok(Suite::All),
            other => Err(Error::Config(format!(
                "unknown suite '{other}' (expected weights, matrix, oracle, truncation or all)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}/{}: {}", self.suite, self.name, self.detail)
    }
}

fn check(suite: &'static str, name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Check {
    Check { suite, name: name.into(), pass, detail: detail.into() }
}

pub fn run_suite(suite: Suite, seed: u64) -> Vec<Check> {
    match suite {
        Suite::Weights => weights_suite(seed),
        Suite::Matrix => matrix_suite(seed),
        Suite::Oracle => oracle_suite(seed),
        Suite::Truncation => truncation_suite(seed),
        Suite::All => [Suite::Weights, Suite::Matrix, Suite::Oracle, Suite::Truncation]
            .into_iter()
            .flat_map(|s| run_suite(s, seed))
            .collect(),
    }
}

fn random_poly(rng: &mut ChaCha8Rng, max_degree: usize) -> PolynomialFn {
    let deg = rng.gen_range(0..=max_degree);
    PolynomialFn::new((0..=deg).map(|_| rng.gen_range(-2.0..2.0)).collect()).expect("bounded degree")
}

pub fn weights_suite(seed: u64) -> Vec<Check> {
    const S: &str = "weights";
    let mut out = Vec::new();
    let h = 1.0 / 128.0;
    let mut bad = Vec::new();
    for r in 1..=50 {
        let a = symmetric_weights(r, h).unwrap();
        let c = halfpoint_weights(r, h).unwrap();
        let p = perturbation_weights(r).unwrap();
        let s = simpson_weights(r).unwrap();
        let a_moment = a.second_moment();
        let want_moment = 1.0 / (a.eta * h * h);
        if a.zero_sum() != 0.0 || c.zero_sum() != 0.0 || a.stencil().weight_sum() != 0.0 || c.stencil().weight_sum() != 0.0 {
            bad.push(format!("r={r}: zero sum"));
        }
        let rf = r as f64;
        if p.zero_sum().abs() > 1e-15 * rf || p.second_moment().abs() > 1e-15 * rf.powi(3) {
            bad.push(format!("r={r}: perturbation moments {:e} {:e}", p.zero_sum(), p.second_moment()));
        }
        if (a_moment - want_moment).abs() > 1e-12 * want_moment {
            bad.push(format!("r={r}: second moment {a_moment} vs {want_moment}"));
        }
        if (p.fourth_moment_abs() - r as f64 * p.bound_const).abs() > 1e-12 * p.fourth_moment_abs() {
            bad.push(format!("r={r}: fourth moment"));
        }
        if s.mass() != 12.0 * r as f64 {
            bad.push(format!("r={r}: simpson mass"));
        }
    }
    out.push(check(S, "identities_r1_to_50", bad.is_empty(), if bad.is_empty() { "dyadic identities exact; p/q identities to rounding".into() } else { bad.join("; ") }));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let coeffs: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let u = PolynomialFn::new(coeffs).unwrap();
        let r = rng.gen_range(1..=8);
        let h = 1.0 / rng.gen_range(16..=128) as f64;
        let a = symmetric_weights(r, h).unwrap().stencil();
        let c = halfpoint_weights(r, h).unwrap().stencil();
        let uu = u.clone();
        let field = SampledFn::new(move |x| uu.eval(x), h);
        for k in 10..14 {
            let j = HalfIndex(k);
            let x = j.as_f64() * h;
            let want = apply_exact_1d(&u, r as f64 * h, x);
            for st in [&a, &c] {
                if st == &c && j.is_whole() {
                    continue;
                }
                let scale = want.abs() + st.magnitude(&field, j).unwrap();
                worst = worst.max((st.apply(&field, j).unwrap() - want).abs() / scale);
            }
        }
    }
    out.push(check(S, "cubic_exactness", worst <= 1e-12, format!("max relative residual {worst:.3e} (tol 1e-12)")));
    out
}

/// Certificates over an `(N, r)` grid with `δ = r·h`.
pub fn certificate_grid(ns: &[usize], rs: &[usize]) -> Vec<Check> {
    const S: &str = "matrix";
    let cells: Vec<(usize, usize)> = ns.iter().flat_map(|&n| rs.iter().map(move |&r| (n, r))).collect();
    cells
        .par_iter()
        .map(|&(n, r)| {
            let h = 1.0 / (n as f64 + 1.0);
            let result = (|| {
                let spec = horizon_decompose(r as f64 * h, h)?;
                let mesh = Mesh1D::with_overlap(n, &spec)?;
                let sys = assemble_1d(Scheme::ShiftedSymmetric, &mesh, &spec, &|_| 0.0, &VolumeConstraint::zero())?;
                certify_matrix(&sys)
            })();
            match result {
                Ok(c) => check(
                    S,
                    format!("certificate_N{n}_r{r}"),
                    c.all_pass(),
                    format!(
                        "sym={} dd={} pd={} (min ritz {:.3e}) inv_pos={} norm/bound={:.4}",
                        c.symmetric,
                        c.diagonally_dominant,
                        c.positive_definite,
                        c.min_ritz,
                        c.inverse_positive.map_or("n/a".to_string(), |b| b.to_string()),
                        c.bound_ratio()
                    ),
                ),
                Err(e) => check(S, format!("certificate_N{n}_r{r}"), false, e.to_string()),
            }
        })
        .collect()
}

/// Discrete maximum principle for `f ≡ −1`, `f ≡ +1` and `trials` random sign-definite sources.
pub fn max_principle_trials(seed: u64, trials: usize) -> Vec<Check> {
    const S: &str = "matrix";
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4d50);
    let mut cases: Vec<(String, usize, usize, Vec<f64>, f64, f64)> = vec![
        ("f=-1".into(), 63, 4, vec![-1.0], 0.0, 0.0),
        ("f=+1".into(), 63, 4, vec![1.0], 0.0, 0.0),
    ];
    for t in 0..trials {
        let n = rng.gen_range(8..=120);
        let r = rng.gen_range(1..=8);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        // f = sign·(c0 + Σ c_k |sin(kπx)|) with c0 > 0: sign-definite, nonconstant
        let coeffs: Vec<f64> = (0..4).map(|k| sign * rng.gen_range(if k == 0 { 0.01 } else { 0.0 }..3.0)).collect();
        let g0 = rng.gen_range(-1.0..1.0);
        let g1 = rng.gen_range(-1.0..1.0);
        cases.push((format!("random_{t}"), n, r, coeffs, g0, g1));
    }
    cases
        .into_iter()
        .map(|(name, n, r, coeffs, g0, g1)| {
            let h = 1.0 / (n as f64 + 1.0);
            let result = (|| {
                let spec = horizon_decompose(r as f64 * h, h)?;
                let mesh = Mesh1D::with_overlap(n, &spec)?;
                let cf = coeffs.clone();
                let f = move |x: f64| {
                    cf[0] + cf.iter().enumerate().skip(1).map(|(k, c)| c * (k as f64 * std::f64::consts::PI * x).sin().abs()).sum::<f64>()
                };
                let g = VolumeConstraint::from_fn(move |x| g0 + g1 * (3.0 * x).cos());
                let sys = assemble_1d(Scheme::ShiftedSymmetric, &mesh, &spec, &f, &g)?;
                let u = solve_direct(&sys)?.solution;
                max_principle_check(&sys, &u)
            })();
            match result {
                Ok(rep) => check(S, format!("max_principle_{name}"), rep.holds, format!("N={n} r={r} slack {:.3e}", rep.slack)),
                Err(e) => check(S, format!("max_principle_{name}"), false, e.to_string()),
            }
        })
        .collect()
}

pub fn matrix_suite(seed: u64) -> Vec<Check> {
    let mut out = certificate_grid(&[16, 32, 64, 128, 256, 512], &(1..=10).collect::<Vec<_>>());
    out.extend(max_principle_trials(seed, 20));
    out
}

/// Largest relative disagreement between the closed-form and quadrature oracles.
pub fn dual_oracle_disagreement(seed: u64, trials: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0a);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let u = random_poly(&mut rng, 8);
        let delta = rng.gen_range(0.05..1.0);
        let x = rng.gen_range(0.0..1.0);
        let exact = apply_exact_1d(&u, delta, x);
        let uu = u.clone();
        let quad = apply_quadrature_1d(&move |t: f64| uu.eval(t), delta, x, 4).map(|q| q.value).unwrap_or(f64::NAN);
        // scale: sum of absolute series terms
        let terms: f64 = (1..=u.degree() / 2)
            .map(|k| {
                let d = u.nth_derivative(2 * k).eval(x).abs();
                6.0 * d * delta.powi(2 * k as i32 - 2) / ((1..=2 * k).product::<usize>() as f64 * (2 * k + 1) as f64)
            })
            .sum();
        // disagreement beyond the rounding level of the second difference itself
        let floor = 64.0 * 3.0 / (delta * delta) * f64::EPSILON * (u.eval(x - delta).abs() + 2.0 * u.eval(x).abs() + u.eval(x + delta).abs());
        let excess = ((exact - quad).abs() - floor).max(0.0);
        let rel = if excess == 0.0 { 0.0 } else { excess / exact.abs().max(terms) };
        worst = if rel.is_nan() { f64::INFINITY } else { worst.max(rel) };
    }
    worst
}

pub fn oracle_suite(seed: u64) -> Vec<Check> {
    const S: &str = "oracle";
    let mut out = Vec::new();
    let worst = dual_oracle_disagreement(seed, 50);
    out.push(check(S, "dual_oracle_agreement", worst <= 1e-11, format!("max relative disagreement {worst:.3e} (tol 1e-11)")));

    let (nodes, weights) = gauss_legendre(8);
    let mut moment_err = 0.0f64;
    for &d in &[1e-3, 0.1, 0.25, 1.0 / 3.0, 1.0] {
        let k = KernelSpec::one_d(d);
        let m: f64 = nodes.iter().zip(&weights).map(|(t, w)| {
            let z = 0.5 * d * (t + 1.0);
            0.5 * d * w * z * z * k.value
        }).sum();
        moment_err = moment_err.max((m - 1.0).abs());
    }
    out.push(check(S, "kernel_second_moment", moment_err <= 1e-13, format!("max |moment − 1| = {moment_err:.3e}")));

    let pi = std::f64::consts::PI;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51);
    let mut local = true;
    for _ in 0..20 {
        let u = random_poly(&mut rng, 8);
        let x = rng.gen_range(0.0..1.0);
        let u2 = u.nth_derivative(2).eval(x);
        let k: f64 = (2..=u.degree() / 2)
            .map(|k| 6.0 * u.nth_derivative(2 * k).eval(x).abs() / ((1..=2 * k).product::<usize>() as f64 * (2 * k + 1) as f64))
            .sum();
        for &d in &[0.5, 0.1, 0.01] {
            local &= (apply_exact_1d(&u, d, x) - u2).abs() <= k * d * d * (1.0 + 1e-9) + 1e-12 * u2.abs().max(1.0);
        }
    }
    out.push(check(S, "local_limit", local, "|L_δu − u''| ≤ K δ² on random polynomials"));

    let sin = apply_quadrature_1d(&|t: f64| (pi * t).sin(), 0.1, 0.5, 4);
    let series: f64 = (1..=8)
        .map(|k| {
            let d = (-1f64).powi(k) * pi.powi(2 * k);
            6.0 * d * 0.1f64.powi(2 * k - 2) / ((1..=2 * k as usize).product::<usize>() as f64 * (2 * k + 1) as f64)
        })
        .sum();
    let ok = sin.as_ref().map(|q| (q.value - series).abs() < 1e-10).unwrap_or(false);
    out.push(check(S, "sine_series", ok, format!("quadrature {:?} vs series {series:.15e}", sin.map(|q| q.value))));
    out
}

pub fn truncation_suite(seed: u64) -> Vec<Check> {
    const S: &str = "truncation";
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7c);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let coeffs: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let u = Manufactured::Polynomial(PolynomialFn::new(coeffs).unwrap());
        let n = rng.gen_range(16..=64);
        let r = rng.gen_range(1..=6);
        let h = 1.0 / (n as f64 + 1.0);
        let spec = horizon_decompose(r as f64 * h, h).unwrap();
        for scheme in [Scheme::ShiftedSymmetric, Scheme::Standard] {
            let rep = truncation_probe(&u, &spec, scheme).unwrap();
            worst = worst.max(rep.max / rep.scale);
        }
    }
    out.push(check(S, "cubic_exactness", worst <= 1e-12, format!("max relative residual {worst:.3e}")));

    let bump = Manufactured::Polynomial(PolynomialFn::quartic_bump());
    let sweeps = [
        ("fixed_third_slope", HorizonRule::Fixed(1.0 / 3.0), vec![1.0 / 80.0, 1.0 / 320.0, 1.0 / 1280.0], 1.0),
        ("sqrt_h_slope", HorizonRule::Power { c: 1.0, beta: 0.5 }, vec![1.0 / 16.0, 1.0 / 64.0, 1.0 / 256.0], 3.0),
    ];
    for (name, rule, hs, want) in sweeps {
        match truncation_sweep(&bump, rule, &hs, Scheme::ShiftedSymmetric) {
            Ok((_, slope)) => out.push(check(S, name, (slope - want).abs() <= 0.15, format!("slope {slope:.3} (expected {want})"))),
            Err(e) => out.push(check(S, name, false, e.to_string())),
        }
    }

    let pi = std::f64::consts::PI;
    let spec = horizon_decompose(2.0 / 64.0, 1.0 / 64.0).unwrap();
    match perturbation_probe(|x| (pi * x).sin(), &spec, pi.powi(4) * 1.01) {
        Ok(rep) => out.push(check(S, "perturbation_bound_sine", rep.ratio <= 1.0, format!("max {:.3e}, bound {:.3e}, ratio {:.3}", rep.max_diff, rep.bound, rep.ratio))),
        Err(e) => out.push(check(S, "perturbation_bound_sine", false, e.to_string())),
    }
    let worst = perturbation_identity_residual(seed);
    out.push(check(S, "perturbation_identity", worst <= 1e-12, format!("max relative residual {worst:.3e}")));
    out
}

/// `standard − shifted` stencil application against the direct `p/q` expansion.
pub fn perturbation_identity_residual(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e);
    let mut worst = 0.0f64;
    for _ in 0..40 {
        let r = rng.gen_range(1..=8);
        let h = 1.0 / rng.gen_range(16..=96) as f64;
        let u = random_poly(&mut rng, 8);
        let uu = u.clone();
        let field = SampledFn::new(move |x| uu.eval(x), h);
        let a = symmetric_weights(r, h).unwrap().stencil();
        let c = halfpoint_weights(r, h).unwrap().stencil();
        let p = perturbation_weights(r).unwrap();
        for i in 3..8 {
            let j = HalfIndex::half(i);
            let direct = c.apply(&field, j).unwrap() - a.apply(&field, j).unwrap();
            let expanded = p.expand(&field, j, h).unwrap();
            let scale = c.magnitude(&field, j).unwrap() + a.magnitude(&field, j).unwrap();
            worst = worst.max((direct - expanded).abs() / scale.max(f64::MIN_POSITIVE));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in [Suite::Weights, Suite::Matrix, Suite::Oracle, Suite::Truncation, Suite::All] {
            assert_eq!(s.label().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn quick_suites_pass() {
        for s in [Suite::Weights, Suite::Oracle, Suite::Truncation] {
            for c in run_suite(s, 7) {
                assert!(c.pass, "{c}");
            }
        }
    }

    #[test]
    fn small_certificate_grid() {
        for c in certificate_grid(&[16, 32], &[1, 5, 10]) {
            assert!(c.pass, "{c}");
        }
        for c in max_principle_trials(3, 4) {
            assert!(c.pass, "{c}");
        }
    }
}
