//! Convergence studies, truncation probes and the standard-vs-shifted
//! perturbation probe.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::assembly::{assemble_1d, assemble_2d, Scheme};
use crate::error::{Error, Result};
use crate::grid::{horizon_decompose, HalfIndex, HorizonSpec, Mesh1D, VolumeConstraint};
use crate::oracle::{apply_exact_1d, apply_quadrature_1d, Manufactured, PolynomialFn, Source};
use crate::solver::{solve_cg, solve_direct, BlockToeplitz, SolveMethod, SolveReport, CG_TOL};
use crate::stencil::{halfpoint_weights, perturbation_weights, symmetric_weights, SampledFn};

/// `p/q` if `v` equals such a fraction with `q ≤ 12` to rounding.
fn as_rational(v: f64) -> Option<(i64, i64)> {
    (1..=12i64).find_map(|q| {
        let p = (v * q as f64).round();
        ((v * q as f64 - p).abs() < 1e-12 * p.abs().max(1.0)).then_some((p as i64, q))
    })
}

fn format_coefficient(v: f64) -> String {
    match as_rational(v) {
        Some((p, 1)) => format!("{p}"),
        Some((p, q)) => format!("{p}/{q}"),
        None => format!("{v}"),
    }
}

/// How the horizon depends on the mesh width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HorizonRule {
    Fixed(f64),
    /// `δ = c·h^β`.
    Power { c: f64, beta: f64 },
}

impl HorizonRule {
    pub fn delta(&self, h: f64) -> f64 {
        match *self {
            HorizonRule::Fixed(d) => d,
            HorizonRule::Power { c, beta } => {
                let hb = if beta == 1.0 {
                    h
                } else if beta == 2.0 {
                    h * h
                } else if beta == 0.5 {
                    h.sqrt()
                } else if beta == 0.25 {
                    h.sqrt().sqrt()
                } else {
                    h.powf(beta)
                };
                if c == 1.0 {
                    hb
                } else {
                    match as_rational(c) {
                        // keep rational·h exact to the last bit where possible
                        Some((p, q)) if q > 1 => p as f64 * hb / q as f64,
                        _ => c * hb,
                    }
                }
            }
        }
    }

    pub fn beta(&self) -> f64 {
        match *self {
            HorizonRule::Fixed(_) => 0.0,
            HorizonRule::Power { beta, .. } => beta,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            HorizonRule::Fixed(d) => format_coefficient(d),
            HorizonRule::Power { c, beta } => {
                let base = if beta == 1.0 {
                    "h".to_string()
                } else if beta == 0.5 {
                    "sqrt(h)".to_string()
                } else {
                    format!("h^{}", format_coefficient(beta))
                };
                match as_rational(c) {
                    Some((1, 1)) => base,
                    Some((p, 1)) => format!("{p}{base}"),
                    Some((p, q)) if beta == 1.0 => format!("{p}h/{q}"),
                    _ => format!("{}*{base}", format_coefficient(c)),
                }
            }
        }
    }
}

impl fmt::Display for HorizonRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Predicted global order for a horizon exponent `β`.
///
/// Grid-aligned horizons and `δ < h` give `max{2, 4 − 2β}`; a fixed
/// misalignment gives `min{2, 1 + β}`; the local-limit comparison gives
/// `min{2, 2β}`.
pub fn predicted_order(beta: f64, aligned_or_subcell: bool) -> f64 {
    if aligned_or_subcell {
        (4.0 - 2.0 * beta).max(2.0)
    } else {
        (1.0 + beta).min(2.0)
    }
}

pub fn predicted_ac_order(beta: f64) -> f64 {
    (2.0 * beta).min(2.0)
}

/// What a study solves and what it compares against.
#[derive(Debug, Clone)]
pub enum Problem {
    /// `f = −L_δ u`, `g = u`; error against `u`.
    Manufactured(PolynomialFn),
    /// `f = −u''`, `g = u`; error against the local solution `u`.
    LocalLimit(PolynomialFn),
    /// `f = exp(δ x sin πx)`, `g = 0`; errors are differences of nested levels.
    SelfConvergence,
}

impl Problem {
    pub fn label(&self) -> &'static str {
        match self {
            Problem::Manufactured(_) => "manufactured",
            Problem::LocalLimit(_) => "local_limit",
            Problem::SelfConvergence => "self_convergence",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub scheme: Scheme,
    pub dim: u8,
    pub rule: HorizonRule,
    /// Mesh widths, strictly decreasing by a factor of 4.
    pub hs: Vec<f64>,
    pub problem: Problem,
    /// Use CG for 1D shifted systems instead of the direct solver.
    pub prefer_cg: bool,
}

impl StudyConfig {
    pub fn new(scheme: Scheme, rule: HorizonRule, hs: Vec<f64>, problem: Problem) -> Self {
        StudyConfig { scheme, dim: 1, rule, hs, problem, prefer_cg: false }
    }

    pub fn two_d(rule: HorizonRule, hs: Vec<f64>) -> Self {
        StudyConfig {
            scheme: Scheme::ShiftedSymmetric,
            dim: 2,
            rule,
            hs,
            problem: Problem::Manufactured(PolynomialFn::quartic_bump()),
            prefer_cg: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hs.is_empty() {
            return Err(Error::Config("h list is empty".into()));
        }
        for h in &self.hs {
            Mesh1D::interior_count_for(*h)?;
        }
        for w in self.hs.windows(2) {
            let ratio = w[0] / w[1];
            if (ratio - 4.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "h list must refine by exactly 4 (got {} -> {})",
                    w[0], w[1]
                )));
            }
        }
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::Config(format!("dimension must be 1 or 2, got {}", self.dim)));
        }
        if self.dim == 2 {
            if self.scheme != Scheme::ShiftedSymmetric {
                return Err(Error::Config("2D studies use the shifted scheme".into()));
            }
            if !matches!(self.problem, Problem::Manufactured(_)) {
                return Err(Error::Config("2D studies support manufactured solutions only".into()));
            }
        }
        if self.scheme == Scheme::Standard && self.prefer_cg {
            return Err(Error::Config("the standard scheme is solved directly; cg needs a symmetric system".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub n: usize,
    pub delta: f64,
    pub error_inf: f64,
    /// `log(e_{k−1}/e_k)/log 4`; absent on the first row.
    pub rate: Option<f64>,
    pub solver: SolveMethod,
    pub iterations: usize,
    pub residual: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub scheme: Scheme,
    pub dim: u8,
    pub rule: HorizonRule,
    pub problem: &'static str,
    pub rows: Vec<ConvergenceRow>,
    /// Set when a level failed; rows then hold the levels before it.
    pub failure: Option<String>,
}

impl ConvergenceTable {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error_inf).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rate).collect()
    }

    pub fn finest_rate(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.rate)
    }

    /// Least-squares slope of `log e` against `log h`.
    pub fn ls_slope(&self) -> Option<f64> {
        least_squares_slope(&self.rows.iter().map(|r| (r.h, r.error_inf)).collect::<Vec<_>>())
    }
}

pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

pub fn pairwise_rates(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).ln() / 4f64.ln()).collect()
}

/// One solved refinement level.
#[derive(Debug, Clone)]
pub struct LevelSolution {
    pub h: f64,
    pub n: usize,
    pub spec: HorizonSpec,
    /// Unknowns in coordinate order (1D) or `[ix·n + iy]` (2D).
    pub values: Vec<f64>,
    pub error_inf: Option<f64>,
    pub report: SolveReport,
}

fn cg_budget(n: usize) -> usize {
    (20 * n).max(1000)
}

fn solve_level_1d(cfg: &StudyConfig, h: f64) -> Result<LevelSolution> {
    let n = Mesh1D::interior_count_for(h)?;
    let h = 1.0 / (n as f64 + 1.0);
    let delta = cfg.rule.delta(h);
    let mut spec = horizon_decompose(delta, h)?;
    spec = spec.with_beta(cfg.rule.beta());
    let mesh = Mesh1D::with_overlap(n, &spec)?;

    let (f, g, exact): (Arc<dyn Source>, VolumeConstraint, Option<PolynomialFn>) = match &cfg.problem {
        Problem::Manufactured(u) => {
            let uc = u.clone();
            let ud = u.clone();
            let f = move |x: f64| -apply_exact_1d(&ud, delta, x);
            (Arc::new(f), VolumeConstraint::from_fn(move |x| uc.eval(x)), Some(u.clone()))
        }
        Problem::LocalLimit(u) => {
            let u2 = u.nth_derivative(2);
            let uc = u.clone();
            (Arc::new(move |x: f64| -u2.eval(x)), VolumeConstraint::from_fn(move |x| uc.eval(x)), Some(u.clone()))
        }
        Problem::SelfConvergence => {
            let f = move |x: f64| (delta * x * (std::f64::consts::PI * x).sin()).exp();
            (Arc::new(f), VolumeConstraint::zero(), None)
        }
    };

    let sys = assemble_1d(cfg.scheme, &mesh, &spec, f.as_ref(), &g)?;
    let report = if cfg.prefer_cg && cfg.scheme == Scheme::ShiftedSymmetric {
        // FFT matvec on the Toeplitz blocks; dense only if the structure check fails
        match BlockToeplitz::from_system(&sys) {
            Ok(bt) => solve_cg(&bt, &sys.rhs, CG_TOL, cg_budget(sys.size()))?,
            Err(_) => solve_cg(&sys.matrix, &sys.rhs, CG_TOL, cg_budget(sys.size()))?,
        }
    } else {
        solve_direct(&sys)?
    };
    let order = sys.x_order();
    let values: Vec<f64> = order.iter().map(|&p| report.solution[p]).collect();
    let error_inf = exact.map(|u| {
        mesh.interior_by_x()
            .zip(&values)
            .map(|(j, v)| (v - u.eval(mesh.point(j))).abs())
            .fold(0.0, f64::max)
    });
    Ok(LevelSolution { h, n, spec, values, error_inf, report })
}

fn solve_level_2d(cfg: &StudyConfig, h: f64) -> Result<LevelSolution> {
    let Problem::Manufactured(u) = &cfg.problem else {
        return Err(Error::Config("2D studies support manufactured solutions only".into()));
    };
    let n = Mesh1D::interior_count_for(h)?;
    let h = 1.0 / (n as f64 + 1.0);
    let delta = cfg.rule.delta(h);
    let spec = horizon_decompose(delta, h)?.with_beta(cfg.rule.beta());
    let mesh = Mesh1D::with_overlap(n, &spec)?;
    let fu = u.clone();
    let f2d = move |x: f64, y: f64| -apply_exact_1d(&fu, delta, x) - apply_exact_1d(&fu, delta, y);
    let gu = u.clone();
    let g2d = move |x: f64, y: f64| gu.eval(x) + gu.eval(y);
    let sys = assemble_2d(&mesh, &spec, &f2d, &g2d)?;
    let report = solve_cg(&sys.op, &sys.rhs, CG_TOL, cg_budget(sys.rhs.len()))?;
    let m = sys.axis.len();
    let mut err = 0.0f64;
    for ix in 0..m {
        for iy in 0..m {
            let want = g2d(sys.axis[ix], sys.axis[iy]);
            err = err.max((report.solution[ix * m + iy] - want).abs());
        }
    }
    Ok(LevelSolution { h, n, spec, values: report.solution.clone(), error_inf: Some(err), report })
}

pub fn solve_level(cfg: &StudyConfig, h: f64) -> Result<LevelSolution> {
    match cfg.dim {
        2 => solve_level_2d(cfg, h),
        _ => solve_level_1d(cfg, h),
    }
}

fn table_from_levels(cfg: &StudyConfig, levels: Vec<Result<LevelSolution>>, errors: Vec<f64>) -> ConvergenceTable {
    let mut rows = Vec::new();
    let mut failure = None;
    for (k, lvl) in levels.into_iter().enumerate() {
        match lvl {
            Ok(l) => {
                if k >= errors.len() {
                    break;
                }
                let rate = (k > 0).then(|| (errors[k - 1] / errors[k]).ln() / 4f64.ln());
                rows.push(ConvergenceRow {
                    h: l.h,
                    n: l.n,
                    delta: l.spec.delta,
                    error_inf: errors[k],
                    rate,
                    solver: l.report.method,
                    iterations: l.report.iterations,
                    residual: l.report.residual,
                    seconds: l.report.seconds,
                });
            }
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
    }
    ConvergenceTable { scheme: cfg.scheme, dim: cfg.dim, rule: cfg.rule, problem: cfg.problem.label(), rows, failure }
}

/// Solve every level (concurrently) and tabulate errors against the exact solution.
pub fn convergence_study(cfg: &StudyConfig) -> Result<ConvergenceTable> {
    cfg.validate()?;
    if matches!(cfg.problem, Problem::SelfConvergence) {
        return self_convergence_study(cfg);
    }
    let levels: Vec<Result<LevelSolution>> = cfg.hs.par_iter().map(|&h| solve_level(cfg, h)).collect();
    let errors: Vec<f64> = levels
        .iter()
        .map_while(|l| l.as_ref().ok().and_then(|l| l.error_inf))
        .collect();
    Ok(table_from_levels(cfg, levels, errors))
}

/// Convergence to the local limit: `−L^S_{δ̃,h} u = f₀` against `u₀`.
pub fn ac_study(scheme: Scheme, rule: HorizonRule, hs: Vec<f64>, u: PolynomialFn) -> Result<ConvergenceTable> {
    convergence_study(&StudyConfig::new(scheme, rule, hs, Problem::LocalLimit(u)))
}

/// Self-convergence: row `k` holds `‖u_{h_k} − u_{h_{k+1}}‖_∞` on the level-`k`
/// collocation points, so `m` levels give `m − 1` rows.
pub fn self_convergence_study(cfg: &StudyConfig) -> Result<ConvergenceTable> {
    cfg.validate()?;
    if cfg.dim != 1 {
        return Err(Error::Config("self-convergence studies are 1D".into()));
    }
    if cfg.hs.len() < 2 {
        return Err(Error::Config("self-convergence needs at least two nested levels".into()));
    }
    let levels: Vec<Result<LevelSolution>> = cfg.hs.par_iter().map(|&h| solve_level(cfg, h)).collect();
    let mut errors = Vec::new();
    for k in 0..levels.len() - 1 {
        match (&levels[k], &levels[k + 1]) {
            (Ok(c), Ok(f)) => {
                if 2 * f.n + 1 != 4 * (2 * c.n + 1) + 3 {
                    return Err(Error::Config(format!("levels h = {} and h = {} are not nested", c.h, f.h)));
                }
                // coarse doubled index k ↦ fine doubled index 4k
                let d = c
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v - f.values[4 * (i + 1) - 1]).abs())
                    .fold(0.0, f64::max);
                errors.push(d);
            }
            _ => break,
        }
    }
    let coarse: Vec<Result<LevelSolution>> = levels.into_iter().take(cfg.hs.len() - 1).collect();
    Ok(table_from_levels(cfg, coarse, errors))
}

/// Pointwise residuals of the discrete operator against the continuum one.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationReport {
    pub h: f64,
    /// `(x, |L_δu(x) − L_{δ̃,h}u(x)|)` over interior collocation points.
    pub residuals: Vec<(f64, f64)>,
    pub max: f64,
    /// `max (|L_δu| + η Σ|w u|)` over the same points: the rounding scale of the residuals.
    pub scale: f64,
    pub predicted_order: f64,
}

fn continuum(u: &Manufactured, delta: f64, x: f64) -> Result<f64> {
    match u {
        Manufactured::Polynomial(p) => Ok(apply_exact_1d(p, delta, x)),
        Manufactured::Smooth(f) => Ok(apply_quadrature_1d(f.as_ref(), delta, x, 8)?.value),
    }
}

pub fn truncation_probe(u: &Manufactured, spec: &HorizonSpec, scheme: Scheme) -> Result<TruncationReport> {
    let n = Mesh1D::interior_count_for(spec.h)?;
    let mesh = Mesh1D::with_overlap(n, spec)?;
    let whole = symmetric_weights(spec.r, spec.h)?.stencil();
    let half = halfpoint_weights(spec.r, spec.h)?.stencil();
    let uc = u.clone();
    let field = SampledFn::new(move |x| uc.eval(x), spec.h);
    let mut residuals = Vec::with_capacity(mesh.unknowns());
    let mut max = 0.0f64;
    let mut scale = 0.0f64;
    for j in mesh.interior_by_x() {
        let st = if scheme == Scheme::Standard && !j.is_whole() { &half } else { &whole };
        let x = mesh.point(j);
        let exact = continuum(u, spec.delta, x)?;
        let r = (exact - st.apply(&field, j)?).abs();
        max = max.max(r);
        scale = scale.max(exact.abs() + st.magnitude(&field, j)?);
        residuals.push((x, r));
    }
    let beta = spec.beta_hint.unwrap_or(0.0);
    Ok(TruncationReport {
        h: spec.h,
        residuals,
        max,
        scale,
        predicted_order: predicted_order(beta, spec.aligned || spec.delta < spec.h),
    })
}

/// Max truncation residual per level and the fitted slope.
pub fn truncation_sweep(u: &Manufactured, rule: HorizonRule, hs: &[f64], scheme: Scheme) -> Result<(Vec<TruncationReport>, f64)> {
    let reports: Vec<TruncationReport> = hs
        .iter()
        .map(|&h| {
            let spec = horizon_decompose(rule.delta(h), h)?.with_beta(rule.beta());
            truncation_probe(u, &spec, scheme)
        })
        .collect::<Result<_>>()?;
    let slope = least_squares_slope(&reports.iter().map(|r| (r.h, r.max)).collect::<Vec<_>>()).unwrap_or(f64::NAN);
    Ok((reports, slope))
}

/// Difference between the standard and shifted half-point stencils.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    pub max_diff: f64,
    /// `C_r·(M/4)·h⁴·δ̃⁻²`.
    pub bound: f64,
    pub ratio: f64,
}

/// `max_{half points} |L^S u − L_{δ̃,h} u|` with `M ≥ sup |u''''|`.
pub fn perturbation_probe<F>(u: F, spec: &HorizonSpec, m_bound: f64) -> Result<PerturbationReport>
where
    F: Fn(f64) -> f64,
{
    if !spec.aligned {
        return Err(Error::Domain("perturbation probe needs a grid-aligned horizon".into()));
    }
    let n = Mesh1D::interior_count_for(spec.h)?;
    let shifted = symmetric_weights(spec.r, spec.h)?.stencil();
    let standard = halfpoint_weights(spec.r, spec.h)?.stencil();
    let field = SampledFn::new(u, spec.h);
    let mut max_diff = 0.0f64;
    for i in 0..=n as i64 {
        let c = HalfIndex::half(i);
        let d = standard.apply(&field, c)? - shifted.apply(&field, c)?;
        max_diff = max_diff.max(d.abs());
    }
    let cr = perturbation_weights(spec.r)?.bound_const;
    let bound = cr * m_bound / 4.0 * spec.h.powi(4) / (spec.delta_tilde * spec.delta_tilde);
    Ok(PerturbationReport { max_diff, bound, ratio: max_diff / bound })
}
