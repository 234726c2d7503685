//! Shared fixtures for the benchmarks.

use nlcol::analysis::{HorizonRule, Problem, StudyConfig};
use nlcol::{assemble_1d, horizon_decompose, CollocationSystem, Mesh1D, PolynomialFn, Scheme, VolumeConstraint};

/// 1D system with `N` interior whole points and `δ = r·h`, zero data.
pub fn system(n: usize, r: usize, scheme: Scheme) -> CollocationSystem {
    let h = 1.0 / (n as f64 + 1.0);
    let spec = horizon_decompose(r as f64 * h, h).expect("positive horizon");
    let mesh = Mesh1D::with_overlap(n, &spec).expect("nonempty mesh");
    assemble_1d(scheme, &mesh, &spec, &|_| 0.0, &VolumeConstraint::zero()).expect("zero data assembles")
}

/// Deterministic, non-smooth test vector.
pub fn probe_vector(len: usize) -> Vec<f64> {
    (0..len).map(|i| ((i as f64 * 0.7548776662).fract() - 0.5) * (1.0 + (i % 7) as f64)).collect()
}

/// One level of the manufactured-solution study used in the tables.
pub fn manufactured(rule: HorizonRule, h: f64, prefer_cg: bool) -> StudyConfig {
    let mut cfg = StudyConfig::new(
        Scheme::ShiftedSymmetric,
        rule,
        vec![h],
        Problem::Manufactured(PolynomialFn::quartic_bump()),
    );
    cfg.prefer_cg = prefer_cg;
    cfg
}
