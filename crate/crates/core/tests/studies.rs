//! End-to-end studies through the public API.

use nlcol::analysis::{convergence_study, solve_level, HorizonRule, Problem, StudyConfig};
use nlcol::tables::{run_table, table_spec};
use nlcol::{PolynomialFn, Scheme, SolveMethod};

#[test]
fn two_d_cg_converges_at_sixteenth() {
    let cfg = StudyConfig::two_d(HorizonRule::Fixed(0.25), vec![1.0 / 16.0]);
    let level = solve_level(&cfg, 1.0 / 16.0).unwrap();
    assert_eq!(level.report.method, SolveMethod::Cg);
    assert!(level.report.residual <= 1e-11, "residual {}", level.report.residual);
    assert_eq!(level.values.len(), 31 * 31);
}

#[test]
fn studies_are_deterministic() {
    let cfg = StudyConfig::new(
        Scheme::ShiftedSymmetric,
        HorizonRule::Power { c: 10.0 / 3.0, beta: 1.0 },
        vec![1.0 / 20.0, 1.0 / 80.0, 1.0 / 320.0],
        Problem::Manufactured(PolynomialFn::quartic_bump()),
    );
    let a = convergence_study(&cfg).unwrap();
    let b = convergence_study(&cfg).unwrap();
    assert_eq!(a.errors(), b.errors());
    assert!(a.is_complete());
}

#[test]
fn ten_thirds_cell_of_first_table() {
    // δ = 10h/3 at h = 1/320: 3.1109e-06, rate 2.017
    let cfg = StudyConfig::new(
        Scheme::ShiftedSymmetric,
        HorizonRule::Power { c: 10.0 / 3.0, beta: 1.0 },
        vec![1.0 / 80.0, 1.0 / 320.0],
        Problem::Manufactured(PolynomialFn::quartic_bump()),
    );
    let t = convergence_study(&cfg).unwrap();
    let row = &t.rows[1];
    assert!((row.error_inf / 3.1109e-6 - 1.0).abs() < 0.01, "{}", row.error_inf);
    assert!((row.rate.unwrap() - 2.017).abs() < 0.05);
}

#[test]
fn aligned_quarter_horizon_matches_second_table() {
    let out = run_table(&table_spec(2).unwrap()).unwrap();
    let quarter = out.columns.iter().find(|c| c.reference.rule == HorizonRule::Fixed(0.25)).unwrap();
    // δ = 1/4, h = 1/64: 7.8439e-09, rate 3.971
    let row = &quarter.table.rows[1];
    assert!((row.error_inf / 7.8439e-9 - 1.0).abs() < 0.01, "{}", row.error_inf);
    assert!((row.rate.unwrap() - 3.971).abs() < 0.05);
}

#[test]
fn standard_scheme_quarter_horizon() {
    let cfg = StudyConfig::new(
        Scheme::Standard,
        HorizonRule::Fixed(0.25),
        vec![1.0 / 16.0, 1.0 / 64.0, 1.0 / 256.0],
        Problem::Manufactured(PolynomialFn::quartic_bump()),
    );
    let t = convergence_study(&cfg).unwrap();
    // δ = 1/4, h = 1/256: 1.2884e-10, rate 3.996
    let row = &t.rows[2];
    assert_eq!(row.solver, SolveMethod::Direct);
    assert!((row.error_inf / 1.2884e-10 - 1.0).abs() < 0.01, "{}", row.error_inf);
    assert!((row.rate.unwrap() - 3.996).abs() < 0.05);
}
