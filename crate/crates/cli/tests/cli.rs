use std::path::PathBuf;
use std::process::{Command, Output};

fn nlcol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlcol")).args(args).output().expect("binary runs")
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nlcol-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

const COLLAPSE: &str = "\
# aligned vs slightly short horizon
[aligned]
delta = 1/4
h = 1/16, 1/64, 1/256
expect_rate = 4

[short]
delta = 0.2499
h = 1/16, 1/64, 1/256
expect_rate = 1
rate_tol = 0.2
";

#[test]
fn first_table_passes_and_writes_csv() {
    let out = nlcol(&["reproduce-table", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("scheme,dim,delta_rule,beta,h,N,error_inf,rate,solver,iterations,residual,seconds")
    );
    assert_eq!(lines.count(), 12);
    assert!(csv.contains("shifted,1,10h/3,"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS"));
}

#[test]
fn table_with_known_defect_exits_one() {
    let out = nlcol(&["reproduce-table", "4"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_table_is_usage_error() {
    assert_eq!(nlcol(&["reproduce-table", "8"]).status.code(), Some(2));
    assert_eq!(nlcol(&["verify", "everything"]).status.code(), Some(2));
    assert_eq!(nlcol(&[]).status.code(), Some(2));
}

#[test]
fn verify_oracle_suite() {
    let out = nlcol(&["verify", "oracle", "--seed", "11"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| !l.starts_with("FAIL")), "{text}");
    assert!(text.contains("PASS oracle/dual_oracle_agreement"));
}

#[test]
fn order_collapse_study_is_deterministic() {
    let cfg = scratch("collapse.cfg", COLLAPSE);
    let a = scratch("a.csv", "");
    let b = scratch("b.csv", "");
    for target in [&a, &b] {
        let out = nlcol(&["study", cfg.to_str().unwrap(), "--out", target.to_str().unwrap(), "--no-timing", "--jobs", "2"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    }
    let first = std::fs::read(&a).unwrap();
    assert_eq!(first, std::fs::read(&b).unwrap());
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 7);
}

#[test]
fn missed_expected_rate_exits_one() {
    let cfg = scratch("wrong.cfg", "[x]\ndelta = 0.2499\nh = 1/16, 1/64\nexpect_rate = 4\n");
    let out = nlcol(&["study", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
}

#[test]
fn config_errors_name_the_line() {
    let cfg = scratch("bad.cfg", "[x]\ndelta = 1/4\nh = 1/16, 1/64\nsolver = lu\n");
    let out = nlcol(&["study", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let cfg = scratch("bad2.cfg", "[x]\ndelta = 1/4\nwidth = 3\n");
    let out = nlcol(&["study", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3: unknown key 'width'"));
}

#[test]
fn two_d_study_runs_matrix_free() {
    let cfg = scratch("plane.cfg", "[plane]\ndimension = 2\ndelta = sqrt(h)\nh = 1/4, 1/16\n");
    let out = nlcol(&["study", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.starts_with("shifted,2,sqrt(h),") && l.contains(",cg,")), "{csv}");
}

#[test]
fn shipped_study_files_pass() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../studies");
    for name in ["order_collapse.cfg", "plane.cfg"] {
        let out = nlcol(&["study", dir.join(name).to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
