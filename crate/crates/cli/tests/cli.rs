use std::path::Path;
use std::process::{Command, Output};

use cubic_sos::sos_core::parse_moment_dump;
use cubic_sos::threesat::{fraction_satisfied, parse_dimacs};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cubic-sos"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn field<'a>(report: &'a str, key: &str) -> &'a str {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("missing {key} in\n{report}"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_then_3sat_reports_an_exact_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = dir.path().join("f.cnf");
    ok(&["gen", "--kind", "cnf", "--n", "12", "--m", "40", "--seed", "5", "--out", p(&cnf)]);
    let report = ok(&["3sat", "--in", p(&cnf), "--seed", "7", "--trials", "20"]);
    let f = parse_dimacs(&std::fs::read_to_string(&cnf).unwrap()).unwrap();
    let x: Vec<f64> = field(&report, "assignment").split(' ').map(|v| v.parse().unwrap()).collect();
    let frac = fraction_satisfied(&f, &x).unwrap();
    assert_eq!(field(&report, "fraction"), format!("{}/{}", frac.numer(), frac.denom()));
    assert!(["degree-3", "degree-2", "degree-1", "random"].contains(&field(&report, "branch")));
    assert_eq!(report, ok(&["3sat", "--in", p(&cnf), "--seed", "7", "--trials", "20"]));
}

#[test]
fn solve_dumps_moments_and_problem() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.tensor");
    let mom = dir.path().join("mu.txt");
    let sdp = dir.path().join("sdp.txt");
    ok(&["gen", "--kind", "planted", "--n", "3", "--seed", "1", "--out", p(&t)]);
    let report = ok(&["solve", "--in", p(&t), "--dump-moments", p(&mom), "--dump-sdp", p(&sdp)]);
    let sos: f64 = field(&report, "sos").parse().unwrap();
    assert!((sos - 27.0).abs() < 1e-3 * 27.0, "{report}");
    let (degree, _, m) = parse_moment_dump(&std::fs::read_to_string(&mom).unwrap()).unwrap();
    assert_eq!(m.nrows().to_string(), field(&report, "basis_size"));
    assert_eq!(degree, 6);
    assert!(!std::fs::read_to_string(&sdp).unwrap().is_empty());
}

#[test]
fn certify_report_has_every_field() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.tensor");
    ok(&["gen", "--kind", "gaussian", "--n", "3", "--seed", "2", "--out", p(&t)]);
    let r = ok(&["certify", "--in", p(&t), "--k", "1", "--domain", "cube"]);
    for key in ["upper_bound", "lower_bound", "alpha_star", "primal_residual", "psd_residual", "block_dims"] {
        field(&r, key);
    }
    let ub: f64 = field(&r, "upper_bound").parse().unwrap();
    let lb: f64 = field(&r, "lower_bound").parse().unwrap();
    assert!(ub >= lb);
    let s = ok(&["certify", "--in", p(&t), "--method", "sqrtn"]);
    assert_eq!(field(&s, "method"), "pairwise-sqrt-n");
}

#[test]
fn bench_csv_is_reproducible_and_consistent() {
    let args = ["bench", "--n", "3", "--k", "1", "--instances", "3", "--seed", "1", "--no-timing"];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    let mut lines = a.lines();
    assert_eq!(lines.next().unwrap(), "instance-id,n,k,domain,SOS,OPT-or-bound,rounded,ratio,seconds,seed");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert_eq!(r.len(), 10);
        let sos: f64 = r[4].parse().unwrap();
        let opt: f64 = r[5].parse().unwrap();
        let rounded: f64 = r[6].parse().unwrap();
        let ratio: f64 = r[7].parse().unwrap();
        assert!((rounded / sos - ratio).abs() < 1e-12);
        assert!(sos >= opt - 1e-5 * opt.abs() && rounded <= opt + 1e-9);
        assert!(ratio >= 1.0 / (8.0 * 3f64.sqrt()));
    }
}

#[test]
fn empty_bench_is_header_only() {
    let out = ok(&["bench", "--n", "3", "--instances", "0", "--seed", "1"]);
    assert_eq!(out, "instance-id,n,k,domain,SOS,OPT-or-bound,rounded,ratio,seconds,seed\n");
}

#[test]
fn failures_exit_nonzero() {
    assert!(!run(&["frobnicate"]).status.success());
    let out = run(&["3sat", "--in", "/definitely/missing.cnf", "--seed", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cnf");
    std::fs::write(&bad, "p cnf 3 1\n1 1 2 0\n").unwrap();
    assert!(!run(&["3sat", "--in", p(&bad), "--seed", "1"]).status.success());
    assert!(!run(&["gen", "--n", "3"]).status.success());
}
