use std::path::Path;
use std::process::{Command, Output};

use dmscf::mat_ops::HermitianMatrix;
use dmscf::problems::{save_problem, OperatorSpec, Problem};
use serde_json::Value;

fn dmscf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmscf")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn diagonal_file(dir: &Path, diag: &[f64], p: usize) -> String {
    let path = dir.join("diag.json");
    let problem = Problem::new(HermitianMatrix::from_real_diagonal(diag), OperatorSpec::zero(diag.len()), p).unwrap();
    save_problem(&problem, &path).unwrap();
    path.to_str().unwrap().to_string()
}

fn slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    (sxy / sxx, sxy * sxy / (sxx * syy))
}

/// `(axis_value, value)` pairs of one quantity from a sweep CSV.
fn series(rows: &[Vec<String>], quantity: &str) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r[2] == quantity)
        .map(|r| (r[1].parse().unwrap(), r[3].parse().unwrap()))
        .collect()
}

#[test]
fn solve_illustrative_writes_geometric_history() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hist.csv");
    let out = dmscf(&["solve", "--family", "illustrative", "--eps", "0.2", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&path);
    assert_eq!(header, ["iter", "step_err_fro", "err_to_fixed_point_fro", "lambda_p", "lambda_p1", "gap"]);
    let steps: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(*steps.last().unwrap() <= 1e-12);
    let tail = &steps[steps.len() - 30..steps.len() - 5];
    for w in tail.windows(2) {
        let ratio = w[1] / w[0];
        assert!((ratio - 0.80).abs() < 0.02, "{ratio}");
    }
    let gap: f64 = rows[0][5].parse().unwrap();
    let (lp, lp1): (f64, f64) = (rows[0][3].parse().unwrap(), rows[0][4].parse().unwrap());
    assert!((gap - (lp1 - lp)).abs() < 1e-15);
}

#[test]
fn solve_complex_laplacian() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lap.csv");
    let out = dmscf(&[
        "solve", "--family", "laplacian-complex", "--n", "30", "--p", "15", "--alpha", "40", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let (_, rows) = read_csv(&path);
    let errs: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(rows.len() > 8 && rows.len() < 40, "{}", rows.len());
    assert!(errs[..errs.len() - 1].windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn solve_linear_problem_takes_one_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let file = diagonal_file(dir.path(), &[0.0, 1.0, 3.0], 1);
    let path = dir.path().join("h.csv");
    let out = dmscf(&["solve", "--file", &file, "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(read_csv(&path).1.len(), 1);
}

#[test]
fn solve_reports_non_convergence_with_exit_two() {
    let out = dmscf(&["solve", "--family", "illustrative", "--eps", "0.2", "--max-iter", "3"]);
    assert_eq!(code(&out), 2);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn analyze_illustrative_naive_value() {
    let out = dmscf(&["analyze", "--family", "illustrative", "--eps", "0"]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let naive = report["c_naive"].as_f64().unwrap();
    assert!((naive - 625.0).abs() <= 1e-12 * 625.0);
    for key in ["n", "p", "c", "c2", "c2a", "c2b", "c_naive", "c_gap", "c_liu", "c_tilde", "deltas", "omega", "fd_check"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert!(report["c_liu"].is_null());
    assert_eq!(report["c_gap"][0].as_f64().unwrap(), naive);
}

#[test]
fn analyze_lists_omega_of_seven_level_example() {
    let dir = tempfile::tempdir().unwrap();
    let file = diagonal_file(dir.path(), &[0.0, 2.0, 3.0, 4.0, 5.5, 8.0, 10.0], 3);
    let out = dmscf(&["analyze", "--file", &file]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let omega3: Vec<[u64; 2]> = serde_json::from_value(report["omega"][3].clone()).unwrap();
    assert_eq!(omega3, vec![[4, 3], [3, 4], [4, 2], [2, 4], [5, 3], [3, 5]]);
    for key in ["c", "c2", "c2a", "c2b", "c_naive"] {
        assert_eq!(report[key].as_f64().unwrap(), 0.0, "{key}");
    }
    assert!(report["c_gap"].as_array().unwrap().iter().all(|v| v.as_f64() == Some(0.0)));
}

#[test]
fn analyze_is_deterministic() {
    let args = ["analyze", "--family", "random-hadamard", "--n", "6", "--p", "2", "--seed", "4"];
    assert_eq!(dmscf(&args).stdout, dmscf(&args).stdout);
}

#[test]
fn sweep_eps_gives_taylor_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eps.csv");
    let out = dmscf(&[
        "sweep", "--family", "illustrative", "--axis", "eps", "--grid", "1e-4:1e-2:20:log", "--quantities", "c,c2",
        "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let (header, rows) = read_csv(&path);
    assert_eq!(header, ["axis_name", "axis_value", "quantity", "value", "converged", "measured_rate"]);
    assert_eq!(rows.len(), 40);
    let fit = |q: &str| {
        let s = series(&rows, q);
        let xs: Vec<f64> = s.iter().map(|p| p.0.ln()).collect();
        let ys: Vec<f64> = s.iter().map(|p| p.1.ln()).collect();
        slope(&xs, &ys).0
    };
    assert!((fit("c") - 2.0).abs() <= 0.15);
    assert!((fit("c2") - 1.0).abs() <= 0.1);
}

#[test]
fn sweep_alpha_is_linear_and_n_decreasing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("alpha.csv");
    let out = dmscf(&[
        "sweep", "--family", "laplacian-complex", "--n", "30", "--p", "15", "--axis", "alpha", "--grid",
        "10,20,30,40", "--quantities", "c,c2,naive", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let (_, rows) = read_csv(&path);
    for q in ["c", "c2", "c_naive"] {
        let s = series(&rows, q);
        let (_, r2) = slope(&s.iter().map(|p| p.0).collect::<Vec<_>>(), &s.iter().map(|p| p.1).collect::<Vec<_>>());
        assert!(r2 >= 0.999, "{q}: {r2}");
    }
    let out = dmscf(&[
        "sweep", "--family", "laplacian-complex", "--p", "15", "--alpha", "40", "--axis", "n", "--grid",
        "20,30,40", "--quantities", "c",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let cs: Vec<f64> = reader.records().map(|r| r.unwrap()[3].parse().unwrap()).collect();
    assert!(cs.windows(2).all(|w| w[1] < w[0]), "{cs:?}");
}

#[test]
fn sweep_keeps_divergent_points() {
    // Plain SCF oscillates here; a damped run locates the fixed point.
    let out = dmscf(&[
        "sweep", "--family", "laplacian-complex", "--n", "10", "--p", "5", "--h", "0.5", "--axis", "alpha", "--grid",
        "40", "--quantities", "c",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<String> = csv::Reader::from_reader(text.as_bytes())
        .records()
        .next()
        .unwrap()
        .unwrap()
        .iter()
        .map(String::from)
        .collect();
    let c: f64 = row[3].parse().unwrap();
    assert!(c >= 1.0, "{c}");
    assert_eq!(row[4], "1");
    assert_eq!(row[5], "", "no measured rate for a divergent point");
}

#[test]
fn sweep_rejects_axis_for_wrong_family() {
    let out = dmscf(&["sweep", "--family", "illustrative", "--axis", "alpha", "--grid", "1,2"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("axis"));
}

#[test]
fn check_passes_and_negative_control_fails() {
    let out = dmscf(&["check", "--family", "illustrative", "--eps", "0.1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let out = dmscf(&["check", "--family", "random-hadamard", "--n", "6", "--p", "2", "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let out = dmscf(&["check", "--family", "illustrative", "--eps", "0.1", "--corrupt-jacobian"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn bad_inputs_exit_with_error() {
    let out = dmscf(&["solve", "--family", "file"]);
    assert_eq!(code(&out), 1);
    let out = dmscf(&["analyze", "--file", "/nonexistent/problem.json"]);
    assert_eq!(code(&out), 1);
    let out = dmscf(&["solve", "--damping", "0"]);
    assert_eq!(code(&out), 1);
}
