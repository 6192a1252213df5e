use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fracpq_cli::{Cell, ResultRecord, Table};
use nalgebra::{DMatrix, SymmetricEigen};
use tempfile::TempDir;

const PROBLEM: [&str; 8] = ["--s1", "0.7", "--p", "3", "--s2", "0.5", "--q", "2"];

fn fracpq<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracpq")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_table(path: &Path) -> Table {
    Table::read_csv(fs::File::open(path).unwrap()).unwrap()
}

fn read_record(path: &Path) -> ResultRecord {
    ResultRecord::from_json(&fs::read_to_string(path).unwrap()).unwrap()
}

fn column(t: &Table, name: &str) -> Vec<f64> {
    t.column(name).unwrap().into_iter().map(|c| c.as_f64().unwrap()).collect()
}

fn with_problem(head: &[&str], tail: &[&str]) -> Vec<String> {
    [head, tail, &PROBLEM[..]].concat().into_iter().map(String::from).collect()
}

/// Smallest eigenvalue of the r = 2 quadratic form divided by h, on (0, 1).
fn dense_lambda(n: usize, s: f64) -> f64 {
    let sr = 2.0 * s;
    let h = 1.0 / n as f64;
    let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] += 2.0 * h * (x[i].powf(-sr) + (1.0 - x[i]).powf(-sr)) / sr;
        for j in 0..n {
            if i != j {
                let w = h * h / (x[i] - x[j]).abs().powf(1.0 + sr);
                m[(i, i)] += 2.0 * w;
                m[(i, j)] -= 2.0 * w;
            }
        }
    }
    SymmetricEigen::new(m / h).eigenvalues.min()
}

#[test]
fn eigen_matches_dense_oracle() {
    let dir = TempDir::new().unwrap();
    let json = dir.path().join("eigen.json");
    let out = fracpq(&[
        "eigen",
        "--s",
        "0.5",
        "--r",
        "2",
        "--n",
        "32",
        "--interval",
        "0",
        "1",
        "--out",
        json.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let record = read_record(&json);
    assert_eq!(record.command, "eigen");
    let lambda = record.outputs["lambda"].as_f64().unwrap();
    let oracle = dense_lambda(32, 0.5);
    assert!(((lambda - oracle) / oracle).abs() < 1e-8, "{lambda} vs {oracle}");
    assert!(record.outputs["residual"].as_f64().unwrap() < 1e-8);
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.contains("lambda1 = "));
}

#[test]
fn missing_flag_is_a_usage_error() {
    let out = fracpq(&["eigen", "--s", "0.5", "--n", "8"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("`r`"));
    assert_eq!(code(&fracpq(&["eigen", "--s", "0.5", "--r", "2", "--bogus"])), 1);
    assert_eq!(code(&fracpq(&["eigen", "--s", "2", "--r", "2"])), 1);
    assert_eq!(code(&fracpq(&["eigen", "--s", "0.5", "--r", "2", "--interval", "1", "0"])), 1);
    assert_eq!(code(&fracpq(&["--help"])), 0);
}

#[test]
fn eigen_csv_layout() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("phi.csv");
    let out =
        fracpq(&["eigen", "--s", "0.3", "--r", "1.5", "--n", "20", "--emit", "csv", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("x,phi\n"));
    let t = read_table(&csv);
    assert_eq!(t.rows.len(), 20);
    assert!(column(&t, "phi").iter().all(|v| *v > 0.0));
}

#[test]
fn csv_and_json_round_trip() {
    let dir = TempDir::new().unwrap();
    let (csv, json) = (dir.path().join("u.csv"), dir.path().join("u.json"));
    let args = |p: &Path| {
        with_problem(&["solve", "--n", "12", "--alpha", "35", "--beta", "10", "--out"], &[p.to_str().unwrap()])
    };
    let (a, b) = (args(&csv), args(&json));
    assert_eq!(code(&fracpq(&a)), 0);
    assert_eq!(code(&fracpq(&b)), 0);
    let record = read_record(&json);
    assert_eq!(ResultRecord::from_json(&record.to_json().unwrap()).unwrap(), record);
    assert_eq!(record.outputs["status"], "found");
    assert_eq!(read_table(&csv), record.table.rounded());
    assert_eq!(record.table.rows.len(), 12);
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let mut texts = Vec::new();
    for k in 0..2 {
        let path = dir.path().join(format!("run{k}.csv"));
        let args = with_problem(
            &["solve", "--n", "16", "--alpha", "-1", "--beta", "16", "--seed", "7", "--out"],
            &[path.to_str().unwrap()],
        );
        assert_eq!(code(&fracpq(&args)), 0);
        texts.push(fs::read(&path).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn proptest_counts_are_seeded() {
    let run = |seed: &str| {
        let out = fracpq(&["proptest", "--seed", seed, "--cases", "1000", "--emit", "csv"]);
        assert_eq!(code(&out), 0);
        out.stdout
    };
    let first = run("42");
    assert_eq!(first, run("42"));
    let t = Table::read_csv(first.as_slice()).unwrap();
    assert_eq!(t.rows.len(), 7);
    assert!(column(&t, "passed").iter().all(|v| *v == 1000.0));
    assert!(column(&t, "failed").iter().all(|v| *v == 0.0));
}

#[test]
fn curve_is_non_increasing() {
    let dir = TempDir::new().unwrap();
    let (csv, json) = (dir.path().join("curve.csv"), dir.path().join("curve.json"));
    for path in [&csv, &json] {
        let args = with_problem(
            &["curve", "--n", "16", "--theta-min", "-1", "--theta-max", "3", "--steps", "17", "--out"],
            &[path.to_str().unwrap()],
        );
        let out = fracpq(&args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let t = read_table(&csv);
    assert_eq!(t.columns, ["theta", "lambda_star", "alpha", "beta", "bracket"]);
    assert_eq!(t.rows.len(), 17);
    let record = read_record(&json);
    let tol = record.outputs["tolerance"].as_f64().unwrap();
    let lambda = column(&t, "lambda_star");
    assert!(lambda.windows(2).all(|w| w[1] <= w[0] + 2.0 * tol), "{lambda:?}");
    assert_eq!(record.outputs["monotone"], true);
    assert_eq!(t, record.table.rounded());
}

#[test]
fn region_shows_the_quadrant_pattern() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("region.csv");
    let args = with_problem(
        &["region", "--n", "16", "--relative", "--alpha-grid=-6,6", "--beta-grid=-6,6", "--out"],
        &[csv.to_str().unwrap()],
    );
    let out = fracpq(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let t = read_table(&csv);
    assert_eq!(t.columns, ["alpha", "beta", "verdict"]);
    let verdicts: Vec<&str> = t
        .column("verdict")
        .unwrap()
        .into_iter()
        .map(|c| match c {
            Cell::Text(s) => s.as_str(),
            Cell::Num(_) => panic!("numeric verdict"),
        })
        .collect();
    // Rows run over alpha within each beta: (-,-), (+,-), (-,+), (+,+).
    assert_eq!(verdicts[..3], ["not_exists", "exists", "exists"]);
}

#[test]
fn config_file_with_overrides_and_diagnostics() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# eigen run\ns = 0.5\nr = 2\nn = 8\nemit = json\n").unwrap();
    let out = fracpq(&["eigen", "--config", cfg.to_str().unwrap(), "--n", "6"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let record = ResultRecord::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(record.inputs["n"], 6);
    assert_eq!(record.table.rows.len(), 6);

    fs::write(&cfg, "s = 0.5\nr = two\n").unwrap();
    let out = fracpq(&["eigen", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let msg = stderr(&out);
    assert!(msg.contains("run.cfg:2") && msg.contains("`r`"), "{msg}");
}

#[test]
fn exit_code_two_on_non_convergence() {
    let out = fracpq(&["eigen", "--s", "0.5", "--r", "2", "--n", "4", "--tol", "1e-300"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn thread_cap_from_environment() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_fracpq"))
            .args(["proptest", "--cases", "10", "--emit", "json"])
            .env("FRACPQ_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("2")), 0);
    assert_eq!(code(&run("0")), 1);
    assert_eq!(code(&run("many")), 1);
}

#[test]
fn li_check_inside_the_window() {
    let out =
        fracpq(&["li-check", "--s1", "0.8", "--p", "3", "--s2", "0.7", "--q", "2", "--n", "32", "--emit", "json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let record = ResultRecord::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(record.outputs["verdict"], "independent");
    assert!(record.outputs["distance"].as_f64().unwrap() > 1e-3);
    let out =
        fracpq(&["li-check", "--s1", "0.6", "--p", "3", "--s2", "0.3", "--q", "2", "--n", "16", "--emit", "json"]);
    let record = ResultRecord::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(record.outputs["verdict"], "outside_window");
}
