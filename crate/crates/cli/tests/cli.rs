use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn dispersia(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dispersia"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("DISPERSIA_WORKERS")
        .output()
        .unwrap()
}

fn bare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dispersia")).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

const SMALL_SWEEP: [&str; 8] = [
    "--preset",
    "schrodinger-a1",
    "--epsilon",
    "0.0625,0.03125",
    "--tau",
    "0.1,0.05,0.02,0.01",
    "--reference-tau",
    "0.001",
];

#[test]
fn free_solve_preserves_x_norm() {
    let dir = TempDir::new().unwrap();
    let out = dispersia(&["solve", "--preset", "kdv-a1", "--free", "--tau", "0.05"], dir.path());
    let summary = stdout_json(&out);
    let (a, b) = (summary["x_norm_initial"].as_f64().unwrap(), summary["x_norm_final"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-12 * a, "{a} {b}");
    assert_eq!(summary["steps"], 20);
    let state = fs::read_to_string(dir.path().join("final_state.csv")).unwrap();
    assert!(state.starts_with("x,re,im\n"));
    assert_eq!(state.lines().count(), 16384 + 1);
}

#[test]
fn convergence_sweep_writes_first_order_rates() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["sweep-convergence", "--emit-plots"];
    args.extend(SMALL_SWEEP);
    let out = dispersia(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scheme,kappa,alpha,epsilon,tau,z_final,j,error_x,normalized_error,walltime_s"
    );
    assert_eq!(lines.count(), 8);

    let mut rates = csv::Reader::from_path(dir.path().join("rates.csv")).unwrap();
    let mut tau_groups = 0;
    for row in rates.records() {
        let row = row.unwrap();
        if row[0].ends_with("vs tau") {
            let slope: f64 = row[1].parse().unwrap();
            assert!((slope - 1.0).abs() <= 0.15, "{row:?}");
            tau_groups += 1;
        }
    }
    assert_eq!(tau_groups, 2);
    let plot = fs::read_to_string(dir.path().join("plot.gp")).unwrap();
    assert!(plot.contains("set logscale xy") && plot.contains("results.csv"));
}

#[test]
fn run_manifest_replays() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["sweep-convergence", "--no-timing"];
    args.extend(SMALL_SWEEP);
    assert!(dispersia(&args, dir.path()).status.success());
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "sweep-convergence");
    assert_eq!(manifest["config"]["reference_tau"], 0.001);

    let again = TempDir::new().unwrap();
    let run = dir.path().join("run.json");
    let out = dispersia(
        &["sweep-convergence", "--no-timing", "--config", run.to_str().unwrap()],
        again.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["results.csv", "rates.csv", "run.json"] {
        let a = fs::read(dir.path().join(file)).unwrap();
        let b = fs::read(again.path().join(file)).unwrap();
        assert!(a == b, "{file} differs");
    }
}

#[test]
fn worker_count_does_not_change_output() {
    let (one, three) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let mut args = vec!["compare", "--no-timing", "--scheme", "ei,lt,lri"];
    args.extend(SMALL_SWEEP);
    let mut with_three = args.clone();
    with_three.extend(["--workers", "3"]);
    assert!(dispersia(&args, one.path()).status.success());
    assert!(dispersia(&with_three, three.path()).status.success());
    for file in ["results.csv", "rates.csv"] {
        assert_eq!(
            fs::read(one.path().join(file)).unwrap(),
            fs::read(three.path().join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn regularity_sweep_of_free_problem() {
    let dir = TempDir::new().unwrap();
    let out = dispersia(
        &[
            "sweep-regularity",
            "--preset",
            "schrodinger-a1",
            "--free",
            "--epsilon",
            "0.0625,0.03125",
            "--reference-tau",
            "0.01",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut results = csv::Reader::from_path(dir.path().join("results.csv")).unwrap();
    let errors: Vec<f64> = results.records().map(|r| r.unwrap()[7].parse().unwrap()).collect();
    assert_eq!(errors.len(), 2);
    assert!(errors.iter().all(|e| *e <= 1e-12), "{errors:?}");
}

#[test]
fn reduce_moment_prints_coefficients() {
    let v = stdout_json(&bare(&["reduce-moment", "--kappa", "2", "--beta", "1", "--sign", "+", "--lambda", "1"]));
    assert_eq!(v["alpha"], 1.0);
    assert_eq!(v["c"]["0"], 0.5);
    assert_eq!(v["c"]["2"], 2.0);
    assert_eq!(v["signFactor"], 1);

    let v = stdout_json(&bare(&["reduce-moment", "--kappa", "3", "--beta", "2", "--sign", "-", "--lambda", "-2"]));
    assert_eq!(v["alpha"], 2.5);
    assert_eq!(v["c"]["1"], 6.0);
    assert_eq!(v["c"]["3"], 2.0);
    assert_eq!(v["signFactor"], 1);
}

#[test]
fn verify_phase_reports_positive_ratio() {
    let v = stdout_json(&bare(&["verify-phase", "--kappa", "2", "--c0", "3", "--samples", "100"]));
    assert!((v["min_ratio"].as_f64().unwrap() - 0.5).abs() < 1e-12, "{v}");
    let v = stdout_json(&bare(&[
        "verify-phase", "--kappa", "3", "--coeffs=-1", "--seed", "11", "--samples", "20000",
    ]));
    assert!(v["min_ratio"].as_f64().unwrap() > 0.0);
    assert_eq!(v["seed"], 11);
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let cases: [&[&str]; 5] = [
        &["solve", "--preset", "schrodinger-a9"],
        &["solve", "--preset", "schrodinger-a1", "--tau", "0.3"],
        &["sweep-convergence", "--preset", "schrodinger-a1", "--epsilon", "0"],
        &["solve", "--preset", "schrodinger-a1", "--scheme", "rk4"],
        &["solve"],
    ];
    for args in cases {
        let out = dispersia(args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = bare(&["reduce-moment", "--kappa", "1", "--beta", "1", "--sign", "+", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kappa"));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"model\": 3}").unwrap();
    let out = dispersia(&["solve", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn failed_sweep_cells_are_reported() {
    let dir = TempDir::new().unwrap();
    let out = dispersia(
        &[
            "sweep-convergence",
            "--preset",
            "schrodinger-a1",
            "--epsilon",
            "0.0625",
            "--tau",
            "0.3,0.1",
            "--reference-tau",
            "0.001",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("tau 0.3"), "{err}");
    let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 2);
}

#[test]
fn blow_up_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let out = dispersia(&["solve", "--preset", "schrodinger-a1", "--free", "--tau", "0.5"], dir.path());
    let mut manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert!(out.status.success());
    let cfg = &mut manifest["config"];
    cfg["potential"] = serde_json::json!({"kind": "gaussian", "amplitude": 1e6, "width_sq": 8.0});
    cfg["z_final"] = 100.0.into();
    cfg["grid"]["n"] = 1024.into();
    let path = dir.path().join("blow.json");
    fs::write(&path, manifest.to_string()).unwrap();
    let out = dispersia(&["solve", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite"));
}
