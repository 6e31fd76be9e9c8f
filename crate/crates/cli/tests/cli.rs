use std::path::Path;
use std::process::{Command, Output};

fn acd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acd")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn gen(kind: &str, n: &str, path: &Path) {
    let out = acd(&["gen", kind, "--n", n, "--seed", "3", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&acd(&["--help"])), 0);
    assert_eq!(code(&acd(&["--version"])), 0);
    let help = String::from_utf8(acd(&["simulate", "--help"]).stdout).unwrap();
    for flag in ["--problem", "--gamma", "--steps", "--policy", "--q", "--seeds", "--out"] {
        assert!(help.contains(flag), "missing {flag}");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&acd(&["frobnicate"])), 1);
    assert_eq!(code(&acd(&["simulate", "--steps", "10"])), 1);
    assert_eq!(code(&acd(&["solve", "--problem", "/nonexistent/p.json"])), 1);
}

#[test]
fn simulate_writes_traces_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("q.json");
    gen("quadratic", "30", &problem);
    let out_dir = dir.path().join("sim");
    let out = acd(&[
        "simulate", "--problem", problem.to_str().unwrap(), "--steps", "300", "--policy", "scv", "--q", "2",
        "--seeds", "2", "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("trace_seed1.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,k,g,g_tilde,grad_err_sq,dx,F,w_hat,q");
    assert_eq!(csv.lines().count(), 301);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], true);
}

#[test]
fn solve_runs_a_sequential_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("q.json");
    gen("quadratic", "20", &problem);
    let out_dir = dir.path().join("solve");
    let out = acd(&[
        "solve", "--problem", problem.to_str().unwrap(), "--steps", "500", "--seeds", "2", "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("summary.json").exists());
    assert!(out_dir.join("trace_seed0.csv").exists());
}

#[test]
fn bench_reports_run_summary() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("lasso.json");
    gen("lasso", "40", &problem);
    let out_dir = dir.path().join("bench");
    let out = acd(&[
        "bench", "--problem", problem.to_str().unwrap(), "--threads", "2", "--updates", "5000", "--log-writes",
        "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let run: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["updates"], 5000);
    assert!(run.get("final_F").is_some() && run.get("q_emp").is_some());
    // Atomic adds are refused for a problem with L1 terms.
    let refused = acd(&[
        "bench", "--problem", problem.to_str().unwrap(), "--updates", "10", "--smooth-only", "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&refused), 1);
}

#[test]
fn lower_bound_generator_writes_start_point() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("lb.json");
    gen("lower-bound", "16", &problem);
    let x0: Vec<f64> = serde_json::from_str(&std::fs::read_to_string(dir.path().join("lb.x0.json")).unwrap()).unwrap();
    assert_eq!(x0.len(), 16);
}

#[test]
fn failed_check_exits_two() {
    // At this size the adversary cannot stall, so the demonstration fails.
    let out = acd(&["stall-demo", "--n", "64", "--pairs", "3"]);
    assert_eq!(code(&out), 2);
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["pass"], false);
}

#[test]
fn check_suite_passes() {
    let out = Command::new(env!("CARGO_BIN_EXE_acd")).args(["check"]).env("ASYNC_CD_THREADS", "2").output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8(out.stdout).unwrap().contains("write-chains"));
    let bad = Command::new(env!("CARGO_BIN_EXE_acd")).args(["check"]).env("ASYNC_CD_THREADS", "zero").output().unwrap();
    assert_eq!(code(&bad), 1);
}
