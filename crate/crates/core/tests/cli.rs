use std::path::Path;
use std::process::{Command, Output};

use smallnoise_gof::harness::RunConfig;
use smallnoise_gof::{QuantileTable, Trajectory};

fn sngof(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sngof")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn show_config_round_trips_and_applies_overrides() {
    let o = sngof(&["show-config", "--epsilon", "0.02", "--model", "constant"]);
    assert!(o.status.success());
    let c = RunConfig::from_toml(&stdout(&o)).unwrap();
    assert_eq!(c.epsilon, 0.02);
    assert_eq!(c.model, "constant");
    assert_eq!(c.n_steps, RunConfig::default().n_steps);
}

#[test]
fn simulate_then_test() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("x.csv");
    let o = sngof(&["simulate", "--seed", "5", "--replication", "2", "-o", path_str(&traj)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = Trajectory::load(&traj, 0.01).unwrap();
    assert_eq!(t.grid().n_steps(), 2000);
    assert_eq!(t.x.value(0), 1.0);

    let o = sngof(&["test", path_str(&traj)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let theta = report["theta_star"].as_f64().unwrap();
    assert!((theta - 1.0).abs() < 0.05, "{theta}");
    assert!(report["delta_eps"].as_f64().unwrap() >= 0.0);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 16);
    assert!(report["diagnostics"]["mde_converged"].as_bool().unwrap());
}

#[test]
fn alternative_path_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("alt.csv");
    let o = sngof(&["simulate", "--epsilon", "0.005", "--amplitude", "0.3", "-o", path_str(&traj)]);
    assert!(o.status.success());
    let o = sngof(&["test", "--epsilon", "0.005", path_str(&traj)]);
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(report["reject"].as_bool().unwrap());
}

#[test]
fn config_file_drives_a_small_size_study() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let rows = dir.path().join("rows.csv");
    std::fs::write(&cfg, "n_reps = 20\nepsilon = 0.01\nbase_seed = 3\n").unwrap();
    let o = sngof(&["size", "--config", path_str(&cfg), "-o", path_str(&rows)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["n_reps"], 20);
    assert_eq!(summary["kind"], "size");
    let text = std::fs::read_to_string(&rows).unwrap();
    assert!(text.starts_with("rep,seed,theta_star,delta_eps,reject\n"));
    assert_eq!(text.lines().count(), 21);
}

#[test]
fn calibrate_writes_a_loadable_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q.csv");
    let o = sngof(&["calibrate", "--n-paths", "10000", "--grid-steps", "200", "--alphas", "0.1,0.05", "-o", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = QuantileTable::load(&out).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.n_paths, 10_000);
    let o = sngof(&["size", "--n-reps", "5", "--table", path_str(&out)]);
    assert!(o.status.success());
}

#[test]
fn validate_passes_and_dumps_the_profile() {
    let dir = tempfile::tempdir().unwrap();
    let prof = dir.path().join("profile.csv");
    let o = sngof(&["validate", "--profile-out", path_str(&prof)]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 15);
    assert!(!text.contains("FAIL"));
    assert!(std::fs::read_to_string(&prof).unwrap().starts_with("r,h,g,I1"));
}

#[test]
fn bad_input_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "no_such_field = 1\n").unwrap();
    assert_eq!(sngof(&["show-config", "--config", path_str(&cfg)]).status.code(), Some(2));
    assert_eq!(sngof(&["show-config", "--epsilon", "-1"]).status.code(), Some(2));
    assert_eq!(sngof(&["test", "/nonexistent/path.csv"]).status.code(), Some(2));
    assert_eq!(sngof(&["size", "--model", "quadratic", "--n-reps", "3"]).status.code(), Some(2));
}
