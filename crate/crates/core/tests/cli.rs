use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aoi_wear::experiments::{read_policy_csv, read_sweep_csv, renewal_onset, ExperimentSpec};
use aoi_wear::model::{enumerate_states, Action, ModelConfig};
use aoi_wear::simulator::{read_trace, SimParams};
use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aoi-wear"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(cmd: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"];
    args.extend_from_slice(extra);
    run(&args)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v = json(&config("reference.json"));
    edit(&mut v);
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    path
}

#[test]
fn solve_writes_full_policy() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in("solve", &config("reference.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let cfg = ModelConfig::reference();
    let policy = read_policy_csv(&dir.path().join("policy.csv"), &cfg).unwrap();
    assert_eq!(policy.len(), 900);
    let space = enumerate_states(&cfg);
    assert_eq!(policy.get(space.index(cfg.saturated_state())), Action::Renew);
    let text = std::fs::read_to_string(dir.path().join("policy.csv")).unwrap();
    assert!(text.lines().any(|l| l == "10,10,8,2"));

    let solve = json(&dir.path().join("solve.json"));
    assert_eq!(solve["c"], 1.0);
    assert_eq!(solve["policy"].as_array().unwrap().len(), 900);
    assert_eq!(solve["h"].as_array().unwrap().len(), 900);
    assert!(solve["residual"].as_f64().unwrap() < 1e-9);
    assert!(solve["iters"].as_u64().unwrap() > 0);
    let lambda = solve["lambda_star"].as_f64().unwrap();
    assert!((1.0..=51.0).contains(&lambda));

    let snapshot = ExperimentSpec::from_json(&std::fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(snapshot.model, cfg);
    assert!(dir.path().join("policy_grid.txt").exists());
}

#[test]
fn faster_tokens_renew_earlier() {
    let dir = tempfile::tempdir().unwrap();
    let (low, high) = (dir.path().join("low"), dir.path().join("high"));
    assert!(run_in("solve", &config("reference.json"), &low, &[]).status.success());
    assert!(run_in("solve", &config("high_token_rate.json"), &high, &[]).status.success());
    let low_cfg = ModelConfig::reference();
    let high_cfg = ModelConfig {
        token_prob: 0.8,
        ..ModelConfig::reference()
    };
    let a = renewal_onset(&low_cfg, &read_policy_csv(&low.join("policy.csv"), &low_cfg).unwrap()).unwrap();
    let b = renewal_onset(&high_cfg, &read_policy_csv(&high.join("policy.csv"), &high_cfg).unwrap()).unwrap();
    assert!(b.0 < a.0 && b.1 < a.1, "P_B=0.8 onset {b:?}, P_B=0.1 onset {a:?}");
}

#[test]
fn sweep_covers_grid_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in("sweep", &config("sweep.json"), dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let path = dir.path().join("sweep.csv");
    let rows = read_sweep_csv(&path).unwrap();
    assert_eq!(rows.len(), 36);
    assert!(rows.iter().all(|r| r.errors.is_empty() && r.lambda_star.is_some()));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("profile,T_D,P_B,lambda_star,errors\n"));

    // In-memory rows and the parsed file agree exactly.
    let spec = ExperimentSpec::load(&config("sweep.json")).unwrap();
    let again = tempfile::tempdir().unwrap();
    let direct = aoi_wear::experiments::cmd_sweep(&spec, again.path()).unwrap();
    assert_eq!(direct, rows);
}

#[test]
fn sweep_records_point_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "few_iters.json", |v| {
        v["solver"]["max_iters"] = 3.into();
        v["sweep"] = serde_json::json!({"P_B": [0.2, 0.4], "T_D": [2]});
    });
    let out_dir = dir.path().join("out");
    let out = run_in("sweep", &cfg, &out_dir, &[]);
    assert!(out.status.success());
    let rows = read_sweep_csv(&out_dir.join("sweep.csv")).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.lambda_star.is_none() && r.errors.contains("did not converge")));
}

#[test]
fn check_exit_status() {
    let out = run(&["check", "--config", config("reference.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("ok = true, m = 10"), "{stdout}");

    let out = run(&["check", "--config", config("starved.json").to_str().unwrap(), "--quiet"]);
    assert_eq!(out.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let out = run_in("check", &config("starved.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let report = json(&dir.path().join("check.json"));
    assert_eq!(report["ok"], false);
    assert_eq!(report["offending_states"].as_array().unwrap().len(), 10 * 10 * 8 - 1);
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.json", |v| v["T_D"] = 1.into());
    let out = run_in("solve", &bad, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("T_D"));

    let out = run_in("solve", &dir.path().join("missing.json"), &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));

    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{not json").unwrap();
    assert_eq!(run_in("check", &garbage, dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn non_convergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "few_iters.json", |v| v["solver"]["max_iters"] = 3.into());
    let out = run_in("solve", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("did not converge"));
}

#[test]
fn oracle_reports_gap_and_policies() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in("oracle", &config("tiny.json"), dir.path(), &["--audit"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("oracle.json"));
    let gap = report["gap"].as_f64().unwrap();
    assert!((0.0..1e-6).contains(&gap));
    assert!(report["disagreements"].as_array().unwrap().is_empty());
    for key in ["bruteforce_policy_csv", "rvi_policy_csv"] {
        let csv = report[key].as_str().unwrap();
        assert!(csv.starts_with("d,delta,b,action\n"));
        assert_eq!(csv.lines().count(), 28);
    }
    let count = report["policies_evaluated"].as_u64().unwrap();
    let audit = std::fs::read_to_string(dir.path().join("oracle_audit.csv")).unwrap();
    assert_eq!(audit.lines().count() as u64, count + 1);

    let out = run_in("oracle", &config("reference.json"), &dir.path().join("big"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("relative value iteration only"));
}

#[test]
fn simulate_inline_and_from_policy_file() {
    let dir = tempfile::tempdir().unwrap();
    let solved = dir.path().join("solved");
    assert!(run_in("solve", &config("reference.json"), &solved, &[]).status.success());

    let inline = dir.path().join("inline");
    let out = run_in("simulate", &config("reference.json"), &inline, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sim = json(&inline.join("sim.json"));
    assert_eq!(sim["policy_source"], "solved");
    assert!(sim["relative_gap"].as_f64().unwrap() < 0.01);
    let report = &sim["report"];
    assert_eq!(report["stages"], 990_000);
    let per_stage = report["avg_cost_per_stage"].as_f64().unwrap();
    let per_slot = report["avg_cost_per_slot"].as_f64().unwrap();
    assert!(report["renewals"].as_u64().unwrap() > 0);
    assert!(per_slot <= per_stage);
    assert!(!inline.join("trace.csv").exists());

    let from_file = dir.path().join("from_file");
    let policy = solved.join("policy.csv");
    let out = run_in("simulate", &config("reference.json"), &from_file, &["--policy", policy.to_str().unwrap()]);
    assert!(out.status.success());
    let sim2 = json(&from_file.join("sim.json"));
    assert_eq!(sim2["policy_source"], "file");
    assert!(sim2["lambda_star"].is_null());
    assert_eq!(sim2["report"], sim["report"]);
}

#[test]
fn simulate_seed_override_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (out, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let o = run_in("simulate", &config("tiny.json"), out, &["--seed", seed]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["sim.json", "trace.csv", "config.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(std::fs::read(a.join("trace.csv")).unwrap(), std::fs::read(c.join("trace.csv")).unwrap());

    let rows = read_trace(&a.join("trace.csv")).unwrap();
    let sim: SimParams = serde_json::from_value(json(&a.join("config.json"))["sim"].clone()).unwrap();
    assert_eq!(rows.len() as u64, sim.steps);
    assert_eq!(json(&c.join("sim.json"))["report"]["seed"], 8);
}
