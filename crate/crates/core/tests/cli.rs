use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hswitch(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hswitch"))
        .current_dir(dir)
        .env_remove("HSWITCH_OUT_DIR")
        .args(args)
        .output()
        .expect("run hswitch")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn simulate_writes_throughput() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.csv", "slot,port\n0,1\n0,1\n0,2\n1,3\n");
    let out = hswitch(
        dir.path(),
        &["simulate", "--trace", "t.csv", "--n", "4", "--B", "100", "--policy", "modified-harmonic", "--out", "r.json"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&dir.path().join("r.json"));
    assert_eq!(r["result"]["throughput"], 4);
    assert_eq!(r["config"]["command"], "simulate");
    assert!(r["tool_version"].as_str().unwrap().starts_with("hswitch "));
}

#[test]
fn missing_trace_is_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = hswitch(dir.path(), &["simulate", "--trace", "absent.csv", "--n", "2", "--B", "4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.csv"));
    let out = hswitch(dir.path(), &["simulate", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dt_with_alpha() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.csv", "slot,port\n0,1\n0,1\n0,1\n");
    let out = hswitch(
        dir.path(),
        &["simulate", "--trace", "t.csv", "--n", "2", "--B", "4", "--policy", "dt", "--alpha", "1.0"],
    );
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["result"]["policy"], "dt");
    assert_eq!(r["config"]["policy"]["alpha"], 1.0);
    // free space 4, 3, 2 against queue 0, 1, 2
    assert_eq!(r["result"]["throughput"], 2);
}

#[test]
fn gen_round_trips_into_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let out = hswitch(
        dir.path(),
        &["gen", "--kind", "uniform", "--n", "3", "--B", "6", "--length", "40", "--seed", "7", "--out", "g.csv"],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("g.csv")).unwrap();
    assert_eq!(text.lines().count(), 41);
    let again = hswitch(
        dir.path(),
        &["gen", "--kind", "uniform", "--n", "3", "--B", "6", "--length", "40", "--seed", "7", "--out", "h.csv"],
    );
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(text, std::fs::read_to_string(dir.path().join("h.csv")).unwrap());

    let out = hswitch(dir.path(), &["simulate", "--trace", "g.csv", "--n", "3", "--B", "6", "--out", "s.json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&dir.path().join("s.json"))["result"]["decisions"].as_array().unwrap().len(), 40);

    let out = hswitch(dir.path(), &["gen", "--kind", "uniform", "--n", "3", "--B", "6", "--length", "4"]);
    assert_eq!(out.status.code(), Some(2), "seed is mandatory");
}

#[test]
fn gen_enumerate_writes_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = hswitch(
        dir.path(),
        &["gen", "--kind", "enumerate", "--n", "2", "--B", "2", "--length", "2", "--out", "all"],
    );
    assert_eq!(out.status.code(), Some(0));
    let csvs = std::fs::read_dir(dir.path().join("all"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert_eq!(csvs, 4);
}

#[test]
fn check_proof_reports_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.csv", "slot,port\n0,1\n0,1\n0,2\n1,1\n");
    let out = hswitch(dir.path(), &["check-proof", "--trace", "t.csv", "--n", "2", "--B", "4", "--out", "l.json"]);
    assert_eq!(out.status.code(), Some(0));
    let l = json(&dir.path().join("l.json"));
    let v = &l["result"]["verdicts"];
    for key in ["mapping_bound", "matching_bound", "competitive_bound"] {
        assert_eq!(v[key]["holds"], true, "{key}");
    }
}

#[test]
fn check_proof_violation_is_exit_1_with_dump() {
    let dir = tempfile::tempdir().unwrap();
    // the guard rejects packet 2 while OPT's queue 2 is empty: no mate exists
    write(dir.path(), "t.csv", "slot,port\n0,1\n0,1\n0,2\n0,2\n1,2\n1,2\n1,1\n");
    let out = hswitch(
        dir.path(),
        &["check-proof", "--trace", "t.csv", "--n", "2", "--B", "2", "--dump", "d.csv", "--out", "l.json"],
    );
    assert_eq!(out.status.code(), Some(1));
    let l = json(&dir.path().join("l.json"));
    assert_eq!(l["result"]["matching_violations"][0]["cause"], "capacity-guard");
    let dump = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
    assert!(dump.lines().count() > 1);
}

#[test]
fn check_proof_accepts_given_vector() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.csv", "slot,port\n0,1\n0,1\n0,1\n");
    write(dir.path(), "v.csv", "accept\n0\n1\n1\n");
    let out = hswitch(
        dir.path(),
        &["check-proof", "--trace", "t.csv", "--n", "1", "--B", "2", "--accept", "v.csv"],
    );
    assert_eq!(out.status.code(), Some(0));
    let l: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(l["result"]["b"], 1);
}

#[test]
fn opt_and_limits() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.csv", "slot,port\n0,1\n0,1\n0,2\n");
    let out = hswitch(dir.path(), &["opt", "--trace", "t.csv", "--n", "2", "--B", "2", "--max-packets", "24"]);
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["result"]["opt_count"], 2);
    assert_eq!(r["result"]["opt_vector"], serde_json::json!([true, true, false]));
    let out = hswitch(dir.path(), &["opt", "--trace", "t.csv", "--n", "2", "--B", "2", "--max-packets", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn switch_config_file() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.csv", "slot,port\n0,1\n0,1\n0,2\n0,2\n0,2\n");
    write(dir.path(), "sw.json", r#"{"n": 2, "B": 4}"#);
    let out = hswitch(dir.path(), &["differential", "--trace", "t.csv", "--config", "sw.json"]);
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["result"]["agree"], false);
    assert_eq!(r["result"]["first_divergence"]["packet"], 3);
}

#[test]
fn ratio_sweep_exhaustive_box_has_no_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = hswitch(
        dir.path(),
        &[
            "ratio-sweep", "--box-n", "2", "--box-B", "2", "--box-packets", "6", "--max-slots", "2",
            "--policies", "modified-harmonic,dt", "--out", "sweep.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let table = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("trace_id,n,B,policy,opt,opt_source,alg,ratio,bound,guard_triggers,flagged"));
    assert!(lines.all(|l| l.ends_with(",false")));
    assert_eq!(json(&dir.path().join("sweep.csv.json"))["result"]["flagged"], 0);
}

#[test]
fn ratio_sweep_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = hswitch(dir.path(), &["ratio-sweep"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 1);
}

#[test]
fn config_replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.csv", "slot,port\n0,1\n0,2\n0,1\n2,2\n");
    let out = hswitch(dir.path(), &["simulate", "--trace", "t.csv", "--n", "2", "--B", "3", "--out", "a.json"]);
    assert_eq!(out.status.code(), Some(0));
    let first = std::fs::read(dir.path().join("a.json")).unwrap();
    let echoed: Value = serde_json::from_slice(&first).unwrap();
    write(dir.path(), "exp.json", &echoed["config"].to_string());
    let out = hswitch(dir.path(), &["run", "--config", "exp.json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(dir.path().join("a.json")).unwrap(), first);
    // a result file carries its own config
    let out = hswitch(dir.path(), &["run", "--config", "a.json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(dir.path().join("a.json")).unwrap(), first);
}

#[test]
fn env_out_dir_is_default() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.csv", "slot,port\n0,1\n");
    let out = Command::new(env!("CARGO_BIN_EXE_hswitch"))
        .current_dir(dir.path())
        .env("HSWITCH_OUT_DIR", dir.path().join("results"))
        .args(["opt", "--trace", "t.csv", "--n", "1", "--B", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(json(&dir.path().join("results/opt.json"))["result"]["opt_count"], 1);
}
