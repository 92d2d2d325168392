use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;
use wdn_cli::{strip_meta, HISTORY_HEADER, NODE_TRACE_HEADER, PUMP_TRACE_HEADER};
use wdn_core::controller::{init_policy, PolicyDims, PolicyParams};
use wdn_core::network::build_mininet;

fn wdn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wdn")).args(args).env("RUST_LOG", "info").output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = wdn(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("wdn-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Seed-1 mininet dataset shared by the tests in this file.
fn demands() -> &'static str {
    static PATH: OnceLock<String> = OnceLock::new();
    PATH.get_or_init(|| {
        let dir = tmp("data");
        ok(&["gen-data", "--net", "mininet", "--seed", "1", "--out", dir.to_str().unwrap()]);
        dir.join("demands.csv").to_str().unwrap().to_string()
    })
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(String::from).collect()
}

#[test]
fn gen_data_writes_one_row_per_junction_hour() {
    let dir = tmp("gen");
    let out = ok(&["gen-data", "--net", "mininet", "--seed", "1", "--out", dir.to_str().unwrap()]);
    let rows = data_lines(&dir.join("demands.csv"));
    assert_eq!(rows[0], "node_id,hour,demand_m3s");
    assert_eq!(rows.len() - 1, 8 * 2952);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("23616 rows"), "{stdout}");
    let first = std::fs::read_to_string(dir.join("events.jsonl")).unwrap();
    let config: Value = serde_json::from_str(first.lines().next().unwrap().strip_prefix("# ").unwrap()).unwrap();
    assert_eq!(config["seed"], 1);
    assert_eq!(data_lines(&dir.join("events.jsonl")).len(), 2 * 2952);
}

#[test]
fn missing_net_is_a_usage_error() {
    let out = wdn(&["gen-data", "--out", tmp("nonet").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_reports_the_four_metrics() {
    let dir = tmp("sim24");
    ok(&["simulate", "--net", "mininet", "--demands", demands(), "--hours", "24", "--out", dir.to_str().unwrap()]);
    let m: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap();
    for key in ["p_mse", "max_viol_rate", "min_viol_rate", "energy_kwh_per_hour"] {
        assert!(m[key].is_f64() || m[key].is_u64(), "{key} missing");
    }
    assert_eq!(m["hours"], 24);
    assert_eq!(m["config"]["controller"], "rule");
    assert_eq!(m["per_node"].as_object().unwrap().len(), 4);
    assert!(m["meta"]["created_unix"].is_u64());
    assert_eq!(strip_meta(m.clone()).get("meta"), None);

    let nodes = data_lines(&dir.join("trace_nodes.csv"));
    assert_eq!(nodes[0], NODE_TRACE_HEADER);
    assert_eq!(nodes.len() - 1, 24 * 8);
    let pumps = data_lines(&dir.join("trace_pumps.csv"));
    assert_eq!(pumps[0], PUMP_TRACE_HEADER);
    assert_eq!(pumps.len() - 1, 24 * 2);
}

#[test]
fn conflicting_simulate_flags_are_usage_errors() {
    let out = tmp("bad").to_str().unwrap().to_string();
    let base = ["simulate", "--net", "mininet", "--demands", demands(), "--out", &out];
    let cases: [&[&str]; 5] = [
        &["--forecaster", "none", "--window", "2"],
        &["--window", "3"],
        &["--controller", "policy"],
        &["--controller", "mpc"],
        &["--forecaster", "llm", "--window", "2", "--llm-key-env", "WDN_TEST_UNSET_KEY"],
    ];
    for extra in cases {
        let args: Vec<&str> = base.iter().chain(extra.iter()).copied().collect();
        assert_eq!(wdn(&args).status.code(), Some(2), "{extra:?}");
    }
}

#[test]
fn policy_window_must_match_its_checkpoint() {
    let dir = tmp("mismatch");
    let ck = dir.join("w2.json");
    ok(&["train", "--net", "mininet", "--demands", demands(), "--window", "2", "--epochs", "0", "--out-checkpoint", ck.to_str().unwrap()]);
    let policy = format!("policy@{}", ck.display());
    let out = dir.join("sim");
    let args = ["simulate", "--net", "mininet", "--demands", demands(), "--controller", &policy, "--forecaster", "oracle", "--hours", "2"];
    let mut bad = args.to_vec();
    bad.extend(["--window", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(wdn(&bad).status.code(), Some(2));
    let mut good = args.to_vec();
    good.extend(["--out", out.to_str().unwrap()]);
    ok(&good);
}

#[test]
fn zero_epochs_saves_the_initialization() {
    let dir = tmp("init");
    let ck = dir.join("p.json");
    ok(&["train", "--net", "mininet", "--demands", demands(), "--window", "4", "--epochs", "0", "--seed", "5", "--out-checkpoint", ck.to_str().unwrap()]);
    let (params, config) = PolicyParams::load(&ck).unwrap();
    assert_eq!(params, init_policy(PolicyDims::for_network(&build_mininet(), 4), 5));
    assert_eq!(config["window"], 4);
    assert_eq!(data_lines(&ck.with_extension("history.csv")), vec![HISTORY_HEADER.to_string()]);
}

#[test]
fn history_has_a_row_per_epoch_and_day() {
    let dir = tmp("hist");
    let ck = dir.join("p.json");
    let history = dir.join("h.csv");
    let out = ok(&[
        "train", "--net", "mininet", "--demands", demands(), "--window", "6", "--epochs", "2", "--train-days", "3",
        "--samples", "2", "--out-checkpoint", ck.to_str().unwrap(), "--history", history.to_str().unwrap(),
    ]);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("learning rate 0.0005 (default for window 6)"), "{stderr}");
    let rows = data_lines(&history);
    assert_eq!(rows.len() - 1, 2 * 3);
    let days: Vec<&str> = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(days, ["0", "1", "2", "0", "1", "2"]);
    let (_, config) = PolicyParams::load(&ck).unwrap();
    assert_eq!(config["epochs_done"], 2);
    assert_eq!(config["zo"]["lr"], 5e-4);
}

#[test]
fn explicit_learning_rate_overrides_the_default() {
    let dir = tmp("lr");
    let ck = dir.join("p.json");
    let out = ok(&[
        "train", "--net", "mininet", "--demands", demands(), "--window", "2", "--epochs", "1", "--train-days", "1",
        "--samples", "1", "--lr", "0.001", "--out-checkpoint", ck.to_str().unwrap(),
    ]);
    assert!(String::from_utf8(out.stderr).unwrap().contains("learning rate 0.001"));
    assert_eq!(PolicyParams::load(&ck).unwrap().1["zo"]["lr"], 1e-3);
}

#[test]
fn compare_with_rule_only_has_one_row() {
    let dir = tmp("cmp1");
    ok(&["compare", "--net", "mininet", "--demands", demands(), "--hours", "24", "--out", dir.to_str().unwrap()]);
    let rows = data_lines(&dir.join("compare.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("rule,"));
    let text = std::fs::read_to_string(dir.join("compare.txt")).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split("  ").map(str::trim).filter(|s| !s.is_empty()).collect();
    assert_eq!(header, ["Method", "P-MSE", "Max Viol.", "Min Viol.", "Energy"]);
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn compare_rows_share_the_test_data() {
    let dir = tmp("cmp2");
    let ck = dir.join("w2.json");
    ok(&["train", "--net", "mininet", "--demands", demands(), "--window", "2", "--epochs", "0", "--out-checkpoint", ck.to_str().unwrap()]);
    let out = ok(&[
        "compare", "--net", "mininet", "--demands", demands(), "--hours", "24", "--out", dir.to_str().unwrap(),
        "--checkpoints", ck.to_str().unwrap(),
    ]);
    let rows = data_lines(&dir.join("compare.csv"));
    assert_eq!(rows.len(), 3);
    let hashes: Vec<&str> = rows[1..].iter().map(|r| r.rsplit(',').next().unwrap()).collect();
    assert_eq!(hashes[0], hashes[1]);
    assert_eq!(hashes[0].len(), 64);
    let logged = String::from_utf8(out.stderr).unwrap().matches(hashes[0]).count();
    assert_eq!(logged, 2);
}

#[test]
fn nonexistent_demand_file_fails_without_usage_code() {
    let out = wdn(&["simulate", "--net", "mininet", "--demands", "/nonexistent/d.csv", "--out", tmp("nofile").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
