use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name).join("case.json")
}

fn chargesite(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chargesite")).args(args).env("CHARGESITE_THREADS", "2").output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Rows of a CSV file as header-keyed string maps.
fn csv_rows(p: &Path) -> Vec<std::collections::HashMap<String, String>> {
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .map(|l| header.iter().zip(l.split(',')).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        .collect()
}

fn built(plan: &serde_json::Value) -> Vec<u64> {
    plan["stations"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|s| s["built"].as_bool().unwrap())
        .map(|s| s["node"].as_u64().unwrap())
        .collect()
}

#[test]
fn plan_toy_then_evaluate_it() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    let stations = dir.path().join("stations.csv");
    let out = chargesite(&["plan", "--case", s(&data("toy_line")), "--out", s(&plan), "--stations-csv", s(&stations)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let p = json(&plan);
    assert_eq!(built(&p), vec![2, 4]);
    assert_eq!(csv_rows(&stations).len(), 6);

    let report = dir.path().join("report.json");
    let ops = dir.path().join("ops.csv");
    let out = chargesite(&[
        "evaluate",
        "--case",
        s(&data("toy_line")),
        "--plan",
        s(&plan),
        "--out",
        s(&report),
        "--operations-csv",
        s(&ops),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&report);
    let (a, b) = (r["costs"]["total"].as_f64().unwrap(), p["costs"]["total"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-5 * b, "{a} vs {b}");
    // Two scenarios of 24 hours.
    assert_eq!(csv_rows(&ops).len(), 48);
}

#[test]
fn zero_traffic_case_gives_empty_plan() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = json(&data("toy_line"));
    let base = data("toy_line").parent().unwrap().to_path_buf();
    for key in ["network", "grid", "scenarios", "types"] {
        let f = m[key].as_str().unwrap().to_string();
        m[key] = s(&base.join(f)).into();
    }
    m["options"]["total_daily_flow"] = 0.0.into();
    let case = dir.path().join("case.json");
    std::fs::write(&case, m.to_string()).unwrap();
    let plan = dir.path().join("plan.json");
    let out = chargesite(&["plan", "--case", s(&case), "--out", s(&plan)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let p = json(&plan);
    assert!(built(&p).is_empty());
    assert!(p["choices"].as_array().unwrap().is_empty());
}

#[test]
fn missing_case_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = chargesite(&["plan", "--case", s(&dir.path().join("absent.json")), "--out", s(&dir.path().join("p.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.json"));
    assert!(!dir.path().join("p.json").exists());
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_chargesite"))
        .args(["report", "--out", s(&dir.path().join("r.csv"))])
        .env("CHARGESITE_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_on_target_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let p = dir.path().join(name);
        let out = chargesite(&[
            "simulate", "--alpha", "0.8", "--lambda", "100", "--mode", "fifo", "--horizon-hours", "1000", "--seed", "1",
            "--out", s(&p),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        p
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let rows = csv_rows(&a);
    assert_eq!(rows.len(), 1);
    let level: f64 = rows[0]["service_level"].parse().unwrap();
    assert!((level - 0.8).abs() <= 0.02, "{level}");
}

#[test]
fn simulate_without_spots_serves_nobody() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("g.csv");
    let out = chargesite(&[
        "simulate", "--lambda", "50", "--spots", "0", "--horizon-hours", "100", "--replications", "2", "--out", s(&p),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&p);
    assert_eq!(rows[0]["service_level"].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn report_without_inputs_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.csv");
    let out = chargesite(&["report", "--out", s(&p)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("label,"));
}

#[test]
fn report_compares_sharing_on_and_off() {
    let dir = tempfile::tempdir().unwrap();
    let case = data("toy_junction");
    let on = dir.path().join("shared.json");
    let off = dir.path().join("independent.json");
    for (flag, p) in [("--share", &on), ("--no-share", &off)] {
        let out = chargesite(&["plan", "--case", s(&case), flag, "--gap", "1e-4", "--out", s(p)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let csv = dir.path().join("summary.csv");
    let out = chargesite(&["report", s(&on), s(&off), "--out", s(&csv)]);
    assert!(out.status.success());
    let rows = csv_rows(&csv);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["label"], "shared");
    let cost = |i: usize| rows[i]["total_musd"].parse::<f64>().unwrap();
    // Both solves stop within the 1e-4 gap.
    assert!(cost(1) <= cost(0) * (1.0 + 2e-4), "off {} on {}", cost(1), cost(0));
}

#[test]
fn corrupted_plan_is_rejected_by_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    std::fs::write(&plan, "{\"format_version\": 1}").unwrap();
    let out = chargesite(&[
        "evaluate",
        "--case",
        s(&data("toy_line")),
        "--plan",
        s(&plan),
        "--out",
        s(&dir.path().join("r.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
