//! End-to-end tests of the `tariff` binary: exit-code contract, report
//! formats, and determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn tariff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tariff"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn solve_s1_reports_closed_forms() {
    let out = tariff(&[
        "solve",
        "--scenario",
        scenario_path("s1.json").to_str().unwrap(),
        "--regime",
        "both",
        "--format",
        "structured",
    ]);
    assert_eq!(code(&out), 0);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let rows = json["variable_periods"].as_array().unwrap();
    let pe_price = rows[0]["price"].as_f64().unwrap();
    let op_price = rows[1]["price"].as_f64().unwrap();
    assert!((pe_price - 20.0 / 3.0).abs() < 1e-8);
    assert!((op_price - 4.0).abs() < 1e-8);
    let flat_rows = json["flat_periods"].as_array().unwrap();
    assert!((flat_rows[0]["price"].as_f64().unwrap() - 16.0 / 3.0).abs() < 1e-8);
    let deltas = json["price_changes"].as_array().unwrap();
    assert!((deltas[0]["delta_pi"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-8);
    assert!((deltas[1]["delta_pi"].as_f64().unwrap() + 4.0 / 3.0).abs() < 1e-8);
}

#[test]
fn screen_s1_pair_reports_comparison() {
    let out = tariff(&[
        "screen",
        "--scenario",
        scenario_path("s1_pair.json").to_str().unwrap(),
        "--format",
        "structured",
    ]);
    assert_eq!(code(&out), 0);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let consumers = json["consumers"].as_array().unwrap();
    let lo = consumers.iter().find(|c| c["consumer"] == "low_income").unwrap();
    assert!((lo["delta_u"].as_f64().unwrap() + 40.0 / 9.0).abs() < 1e-8);
    let comparisons = json["comparisons"].as_array().unwrap();
    assert_eq!(comparisons.len(), 1);
    assert_eq!(comparisons[0]["verdict"], "CertainLoss");
    assert_eq!(comparisons[0]["exact"], true);
}

#[test]
fn validate_detects_curvature_violation() {
    // k_PE < k_OP violates the curvature ordering
    let text = std::fs::read_to_string(scenario_path("s1.json"))
        .unwrap()
        .replacen("\"k\": 2.0, \"d_bar\": 5.0", "\"k\": 0.5, \"d_bar\": 5.0", 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, text).unwrap();
    let out = tariff(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let report = stdout(&out);
    assert!(report.contains("curvature_ordering"), "report: {report}");
    assert!(report.contains("false"));
}

#[test]
fn validate_passes_good_scenarios() {
    for name in ["s1.json", "s2.json", "s1_pair.json", "mixed.json"] {
        let out = tariff(&["validate", "--scenario", scenario_path(name).to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{name} failed validation");
    }
}

#[test]
fn malformed_document_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{ not json").unwrap();
    let out = tariff(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code(&out), 3);

    let missing = tariff(&["validate", "--scenario", "/nonexistent/song.json"]);
    assert_eq!(code(&missing), 3);

    let usage = tariff(&["solve"]);
    assert_eq!(code(&usage), 3);
}

#[test]
fn infeasible_ramsey_target_exits_5() {
    // monopoly profit of S1 is 54.4
    let out = tariff(&[
        "ramsey",
        "--scenario",
        scenario_path("s1.json").to_str().unwrap(),
        "--target",
        "100.0",
    ]);
    assert_eq!(code(&out), 5);
}

#[test]
fn ramsey_at_unconstrained_profit_recovers_variable_prices() {
    // unconstrained S1 profit: 200/9 + 8
    let out = tariff(&[
        "ramsey",
        "--scenario",
        scenario_path("s1.json").to_str().unwrap(),
        "--target",
        &format!("{}", 200.0 / 9.0 + 8.0),
        "--format",
        "structured",
    ]);
    assert_eq!(code(&out), 0);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["solution"][0]["nu"].as_f64().unwrap(), 0.0);
    let rows = json["periods"].as_array().unwrap();
    assert!((rows[0]["price"].as_f64().unwrap() - 20.0 / 3.0).abs() < 1e-7);
    assert!((rows[1]["price"].as_f64().unwrap() - 4.0).abs() < 1e-7);
}

#[test]
fn corrupted_tolerance_fails_verification_with_6() {
    let text = std::fs::read_to_string(scenario_path("s1.json")).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["options"] = serde_json::json!({ "var_tol": 0.5, "flat_tol": 0.5 });
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sloppy.json");
    std::fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
    let out = tariff(&[
        "verify",
        "--scenario",
        path.to_str().unwrap(),
        "--count",
        "0",
    ]);
    assert_eq!(code(&out), 6);
}

#[test]
fn verify_is_deterministic_by_seed() {
    let path = scenario_path("s1.json");
    let args = [
        "verify",
        "--scenario",
        path.to_str().unwrap(),
        "--seed",
        "11",
        "--count",
        "5",
    ];
    let a = tariff(&args);
    let b = tariff(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout, "same seed must give byte-identical reports");
}

#[test]
fn sweep_single_step_matches_solve() {
    let solve = tariff(&[
        "solve",
        "--scenario",
        scenario_path("s1.json").to_str().unwrap(),
        "--format",
        "structured",
    ]);
    let solve_json: serde_json::Value = serde_json::from_str(&stdout(&solve)).unwrap();
    let flat_price = solve_json["flat_periods"][0]["price"].as_f64().unwrap();

    let sweep = tariff(&[
        "sweep",
        "--scenario",
        scenario_path("s1.json").to_str().unwrap(),
        "--parameter",
        "consumers.0.loss.OP.k",
        "--from",
        "2.0",
        "--to",
        "2.0",
        "--steps",
        "1",
        "--format",
        "structured",
    ]);
    assert_eq!(code(&sweep), 0);
    let sweep_json: serde_json::Value = serde_json::from_str(&stdout(&sweep)).unwrap();
    let rows = sweep_json["sweep"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert!((rows[0]["flat_price"].as_f64().unwrap() - flat_price).abs() < 1e-12);
}

#[test]
fn sweep_unknown_parameter_exits_3() {
    let out = tariff(&[
        "sweep",
        "--scenario",
        scenario_path("s1.json").to_str().unwrap(),
        "--parameter",
        "consumers.0.loss.OP.nothing",
        "--from",
        "1.0",
        "--to",
        "2.0",
        "--steps",
        "2",
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn sweep_a_with_fixed_demand_curve_leaves_prices_unchanged() {
    // scaling one consumer's A with k scaled alongside keeps Ĵ fixed; here
    // we sweep A alone and check prices move only through that consumer's Ĵ:
    // the equilibrium at A=1 must match the base scenario exactly
    let out = tariff(&[
        "sweep",
        "--scenario",
        scenario_path("s1.json").to_str().unwrap(),
        "--parameter",
        "consumers.0.A",
        "--from",
        "1.0",
        "--to",
        "2.0",
        "--steps",
        "2",
        "--format",
        "structured",
    ]);
    assert_eq!(code(&out), 0);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let rows = json["sweep"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!((rows[0]["flat_price"].as_f64().unwrap() - 16.0 / 3.0).abs() < 1e-8);
    // doubling A halves k/A, steepening normalized loss: prices move
    assert!(rows[1]["flat_price"].as_f64().unwrap() < 16.0 / 3.0);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    let out = tariff(&[
        "solve",
        "--scenario",
        scenario_path("s1.json").to_str().unwrap(),
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    assert!(written.starts_with("# variable_periods\n"));
    assert!(written.contains("regime,period,price,aggregate_demand,marginal_cost,foc_residual"));
}
