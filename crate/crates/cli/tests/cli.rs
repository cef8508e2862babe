//! End-to-end runs of the binary: flag parsing, config files, report shape,
//! exit codes, CSV export, and rerun determinism.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use avqslab_core::qcore::PureState;
use serde_json::Value;

fn scratch(test: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("avqslab-cli-{test}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn avqslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_avqslab"))
        .args(args)
        .output()
        .unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exited")
}

fn bell_json() -> String {
    let bell = PureState::maximally_entangled(2, "A", "B")
        .unwrap()
        .to_density();
    serde_json::to_string(&bell).unwrap()
}

/// Zero the only nondeterministic field so byte comparison is meaningful.
fn deterministic(mut v: Value) -> String {
    v["provenance"]["wall_time_ms"] = Value::from(0.0);
    v.to_string()
}

#[test]
fn entropy_of_a_bell_pair_reports_minus_one_conditional_entropy() {
    let dir = scratch("entropy");
    let state = dir.join("bell.json");
    fs::write(&state, bell_json()).unwrap();

    let out = avqslab(&["entropy", "--state", state.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    let cond = r["results"]["conditional_entropy"].as_f64().unwrap();
    assert!((cond + 1.0).abs() <= 1e-10);
    assert_eq!(r["provenance"]["seed"], 0);
    assert!(r["assertions"].as_array().unwrap().iter().all(|a| a["passed"] == true));
}

#[test]
fn expectations_in_a_config_file_become_assertions() {
    let dir = scratch("expect");
    let state = dir.join("bell.json");
    fs::write(&state, bell_json()).unwrap();
    let cfg = dir.join("run.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"command": "entropy",
                 "inputs": {{"state": {}}},
                 "params": {{"expect": {{"conditional_entropy": -1.0}}}}}}"#,
            serde_json::to_string(state.to_str().unwrap()).unwrap()
        ),
    )
    .unwrap();

    let out = avqslab(&["entropy", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    let hit = r["assertions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|a| a["name"] == "expect:conditional_entropy")
        .expect("expectation assertion present");
    assert_eq!(hit["passed"], true);

    // A wrong expectation flips the exit code to 1 without erroring out.
    fs::write(
        &cfg,
        format!(
            r#"{{"command": "entropy",
                 "inputs": {{"state": {}}},
                 "params": {{"expect": {{"conditional_entropy": 0.5}}}}}}"#,
            serde_json::to_string(state.to_str().unwrap()).unwrap()
        ),
    )
    .unwrap();
    let out = avqslab(&["entropy", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let r = report(&out);
    let miss = r["assertions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|a| a["name"] == "expect:conditional_entropy")
        .unwrap();
    assert_eq!(miss["passed"], false);
}

#[test]
fn schur_decomposition_table_has_three_frames_summing_to_sixteen() {
    let out = avqslab(&["schur", "--d", "2", "--l", "4"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    let frames = r["results"]["frames"].as_array().unwrap();
    assert_eq!(frames.len(), 3);
    let rank_sum: u64 = frames.iter().map(|f| f["rank"].as_u64().unwrap()).sum();
    assert_eq!(rank_sum, 16);
    assert_eq!(r["results"]["rank_total"], 16);
}

#[test]
fn schur_spectrum_masses_come_with_certified_bounds() {
    let out = avqslab(&["schur", "--d", "2", "--l", "4", "--spectrum", "0.9,0.1"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    let total: f64 = r["results"]["frames"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["mass"].as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() <= 1e-9);
    assert!(r["assertions"]
        .as_array()
        .unwrap()
        .iter()
        .any(|a| a["name"] == "mass_bound_dominates" && a["passed"] == true));
}

#[test]
fn counterexample_gap_for_two_states_is_one_bit() {
    let out = avqslab(&["counterexample", "--n", "2"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert!((r["results"]["gap"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
}

#[test]
fn validate_reports_empty_diagnostics_for_a_good_config() {
    let dir = scratch("validate-good");
    let cfg = dir.join("good.json");
    fs::write(&cfg, r#"{"command": "schur", "params": {"d": 2, "l": 4}}"#).unwrap();
    let out = avqslab(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "[]");
}

#[test]
fn validate_names_the_missing_field_and_the_offending_value() {
    let dir = scratch("validate-bad");

    let missing = dir.join("missing.json");
    fs::write(&missing, r#"{"params": {"d": 2, "l": 4}}"#).unwrap();
    let out = avqslab(&["validate", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("command"));

    let range = dir.join("range.json");
    fs::write(&range, r#"{"command": "schur", "params": {"d": 9, "l": 4}}"#).unwrap();
    let out = avqslab(&["validate", range.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("d = 9") && text.contains("out of range"), "{text}");
}

#[test]
fn exit_codes_separate_schema_numerical_and_io_failures() {
    let dir = scratch("exit-codes");

    // Missing file: I/O.
    let out = avqslab(&["entropy", "--state", dir.join("absent.json").to_str().unwrap()]);
    assert_eq!(code(&out), 3);

    // Well-formed JSON that is not a state: numerical/physicality.
    let bad = dir.join("not-psd.json");
    fs::write(
        &bad,
        r#"{"dims": [2], "labels": ["A"],
            "re": [[1.5, 0.0], [0.0, -0.5]], "im": [[0.0, 0.0], [0.0, 0.0]]}"#,
    )
    .unwrap();
    let out = avqslab(&["entropy", "--state", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // Config naming a different command than the subcommand: schema.
    let cfg = dir.join("mismatch.json");
    fs::write(&cfg, r#"{"command": "schur", "params": {"d": 2, "l": 2}}"#).unwrap();
    let out = avqslab(&["entropy", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);

    // Unknown flags are usage errors: schema.
    let out = avqslab(&["schur", "--d", "2", "--l", "2", "--frobnicate"]);
    assert_eq!(code(&out), 2);

    // A bad worker cap is rejected before any work happens.
    let out = Command::new(env!("CARGO_BIN_EXE_avqslab"))
        .args(["schur", "--d", "2", "--l", "2"])
        .env("AVQSLAB_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    let out = Command::new(env!("CARGO_BIN_EXE_avqslab"))
        .args(["schur", "--d", "2", "--l", "2"])
        .env("AVQSLAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
}

#[test]
fn distill_rate_of_the_trivial_instrument_on_bell_is_one() {
    let dir = scratch("distill");
    let state = dir.join("bell.json");
    fs::write(&state, bell_json()).unwrap();
    let instrument = dir.join("instrument.json");
    fs::write(
        &instrument,
        r#"{"kraus": [{"re": [[1.0, 0.0], [0.0, 1.0]], "im": [[0.0, 0.0], [0.0, 0.0]]}]}"#,
    )
    .unwrap();

    let out = avqslab(&[
        "distill-rate",
        "--state",
        state.to_str().unwrap(),
        "--instrument",
        instrument.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert!((r["results"]["one_shot_rate"].as_f64().unwrap() - 1.0).abs() <= 1e-9);
    assert!(r["assertions"]
        .as_array()
        .unwrap()
        .iter()
        .any(|a| a["name"] == "hat_channel_identity" && a["passed"] == true));
}

#[test]
fn csv_export_covers_tabular_commands_and_rejects_the_rest() {
    let dir = scratch("csv");
    let table = dir.join("table.json");
    fs::write(&table, "[1.0, 0.8, 0.8, 1.0]").unwrap();
    let csv_path = dir.join("orbit.csv");

    let out = avqslab(&[
        "robustify",
        "--set-size",
        "2",
        "--l",
        "2",
        "--table",
        table.to_str().unwrap(),
        "--csv",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv_text = fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = csv_text.lines().collect();
    assert_eq!(lines[0], "s_sequence,value");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("00,") && lines[1].ends_with('1'));
    assert_eq!(lines[2], "01,0.8");

    // Entropy has no table, so asking for CSV is a usage error.
    let state = dir.join("bell.json");
    fs::write(&state, bell_json()).unwrap();
    let out = avqslab(&[
        "entropy",
        "--state",
        state.to_str().unwrap(),
        "--csv",
        dir.join("nope.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn optimize_emits_the_winning_kraus_operators() {
    let dir = scratch("optimize");
    let set = dir.join("set.json");
    fs::write(&set, format!("[{}]", bell_json())).unwrap();

    let out = avqslab(&[
        "optimize",
        "--set",
        set.to_str().unwrap(),
        "--restarts",
        "1",
        "--iters",
        "5",
        "--seed",
        "1",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert!(r["results"]["value"].is_number());
    let kraus = r["results"]["kraus"].as_array().unwrap();
    assert!(!kraus.is_empty());
    assert!(kraus[0]["re"].is_array());
    assert_eq!(r["provenance"]["seed"], 1);
    assert!(r["assertions"]
        .as_array()
        .unwrap()
        .iter()
        .any(|a| a["name"] == "certified_per_copy_value" && a["passed"] == true));
}

#[test]
fn dash_out_writes_the_same_report_as_stdout() {
    let dir = scratch("out-flag");
    let out_path = dir.join("report.json");
    let out = avqslab(&[
        "schur",
        "--d",
        "2",
        "--l",
        "3",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let on_disk = fs::read_to_string(&out_path).unwrap();
    assert_eq!(on_disk.trim(), String::from_utf8_lossy(&out.stdout).trim());
}

#[test]
fn reruns_and_config_round_trips_are_byte_identical() {
    let dir = scratch("determinism");
    let args = [
        "derandomize",
        "--set-size",
        "2",
        "--l",
        "4",
        "--samples",
        "64",
        "--nu",
        "0.3",
        "--mismatch",
        "0.85",
        "--seed",
        "7",
    ];
    let first = avqslab(&args);
    let second = avqslab(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(
        deterministic(report(&first)),
        deterministic(report(&second))
    );

    // The report embeds its own config; running that config reproduces it.
    let cfg_path = dir.join("recovered.json");
    fs::write(
        &cfg_path,
        serde_json::to_string(&report(&first)["config"]).unwrap(),
    )
    .unwrap();
    let third = avqslab(&["derandomize", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(code(&third), 0);
    assert_eq!(deterministic(report(&first)), deterministic(report(&third)));

    // Seed and consulted tolerances are embedded in every report.
    let r = report(&first);
    assert_eq!(r["provenance"]["seed"], 7);
    assert_eq!(r["config"]["seed"], 7);
    let state = dir.join("bell.json");
    fs::write(&state, bell_json()).unwrap();
    let out = avqslab(&[
        "entropy",
        "--state",
        state.to_str().unwrap(),
        "--tol",
        "identity=1e-7",
    ]);
    let r = report(&out);
    assert_eq!(r["tolerances_used"]["identity"].as_f64().unwrap(), 1e-7);
}
