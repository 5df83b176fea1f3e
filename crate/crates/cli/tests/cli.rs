use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use drivetrain_mfc::io::{num, read_trajectory_csv, trajectory_csv};
use mfc_core::trajectory::benchmark_trajectory;
use proptest::prelude::*;
use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drivetrain-mfc"))
        .args(args)
        .env_remove("DRIVETRAIN_MFC_THREADS")
        .output()
        .expect("binary runs")
}

fn scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run_in(cmd: &str, scenario: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, scenario.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    bin(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SHORT: &str = r#"{"sim": {"t_end": 2.0}}"#;

#[test]
fn simulate_writes_all_three_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), "s.json", SHORT);
    let out = dir.path().join("out");
    let o = run_in("simulate", &sc, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["series.csv", "metrics.json", "tracking_error.svg"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("itae") && stdout.contains("iau"), "{stdout}");
    let metrics: Value = serde_json::from_slice(&std::fs::read(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["diverged"], Value::Bool(false));
}

#[test]
fn non_dividing_plant_step_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), "s.json", r#"{"sim": {"h_plant": 0.0003}}"#);
    let o = run_in("simulate", &sc, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("h_plant"), "{}", stderr(&o));
}

#[test]
fn unstable_gains_exit_three_with_partial_series() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(
        dir.path(),
        "s.json",
        r#"{"controller": {"kind": "ppi", "gains": {"kp_i": 1e6}, "i_max": 1e12}}"#,
    );
    let out = dir.path().join("out");
    let o = run_in("simulate", &sc, &out, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let series = std::fs::read_to_string(out.join("series.csv")).unwrap();
    let rows = series.lines().count() - 1;
    assert!(rows > 0 && rows < 10_001, "{rows} rows");
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        r#"{"plant": {"jmm": 0.001}}"#,
        r#"{"controller": {"kind": "ppi", "gains": {"alpha1": 3.0}}}"#,
        r#"{"simulation": {}}"#,
    ] {
        let sc = scenario(dir.path(), "s.json", body);
        let o = run_in("simulate", &sc, &dir.path().join("out"), &[]);
        assert_eq!(o.status.code(), Some(2), "{body}");
    }
}

#[test]
fn tune_requires_its_section() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), "s.json", SHORT);
    let o = run_in("tune", &sc, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tuning"), "{}", stderr(&o));
}

#[test]
fn retuning_from_tuned_output_never_increases_cost() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{"sim": {"t_end": 2.0}, "tuning": {"max_evals": 30}}"#;
    let sc = scenario(dir.path(), "s.json", body);
    let first = dir.path().join("first");
    let o = run_in("tune", &sc, &first, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let tuned: Value = serde_json::from_slice(&std::fs::read(first.join("tuned_gains.json")).unwrap()).unwrap();
    let log = std::fs::read_to_string(first.join("tuning_log.csv")).unwrap();
    let rows = log.lines().count() - 1;
    assert!((1..=30).contains(&rows), "{rows} evaluations");
    assert!(tuned["best_j"].as_f64().unwrap() <= tuned["initial_j"].as_f64().unwrap());

    let mut doc: Value = serde_json::from_str(body).unwrap();
    doc["controller"] = tuned["controller"].clone();
    let sc2 = scenario(dir.path(), "s2.json", &doc.to_string());
    let second = dir.path().join("second");
    let o = run_in("tune", &sc2, &second, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let again: Value = serde_json::from_slice(&std::fs::read(second.join("tuned_gains.json")).unwrap()).unwrap();
    assert!(again["best_j"].as_f64().unwrap() <= tuned["best_j"].as_f64().unwrap());
}

#[test]
fn single_draw_sweep_has_one_stem_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), "s.json", r#"{"sim": {"t_end": 2.0}, "montecarlo": {"n_draws": 1, "seed": 9}}"#);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let oa = run_in("montecarlo", &sc, &a, &[]);
    assert_eq!(oa.status.code(), Some(0), "{}", stderr(&oa));
    assert!(String::from_utf8_lossy(&oa.stdout).contains("fraction_positive = "));
    let stem = std::fs::read_to_string(a.join("stem.svg")).unwrap();
    assert_eq!(stem.matches("class=\"stem\"").count(), 1);
    assert!(a.join("histograms.svg").is_file());
    run_in("montecarlo", &sc, &b, &[]);
    for f in ["montecarlo.csv", "stem.svg", "histograms.svg"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn thread_count_does_not_change_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), "s.json", r#"{"sim": {"t_end": 2.0}, "montecarlo": {"n_draws": 6}}"#);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    run_in("montecarlo", &sc, &a, &["--threads", "1"]);
    run_in("montecarlo", &sc, &b, &["--threads", "4"]);
    let oc = Command::new(env!("CARGO_BIN_EXE_drivetrain-mfc"))
        .args(["montecarlo", sc.to_str().unwrap(), "--out", c.to_str().unwrap()])
        .env("DRIVETRAIN_MFC_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(oc.status.code(), Some(0));
    let reference = std::fs::read(a.join("montecarlo.csv")).unwrap();
    assert_eq!(reference, std::fs::read(b.join("montecarlo.csv")).unwrap());
    assert_eq!(reference, std::fs::read(c.join("montecarlo.csv")).unwrap());
}

#[test]
fn seed_flag_overrides_the_sweep_seed() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), "s.json", r#"{"sim": {"t_end": 1.0}, "montecarlo": {"n_draws": 2, "seed": 1}}"#);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_in("montecarlo", &sc, &a, &[]);
    run_in("montecarlo", &sc, &b, &["--seed", "2"]);
    assert_ne!(std::fs::read(a.join("montecarlo.csv")).unwrap(), std::fs::read(b.join("montecarlo.csv")).unwrap());
}

#[test]
fn compare_table_has_five_rows_and_two_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(
        dir.path(),
        "s.json",
        r#"{"plant": {"wear": {"f1": 70.0, "D1": 0.15}}, "sim": {"t_end": 2.0}, "tuning": {"max_evals": 30}}"#,
    );
    let out = dir.path().join("out");
    let o = run_in("compare", &sc, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = std::fs::read(out.join("comparison.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(table.as_slice());
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), ["config", "itae", "iau"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);
    let itae = |name: &str| -> f64 {
        rows.iter().find(|r| &r[0] == name).unwrap()[1].parse().unwrap()
    };
    assert!(itae("ipip") < itae("ppi_nominal"));

    // Second run is served from the cache and reproduces the table.
    let o = run_in("compare", &sc, &out, &[]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(out.join("comparison.csv")).unwrap(), table);
}

#[test]
fn exported_trajectory_loads_back_identically() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), "s.json", "{}");
    let out = dir.path().join("out");
    let o = run_in("trajectory", &sc, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let loaded = read_trajectory_csv(&out.join("trajectory.csv")).unwrap();
    let bench = benchmark_trajectory(1e-3).unwrap();
    assert_eq!(loaded.t, bench.t);
    assert_eq!(loaded.theta_ref, bench.theta_ref);
    assert_eq!(loaded.dtheta_ref, bench.dtheta_ref);
    assert_eq!(loaded.ddtheta_ref, bench.ddtheta_ref);
    assert!(!loaded.meta.synthesized_derivatives);
    assert_eq!(trajectory_csv(&loaded).unwrap(), std::fs::read(out.join("trajectory.csv")).unwrap());
}

#[test]
fn trajectory_files_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let gap = dir.path().join("gap.csv");
    std::fs::write(&gap, "t,theta_ref\n0,0\n0.001,0.1\n0.003,0.2\n").unwrap();
    assert!(read_trajectory_csv(&gap).is_err());

    let two = dir.path().join("two.csv");
    std::fs::write(&two, "t,theta_ref\n0,0\n0.001,0.1\n0.002,0.2\n0.003,0.3\n").unwrap();
    assert!(read_trajectory_csv(&two).unwrap().meta.synthesized_derivatives);

    // A scenario pointing at a bad file fails validation from the CLI too.
    let sc = scenario(dir.path(), "s.json", r#"{"trajectory": {"file": "gap.csv"}}"#);
    let o = run_in("simulate", &sc, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(map) => map.iter().for_each(|(k, c)| flatten(&format!("{prefix}.{k}"), c, out)),
        _ => out.push(prefix.to_string()),
    }
}

#[test]
fn help_lists_every_consumed_key() {
    let defaults: Value = serde_json::from_slice(&bin(&["defaults"]).stdout).unwrap();
    let consumed: [(&str, &[&str]); 5] = [
        ("simulate", &["plant", "controller", "sim"]),
        ("compare", &["plant", "controller", "sim", "tuning"]),
        ("tune", &["plant", "controller", "sim", "tuning"]),
        ("montecarlo", &["plant", "sim", "montecarlo"]),
        ("trajectory", &["sim"]),
    ];
    for (cmd, sections) in consumed {
        let help = String::from_utf8(bin(&[cmd, "--help"]).stdout).unwrap();
        let mut keys = Vec::new();
        for s in sections {
            flatten(s, &defaults[*s], &mut keys);
        }
        for k in keys {
            assert!(help.contains(&format!("{k} =")), "{cmd} --help lacks {k}");
        }
        assert!(help.contains("trajectory.preset") && help.contains("trajectory.file"), "{cmd}");
    }
}

#[test]
fn defaults_document_is_a_valid_scenario() {
    let o = bin(&["defaults"]);
    assert_eq!(o.status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let mut doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    doc["sim"]["t_end"] = Value::from(0.5);
    let sc = scenario(dir.path(), "s.json", &doc.to_string());
    let o = run_in("simulate", &sc, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

proptest! {
    #[test]
    fn numbers_round_trip_exactly(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        prop_assume!(v.is_finite());
        prop_assert_eq!(num(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }
}
