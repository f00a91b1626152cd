//! End-to-end tests of the `bivirus` binary: exit codes, report shapes,
//! the exact-rational equal-fitness path, determinism of emitted files,
//! and the documented trajectory format.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_bivirus")
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .env("BIVIRUS_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const SURVIVOR_CONFIG: &str = r#"{
  "model": {
    "n": 2,
    "virus1": {
      "delta": ["0.5", "0.5"],
      "arcs": [
        {"source": 0, "target": 1, "weight": "1"},
        {"source": 1, "target": 0, "weight": "1"}
      ]
    },
    "virus2": {
      "delta": ["1.5", "1.5"],
      "matrix": [["0", "1"], ["1", "0"]]
    }
  },
  "initial_states": [{"x1": [0.2, 0.1], "x2": [0.3, 0.2]}],
  "seed": 7,
  "output_dir": "out"
}"#;

#[test]
fn classify_reports_regime_and_spectral_quantities() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "config.json", SURVIVOR_CONFIG);
    let out = run(&["classify", "--config", "config.json"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/classify.json")).unwrap())
            .unwrap();
    assert_eq!(report["regime"]["label"], "Virus1Only");
    assert!((report["regime"]["s1"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!((report["regime"]["s2"].as_f64().unwrap() + 0.5).abs() < 1e-9);
    assert!((report["regime"]["rho1"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert_eq!(report["validation"]["passed"], true);

    write_config(
        dir.path(),
        "subcritical.json",
        r#"{
          "model": {
            "n": 2,
            "virus1": {"delta": ["1.5", "1.5"], "matrix": [["0", "1"], ["1", "0"]]},
            "virus2": {"delta": ["1.25", "1.25"], "matrix": [["0", "1"], ["1", "0"]]}
          },
          "output_dir": "sub"
        }"#,
    );
    let out = run(&["classify", "--config", "subcritical.json"], dir.path());
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sub/classify.json")).unwrap())
            .unwrap();
    assert_eq!(report["regime"]["label"], "BothSubcritical");
}

#[test]
fn equal_fitness_is_detected_by_exact_rational_comparison() {
    // δ¹/β¹ = 0.1/0.3 and δ²/β² = 0.3/0.9 are equal as rationals, while
    // the f64 cross products 0.1·0.9 and 0.3·0.3 differ in the last ulp.
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "config.json",
        r#"{
          "model": {
            "n": 2,
            "virus1": {"delta": ["0.1", "0.1"], "matrix": [["0", "0.3"], ["0.3", "0"]]},
            "virus2": {"delta": ["0.3", "0.3"], "matrix": [["0", "0.9"], ["0.9", "0"]]}
          },
          "output_dir": "out"
        }"#,
    );
    let out = run(&["classify", "--config", "config.json"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/classify.json")).unwrap())
            .unwrap();
    assert_eq!(report["regime"]["label"], "BothSupercritical");
    assert_eq!(report["regime"]["fitness"], "EqualFitness");
}

#[test]
fn simulate_writes_documented_trajectory_format() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "config.json", SURVIVOR_CONFIG);
    let out = run(&["simulate", "--config", "config.json"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let csv = fs::read_to_string(dir.path().join("out/trajectory_000.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x1_0,x1_1,x2_0,x2_1");
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 5);
    assert_eq!(first[0].parse::<f64>().unwrap(), 0.0);
    // Full double precision: 17 significant digits survive a round trip.
    assert_eq!(first[1].parse::<f64>().unwrap(), 0.2);

    let last: Vec<f64> = csv
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    // Virus 1 settles at 1 − δ/β = 0.5; virus 2 dies out.
    assert!((last[1] - 0.5).abs() < 1e-6 && (last[2] - 0.5).abs() < 1e-6);
    assert!(last[3].abs() < 1e-6 && last[4].abs() < 1e-6);

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/simulate.json")).unwrap())
            .unwrap();
    assert_eq!(report["runs"][0]["trajectory_file"], "trajectory_000.csv");
}

#[test]
fn equilibrium_report_carries_the_documented_fields() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "config.json", SURVIVOR_CONFIG);
    let out = run(&["equilibrium", "--config", "config.json"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/equilibrium.json")).unwrap())
            .unwrap();
    let eqs = report["equilibria"].as_array().unwrap();
    assert_eq!(eqs.len(), 2);
    for e in eqs {
        for field in ["kind", "point", "residual", "jacobian_abscissa", "verdict"] {
            assert!(!e[field].is_null(), "missing field {field}");
        }
    }
    assert_eq!(eqs[0]["kind"], "Healthy");
    assert_eq!(eqs[0]["verdict"], "Unstable");
    assert_eq!(eqs[1]["kind"], "Virus1Epidemic");
    assert_eq!(eqs[1]["verdict"], "LocallyStable");
}

#[test]
fn identical_params_equilibrium_includes_continuum_points() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "config.json",
        r#"{
          "model": {
            "n": 2,
            "virus1": {"delta": ["0.5", "0.5"], "matrix": [["0", "1"], ["1", "0"]]},
            "virus2": {"delta": ["0.5", "0.5"], "matrix": [["0", "1"], ["1", "0"]]}
          },
          "initial_states": [
            {"x1": [0.3, 0.3], "x2": [0.1, 0.1]},
            {"x1": [0.1, 0.1], "x2": [0.3, 0.3]}
          ],
          "output_dir": "out"
        }"#,
    );
    let out = run(&["equilibrium", "--config", "config.json"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/equilibrium.json")).unwrap())
            .unwrap();
    let continuum = &report["continuum"];
    assert!(!continuum.is_null());
    let points = continuum["points"].as_array().unwrap();
    assert_eq!(points.len(), 2);
    let a0 = points[0]["alpha"].as_f64().unwrap();
    let a1 = points[1]["alpha"].as_f64().unwrap();
    // Uniform states on the symmetric cycle preserve the seed ratio.
    assert!((a0 - 3.0).abs() < 1e-4, "alpha {a0}");
    assert!((a1 - 1.0 / 3.0).abs() < 1e-4, "alpha {a1}");
    let sum = continuum["sum_state"].as_array().unwrap();
    assert!((sum[0].as_f64().unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn sensitivity_emits_table_and_consistent_signs() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "config.json", SURVIVOR_CONFIG);
    let out = run(&["sensitivity", "--config", "config.json"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("out/sensitivity.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "parameter,dx_0,dx_1,verdict,fd_verdict,consistent"
    );
    // 2 healing rates + 2 arcs.
    assert_eq!(lines.count(), 4);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/sensitivity.json")).unwrap())
            .unwrap();
    assert_eq!(report["all_consistent"], true);
    assert!(report["system_matrix_abscissa"].as_f64().unwrap() < 0.0);
}

#[test]
fn control_reports_repeller_outcome() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "config.json",
        r#"{
          "model": {
            "n": 2,
            "virus1": {"delta": ["0.5", "0.5"], "matrix": [["0", "1"], ["1", "0"]]},
            "virus2": {"delta": ["0.5", "0.5"], "matrix": [["0", "1"], ["1", "0"]]}
          },
          "initial_states": [{"x1": [0.001, 0.001], "x2": [0.002, 0.001]}],
          "control": {"k1": ["1", "1"], "k2": ["1.5", "1.5"], "epsilons": [1e-4, 1e-2]},
          "seed": 11,
          "output_dir": "out"
        }"#,
    );
    let out = run(&["control", "--config", "config.json"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/control.json")).unwrap())
            .unwrap();
    assert!(report["rho"].as_f64().unwrap() > 1.0);
    assert_eq!(report["all_converged_to_epidemic"], true);
    assert_eq!(report["all_escaped"], true);
    assert!(report["baseline"]["s_value"].as_f64().unwrap().abs() < 1e-9);
    assert_eq!(report["baseline"]["reached_healthy"], true);
    // 2 axes + 10 random directions, 2 magnitudes.
    assert_eq!(report["runs"].as_array().unwrap().len(), 24);
    assert!(dir.path().join("out/feedback_000.csv").exists());
}

#[test]
fn verify_runs_reduced_suite_and_fails_on_broken_models() {
    let dir = tempfile::tempdir().unwrap();
    let small_counts = r#""verify": {
        "trichotomy_trials": 10, "sign_pattern_trials": 5, "negative_inverse_trials": 5,
        "perron_trials": 5, "healthy_trials": 1, "solver_trials": 1,
        "uniqueness_initializers": 2, "fitter_trials": 1, "coexistence_trials": 1,
        "sensitivity_trials": 1, "feedback_trials": 0, "invariance_trials": 1,
        "positivity_trials": 2, "lyapunov_trials": 1
    }"#;
    write_config(
        dir.path(),
        "good.json",
        &format!(
            r#"{{
              "model": {{
                "n": 2,
                "virus1": {{"delta": ["0.5", "0.5"], "matrix": [["0", "1"], ["1", "0"]]}},
                "virus2": {{"delta": ["1.5", "1.5"], "matrix": [["0", "1"], ["1", "0"]]}}
              }},
              {small_counts},
              "seed": 3,
              "output_dir": "out"
            }}"#
        ),
    );
    let out = run(&["verify", "--config", "good.json"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS model_validation"));
    assert!(stdout.contains("PASS threshold_trichotomy_signs"));

    // Reducible infection matrix: validation failure, exit code 1.
    write_config(
        dir.path(),
        "reducible.json",
        r#"{
          "model": {
            "n": 2,
            "virus1": {"delta": ["0.5", "0.5"], "matrix": [["1", "1"], ["0", "1"]]},
            "virus2": {"delta": ["0.5", "0.5"], "matrix": [["0", "1"], ["1", "0"]]}
          },
          "output_dir": "out"
        }"#,
    );
    let out = run(&["verify", "--config", "reducible.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL model_validation"));

    // Negative healing rate: validation failure, exit code 1.
    write_config(
        dir.path(),
        "negative.json",
        r#"{
          "model": {
            "n": 2,
            "virus1": {"delta": ["-0.5", "0.5"], "matrix": [["0", "1"], ["1", "0"]]},
            "virus2": {"delta": ["0.5", "0.5"], "matrix": [["0", "1"], ["1", "0"]]}
          },
          "output_dir": "out"
        }"#,
    );
    let out = run(&["verify", "--config", "negative.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_configs_name_the_offending_field() {
    let dir = tempfile::tempdir().unwrap();
    // Missing infection rates entirely.
    write_config(
        dir.path(),
        "missing.json",
        r#"{
          "model": {
            "n": 2,
            "virus1": {"delta": ["0.5", "0.5"]},
            "virus2": {"delta": ["0.5", "0.5"], "matrix": [["0", "1"], ["1", "0"]]}
          }
        }"#,
    );
    let out = run(&["classify", "--config", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.virus1"));

    // Unknown field (typo).
    write_config(
        dir.path(),
        "typo.json",
        r#"{
          "model": {
            "n": 2,
            "virus1": {"delta": ["0.5", "0.5"], "matrx": [["0", "1"], ["1", "0"]]},
            "virus2": {"delta": ["0.5", "0.5"], "matrix": [["0", "1"], ["1", "0"]]}
          }
        }"#,
    );
    let out = run(&["classify", "--config", "typo.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("matrx"), "stderr: {stderr}");

    // Rates must be plain decimal strings.
    write_config(
        dir.path(),
        "badrate.json",
        r#"{
          "model": {
            "n": 1,
            "virus1": {"delta": ["1e-3"], "matrix": [["1"]]},
            "virus2": {"delta": ["0.5"], "matrix": [["1"]]}
          }
        }"#,
    );
    let out = run(&["classify", "--config", "badrate.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta[0]"));
}

#[test]
fn fixed_step_method_is_selectable() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "config.json",
        r#"{
          "model": {
            "n": 2,
            "virus1": {"delta": ["0.5", "0.5"], "matrix": [["0", "1"], ["1", "0"]]},
            "virus2": {"delta": ["1.5", "1.5"], "matrix": [["0", "1"], ["1", "0"]]}
          },
          "initial_states": [{"x1": [0.2, 0.1], "x2": [0.3, 0.2]}],
          "integrator": {"method": "rk4", "dt": 0.01, "record_stride": 50},
          "output_dir": "out"
        }"#,
    );
    let out = run(&["simulate", "--config", "config.json"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/simulate.json")).unwrap())
            .unwrap();
    let terminal = &report["runs"][0]["terminal"];
    assert!((terminal["x1"][0].as_f64().unwrap() - 0.5).abs() < 1e-6);

    // rk4 without a step size is a config error.
    write_config(
        dir.path(),
        "nodt.json",
        r#"{
          "model": {
            "n": 2,
            "virus1": {"delta": ["0.5", "0.5"], "matrix": [["0", "1"], ["1", "0"]]},
            "virus2": {"delta": ["1.5", "1.5"], "matrix": [["0", "1"], ["1", "0"]]}
          },
          "integrator": {"method": "rk4"}
        }"#,
    );
    let out = run(&["simulate", "--config", "nodt.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("integrator.dt"));
}

#[test]
fn numerical_failures_exit_with_code_two() {
    // An iteration cap of 1 cannot reach the fixed-point tolerance.
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "config.json",
        r#"{
          "model": {
            "n": 2,
            "virus1": {"delta": ["0.5", "0.5"], "matrix": [["0", "1"], ["1", "0"]]},
            "virus2": {"delta": ["1.5", "1.5"], "matrix": [["0", "1"], ["1", "0"]]}
          },
          "fixed_point": {"max_iter": 1},
          "output_dir": "out"
        }"#,
    );
    let out = run(&["equilibrium", "--config", "config.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("did not converge"));
}

#[test]
fn identical_config_and_seed_reproduce_byte_identical_reports() {
    let strip_generated = |text: &str| -> String {
        text.lines()
            .filter(|l| !l.trim_start().starts_with("\"generated\""))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "config.json", SURVIVOR_CONFIG);
    for (cmd, report) in [
        ("classify", "classify.json"),
        ("simulate", "simulate.json"),
        ("equilibrium", "equilibrium.json"),
    ] {
        let out = run(&[cmd, "--config", "config.json", "--out", "a"], dir.path());
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let out = run(&[cmd, "--config", "config.json", "--out", "b"], dir.path());
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let a = fs::read_to_string(dir.path().join("a").join(report)).unwrap();
        let b = fs::read_to_string(dir.path().join("b").join(report)).unwrap();
        assert_eq!(
            strip_generated(&a),
            strip_generated(&b),
            "{cmd} reports differ beyond the timestamp line"
        );
    }
    // Trajectories carry no timestamps at all: byte-identical.
    let a = fs::read(dir.path().join("a/trajectory_000.csv")).unwrap();
    let b = fs::read(dir.path().join("b/trajectory_000.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn out_flag_overrides_config_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "config.json", SURVIVOR_CONFIG);
    let out = run(
        &["classify", "--config", "config.json", "--out", "elsewhere"],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(dir.path().join("elsewhere/classify.json").exists());
    assert!(!dir.path().join("out/classify.json").exists());
}
