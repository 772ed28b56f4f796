use std::process::{Command, Output};

use qprecond::harness::BatteryReport;

fn qprecond(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qprecond")).args(args).output().expect("spawn qprecond")
}

const SMALL: &[&str] = &[
    "run", "--objective", "rastrigin", "--dims", "2-3", "--budget", "100", "--trials", "2", "--mode", "both",
    "--particles", "100", "--hybrid-particles", "16", "--pso-iterations", "20", "--seed", "5",
];

fn error_json(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(stderr.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {stderr}"))
}

#[test]
fn summary_goes_to_stdout() {
    let out = qprecond(SMALL);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 4);
    assert!(stdout.lines().all(|l| l.contains("rastrigin") && l.contains("correct=")));
}

#[test]
fn out_writes_report_and_boxplot() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let mut args = SMALL.to_vec();
    args.extend(["--out", json.to_str().unwrap()]);
    let out = qprecond(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = BatteryReport::from_json(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report.records.len(), 8);
    assert_eq!(report.config.dims, vec![2, 3]);
    assert!(dir.path().join("r.boxplot.csv").exists());

    let csv = dir.path().join("r.csv");
    let mut args = SMALL.to_vec();
    args.extend(["--out", csv.to_str().unwrap(), "--format", "csv"]);
    assert!(qprecond(&args).status.success());
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 9);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("battery.toml");
    std::fs::write(
        &cfg,
        "objective = \"ackley\"\ndims = [2]\nbudgets = [100]\ntrials = 1\nmodes = [\"hybrid\"]\nhybrid_particles = 16\npso_iterations = 10\n",
    )
    .unwrap();
    let json = dir.path().join("r.json");
    let out = qprecond(&["run", "--config", cfg.to_str().unwrap(), "--trials", "3", "--out", json.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = BatteryReport::from_json(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report.config.objective, "ackley");
    assert_eq!(report.config.trials, 3);
    assert_eq!(report.records.len(), 3);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "objective = \"rastrigin\"\nswarm = 3\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["run", "--objective", "sphere"],
        vec!["run", "--dims", "5-2"],
        vec!["run", "--budget", "4"],
        vec!["run", "--mode", "quantum"],
        vec!["run", "--format", "xml"],
        vec!["run", "--config", bad.to_str().unwrap()],
        vec!["scan", "--objective", "himmelblau", "--dims", "3"],
    ];
    for args in cases {
        let out = qprecond(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = error_json(&out);
        assert_eq!(err["error"]["kind"], "config", "{args:?}");
        assert!(err["error"]["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing").join("r.json");
    let mut args = SMALL.to_vec();
    args.extend(["--out", path.to_str().unwrap()]);
    let out = qprecond(&args);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["kind"], "io");
}

#[test]
fn scan_lists_lowest_grid_points() {
    let out = qprecond(&["scan", "--objective", "himmelblau", "--qubits", "5", "--top", "3"]);
    assert!(out.status.success());
    let rows: Vec<serde_json::Value> =
        String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 3);
    let energies: Vec<f64> = rows.iter().map(|r| r["energy"].as_f64().unwrap()).collect();
    assert!(energies.windows(2).all(|w| w[0] <= w[1]));
    let x: Vec<f64> = serde_json::from_value(rows[0]["x"].clone()).unwrap();
    assert!((x[0] - 1.613).abs() < 1e-3 && (x[1] - 1.613).abs() < 1e-3, "{x:?}");
    assert!((energies[0] - 53.80).abs() < 0.01, "{}", energies[0]);
}
