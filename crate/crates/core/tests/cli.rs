use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rydspec(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rydspec"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("RYDSPEC_OUT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Data rows of an artifact CSV, without the metadata and column headers.
fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn spectrum_c4_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = rydspec(&["spectrum", "--preset", "c4"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in [
        "config.json",
        "arrangement.csv",
        "eigenvalues.csv",
        "lines.csv",
        "timeseries.csv",
        "timeseries.json",
        "spectrum.csv",
        "peaks.json",
        "p0.svg",
        "spectrum.svg",
    ] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let header = fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    assert!(header.starts_with("# rydspec "));
    assert!(header.lines().nth(1) == Some("t_us,p0"));
    let peaks: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("peaks.json")).unwrap()).unwrap();
    assert!(peaks["metadata"]["config_sha256"].as_str().unwrap().len() == 64);
    assert_eq!(peaks["match"]["matches"].as_array().unwrap().len(), 2);
    // The echoed config is complete and reloads to the same hash.
    let again = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    let o2 = rydspec(&["spectrum", "--config", cfg.to_str().unwrap()], again.path());
    assert_eq!(o2.status.code(), Some(0), "{}", stderr(&o2));
    assert_eq!(
        fs::read(dir.path().join("timeseries.csv")).unwrap(),
        fs::read(again.path().join("timeseries.csv")).unwrap()
    );
}

#[test]
fn triangle_series_is_collective_rabi() {
    let dir = tempfile::tempdir().unwrap();
    let o = rydspec(&["spectrum", "--preset", "triangle-60"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let omega = std::f64::consts::TAU;
    for row in csv_rows(&dir.path().join("timeseries.csv")) {
        let want = (3f64.sqrt() * omega * row[0] / 2.0).cos().powi(2);
        assert!((row[1] - want).abs() < 1e-10, "t = {}: {} vs {want}", row[0], row[1]);
    }
}

#[test]
fn malformed_config_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\n  \"model\": \"pxp\",\n  oops\n}").unwrap();
    let o = rydspec(&["spectrum", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"drive": {"omega_mhz": 1.0, "omgea": 2}}"#).unwrap();
    let o = rydspec(&["spectrum", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("omgea"), "{}", stderr(&o));
}

#[test]
fn sweep_star_to_tetra_has_21_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = rydspec(&["sweep", "--family", "star-to-tetra", "--steps", "21"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("spectrogram_matrix.csv")).unwrap();
    let header = text.lines().nth(1).unwrap();
    assert_eq!(header.split(',').count(), 22);
    let params: std::collections::BTreeSet<String> = fs::read_to_string(dir.path().join("spectrogram.csv"))
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    assert_eq!(params.len(), 21);
    assert!(dir.path().join("lines.csv").exists());
    assert!(dir.path().join("spectrogram.svg").exists());
}

#[test]
fn hexagon_sweep_reaches_three_halves_d() {
    let dir = tempfile::tempdir().unwrap();
    let o = rydspec(&["sweep", "--family", "hexagon-antiprism", "--z-max", "1.5d", "--steps", "7"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let levels = csv_rows(&dir.path().join("levels.csv"));
    let last = levels.iter().map(|r| r[0]).fold(0.0, f64::max);
    assert!((last - 1.5).abs() < 1e-12);
    // At z = 1.5d the trios decouple: lines at √3 and 2√3 times 0.8 MHz.
    let lines: Vec<f64> = csv_rows(&dir.path().join("lines.csv"))
        .into_iter()
        .filter(|r| (r[0] - 1.5).abs() < 1e-12 && r[4] > 1e-3)
        .map(|r| r[3])
        .collect();
    let r3 = 3f64.sqrt() * 0.8;
    assert!(lines.iter().any(|f| (f - r3).abs() < 0.02 * r3), "{lines:?}");
}

#[test]
fn single_step_sweep_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = rydspec(&["sweep", "--family", "star-to-tetra", "--steps", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("steps"));
}

#[test]
fn unknown_preset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = rydspec(&["spectrum", "--preset", "nope"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_passes_with_three_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let o = rydspec(&["verify"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(!text.lines().any(|l| l.starts_with("FAIL")));
    let warns: Vec<&str> = text.lines().filter(|l| l.starts_with("WARN")).collect();
    assert_eq!(warns.len(), 3);
    assert!(warns.iter().any(|w| w.contains("diamond lambda_6")));
    assert!(warns.iter().any(|w| w.contains("h_z")));
}

#[test]
fn verify_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = rydspec(&["verify", "--json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let checks = v["checks"].as_array().unwrap();
    assert!(checks.len() > 40);
    assert!(checks.iter().all(|c| c["status"] != "FAIL"));
}

#[test]
fn tampered_constant_fails_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let o = rydspec(&["verify", "--override", "cycle_4.lambda_7=1.3"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let fails: Vec<String> = stdout(&o).lines().filter(|l| l.starts_with("FAIL")).map(String::from).collect();
    assert_eq!(fails.len(), 1);
    assert!(fails[0].contains("cycle_4.lambda_7"));
}

#[test]
fn seed_changes_noisy_output_only_through_shots() {
    let run = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let o = rydspec(&["spectrum", "--preset", "k4", "--noisy", "--seed", seed], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        (
            fs::read_to_string(dir.path().join("timeseries.csv")).unwrap(),
            fs::read_to_string(dir.path().join("measured.csv")).unwrap(),
        )
    };
    let (ideal_a, meas_a) = run("1");
    let (ideal_b, meas_b) = run("2");
    let body = |s: &str| s.lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&ideal_a), body(&ideal_b));
    assert_ne!(body(&meas_a), body(&meas_b));
    assert!(meas_a.starts_with("# rydspec ") && meas_a.lines().next().unwrap().ends_with("seed=1"));
}

#[test]
fn pxp_with_detuning_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"model": "pxp", "drive": {"detuning_mhz": 0.5}}"#).unwrap();
    let o = rydspec(&["spectrum", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}
