use std::fs;
use std::path::Path;
use std::process::Command;

use mchjm_cli::dataset;

fn mchjm(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_mchjm")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, days: usize, extra: &[&str]) -> std::path::PathBuf {
    let days = format!("days={days}");
    let mut args = vec!["synth", "--out", p(dir), "--set", &days];
    args.extend(extra);
    let (code, _, err) = mchjm(&args);
    assert_eq!(code, 0, "{err}");
    dir.join("dataset.csv")
}

fn csv_column(path: &Path, col: &str) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == col).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

#[test]
fn dataset_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), 12, &["--set", "noise_sd=0.001"]);
    let bytes = fs::read(&path).unwrap();
    let data = dataset::read(&path).unwrap();
    assert_eq!(dataset::to_csv(&data), bytes);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# synthetic run\ndays = 5\nseed = 1\n").unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    assert_eq!(mchjm(&["synth", "--config", p(&cfg), "--out", p(&a), "--set", "noise_sd=0.01"]).0, 0);
    assert_eq!(mchjm(&["synth", "--config", p(&cfg), "--out", p(&b), "--set", "noise_sd=0.01", "--seed", "2"]).0, 0);
    assert_eq!(mchjm(&["synth", "--config", p(&cfg), "--out", p(&c), "--set", "noise_sd=0.01", "--set", "days=7"]).0, 0);
    assert_ne!(fs::read(a.join("dataset.csv")).unwrap(), fs::read(b.join("dataset.csv")).unwrap());
    assert_eq!(csv_column(&c.join("dataset.csv"), "date_index").last().unwrap(), "6");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let data = synth(&dir.path().join("d"), 10, &[]);

    let (code, _, err) = mchjm(&["check", "--out", p(&out), "--set", "family=svensson"]);
    assert_eq!(code, 2, "{err}");
    assert_eq!(mchjm(&["simulate", "--out", p(&out), "--set", "dt=-0.1"]).0, 2);
    assert_eq!(mchjm(&["synth", "--out", p(&out), "--set", "colour=red"]).0, 2);

    let text = fs::read_to_string(&data).unwrap();
    let bonds_only = dir.path().join("bonds.csv");
    fs::write(&bonds_only, text.split("date_index,tenor_id").next().unwrap()).unwrap();
    let (code, _, err) = mchjm(&["calibrate", "--dataset", p(&bonds_only), "--out", p(&out)]);
    assert_eq!(code, 3);
    assert!(err.contains("missing spreads section"), "{err}");
    let garbled = dir.path().join("garbled.csv");
    fs::write(&garbled, text.replacen("0,0,", "0,zero,", 1)).unwrap();
    let (code, _, err) = mchjm(&["calibrate", "--dataset", p(&garbled), "--out", p(&out)]);
    assert_eq!(code, 3);
    assert!(err.contains(":2:"), "{err}");

    let (code, _, err) = mchjm(&["stability", "--dataset", p(&data), "--out", p(&out), "--set", "window_days=8", "--set", "rolls=5"]);
    assert_eq!(code, 4, "{err}");
}

#[test]
fn noiseless_calibration_reports_tiny_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(&dir.path().join("d"), 30, &[]);
    let out = dir.path().join("c");
    let (code, stdout, err) = mchjm(&["calibrate", "--dataset", p(&data), "--out", p(&out)]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.starts_with("initial: a0=0.53041117 sigma0=0.00285941"));
    for e in csv_column(&out.join("errors.csv"), "relative_error") {
        assert!(e.parse::<f64>().unwrap() < 1e-6, "{e}");
    }
    assert_eq!(csv_column(&out.join("states.csv"), "date_index").len(), 30);
    assert_eq!(csv_column(&out.join("fitted_yields.csv"), "date_index").len(), 30 * 3 * 17);
    assert_eq!(csv_column(&out.join("theta.csv"), "parameter").len(), 8);
}

#[test]
fn single_roll_stability_and_sweep_shape() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(&dir.path().join("d"), 45, &["--set", "noise_sd=0.0005"]);
    let out = dir.path().join("s");
    let (code, _, err) = mchjm(&["stability", "--dataset", p(&data), "--out", p(&out), "--set", "window_days=30", "--set", "rolls=1"]);
    assert_eq!(code, 0, "{err}");
    assert!(csv_column(&out.join("stability.csv"), "std").iter().all(|s| s == "0"));
    let (code, _, err) = mchjm(&["sweep", "--dataset", p(&data), "--out", p(&out), "--set", "months=1,2,3,4,5,6"]);
    assert_eq!(code, 0, "{err}");
    let conv = csv_column(&out.join("sweep.csv"), "converged");
    assert_eq!(conv.len(), 6);
    assert_eq!(conv[0], "true");
    assert!(conv[3..].iter().all(|c| c.is_empty()));
}

#[test]
fn zero_volatility_simulation_is_pure_transport() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("z");
    let (code, stdout, err) = mchjm(&[
        "simulate", "--out", p(&out), "--set", "model=zero-vol", "--set", "paths=120", "--set", "dt=0.05", "--set", "horizon=1",
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(csv_column(&out.join("martingale.csv"), "z"), vec!["0", "0", "0"], "{stdout}");
}

#[test]
fn hw3_simulation_reports_three_martingale_tests() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h");
    let (code, stdout, err) = mchjm(&["simulate", "--out", p(&out), "--set", "paths=200", "--set", "horizon=0.5"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(stdout.matches("martingale ").count(), 3);
    let gaps = csv_column(&out.join("fdr.csv"), "max_embedding_gap");
    assert!(gaps.iter().all(|g| g.parse::<f64>().unwrap() < 5e-3));
}
