use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qbeat_core::analytic::light_shift;
use qbeat_core::units::{mhz_to_rad, rad_to_mhz};
use qbeat_core::SystemParams;

fn qbeat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbeat")).args(args).output().expect("run qbeat")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(name)
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

/// Rows of a CSV as numbers, header dropped.
fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(|f| f.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn predict_without_sweep_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = qbeat(&["predict", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let (header, rows) = csv_rows(&dir.path().join("predict.csv"));
    assert_eq!(header[0], "delta_ac_mhz");
    assert_eq!(rows.len(), 1);
}

#[test]
fn predict_detuning_sweep_is_antisymmetric() {
    let dir = tempfile::tempdir().unwrap();
    let config =
        write_config(dir.path(), "[sweep]\nparameter = \"delta_eff\"\nvalues = [-1.0, -0.5, -0.25, 0.25, 0.5, 1.0]\n");
    let out = qbeat(&["predict", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let (header, rows) = csv_rows(&dir.path().join("predict.csv"));
    assert_eq!(header[0], "delta_eff");
    let jump = column(&header, "delta_jump_mhz");
    let values: Vec<f64> = rows.iter().map(|r| r[jump]).collect();
    assert!(values.windows(2).all(|w| w[1] > w[0]), "{values:?}");
    for k in 0..3 {
        assert!((values[k] + values[5 - k]).abs() < 1e-9, "{values:?}");
    }
}

#[test]
fn predict_photon_number_spread_brackets_light_shift() {
    // Δ such that Δ_light/2π = 0.075 MHz at n = 1.
    let mut p = SystemParams::experiment_defaults().with_photon_number(1.0);
    let (mut lo, mut hi) = (0.0, mhz_to_rad(3.0));
    for _ in 0..200 {
        p.delta_eff = 0.5 * (lo + hi);
        if light_shift(&p) < mhz_to_rad(0.075) {
            lo = p.delta_eff;
        } else {
            hi = p.delta_eff;
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &format!(
            "[system]\ndelta_eff = {}\n[sweep]\nparameter = \"photon_number\"\nvalues = [0.7, 1.0, 1.3]\n",
            rad_to_mhz(p.delta_eff)
        ),
    );
    let out = qbeat(&["predict", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let (header, rows) = csv_rows(&dir.path().join("predict.csv"));
    let light = column(&header, "delta_light_mhz");
    let shifts: Vec<f64> = rows.iter().map(|r| r[light]).collect();
    assert!((shifts[1] - 0.075).abs() < 1e-6);
    assert!(shifts[0] >= 0.05 && shifts[2] <= 0.1, "{shifts:?}");
}

#[test]
fn simulate_without_trajectories_writes_curves_only() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[protocol]\nwidth_us = 0.2\n[run]\nt_max_us = 0.5\n");
    let out = qbeat(&["simulate", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("g2_continuous.csv").exists());
    assert!(dir.path().join("g2_gated.csv").exists());
    assert!(!dir.path().join("clicks.bin").exists());
}

#[test]
fn fixed_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let config =
        write_config(dir.path(), "[protocol]\nwidth_us = 0.5\n[run]\nn_traj = 3\nduration_us = 100\nt_max_us = 0.3\n");
    let runs: Vec<PathBuf> = (0..2).map(|k| dir.path().join(format!("run{k}"))).collect();
    for run in &runs {
        let out = qbeat(&["simulate", "--config", &config, "--seed", "17", "--out", run.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    for name in ["clicks.bin", "gate_log.csv", "g2_continuous.csv", "g2_gated.csv"] {
        let a = fs::read(runs[0].join(name)).unwrap();
        let b = fs::read(runs[1].join(name)).unwrap();
        assert!(!a.is_empty());
        assert!(a == b, "{name} differs between runs");
    }

    // The simulated stream carries gate copies, so the filtered correlation works.
    let clicks = runs[0].join("clicks.bin");
    let out = qbeat(&[
        "correlate",
        clicks.to_str().unwrap(),
        "--config",
        &config,
        "--bin",
        "16.4ns",
        "--out",
        runs[0].to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let (header, rows) = csv_rows(&runs[0].join("clicks_hist.csv"));
    assert_eq!(header, ["tau_ns", "counts", "g2_normalized"]);
    assert!(!rows.is_empty());
}

#[test]
fn trajectories_require_an_explicit_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[run]\nn_traj = 1\nduration_us = 10\nt_max_us = 0.1\n");
    let out = qbeat(&["simulate", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("run.seed"), "{}", stderr(&out));
}

#[test]
fn filter_needs_gate_copies() {
    let dir = tempfile::tempdir().unwrap();
    let stream = dir.path().join("plain.csv");
    fs::write(&stream, "tick_ps,channel,origin\n1000,apd_a,cavity\n5000,apd_b,cavity\n9000,apd_a,cavity\n").unwrap();
    let out = qbeat(&["correlate", stream.to_str().unwrap(), "--filter", "on", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("--filter") && err.contains("GATE_COPY"), "{err}");

    let out = qbeat(&["correlate", stream.to_str().unwrap(), "--filter", "off", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn synthetic_fixture_matches_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = qbeat(&[
        "analyze",
        fixture("beat_reference.csv").to_str().unwrap(),
        fixture("beat_test.csv").to_str().unwrap(),
        "--window",
        "0.5,4.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let golden = fs::read_to_string(fixture("golden_fit.txt")).unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout), golden);
    assert_eq!(fs::read_to_string(dir.path().join("beat_test_fit.txt")).unwrap(), golden);
    assert!(!stderr(&out).contains("warning"));
}

#[test]
fn coarse_bins_warn_on_phase_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let out = qbeat(&[
        "analyze",
        fixture("beat_reference.csv").to_str().unwrap(),
        fixture("beat_test.csv").to_str().unwrap(),
        "--bin",
        "16.4ns",
        "--window",
        "0.5,4.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let err = stderr(&out);
    assert!(err.contains("warning") && err.contains("1.64 ns"), "{err}");
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    for (text, key) in [
        ("[system]\ngg = 1.0\n", "gg"),
        ("[protocol]\nattenuation = 2.0\n", "protocol.attenuation"),
        ("[analysis]\nmode = \"sideways\"\n", "analysis.mode"),
        ("[system]\nkappa = -3.0\n", "system.kappa"),
    ] {
        let config = write_config(dir.path(), text);
        let out = qbeat(&["predict", "--config", &config, "--out", dir.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{text}");
        assert!(stderr(&out).contains(key), "{text}: {}", stderr(&out));
    }
    let out = qbeat(&["predict", "--window", "3,1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--window"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(qbeat(&["predict", "--frobnicate"]).status.code(), Some(1));
    assert_eq!(qbeat(&[]).status.code(), Some(1));
    assert_eq!(qbeat(&["--help"]).status.code(), Some(0));
}

#[test]
fn numerical_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.csv");
    let body: String = (0..500).map(|k| format!("{:.4},100,1.0\n", (k as f64 + 0.5) * 1.64)).collect();
    fs::write(&flat, format!("tau_ns,counts,g2_normalized\n{body}")).unwrap();
    let f = flat.to_str().unwrap();
    let out = qbeat(&["analyze", f, f, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("flat.csv"));
}

#[test]
fn single_gate_preset_keeps_the_coherence_in_the_dark() {
    let dir = tempfile::tempdir().unwrap();
    let out = qbeat(&[
        "simulate",
        "--config",
        preset("single_gate.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let (header, rows) = csv_rows(&dir.path().join("g2_gated.csv"));
    let (tau, re, im, drive) = (
        column(&header, "tau_ns"),
        column(&header, "coh_g0_gp_re"),
        column(&header, "coh_g0_gp_im"),
        column(&header, "drive"),
    );
    // Dark window: 20/γ to 100/γ with γ/2π = 6 MHz, after a 10/γ settling time.
    let inv_gamma_ns = 1e3 / (2.0 * std::f64::consts::PI * 6.0);
    let dark: Vec<f64> = rows
        .iter()
        .filter(|r| r[tau] >= 30.0 * inv_gamma_ns && r[tau] <= 100.0 * inv_gamma_ns)
        .map(|r| {
            assert!(r[drive] < 1e-2);
            r[re].hypot(r[im])
        })
        .collect();
    let (lo, hi) = dark.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &m| (a.min(m), b.max(m)));
    assert!(dark.len() > 1000);
    assert!((hi - lo) / lo < 0.005, "coherence drifts from {lo} to {hi}");
}
