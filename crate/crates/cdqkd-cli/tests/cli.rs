//! Behavioral tests of the command-line interface: exit codes,
//! diagnostics, manifest reruns.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cdqkd"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn missing_config_file_exits_with_config_error() {
    let out = bin()
        .args(["fig3", "--config", "/nonexistent/nope.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("config error"));
}

#[test]
fn invalid_values_report_every_field_and_write_nothing() {
    let dir = tmp_dir("invalid_values");
    let config = dir.join("bad.toml");
    std::fs::write(
        &config,
        "[source]\nmu = -0.1\n[channel]\neta_detector = 1.5\n",
    )
    .unwrap();
    let out_dir = dir.join("out");
    let out = bin()
        .args(["fig2", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("source.mu"), "{err}");
    assert!(err.contains("channel.eta_detector"), "{err}");
    assert!(!out_dir.exists(), "no partial run on invalid config");
}

#[test]
fn empty_mu_list_is_a_validation_error() {
    let out = bin()
        .args(["fig2", "--override", "source.mu_values=[]"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("source.mu_values"));
}

#[test]
fn parse_failure_identifies_the_line() {
    let dir = tmp_dir("parse_failure");
    let config = dir.join("broken.toml");
    std::fs::write(&config, "[channel\neta = 0.5\n").unwrap();
    let out = bin()
        .args(["validate", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("broken.toml"), "{err}");
    assert!(
        err.contains("line 1"),
        "diagnostic should carry the line: {err}"
    );
}

#[test]
fn validate_prints_the_fully_defaulted_config() {
    let dir = tmp_dir("validate_ok");
    let config = dir.join("minimal.toml");
    std::fs::write(&config, "[source]\nmu = 0.2\n").unwrap();
    let out = bin()
        .args(["validate", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("mu = 0.2"));
    assert!(
        text.contains("e_detector = 0.01"),
        "defaults applied: {text}"
    );
}

#[test]
fn mode_pin_must_match_subcommand() {
    let dir = tmp_dir("mode_pin");
    let config = dir.join("pinned.toml");
    std::fs::write(&config, "mode = \"fig3\"\n").unwrap();
    let out = bin()
        .args(["fig2", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("mode"));
}

#[test]
fn unwritable_output_directory_is_a_runtime_error() {
    let dir = tmp_dir("unwritable");
    let blocker = dir.join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = bin()
        .args(["fig3", "--override", "distance.points=2", "--out"])
        .arg(blocker.join("nested"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("error"));
}

#[test]
fn successful_run_lists_outputs_and_exits_zero() {
    let dir = tmp_dir("fig2_ok");
    let out = bin()
        .args(["fig2", "--override", "distance.points=3"])
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("fig2.csv"));
    assert!(stdout.contains("manifest.toml"));
    assert!(dir.join("fig2.csv").exists());
    let header = std::fs::read_to_string(dir.join("fig2.csv")).unwrap();
    assert!(header.starts_with("mu,length_km,eta,rate_per_pulse,secure"));
}

#[test]
fn table_mode_writes_one_row_per_intensity() {
    let dir = tmp_dir("table_rows");
    let out = bin()
        .args(["table3", "--override", "monitor.n_pulses=100000"])
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let table = std::fs::read_to_string(dir.join("table3.csv")).unwrap();
    // header plus the five default intensities
    assert_eq!(table.lines().count(), 6, "{table}");
    // abort decisions logged as single-line records
    let err = stderr(&out);
    assert_eq!(err.matches("abort-decision ts=").count(), 5, "{err}");
}

#[test]
fn manifest_rerun_reproduces_outputs_byte_for_byte() {
    let first = tmp_dir("manifest_first");
    let out = bin()
        .args([
            "monte-carlo",
            "--seed",
            "99",
            "--override",
            "monte_carlo.n_pulses=50000",
        ])
        .arg("--out")
        .arg(&first)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let second = tmp_dir("manifest_second");
    let out = bin()
        .args(["monte-carlo", "--config"])
        .arg(first.join("manifest.toml"))
        .arg("--out")
        .arg(&second)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let a = std::fs::read(first.join("summary.csv")).unwrap();
    let b = std::fs::read(second.join("summary.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir_a = tmp_dir("seed_a");
    let dir_b = tmp_dir("seed_b");
    for (dir, seed) in [(&dir_a, "5"), (&dir_b, "6")] {
        let out = bin()
            .args([
                "monte-carlo",
                "--seed",
                seed,
                "--override",
                "monte_carlo.n_pulses=50000",
            ])
            .arg("--out")
            .arg(dir)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    let a = std::fs::read(dir_a.join("summary.csv")).unwrap();
    let b = std::fs::read(dir_b.join("summary.csv")).unwrap();
    assert_ne!(a, b, "different seeds must give different tallies");
}
