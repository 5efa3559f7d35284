//! Drives the binary end to end through temporary directories.

use std::path::Path;
use std::process::{Command, Output};

fn trofdm(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_trofdm"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

#[test]
fn tx_channel_rx_round_trip_without_noise() {
    let dir = tempfile::tempdir().unwrap();
    let tx = dir.path().join("tx");
    let ch = dir.path().join("ch");
    let diag = dir.path().join("diag");
    trofdm(&["tx", "--out", path(&tx), "--seed", "7"]);
    assert!(tx.join("frame.bin").exists() && tx.join("manifest.toml").exists());
    let taps = dir.path().join("identity.taps");
    std::fs::write(&taps, "# single unit path\n0 1 0 0\n").unwrap();
    trofdm(&[
        "channel",
        "--input",
        path(&tx),
        "--out",
        path(&ch),
        "--taps",
        path(&taps),
    ]);
    let text = stdout(&trofdm(&[
        "rx",
        "--input",
        path(&ch),
        "--modes",
        "NOTR,VTR_BPDN,KNOWN_CSI",
        "--dump-diagnostics",
        path(&diag),
    ]));
    for mode in ["NOTR", "VTR_BPDN", "KNOWN_CSI"] {
        let line = text.lines().find(|l| l.starts_with(mode)).expect("row per mode");
        let cols: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(cols[1].parse::<f64>().unwrap(), 0.0, "{line}");
        assert_eq!(cols[2].parse::<f64>().unwrap(), 0.0, "{line}");
    }
    let cir = std::fs::read_to_string(diag.join("vtr_bpdn_cir.csv")).unwrap();
    assert!(cir.starts_with("tap_index,delay_seconds,re,im\n"));
    assert!(diag.join("notr_constellation.csv").exists());
    assert!(!diag.join("notr_cir.csv").exists());
}

#[test]
fn sweep_is_resumable_and_reportable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "base_seed = 3\ntrials_per_point = 1\nsnr_grid = [10.0, 20.0]\npilot_spacings = [5]\n\
         modes = [\"NOTR\", \"PTR\"]\n[channel]\nkind = \"reference\"\n",
    )
    .unwrap();
    let csv = dir.path().join("out.csv");
    let first = stdout(&trofdm(&["--config", path(&cfg), "sweep", "--out", path(&csv)]));
    assert!(first.contains("NOTR") && first.contains("PTR"));
    let bytes = std::fs::read(&csv).unwrap();
    let text = String::from_utf8(bytes.clone()).unwrap();
    assert!(text.starts_with("# config_hash="));
    assert_eq!(text.lines().count(), 2 + 4);
    let second = stdout(&trofdm(&["--config", path(&cfg), "sweep", "--out", path(&csv)]));
    assert!(second.contains("2 points reused"));
    assert_eq!(std::fs::read(&csv).unwrap(), bytes);
    let table = stdout(&trofdm(&["report", path(&csv)]));
    assert_eq!(table.lines().count(), 2 + 4);
}

#[test]
fn bundled_experiment_file_parses() {
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/reference.toml");
    let text = stdout(&trofdm(&["--config", cfg, "sweep", "--print-config"]));
    assert!(text.contains("trials_per_point = 200"));
}

#[test]
fn bad_mode_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_trofdm"))
        .args(["sweep", "--out", "unused.csv", "--modes", "FOO"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
