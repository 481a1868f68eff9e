//! End-to-end runs of the installed binary over a miniature dataset:
//! every subcommand in sequence, determinism of outputs, resume
//! behavior, and the exit code contract.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_emgcnn")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary launches")
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const SYNTH_TINY: &[&str] = &[
    "synth",
    "--out",
    "raw",
    "--seed",
    "9",
    "--subjects",
    "2",
    "--sessions",
    "1",
    "--trials",
    "2",
    "--trial-duration",
    "0.4",
    "--rest-duration",
    "0.25",
    "--rate",
    "512",
    "--channels",
    "8",
];

#[test]
fn pipeline_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let stdout = run_ok(dir, SYNTH_TINY);
    assert!(stdout.contains("wrote 2 recordings"), "{stdout}");
    assert!(dir.join("raw/manifest.json").exists());
    assert!(dir.join("raw/run.json").exists());
    assert!(dir.join("raw/s01_01.samples").exists());

    run_ok(dir, &["preprocess", "--in", "raw", "--out", "prep"]);
    assert!(dir.join("prep/run.json").exists());
    assert!(dir.join("prep/s02_01.samples").exists());

    let stdout = run_ok(
        dir,
        &["segment", "--in", "prep", "--window", "64", "--overlap", "0.25", "--out", "frames.bin"],
    );
    assert!(stdout.contains("frames of 64x8"), "{stdout}");
    assert!(dir.join("frames.run.json").exists());

    let stdout = run_ok(
        dir,
        &["train", "--frames", "frames.bin", "--kernel", "3", "--epochs", "1", "--out", "model"],
    );
    assert!(stdout.contains("test accuracy"), "{stdout}");
    for f in ["model.bin", "curve.csv", "metrics.csv", "confusion.csv", "run.json"] {
        assert!(dir.join("model").join(f).exists(), "missing model/{f}");
    }
    let metrics = std::fs::read_to_string(dir.join("model/metrics.csv")).unwrap();
    assert!(metrics.starts_with("accuracy,f1_macro\n"), "{metrics}");

    run_ok(
        dir,
        &[
            "sweep", "--in", "raw", "--out", "sweep/results.csv", "--windows", "64", "--overlaps",
            "0,0.5", "--kernels", "3", "--seeds", "1", "--epochs", "1", "--jobs", "1",
        ],
    );
    let results = std::fs::read_to_string(dir.join("sweep/results.csv")).unwrap();
    let header = results.lines().next().unwrap();
    assert_eq!(
        header,
        "subject,window,overlap_frac,kernel,seed,accuracy,f1_macro,acc_NM,acc_WS,acc_WP,acc_HO,acc_HC,seconds"
    );
    assert_eq!(results.lines().count(), 5, "2 subjects x 2 overlaps + header");
    assert!(dir.join("sweep/results_confusions.csv").exists());
    assert!(dir.join("sweep/results.run.json").exists());

    run_ok(
        dir,
        &[
            "report", "--csv", "sweep/results.csv", "--curves", "model", "--out", "report",
            "--delta-hi", "0.5",
        ],
    );
    for f in ["deltas.csv", "kernel_trend.csv", "overlap_window64.svg", "kernel_f1.svg", "curve_curve.svg"]
    {
        assert!(dir.join("report").join(f).exists(), "missing report/{f}");
    }
    let deltas = std::fs::read_to_string(dir.join("report/deltas.csv")).unwrap();
    assert!(deltas.starts_with("window,kernel,accuracy_delta_pp,f1_delta_pp\n"), "{deltas}");
}

#[test]
fn synth_is_bit_reproducible_across_processes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    run_ok(dir, SYNTH_TINY);
    let mut again: Vec<&str> = SYNTH_TINY.to_vec();
    again[2] = "raw2";
    run_ok(dir, &again);
    for name in ["manifest.json", "s01_01.samples", "s01_01.labels", "s02_01.samples"] {
        let a = std::fs::read(dir.join("raw").join(name)).unwrap();
        let b = std::fs::read(dir.join("raw2").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn sweep_resume_skips_finished_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    run_ok(dir, SYNTH_TINY);
    let sweep_args = [
        "sweep", "--in", "raw", "--out", "r.csv", "--windows", "64", "--overlaps", "0", "--kernels",
        "3", "--seeds", "1", "--epochs", "1", "--jobs", "1",
    ];
    let first = run_ok(dir, &sweep_args);
    assert!(first.contains("2 new cells, 0 skipped"), "{first}");
    let bytes_before = std::fs::read(dir.join("r.csv")).unwrap();

    let second = run_ok(dir, &sweep_args);
    assert!(second.contains("0 new cells, 2 skipped"), "{second}");
    let bytes_after = std::fs::read(dir.join("r.csv")).unwrap();
    assert_eq!(bytes_before, bytes_after, "resume must not rewrite finished rows");

    // Widening the grid appends only the missing cells.
    let mut wider: Vec<&str> = sweep_args.to_vec();
    wider[8] = "0,0.5";
    let third = run_ok(dir, &wider);
    assert!(third.contains("2 new cells, 2 skipped"), "{third}");
    let text = std::fs::read_to_string(dir.join("r.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with(std::str::from_utf8(&bytes_before).unwrap()));
}

#[test]
fn config_file_fills_defaults_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    run_ok(dir, SYNTH_TINY);
    std::fs::write(dir.join("seg.conf"), "window=48\noverlap=0.5\n").unwrap();
    let stdout = run_ok(
        dir,
        &["segment", "--in", "raw", "--config", "seg.conf", "--window", "32", "--out", "f.bin"],
    );
    // window from the flag, overlap from the file.
    assert!(stdout.contains("frames of 32x8"), "{stdout}");
    let manifest = std::fs::read_to_string(dir.join("f.run.json")).unwrap();
    assert!(manifest.contains("\"window\": \"32\""), "{manifest}");
    assert!(manifest.contains("\"overlap\": \"0.5\""), "{manifest}");
}

#[test]
fn usage_errors_exit_with_code_1() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cases: &[&[&str]] = &[
        &["definitely-not-a-subcommand"],
        &["segment", "--in", "x", "--out", "y", "--no-such-flag"],
        &["synth", "--out", "d", "--scale", "medium"],
        &["synth", "--out", "d", "--subjects", "0"],
    ];
    for args in cases {
        let out = run_in(dir, args);
        assert_eq!(out.status.code(), Some(1), "args {args:?}");
    }
    // Training config errors are usage errors too.
    run_ok(dir, SYNTH_TINY);
    run_ok(dir, &["segment", "--in", "raw", "--window", "64", "--overlap", "0", "--out", "f.bin"]);
    let out = run_in(dir, &["train", "--frames", "f.bin", "--kernel", "4", "--out", "m"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_or_corrupt_inputs_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = run_in(dir, &["segment", "--in", "nowhere", "--window", "64", "--overlap", "0", "--out", "f.bin"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    std::fs::write(dir.join("garbage.bin"), b"not a frame file").unwrap();
    let out = run_in(dir, &["train", "--frames", "garbage.bin", "--kernel", "3", "--out", "m"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let out = run_in(dir, &["report", "--csv", "missing.csv", "--out", "rep"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_and_version_exit_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("sweep"));
    let out = run_in(tmp.path(), &["--version"]);
    assert_eq!(out.status.code(), Some(0));
}
