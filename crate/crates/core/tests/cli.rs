//! End-to-end checks of the `nlos-sim` binary: exit codes, artifact
//! emission, overrides, and the shipped presets.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_nlos-sim")
}

fn presets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn run_cli(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn")
}

fn write_cfg(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL_RUN: &str = "\
roi_extent_x_m = 1.0
roi_extent_y_m = 1.0
pixel_m = 0.01
sweeps = 2
target = 9.5, -14.0
";

#[test]
fn run_emits_requested_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), SMALL_RUN);
    let out_dir = dir.path().join("out");
    let out = run_cli(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--emit",
        "csv,pgm,json,plan,cube",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in [
        "design_report.json",
        "metrics.json",
        "manifest.json",
        "image_db.csv",
        "image.pgm",
        "phase_plan.csv",
        "echo_cube.bin",
    ] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    // The cube parses back and covers every snapshot of the 2-sweep run.
    let cube = nlos_imaging::export::cube_from_bytes(
        &std::fs::read(out_dir.join("echo_cube.bin")).unwrap(),
    )
    .unwrap();
    assert_eq!(cube.analytic.len() % 2, 0);
    let plan = std::fs::read_to_string(out_dir.join("phase_plan.csv")).unwrap();
    assert!(plan.starts_with("sweep,snapshot,element,phase_rad\n"));
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("metrics.json")).unwrap())
            .unwrap();
    assert!(metrics["width_x_m"].as_f64().unwrap() > 0.0);
    assert!((metrics["peak_x_m"].as_f64().unwrap() - 9.5).abs() <= 0.01);
}

#[test]
fn validation_failure_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "roi_extent_x_m = 1.0\nbogus_key = 3\n");
    let out = run_cli(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("run.cfg:2"), "{stderr}");
    assert!(stderr.contains("bogus_key"), "{stderr}");
}

#[test]
fn strict_mode_fails_on_design_warnings() {
    let dir = tempfile::tempdir().unwrap();
    // lambda_x pinned away from 2*A_inf provokes a design warning.
    let cfg = write_cfg(
        dir.path(),
        "lambda_x_m = 6.0\nsweeps = 1\ntarget = 9.5, -14.0\npixel_m = 0.05\n",
    );
    let out = run_cli(&["design-only", "--config", cfg.to_str().unwrap(), "--strict"]);
    assert_eq!(out.status.code(), Some(1));
    // Non-strict succeeds and reports the warning in the JSON.
    let out = run_cli(&["design-only", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert!(report["warnings"]
        .as_array()
        .unwrap()
        .iter()
        .any(|w| w.as_str().unwrap().contains("lambda_x override")));
    assert!((report["lambda_x_m"].as_f64().unwrap() - 6.0).abs() < 1e-12);
    assert_eq!(report["n_mod"].as_u64().unwrap(), 37);
}

#[test]
fn mode_override_changes_design() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), SMALL_RUN);
    let multi = dir.path().join("multi");
    let mirror = dir.path().join("mirror");
    for (out_dir, mode) in [(&multi, "multiview"), (&mirror, "mirror")] {
        let out = run_cli(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--mode",
            mode,
            "--emit",
            "csv,json",
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let width = |p: &Path| -> f64 {
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(p.join("metrics.json")).unwrap())
                .unwrap();
        v["width_x_m"].as_f64().unwrap()
    };
    // Even with only two sweeps the reconfigured plane beats the mirror.
    assert!(width(&mirror) > width(&multi));
}

#[test]
fn shipped_presets_resolve() {
    for preset in [
        "desk_scale.cfg",
        "square_scene.cfg",
        "near_roi.cfg",
        "far_roi.cfg",
    ] {
        let path = presets_dir().join(preset);
        let out = run_cli(&["design-only", "--config", path.to_str().unwrap()]);
        assert!(
            out.status.success(),
            "{preset}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let report: serde_json::Value =
            serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
        assert!(report["a_inf_m"].as_f64().unwrap() > 1.0, "{preset}");
    }
}

#[test]
fn desk_preset_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run_cli(&[
        "run",
        "--config",
        presets_dir().join("desk_scale.cfg").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--sweeps",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("metrics.json")).unwrap())
            .unwrap();
    assert!((metrics["peak_x_m"].as_f64().unwrap() - 9.5).abs() <= 0.01);
    assert!((metrics["peak_y_m"].as_f64().unwrap() + 14.0).abs() <= 0.01);
}
