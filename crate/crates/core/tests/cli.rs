//! End-to-end CLI tests: synthetic-domain generation, calibration,
//! the experiment pipeline, analysis commands and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn wavecal(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavecal"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn wavecal")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Shrink the generated config so CLI runs stay fast.
fn shrink_config(dir: &Path) {
    let path = dir.join("config.json");
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    cfg["evolution"]["population_size"] = 8.into();
    cfg["evolution"]["generations"] = 5.into();
    cfg["evolution"]["archive_size"] = 4.into();
    cfg["repeats"] = 1.into();
    cfg["noise"]["members"] = 3.into();
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
}

#[test]
fn full_pipeline_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();

    // 1. Generate the synthetic domain.
    let out = wavecal(&["--out", "truth", "make-truth", "--seed", "3"], root);
    assert_ok(&out);
    for f in [
        "wind.wfld",
        "bathy.txt",
        "stations.csv",
        "observations.csv",
        "config.json",
    ] {
        assert!(root.join("truth").join(f).exists(), "missing {f}");
    }
    shrink_config(&root.join("truth"));

    // 2. Noise ensemble members on disk.
    let out = wavecal(
        &[
            "--out",
            "members",
            "gen-wind-noise",
            "--wind",
            "truth/wind.wfld",
            "--members",
            "2",
            "--sigma",
            "0.25",
            "--seed",
            "1",
        ],
        root,
    );
    assert_ok(&out);
    assert!(root.join("members/member_0.wfld").exists());
    assert!(root.join("members/member_1.wfld").exists());

    // 3. Single calibrations, both algorithms.
    let out = wavecal(
        &[
            "--out",
            "cal_base",
            "calibrate",
            "--config",
            "truth/config.json",
            "--scenario",
            "1",
        ],
        root,
    );
    assert_ok(&out);
    assert!(root.join("cal_base/history.csv").exists());
    assert!(root.join("cal_base/best.json").exists());

    let out = wavecal(
        &[
            "--out",
            "cal_rebec",
            "calibrate",
            "--config",
            "truth/config.json",
            "--scenario",
            "1",
            "--algorithm",
            "rebec",
        ],
        root,
    );
    assert_ok(&out);
    assert!(root.join("cal_rebec/audit.csv").exists());

    // 4. The experiment twice with different worker counts must give
    //    byte-identical outputs.
    for (dir, jobs) in [("exp1", "1"), ("exp2", "4")] {
        let out = wavecal(
            &[
                "--jobs",
                jobs,
                "--out",
                dir,
                "experiment",
                "--config",
                "truth/config.json",
            ],
            root,
        );
        assert_ok(&out);
    }
    for f in [
        "runs.csv",
        "report_rmse.csv",
        "report_mae.csv",
        "report_peak_rmse.csv",
        "report_peak_mae.csv",
    ] {
        let a = std::fs::read(root.join("exp1").join(f)).unwrap();
        let b = std::fs::read(root.join("exp2").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between --jobs 1 and --jobs 4");
    }
    // Raw runs: 18 scenarios x 2 algorithms x 1 repeat x 8 metric rows.
    let runs = std::fs::read_to_string(root.join("exp1/runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 18 * 2 * 8);
    // Each report: 4 groups x 2 algorithms x 2 sets.
    let report = std::fs::read_to_string(root.join("exp1/report_mae.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 16);

    // 5. Sensitivity and surface scans.
    let out = wavecal(
        &[
            "--out",
            "sens",
            "sensitivity",
            "--config",
            "truth/config.json",
            "--param",
            "drg",
            "--runs",
            "5",
        ],
        root,
    );
    assert_ok(&out);
    let sens = std::fs::read_to_string(root.join("sens/sensitivity.csv")).unwrap();
    assert_eq!(sens.lines().count(), 1 + 5);

    let out = wavecal(
        &[
            "--out",
            "surf",
            "surface",
            "--config",
            "truth/config.json",
            "--x",
            "drg:0.5:1.5:3",
            "--y",
            "stpm:0.001:0.006:3",
        ],
        root,
    );
    assert_ok(&out);
    let surf = std::fs::read_to_string(root.join("surf/surface.csv")).unwrap();
    assert_eq!(surf.lines().count(), 1 + 9);
}

#[test]
fn exit_codes_follow_error_classes() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();

    // Missing config file: I/O failure, exit 3.
    let out = wavecal(
        &["calibrate", "--config", "nope/config.json"],
        root,
    );
    assert_eq!(out.status.code(), Some(3));

    // Invalid configuration values: exit 1.
    let out = wavecal(&["--out", "truth", "make-truth"], root);
    assert_ok(&out);
    let cfg_path = root.join("truth/config.json");
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&cfg_path).unwrap()).unwrap();
    cfg["repeats"] = 0.into();
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = wavecal(&["experiment", "--config", "truth/config.json"], root);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("repeats"));

    // Corrupt input format: exit 2.
    cfg["repeats"] = 1.into();
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    std::fs::write(root.join("truth/bathy.txt"), "BOGUS HEADER\n").unwrap();
    let out = wavecal(&["experiment", "--config", "truth/config.json"], root);
    assert_eq!(out.status.code(), Some(2));
}
