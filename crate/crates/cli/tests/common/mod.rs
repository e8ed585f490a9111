use std::path::Path;
use std::process::{Command, Output};

/// A scaled-down profile so pipeline tests finish in seconds while
/// exercising exactly the same code paths as the desk profile.
pub fn micro_profile_json() -> String {
    serde_json::json!({
        "name": "micro",
        "plan": {
            "input_side": 64,
            "input_channels": 3,
            "early_filters": 4,
            "late_filters": 6,
            "dense_width": 16,
            "dropout_p": 0.5,
            "kernel": 3
        },
        "synth": {
            "scene_side": 128,
            "patch_side": 64,
            "part_positives": 60,
            "part_negatives": 60,
            "whole_positives": 60,
            "whole_negatives": 108,
            "other_part_share": 0.25,
            "scene_clutter": [3, 6],
            "patch_clutter": [1, 3],
            "master_seed": 0
        },
        "window": { "window_ratio": 0.5, "step_ratio": 0.125 },
        "part_ratios": [0.8, 0.1, 0.1],
        "single_pos_ratios": [0.8, 0.1, 0.1],
        "single_neg_ratios": [0.888888888888889, 0.0555555555555556, 0.0555555555555556],
        "train_target_per_label": 96,
        "train": {
            "epochs": 2,
            "batch_size": 16,
            "learning_rate": 0.02,
            "momentum": 0.9
        }
    })
    .to_string()
}

pub fn write_micro_profile(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("micro_profile.json");
    std::fs::write(&path, micro_profile_json()).unwrap();
    path
}

pub fn pedk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pedk"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn pedk_ok(args: &[&str]) -> Output {
    let out = pedk(args);
    assert!(
        out.status.success(),
        "pedk {:?} failed:\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}
