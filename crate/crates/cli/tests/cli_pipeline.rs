//! End-to-end pipeline test at micro scale: synth -> train --grid ->
//! thresholds -> sweep -> lowdata -> detect, plus exit-code contracts.

mod common;

use common::{pedk, pedk_ok, write_micro_profile};

#[test]
fn full_pipeline_micro() {
    let tmp = tempfile::tempdir().unwrap();
    let profile = write_micro_profile(tmp.path());
    let profile = profile.to_str().unwrap();
    let data = tmp.path().join("data");
    let models = tmp.path().join("models");
    let data_s = data.to_str().unwrap();
    let models_s = models.to_str().unwrap();

    // synth writes five manifest-backed datasets
    pedk_ok(&[
        "synth", "--out", data_s, "--profile-file", profile, "--seed", "3",
    ]);
    for name in ["barrel", "magazine", "receiver", "stock", "single"] {
        assert!(data.join(name).join("manifest.json").exists(), "{name}");
    }
    assert!(data.join("run_config.json").exists());

    // grid training: 25 checkpoints + tables
    pedk_ok(&[
        "train", "--data", data_s, "--out", models_s, "--grid", "--profile-file", profile,
        "--seed", "3", "--workers", "2",
    ]);
    let grid_files: Vec<_> = std::fs::read_dir(models.join("grid"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(grid_files.len(), 25, "expected 25 grid checkpoints");
    for t in ["barrels", "magazines", "receivers", "stocks", "full_object"] {
        assert!(models.join("best").join(format!("{t}.pedk")).exists());
        let csv =
            std::fs::read_to_string(models.join("reports").join(format!("grid_{t}.csv"))).unwrap();
        assert_eq!(csv.trim_end().lines().count(), 6, "5 arch rows for {t}");
    }
    assert!(models.join("train_summary.json").exists());

    // sweep before thresholds must point at the missing sidecar
    let out = pedk(&[
        "sweep", "--data", data_s, "--models", models_s, "--profile-file", profile,
    ]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("thresholds"), "unhelpful error: {msg}");

    // thresholds: 4 sidecars + Table III-shaped CSV
    pedk_ok(&[
        "thresholds", "--data", data_s, "--models", models_s, "--profile-file", profile,
        "--workers", "2",
    ]);
    let csv = std::fs::read_to_string(models.join("reports").join("thresholds.csv")).unwrap();
    assert_eq!(csv.trim_end().lines().count(), 5, "4 networks + header");
    for part in ["barrels", "magazines", "receivers", "stocks"] {
        assert!(models
            .join("best")
            .join(format!("{part}.thresholds.json"))
            .exists());
    }

    // sweep: 4x4 grid plus weighted table
    pedk_ok(&[
        "sweep", "--data", data_s, "--models", models_s, "--profile-file", profile,
        "--workers", "2",
    ]);
    let csv = std::fs::read_to_string(models.join("reports").join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.trim_end().lines().collect();
    assert_eq!(lines.len(), 5, "4 rule rows + header");
    assert_eq!(lines[1].split(',').count(), 13, "4 theta cells x 3 values");

    // lowdata: 5 models x 4 fractions
    pedk_ok(&[
        "lowdata", "--data", data_s, "--models", models_s, "--profile-file", profile,
        "--seed", "3", "--workers", "2",
    ]);
    let csv = std::fs::read_to_string(models.join("reports").join("lowdata.csv")).unwrap();
    assert_eq!(csv.trim_end().lines().count(), 6);
    let plot = std::fs::read_to_string(models.join("reports").join("lowdata_plot.csv")).unwrap();
    assert_eq!(plot.trim_end().lines().count(), 21);

    // detect on a synthetic validation image, with heatmap export
    let positive = data.join("single").join("images").join("validation").join("000000.png");
    let hm = tmp.path().join("heatmaps");
    let out = pedk_ok(&[
        "detect", "--image", positive.to_str().unwrap(), "--models", models_s,
        "--rule", "2", "--theta", "i", "--json",
        "--heatmaps", hm.to_str().unwrap(), "--profile-file", profile,
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.get("verdict").is_some());
    assert_eq!(v["networks"].as_array().unwrap().len(), 4);
    for part in ["barrels", "magazines", "receivers", "stocks"] {
        assert!(hm.join(format!("heatmap_{part}.png")).exists());
        assert!(hm.join(format!("heatmap_{part}.json")).exists());
    }

    // weighted rule and single-model path both answer
    pedk_ok(&[
        "detect", "--image", positive.to_str().unwrap(), "--models", models_s,
        "--rule", "weighted", "--profile-file", profile,
    ]);
    let out = pedk_ok(&[
        "detect", "--image", positive.to_str().unwrap(), "--models", models_s,
        "--single", "--json", "--profile-file", profile,
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.get("probability").is_some());

    // eval a best checkpoint on its test split
    let ckpt = models.join("best").join("barrels.pedk");
    let out = pedk_ok(&[
        "eval", "--data", data_s, "--checkpoint", ckpt.to_str().unwrap(), "--json",
        "--profile-file", profile,
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.get("accuracy").is_some());
}

#[test]
fn usage_errors_exit_one() {
    let out = pedk(&["train", "--data", "/nonexistent"]); // missing --out
    assert_eq!(out.status.code(), Some(1));

    let tmp = tempfile::tempdir().unwrap();
    let profile = write_micro_profile(tmp.path());
    let out = pedk(&[
        "synth", "--out", tmp.path().join("d").to_str().unwrap(),
        "--profile", "warehouse", "--profile-file", profile.to_str().unwrap(),
    ]);
    // unknown profile name is ignored when a profile file is given
    assert_eq!(out.status.code(), Some(0));
    let out = pedk(&["synth", "--out", tmp.path().join("e").to_str().unwrap(), "--profile", "warehouse"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_errors_exit_two() {
    let out = pedk(&["train", "--data", "/nonexistent", "--out", "/tmp/x", "--grid"]);
    assert_eq!(out.status.code(), Some(2));

    let out = pedk(&[
        "detect", "--image", "/nonexistent.png", "--models", "/tmp",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

/// Detect semantics pinned with hand-built constant classifiers: a blank
/// image yields zero heatmaps, so every rule with a positive threshold
/// says negative; an ensemble whose parts all fire says positive under
/// the weak-majority rule at theta_i.
#[test]
fn detect_fixtures_with_constant_networks() {
    use pedk::checkpoint;
    use pedk::data::ImageBuf;
    use pedk::ensemble::{StatisticMode, ThresholdSet};
    use pedk::model::{PartKind, Role};
    use pedk::nn::dense::DenseLayer;
    use pedk::nn::{Layer, Network};
    use pedk::tensor::Tensor;

    let tmp = tempfile::tempdir().unwrap();
    let models = tmp.path().join("models");
    let best = models.join("best");
    std::fs::create_dir_all(&best).unwrap();

    let constant = |positive: bool| {
        let bias = if positive { vec![0.0, 1.0] } else { vec![1.0, 0.0] };
        Network {
            layers: vec![
                Layer::Dense(
                    DenseLayer::new(
                        Tensor::zeros(&[2, 3 * 32 * 32]),
                        Tensor::from_vec(&[2], bias).unwrap(),
                    )
                    .unwrap(),
                ),
                Layer::Softmax,
            ],
            conv_blocks: 0,
            dense_layers: 1,
            input_side: 32,
            input_channels: 3,
        }
    };

    let write_models = |accepting: bool| {
        for part in PartKind::ALL {
            let net = constant(accepting);
            checkpoint::save(
                &net,
                Role::Component,
                Some(part),
                &best.join(format!("{}s.pedk", part.name())),
            )
            .unwrap();
            let sidecar = serde_json::json!({
                "part": part.name(),
                "thresholds": ThresholdSet {
                    theta_p: 30.0,
                    theta_n: 2.0,
                    theta_i: 16.0,
                    mode: StatisticMode::Max,
                },
                "validation_accuracy": 0.95,
            });
            std::fs::write(
                best.join(format!("{}s.thresholds.json", part.name())),
                serde_json::to_string_pretty(&sidecar).unwrap(),
            )
            .unwrap();
        }
    };

    // blank image
    let blank = tmp.path().join("blank.png");
    std::fs::write(&blank, ImageBuf::new(96, 96).to_png_bytes().unwrap()).unwrap();

    // rejecting ensemble: zero heatmaps, negative under every rule for
    // every positive threshold
    write_models(false);
    for rule in ["1", "2", "3", "4"] {
        for theta in ["n", "i", "p"] {
            let out = pedk_ok(&[
                "detect", "--image", blank.to_str().unwrap(), "--models",
                models.to_str().unwrap(), "--rule", rule, "--theta", theta, "--json",
            ]);
            let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
            assert_eq!(v["verdict"], false, "rule {rule} theta {theta}");
            for n in v["networks"].as_array().unwrap() {
                assert_eq!(n["statistic"], 0.0);
            }
        }
    }

    // accepting ensemble: statistics reach the coverage bound, at least
    // two parts fire, weak majority at theta_i says positive
    write_models(true);
    let out = pedk_ok(&[
        "detect", "--image", blank.to_str().unwrap(), "--models",
        models.to_str().unwrap(), "--rule", "2", "--theta", "i", "--json",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"], true);
}
