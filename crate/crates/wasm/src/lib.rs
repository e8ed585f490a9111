//! Browser demo: synthetic scene explorer, sliding-window grid explorer,
//! and a live train-and-detect loop for the four-part ensemble.
//!
//! Every export sticks to plain types (bytes, numbers, JSON strings) so
//! the same functions run natively in tests.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use pedk::data::synth::{render_part_patch, render_scene};
use pedk::data::{ImageBuf, Label, Origin, Sample};
use pedk::ensemble::{
    aggregate, coverage_counts, heatmap, image_statistic, thresholds_from_statistics, Heatmap,
    StatisticMode, ThresholdSet, VoteRule,
};
use pedk::experiment::{accuracy_on, train_with_early_stopping, Target};
use pedk::model::{build_network, ArchSpec, BuildPlan, PartKind, Role};
use pedk::nn::Network;
use pedk::patch::{patch_grid, WindowSpec};
use pedk::profile::TrainConfig;
use pedk::rng;
use pedk::data::PartitionedDataset;

const SCENE_SIDE: usize = 96;
const PATCH_SIDE: usize = 32;
const SCENE_CLUTTER: (usize, usize) = (3, 7);
const PATCH_CLUTTER: (usize, usize) = (1, 3);
/// Window covering a third of the scene: grid patches land exactly on the
/// network input size.
const WINDOW: WindowSpec = WindowSpec {
    window_ratio: PATCH_SIDE as f64 / SCENE_SIDE as f64,
    step_ratio: 0.25,
};

fn demo_plan() -> BuildPlan {
    BuildPlan {
        input_side: PATCH_SIDE,
        input_channels: 3,
        early_filters: 4,
        late_filters: 6,
        dense_width: 16,
        dropout_p: 0.5,
        kernel: 3,
    }
}

fn rgba_of(image: &ImageBuf) -> Vec<u8> {
    let n = image.width * image.height;
    let mut out = Vec::with_capacity(n * 4);
    for i in 0..n {
        out.extend_from_slice(&image.pixels[3 * i..3 * i + 3]);
        out.push(255);
    }
    out
}

/// Render a synthetic scene (all four parts composed over clutter when
/// `positive`, pure clutter otherwise) as RGBA bytes for a canvas.
#[wasm_bindgen]
pub fn scene_rgba(seed: u32, positive: bool) -> Vec<u8> {
    let mut r = rng::stream(seed as u64, &[1]);
    rgba_of(&render_scene(SCENE_SIDE, positive, SCENE_CLUTTER, &mut r))
}

/// Side length of demo scenes, for canvas sizing.
#[wasm_bindgen]
pub fn scene_side() -> u32 {
    SCENE_SIDE as u32
}

/// Render one training patch: a part glyph over clutter, or clutter only
/// for `part_index` outside 0..4.
#[wasm_bindgen]
pub fn patch_rgba(seed: u32, part_index: u32) -> Vec<u8> {
    let part = PartKind::ALL.get(part_index as usize).copied();
    let mut r = rng::stream(seed as u64, &[2, part_index as u64]);
    rgba_of(&render_part_patch(PATCH_SIDE, part, PATCH_CLUTTER, &mut r))
}

#[wasm_bindgen]
pub fn patch_side() -> u32 {
    PATCH_SIDE as u32
}

#[derive(Serialize)]
struct GridInfo {
    side: usize,
    stride: usize,
    count: usize,
    max_coverage: u32,
    rects: Vec<(usize, usize, usize)>,
}

/// Sliding-window grid geometry as JSON, for drawing over an image.
#[wasm_bindgen]
pub fn grid_json(width: u32, height: u32, window_ratio: f64, step_ratio: f64) -> String {
    let build = || -> pedk::Result<GridInfo> {
        let spec = WindowSpec::new(window_ratio, step_ratio)?;
        let grid = patch_grid(width as usize, height as usize, &spec)?;
        let cover = coverage_counts(&grid);
        Ok(GridInfo {
            side: grid.side,
            stride: grid.stride,
            count: grid.rects.len(),
            max_coverage: cover.counts().iter().copied().max().unwrap_or(0),
            rects: grid.rects.iter().map(|r| (r.x, r.y, r.side)).collect(),
        })
    };
    match build() {
        Ok(info) => serde_json::to_string(&info).expect("grid serializes"),
        Err(e) => format!("{{\"error\":{:?}}}", e.to_string()),
    }
}

fn patch_dataset(part: PartKind, per_class: usize, seed: u64) -> PartitionedDataset {
    let mut ds = PartitionedDataset::default();
    let others: Vec<PartKind> = PartKind::ALL.into_iter().filter(|&p| p != part).collect();
    let val = (per_class / 4).max(4);
    for i in 0..per_class + val {
        let mut rp = rng::stream(seed, &[3, part.index() as u64, i as u64]);
        let pos = Sample {
            image: render_part_patch(PATCH_SIDE, Some(part), PATCH_CLUTTER, &mut rp),
            label: Label::Positive,
            part: Some(part),
            origin: Origin::Original,
            source_id: format!("pos{i}"),
        };
        let mut rn = rng::stream(seed, &[4, part.index() as u64, i as u64]);
        // a quarter of negatives show other parts' glyphs
        let glyph = if i % 4 == 0 {
            Some(others[i % others.len()])
        } else {
            None
        };
        let neg = Sample {
            image: render_part_patch(PATCH_SIDE, glyph, PATCH_CLUTTER, &mut rn),
            label: Label::Negative,
            part: Some(part),
            origin: Origin::Original,
            source_id: format!("neg{i}"),
        };
        if i < per_class {
            ds.train.push(pos);
            ds.train.push(neg);
        } else {
            ds.validation.push(pos);
            ds.validation.push(neg);
        }
    }
    ds
}

#[derive(Serialize)]
struct TrainReport {
    per_part: Vec<PartTrainReport>,
}

#[derive(Serialize)]
struct PartTrainReport {
    part: &'static str,
    val_accuracy: f64,
    best_epoch: usize,
    theta_p: f64,
    theta_n: f64,
    theta_i: f64,
}

#[derive(Serialize)]
struct AnalyzeReport {
    parts: Vec<PartAnalysis>,
}

#[derive(Serialize)]
struct PartAnalysis {
    part: &'static str,
    statistic: f64,
    theta_p: f64,
    theta_n: f64,
    theta_i: f64,
    uncertain: bool,
}

#[derive(Serialize)]
struct Verdict {
    positive: bool,
    rule: String,
    theta: String,
    decisions: Vec<bool>,
}

/// The interactive ensemble: train four tiny part networks in the
/// browser, calibrate their thresholds, then analyze scenes and replay
/// the vote under different rules without recomputing heatmaps.
#[wasm_bindgen]
pub struct Demo {
    seed: u64,
    networks: Vec<Network>,
    thresholds: Vec<ThresholdSet>,
    last_stats: Vec<f64>,
    last_maps: Vec<Heatmap>,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Demo {
        Demo {
            seed: seed as u64,
            networks: Vec::new(),
            thresholds: Vec::new(),
            last_stats: Vec::new(),
            last_maps: Vec::new(),
        }
    }

    /// Train the four part networks and calibrate thresholds on a small
    /// validation batch of whole scenes. Returns a JSON report.
    pub fn train(&mut self, per_class: u32, epochs: u32) -> String {
        match self.train_inner(per_class as usize, epochs as usize) {
            Ok(r) => serde_json::to_string(&r).expect("report serializes"),
            Err(e) => format!("{{\"error\":{:?}}}", e.to_string()),
        }
    }

    /// Compute the four heatmaps and statistics for one scene.
    pub fn analyze(&mut self, scene_seed: u32, positive: bool) -> String {
        match self.analyze_inner(scene_seed as u64, positive) {
            Ok(r) => serde_json::to_string(&r).expect("report serializes"),
            Err(e) => format!("{{\"error\":{:?}}}", e.to_string()),
        }
    }

    /// Re-aggregate the stored statistics under a vote rule
    /// (1..=4 for k-of-4, 0 for uniform-weighted) and threshold choice
    /// ("zero" | "n" | "i" | "p").
    pub fn decide(&self, rule: u32, theta: String) -> String {
        match self.decide_inner(rule, &theta) {
            Ok(r) => serde_json::to_string(&r).expect("verdict serializes"),
            Err(e) => format!("{{\"error\":{:?}}}", e.to_string()),
        }
    }

    /// Heatmap of the last analyzed scene for one part, as RGBA bytes
    /// (linear gray, max-normalized).
    pub fn heatmap_rgba(&self, part_index: u32) -> Vec<u8> {
        let Some(map) = self.last_maps.get(part_index as usize) else {
            return Vec::new();
        };
        let max = map.counts().iter().copied().max().unwrap_or(0).max(1);
        let mut out = Vec::with_capacity(map.counts().len() * 4);
        for &v in map.counts() {
            let g = ((v as f64 / max as f64) * 255.0).round() as u8;
            out.extend_from_slice(&[g, g, g, 255]);
        }
        out
    }

    pub fn is_trained(&self) -> bool {
        !self.networks.is_empty()
    }
}

impl Demo {
    fn train_inner(&mut self, per_class: usize, epochs: usize) -> pedk::Result<TrainReport> {
        let plan = demo_plan();
        let cfg = TrainConfig {
            epochs: epochs.clamp(1, 10),
            batch_size: 16,
            learning_rate: 0.02,
            momentum: 0.9,
        };
        let per_class = per_class.clamp(8, 400);

        self.networks.clear();
        self.thresholds.clear();
        let mut runs = Vec::new();
        for part in PartKind::ALL {
            let ds = patch_dataset(part, per_class, self.seed);
            let net = build_network(
                ArchSpec::new(2, 2, Role::Component),
                &plan,
                rng::derive_seed(self.seed, &[10, part.index() as u64]),
            )?;
            let run = train_with_early_stopping(
                net,
                Target::Part(part),
                &ds,
                &cfg,
                rng::derive_seed(self.seed, &[11, part.index() as u64]),
            )?;
            let val = accuracy_on(&run.network, &ds.validation)?;
            runs.push((part, run, val));
        }

        // threshold calibration on a small balanced scene batch
        let n_val = 12usize;
        let scenes: Vec<(bool, pedk::Tensor)> = (0..2 * n_val)
            .map(|i| {
                let positive = i < n_val;
                let mut r = rng::stream(self.seed, &[12, i as u64]);
                (
                    positive,
                    render_scene(SCENE_SIDE, positive, SCENE_CLUTTER, &mut r).to_tensor(),
                )
            })
            .collect();
        let grid = patch_grid(SCENE_SIDE, SCENE_SIDE, &WINDOW)?;

        let mut report = TrainReport {
            per_part: Vec::new(),
        };
        for (part, run, val) in runs {
            let mut pos_stats = Vec::new();
            let mut neg_stats = Vec::new();
            for (positive, scene) in &scenes {
                let map = heatmap(scene, &run.network, &grid)?;
                let stat = image_statistic(&map, StatisticMode::Max);
                if *positive {
                    pos_stats.push(stat);
                } else {
                    neg_stats.push(stat);
                }
            }
            let t = thresholds_from_statistics(&pos_stats, &neg_stats, StatisticMode::Max)?;
            report.per_part.push(PartTrainReport {
                part: part.name(),
                val_accuracy: val,
                best_epoch: run.best_epoch,
                theta_p: t.theta_p,
                theta_n: t.theta_n,
                theta_i: t.theta_i,
            });
            self.networks.push(run.network);
            self.thresholds.push(t);
        }
        Ok(report)
    }

    fn analyze_inner(&mut self, scene_seed: u64, positive: bool) -> pedk::Result<AnalyzeReport> {
        if self.networks.is_empty() {
            return Err(pedk::Error::InvalidParameter(
                "train the ensemble first".into(),
            ));
        }
        let mut r = rng::stream(scene_seed, &[1]);
        let scene = render_scene(SCENE_SIDE, positive, SCENE_CLUTTER, &mut r).to_tensor();
        let grid = patch_grid(SCENE_SIDE, SCENE_SIDE, &WINDOW)?;

        self.last_stats.clear();
        self.last_maps.clear();
        let mut parts = Vec::new();
        for (i, part) in PartKind::ALL.into_iter().enumerate() {
            let map = heatmap(&scene, &self.networks[i], &grid)?;
            let t = &self.thresholds[i];
            let stat = t.statistic(&map);
            parts.push(PartAnalysis {
                part: part.name(),
                statistic: stat,
                theta_p: t.theta_p,
                theta_n: t.theta_n,
                theta_i: t.theta_i,
                uncertain: t.uncertain(stat),
            });
            self.last_stats.push(stat);
            self.last_maps.push(map);
        }
        Ok(AnalyzeReport { parts })
    }

    fn decide_inner(&self, rule: u32, theta: &str) -> pedk::Result<Verdict> {
        if self.last_stats.len() != 4 {
            return Err(pedk::Error::InvalidParameter(
                "analyze a scene first".into(),
            ));
        }
        let vote = if rule == 0 {
            VoteRule::weighted([0.25; 4], 0.5)?
        } else {
            VoteRule::k_of_four(rule as usize)?
        };
        let choice = pedk::ensemble::ThetaChoice::parse(theta).ok_or_else(|| {
            pedk::Error::InvalidParameter(format!("theta must be zero|n|i|p, got {theta:?}"))
        })?;
        let decisions: [bool; 4] = std::array::from_fn(|i| {
            let t = &self.thresholds[i];
            match t.value(choice) {
                None => self.last_stats[i] > 0.0,
                Some(v) => self.last_stats[i] >= v,
            }
        });
        Ok(Verdict {
            positive: aggregate(decisions, &vote),
            rule: vote.label(),
            theta: choice.label().to_string(),
            decisions: decisions.to_vec(),
        })
    }
}
