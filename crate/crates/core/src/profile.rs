//! Scale profiles.
//!
//! The paper-scale profile mirrors the reference protocol exactly
//! (200px patches, 2500-image pools, 16000-sample training sets). The desk
//! profile keeps every protocol shape — five architectures, 25 networks,
//! the same partition-then-augment pipeline — at sizes that train on a
//! laptop CPU in minutes.

use serde::{Deserialize, Serialize};

use crate::data::synth::SynthConfig;
use crate::model::BuildPlan;
use crate::patch::WindowSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    pub plan: BuildPlan,
    /// Pool sizes and scene geometry; `master_seed` is overridden per run.
    pub synth: SynthConfig,
    pub window: WindowSpec,
    /// Partition ratios (train, validation, test).
    pub part_ratios: (f64, f64, f64),
    pub single_pos_ratios: (f64, f64, f64),
    pub single_neg_ratios: (f64, f64, f64),
    /// Post-augmentation training-set size per label. Part datasets
    /// augment both labels to this target, the single model only its
    /// positives (its negatives arrive at full size and are never
    /// augmented).
    pub train_target_per_label: usize,
    pub train: TrainConfig,
}

impl Profile {
    pub fn desk() -> Profile {
        Profile {
            name: "desk".into(),
            plan: BuildPlan::desk(),
            synth: SynthConfig {
                scene_side: 128,
                patch_side: 64,
                part_positives: 500,
                part_negatives: 500,
                whole_positives: 500,
                whole_negatives: 1100,
                other_part_share: 0.25,
                scene_clutter: (4, 9),
                patch_clutter: (1, 4),
                master_seed: 0,
            },
            window: WindowSpec {
                window_ratio: 0.5,
                step_ratio: 0.125,
            },
            part_ratios: (0.80, 0.16, 0.04),
            single_pos_ratios: (0.80, 0.16, 0.04),
            // negatives: 1100 -> 1000 train / 80 validation / 20 test
            single_neg_ratios: (10.0 / 11.0, 8.0 / 110.0, 2.0 / 110.0),
            train_target_per_label: 1000,
            train: TrainConfig {
                epochs: 15,
                batch_size: 32,
                learning_rate: 0.01,
                momentum: 0.9,
            },
        }
    }

    pub fn paper() -> Profile {
        Profile {
            name: "paper".into(),
            plan: BuildPlan::paper(),
            synth: SynthConfig {
                scene_side: 400,
                patch_side: 200,
                part_positives: 2500,
                part_negatives: 2500,
                whole_positives: 3500,
                whole_negatives: 8500,
                other_part_share: 0.25,
                scene_clutter: (4, 9),
                patch_clutter: (1, 4),
                master_seed: 0,
            },
            window: WindowSpec {
                window_ratio: 0.5,
                step_ratio: 0.125,
            },
            part_ratios: (0.80, 0.16, 0.04),
            // 3500 -> 3000 / 400 / 100
            single_pos_ratios: (30.0 / 35.0, 4.0 / 35.0, 1.0 / 35.0),
            // 8500 -> 8000 / 400 / 100
            single_neg_ratios: (80.0 / 85.0, 4.0 / 85.0, 1.0 / 85.0),
            train_target_per_label: 8000,
            train: TrainConfig {
                epochs: 15,
                batch_size: 32,
                learning_rate: 0.01,
                momentum: 0.9,
            },
        }
    }

    pub fn by_name(name: &str) -> Option<Profile> {
        match name {
            "desk" => Some(Profile::desk()),
            "paper" => Some(Profile::paper()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_profile_matches_reference_counts() {
        let p = Profile::paper();
        // 2500 * 0.8 = 2000 train originals, x4 after augmentation = 8000
        assert_eq!(p.synth.part_positives, 2500);
        assert_eq!(p.train_target_per_label, 8000);
        assert_eq!(p.plan.input_side, 200);
        assert_eq!(p.plan.early_filters, 32);
        assert_eq!(p.plan.late_filters, 64);
    }

    #[test]
    fn desk_profile_is_consistent() {
        let p = Profile::desk();
        // window covers half the scene and lands exactly on the patch side
        let side = (p.synth.scene_side as f64 * p.window.window_ratio).round() as usize;
        assert_eq!(side, p.synth.patch_side);
        assert_eq!(p.synth.patch_side, p.plan.input_side);
        // 500 * 0.8 = 400 originals, augmented up to the training target
        assert_eq!(p.train_target_per_label, 1000);
    }

    #[test]
    fn profiles_resolve_by_name() {
        assert!(Profile::by_name("desk").is_some());
        assert!(Profile::by_name("paper").is_some());
        assert!(Profile::by_name("gpu").is_none());
    }
}
