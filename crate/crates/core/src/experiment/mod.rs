//! Experiment harness: dataset bundle assembly, the training loop with
//! early stopping, evaluation, and the four reference simulations.

pub mod report;
pub mod sims;

use serde::{Deserialize, Serialize};

use crate::data::augment::augment;
use crate::data::synth::{synth_generate, SynthConfig};
use crate::data::{partition, Label, PartitionedDataset, Sample};
use crate::error::{Error, Result};
use crate::model::PartKind;
use crate::nn::sgd::SgdMomentum;
use crate::nn::{gradcheck, Gradients, Mode, Network};
use crate::patch::{extract_rescale, Rect};
use crate::profile::{Profile, TrainConfig};
use crate::rng::{self, tags};
use crate::tensor::Tensor;

/// What a network is trained to detect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Part(PartKind),
    Whole,
}

impl Target {
    pub const ALL: [Target; 5] = [
        Target::Part(PartKind::Barrel),
        Target::Part(PartKind::Magazine),
        Target::Part(PartKind::Receiver),
        Target::Part(PartKind::Stock),
        Target::Whole,
    ];

    pub fn label(&self) -> String {
        match self {
            Target::Part(p) => format!("{}s", p.name()),
            Target::Whole => "full_object".into(),
        }
    }

    pub fn index(&self) -> usize {
        match self {
            Target::Part(p) => p.index(),
            Target::Whole => 4,
        }
    }

    pub fn parse(s: &str) -> Option<Target> {
        if s.eq_ignore_ascii_case("single")
            || s.eq_ignore_ascii_case("full_object")
            || s.eq_ignore_ascii_case("whole")
        {
            return Some(Target::Whole);
        }
        PartKind::parse(s).map(Target::Part)
    }
}

/// The five datasets one experiment round consumes: one per part network
/// plus the whole-image dataset for the single model.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub parts: Vec<PartitionedDataset>,
    pub single: PartitionedDataset,
}

impl DatasetBundle {
    pub fn dataset_for(&self, target: Target) -> &PartitionedDataset {
        match target {
            Target::Part(p) => &self.parts[p.index()],
            Target::Whole => &self.single,
        }
    }

    pub fn dataset_names() -> [&'static str; 5] {
        ["barrel", "magazine", "receiver", "stock", "single"]
    }
}

/// Augment a training split in place until each label class reaches
/// `target` samples. Originals receive variants round-robin so the counts
/// land exactly; labels in `labels` only.
pub fn augment_train_to_target(
    train: &mut Vec<Sample>,
    target: usize,
    labels: &[Label],
    seed: u64,
) -> Result<()> {
    let originals = std::mem::take(train);
    // per-label original counts decide how many variants each one needs
    let mut counts = std::collections::HashMap::new();
    for s in &originals {
        *counts.entry(s.label).or_insert(0usize) += 1;
    }
    let mut expanded = Vec::new();
    let mut label_seen = std::collections::HashMap::new();
    for (idx, sample) in originals.into_iter().enumerate() {
        let augment_this = labels.contains(&sample.label);
        expanded.push(sample);
        let sample = expanded.last().unwrap();
        if !augment_this {
            continue;
        }
        let n = counts[&sample.label];
        if target < n {
            return Err(Error::InvalidParameter(format!(
                "augmentation target {target} below the {n} originals per label"
            )));
        }
        let extra = target - n;
        let base = extra / n;
        let remainder = extra % n;
        let seen = label_seen.entry(sample.label).or_insert(0usize);
        let k = base + usize::from(*seen < remainder);
        *seen += 1;
        let variants = augment(sample, k, rng::derive_seed(seed, &[tags::AUGMENT, idx as u64]))?;
        expanded.extend(variants);
    }
    *train = expanded;
    Ok(())
}

/// Generate pools and assemble the five partitioned, augmented datasets.
pub fn build_bundle(profile: &Profile, seed: u64) -> Result<DatasetBundle> {
    let synth_cfg = SynthConfig {
        master_seed: rng::derive_seed(seed, &[tags::SYNTH]),
        ..profile.synth.clone()
    };
    let pools = synth_generate(&synth_cfg)?;

    let mut parts = Vec::with_capacity(4);
    for (i, pool) in pools.parts.into_iter().enumerate() {
        let mut samples = pool.positives;
        samples.extend(pool.negatives);
        let mut ds = partition(
            samples,
            profile.part_ratios,
            rng::derive_seed(seed, &[tags::PARTITION, i as u64]),
        )?;
        augment_train_to_target(
            &mut ds.train,
            profile.train_target_per_label,
            &[Label::Positive, Label::Negative],
            rng::derive_seed(seed, &[tags::AUGMENT, i as u64]),
        )?;
        parts.push(ds);
    }

    // whole-image dataset: positives and negatives are partitioned with
    // their own ratios, then merged; only positives are augmented
    let pos = partition(
        pools.whole_positives,
        profile.single_pos_ratios,
        rng::derive_seed(seed, &[tags::PARTITION, 10]),
    )?;
    let neg = partition(
        pools.whole_negatives,
        profile.single_neg_ratios,
        rng::derive_seed(seed, &[tags::PARTITION, 11]),
    )?;
    let mut single = PartitionedDataset {
        train: pos.train,
        validation: pos.validation,
        test: pos.test,
    };
    augment_train_to_target(
        &mut single.train,
        profile.train_target_per_label,
        &[Label::Positive],
        rng::derive_seed(seed, &[tags::AUGMENT, 10]),
    )?;
    single.train.extend(neg.train);
    single.validation.extend(neg.validation);
    single.test.extend(neg.test);

    Ok(DatasetBundle { parts, single })
}

/// Convert a sample to the network's input tensor, rescaling whole scenes
/// down to the input side when they are larger.
pub fn sample_input(sample: &Sample, input_side: usize) -> Result<Tensor> {
    let t = sample.image.to_tensor();
    if sample.image.width == input_side && sample.image.height == input_side {
        return Ok(t);
    }
    let side = sample.image.width.min(sample.image.height);
    extract_rescale(&t, Rect { x: 0, y: 0, side }, input_side)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochStats {
    pub train_loss: f64,
    pub val_accuracy: f64,
}

/// Outcome of one training run; `network` holds the best-epoch weights.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub target: Target,
    pub arch_label: String,
    pub history: Vec<EpochStats>,
    /// 1-based epoch whose validation accuracy was highest (earliest on ties).
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub network: Network,
}

/// Fraction of correct classifications over a sample list.
pub fn accuracy_on(network: &Network, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("accuracy over an empty split".into()));
    }
    let mut correct = 0usize;
    for s in samples {
        let x = sample_input(s, network.input_side)?;
        if network.classify(&x)? == s.label.class_index() {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// Per-class test rates. Accuracy is the balanced mean (TP+TN)/2.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvalReport {
    pub positives: usize,
    pub negatives: usize,
    pub true_positives: usize,
    pub true_negatives: usize,
    pub tp_rate: f64,
    pub tn_rate: f64,
    pub accuracy: f64,
}

impl EvalReport {
    pub fn from_counts(
        positives: usize,
        negatives: usize,
        true_positives: usize,
        true_negatives: usize,
    ) -> EvalReport {
        let tp_rate = true_positives as f64 / positives as f64;
        let tn_rate = true_negatives as f64 / negatives as f64;
        EvalReport {
            positives,
            negatives,
            true_positives,
            true_negatives,
            tp_rate,
            tn_rate,
            accuracy: (tp_rate + tn_rate) / 2.0,
        }
    }
}

/// Evaluate a classifier on a labelled split.
pub fn evaluate(network: &Network, samples: &[Sample]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("evaluation over an empty split".into()));
    }
    let (mut pos, mut neg, mut tp, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for s in samples {
        let x = sample_input(s, network.input_side)?;
        let decided_positive = network.classify(&x)? == 1;
        match s.label {
            Label::Positive => {
                pos += 1;
                tp += usize::from(decided_positive);
            }
            Label::Negative => {
                neg += 1;
                tn += usize::from(!decided_positive);
            }
        }
    }
    if pos == 0 || neg == 0 {
        return Err(Error::EmptyInput(
            "evaluation split is missing one of the classes".into(),
        ));
    }
    Ok(EvalReport::from_counts(pos, neg, tp, tn))
}

/// Train for a fixed number of epochs, recording validation accuracy after
/// each, and return the weights from the best epoch (not the last).
pub fn train_with_early_stopping(
    mut network: Network,
    target: Target,
    dataset: &PartitionedDataset,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainRun> {
    if dataset.train.is_empty() || dataset.validation.is_empty() {
        return Err(Error::EmptyInput(
            "training needs non-empty train and validation splits".into(),
        ));
    }
    let arch_label = format!("{}x{}", network.conv_blocks, network.dense_layers);
    let mut optimizer = SgdMomentum::new(&network, cfg.learning_rate, cfg.momentum);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best_epoch = 0usize;
    let mut best_acc = f64::NEG_INFINITY;
    let mut best_net = network.clone();

    let mut order: Vec<usize> = (0..dataset.train.len()).collect();
    for epoch in 1..=cfg.epochs {
        use rand::seq::SliceRandom;
        let mut shuffle_rng = rng::stream(seed, &[tags::SHUFFLE, epoch as u64]);
        order.shuffle(&mut shuffle_rng);
        let mut dropout_rng = rng::stream(seed, &[tags::DROPOUT, epoch as u64]);

        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = Gradients::zeros_like(&network);
            for &idx in batch {
                let sample = &dataset.train[idx];
                let x = sample_input(sample, network.input_side)?;
                let (probs, caches) =
                    network.forward_cached(&x, Mode::Train, Some(&mut dropout_rng))?;
                let label = sample.label.class_index();
                let loss = crate::nn::loss::cross_entropy(&probs, label)?;
                if !loss.is_finite() {
                    return Err(Error::TrainingAborted(format!(
                        "non-finite loss for {} at epoch {epoch} after {} recorded epochs",
                        target.label(),
                        history.len()
                    )));
                }
                epoch_loss += loss;
                grads.add_assign(&network.backward(&caches, label)?);
            }
            grads.scale(1.0 / batch.len() as f64);
            optimizer.step(&mut network, &grads).map_err(|e| {
                Error::TrainingAborted(format!(
                    "{e} for {} at epoch {epoch} after {} recorded epochs",
                    target.label(),
                    history.len()
                ))
            })?;
        }

        let val_accuracy = accuracy_on(&network, &dataset.validation)?;
        history.push(EpochStats {
            train_loss: epoch_loss / dataset.train.len() as f64,
            val_accuracy,
        });
        if val_accuracy > best_acc {
            best_acc = val_accuracy;
            best_epoch = epoch;
            best_net = network.clone();
        }
    }

    Ok(TrainRun {
        target,
        arch_label,
        history,
        best_epoch,
        best_val_accuracy: best_acc,
        network: best_net,
    })
}

/// Gradient check of a freshly built micro network, used by the
/// verification suite and the CLI self-test.
pub fn gradcheck_network(
    network: &mut Network,
    input: &Tensor,
    epsilon: f64,
    tolerance: f64,
) -> Result<gradcheck::GradCheckReport> {
    gradcheck::gradient_check(network, input, 1, epsilon, tolerance)
}
