//! Dataset model: labelled images, partitioning, augmentation and the
//! synthetic compositional generator.

pub mod augment;
pub mod manifest;
pub mod synth;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PartKind;
use crate::rng::{self, tags};
use crate::tensor::Tensor;

/// 8-bit interleaved RGB image. Datasets are held in this form (matching
/// the PNG files on disk exactly) and expanded to `f64` tensors on demand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuf {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl ImageBuf {
    pub fn new(width: usize, height: usize) -> ImageBuf {
        ImageBuf {
            width,
            height,
            pixels: vec![0; width * height * 3],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<ImageBuf> {
        if pixels.len() != width * height * 3 {
            return Err(Error::InvalidParameter(format!(
                "pixel buffer length {} does not match {}x{} RGB",
                pixels.len(),
                width,
                height
            )));
        }
        Ok(ImageBuf {
            width,
            height,
            pixels,
        })
    }

    /// `[3, H, W]` tensor with values in [0, 1].
    pub fn to_tensor(&self) -> Tensor {
        let n = self.width * self.height;
        let mut data = vec![0.0; 3 * n];
        for i in 0..n {
            data[i] = self.pixels[3 * i] as f64 / 255.0;
            data[n + i] = self.pixels[3 * i + 1] as f64 / 255.0;
            data[2 * n + i] = self.pixels[3 * i + 2] as f64 / 255.0;
        }
        Tensor::from_vec(&[3, self.height, self.width], data)
            .expect("buffer sized from dimensions")
    }

    /// Quantize a `[3, H, W]` tensor in [0, 1] back to 8-bit RGB.
    pub fn from_tensor(t: &Tensor) -> Result<ImageBuf> {
        let &[c, h, w] = t.shape() else {
            return Err(Error::ShapeMismatch {
                context: "ImageBuf::from_tensor".into(),
                expected: vec![3],
                actual: t.shape().to_vec(),
            });
        };
        if c != 3 {
            return Err(Error::InvalidParameter(format!(
                "expected 3 channels, got {c}"
            )));
        }
        let n = w * h;
        let d = t.data();
        let mut pixels = vec![0u8; 3 * n];
        for i in 0..n {
            pixels[3 * i] = (d[i].clamp(0.0, 1.0) * 255.0).round() as u8;
            pixels[3 * i + 1] = (d[n + i].clamp(0.0, 1.0) * 255.0).round() as u8;
            pixels[3 * i + 2] = (d[2 * n + i].clamp(0.0, 1.0) * 255.0).round() as u8;
        }
        Ok(ImageBuf {
            width: w,
            height: h,
            pixels,
        })
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let img = image::RgbImage::from_raw(
            self.width as u32,
            self.height as u32,
            self.pixels.clone(),
        )
        .expect("pixel buffer sized from dimensions");
        let mut out = Vec::new();
        img.write_to(&mut std::io::Cursor::new(&mut out), image::ImageFormat::Png)?;
        Ok(out)
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<ImageBuf> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?.to_rgb8();
        Ok(ImageBuf {
            width: img.width() as usize,
            height: img.height() as usize,
            pixels: img.into_raw(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn class_index(self) -> usize {
        match self {
            Label::Positive => 1,
            Label::Negative => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Original,
    Augmented,
}

/// One labelled image. Augmented samples keep the `source_id` of the
/// original they were derived from.
#[derive(Debug, Clone)]
pub struct Sample {
    pub image: ImageBuf,
    pub label: Label,
    pub part: Option<PartKind>,
    pub origin: Origin,
    pub source_id: String,
}

/// Train/validation/test splits of one dataset.
#[derive(Debug, Clone, Default)]
pub struct PartitionedDataset {
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl PartitionedDataset {
    pub fn split(&self, split: Split) -> &[Sample] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn counts(&self, split: Split) -> (usize, usize) {
        let s = self.split(split);
        let pos = s.iter().filter(|x| x.label == Label::Positive).count();
        (pos, s.len() - pos)
    }
}

fn floor_share(n: usize, ratio: f64) -> usize {
    // epsilon guards ratios expressed as inexact fractions
    ((n as f64 * ratio) + 1e-9).floor() as usize
}

/// Split samples into train/validation/test, stratified by label.
///
/// Each label class is shuffled by the seed, then validation and test take
/// their floor shares and the remainder goes to train.
pub fn partition(
    samples: Vec<Sample>,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<PartitionedDataset> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("partition of an empty sample list".into()));
    }
    let (r_train, r_val, r_test) = ratios;
    let sum = r_train + r_val + r_test;
    if (sum - 1.0).abs() > 1e-9 || r_train <= 0.0 || r_val < 0.0 || r_test < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "partition ratios must be nonnegative and sum to 1, got {ratios:?}"
        )));
    }

    let mut out = PartitionedDataset::default();
    for (class_idx, label) in [Label::Positive, Label::Negative].into_iter().enumerate() {
        let mut class: Vec<Sample> = samples.iter().filter(|s| s.label == label).cloned().collect();
        if class.is_empty() {
            continue;
        }
        let mut r = rng::stream(seed, &[tags::PARTITION, class_idx as u64]);
        class.shuffle(&mut r);
        let n = class.len();
        let n_val = floor_share(n, r_val);
        let n_test = floor_share(n, r_test);
        let n_train = n - n_val - n_test;
        for (i, sample) in class.into_iter().enumerate() {
            if i < n_train {
                out.train.push(sample);
            } else if i < n_train + n_val {
                out.validation.push(sample);
            } else {
                out.test.push(sample);
            }
        }
    }
    Ok(out)
}

/// Stratified training-split subsample at the source-group level.
///
/// Samples sharing a `source_id` (an original and its augmented variants)
/// stay or go together, so the augmentation-after-partition invariant is
/// preserved. Validation and test splits pass through untouched.
pub fn subsample_training(
    dataset: &PartitionedDataset,
    fraction: f64,
    seed: u64,
) -> Result<PartitionedDataset> {
    const ALLOWED: [f64; 4] = [0.25, 0.50, 0.75, 1.00];
    if !ALLOWED.iter().any(|&f| (f - fraction).abs() < 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "training fraction must be one of {ALLOWED:?}, got {fraction}"
        )));
    }
    if (fraction - 1.0).abs() < 1e-12 {
        return Ok(dataset.clone());
    }

    let mut train = Vec::new();
    for (class_idx, label) in [Label::Positive, Label::Negative].into_iter().enumerate() {
        // group by source_id preserving first-seen order
        let mut groups: Vec<Vec<&Sample>> = Vec::new();
        let mut index: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
        for s in dataset.train.iter().filter(|s| s.label == label) {
            match index.get(s.source_id.as_str()) {
                Some(&g) => groups[g].push(s),
                None => {
                    index.insert(&s.source_id, groups.len());
                    groups.push(vec![s]);
                }
            }
        }
        if groups.is_empty() {
            continue;
        }
        let keep = floor_share(groups.len(), fraction);
        if keep == 0 {
            return Err(Error::Dataset(format!(
                "fraction {fraction} empties the {} training class",
                if label == Label::Positive { "positive" } else { "negative" }
            )));
        }
        let mut order: Vec<usize> = (0..groups.len()).collect();
        let mut r = rng::stream(seed, &[tags::SUBSAMPLE, class_idx as u64]);
        order.shuffle(&mut r);
        let mut kept: Vec<usize> = order.into_iter().take(keep).collect();
        kept.sort_unstable();
        for g in kept {
            train.extend(groups[g].iter().map(|&s| s.clone()));
        }
    }
    if train.is_empty() {
        return Err(Error::Dataset("subsample produced an empty training split".into()));
    }
    Ok(PartitionedDataset {
        train,
        validation: dataset.validation.clone(),
        test: dataset.test.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn gray_sample(id: &str, label: Label, level: u8) -> Sample {
        let mut img = ImageBuf::new(8, 8);
        img.pixels.iter_mut().for_each(|p| *p = level);
        Sample {
            image: img,
            label,
            part: None,
            origin: Origin::Original,
            source_id: id.to_string(),
        }
    }

    fn pool(pos: usize, neg: usize) -> Vec<Sample> {
        let mut v = Vec::new();
        for i in 0..pos {
            v.push(gray_sample(&format!("p{i}"), Label::Positive, 100));
        }
        for i in 0..neg {
            v.push(gray_sample(&format!("n{i}"), Label::Negative, 50));
        }
        v
    }

    #[test]
    fn paper_partition_counts() {
        let ds = partition(pool(2500, 2500), (0.80, 0.16, 0.04), 1).unwrap();
        assert_eq!(ds.counts(Split::Train), (2000, 2000));
        assert_eq!(ds.counts(Split::Validation), (400, 400));
        assert_eq!(ds.counts(Split::Test), (100, 100));
    }

    #[test]
    fn single_model_positive_partition() {
        let ratios = (3000.0 / 3500.0, 400.0 / 3500.0, 100.0 / 3500.0);
        let ds = partition(pool(3500, 0), ratios, 1).unwrap();
        assert_eq!(ds.counts(Split::Train).0, 3000);
        assert_eq!(ds.counts(Split::Validation).0, 400);
        assert_eq!(ds.counts(Split::Test).0, 100);
    }

    #[test]
    fn partition_is_deterministic() {
        let a = partition(pool(7, 3), (0.6, 0.2, 0.2), 42).unwrap();
        let b = partition(pool(7, 3), (0.6, 0.2, 0.2), 42).unwrap();
        let ids = |s: &[Sample]| s.iter().map(|x| x.source_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a.train), ids(&b.train));
        assert_eq!(ids(&a.validation), ids(&b.validation));
        assert_eq!(ids(&a.test), ids(&b.test));
    }

    #[test]
    fn partition_rejects_empty_and_bad_ratios() {
        assert!(partition(Vec::new(), (0.8, 0.16, 0.04), 1).is_err());
        assert!(partition(pool(4, 4), (0.5, 0.2, 0.2), 1).is_err());
    }

    #[test]
    fn no_source_id_crosses_splits() {
        let ds = partition(pool(50, 50), (0.80, 0.16, 0.04), 9).unwrap();
        let mut seen = std::collections::HashSet::new();
        for s in ds.train.iter().chain(&ds.validation).chain(&ds.test) {
            assert!(seen.insert(s.source_id.clone()), "duplicate {}", s.source_id);
        }
    }

    fn grouped_train(pos_groups: usize, neg_groups: usize, group_size: usize) -> PartitionedDataset {
        let mut train = Vec::new();
        for (label, tag, n) in [
            (Label::Positive, "p", pos_groups),
            (Label::Negative, "n", neg_groups),
        ] {
            for g in 0..n {
                for j in 0..group_size {
                    let mut s = gray_sample(&format!("{tag}{g}"), label, 80);
                    if j > 0 {
                        s.origin = Origin::Augmented;
                    }
                    train.push(s);
                }
            }
        }
        PartitionedDataset {
            train,
            validation: vec![gray_sample("v0", Label::Positive, 10)],
            test: vec![gray_sample("t0", Label::Negative, 20)],
        }
    }

    #[test]
    fn quarter_subsample_counts() {
        // 8000-sample train (1000 groups of 4 per label) -> 2000
        let ds = grouped_train(1000, 1000, 4);
        assert_eq!(ds.train.len(), 8000);
        let sub = subsample_training(&ds, 0.25, 3).unwrap();
        assert_eq!(sub.train.len(), 2000);
        let (pos, neg) = sub.counts(Split::Train);
        assert_eq!((pos, neg), (1000, 1000));
    }

    #[test]
    fn subsample_keeps_groups_whole_and_other_splits_fixed() {
        let ds = grouped_train(8, 8, 4);
        let sub = subsample_training(&ds, 0.5, 11).unwrap();
        let mut per_group: std::collections::HashMap<String, usize> = Default::default();
        for s in &sub.train {
            *per_group.entry(s.source_id.clone()).or_default() += 1;
        }
        assert!(per_group.values().all(|&c| c == 4), "groups must stay whole");
        assert_eq!(sub.validation.len(), ds.validation.len());
        assert_eq!(sub.test.len(), ds.test.len());
    }

    #[test]
    fn full_fraction_is_identity() {
        let ds = grouped_train(5, 5, 4);
        let sub = subsample_training(&ds, 1.0, 3).unwrap();
        let ids = |s: &[Sample]| s.iter().map(|x| x.source_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&ds.train), ids(&sub.train));
    }

    #[test]
    fn subsample_rejects_odd_fractions_and_empty_classes() {
        let ds = grouped_train(2, 2, 1);
        assert!(subsample_training(&ds, 0.33, 1).is_err());
        // 0.25 of 2 groups floors to 0
        assert!(subsample_training(&ds, 0.25, 1).is_err());
    }

    #[test]
    fn image_tensor_round_trip() {
        let mut img = ImageBuf::new(4, 3);
        for (i, p) in img.pixels.iter_mut().enumerate() {
            *p = (i * 7 % 256) as u8;
        }
        let t = img.to_tensor();
        assert_eq!(t.shape(), [3, 3, 4]);
        assert!(t.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let back = ImageBuf::from_tensor(&t).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn png_round_trip() {
        let mut img = ImageBuf::new(5, 5);
        for (i, p) in img.pixels.iter_mut().enumerate() {
            *p = (i * 13 % 256) as u8;
        }
        let bytes = img.to_png_bytes().unwrap();
        let back = ImageBuf::from_png_bytes(&bytes).unwrap();
        assert_eq!(img, back);
    }
}
