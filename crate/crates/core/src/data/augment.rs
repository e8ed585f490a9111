//! Training-split augmentation: random rotation, offset and scale.
//!
//! Each augmented sample applies one independently drawn affine transform;
//! out-of-frame reads replicate the nearest edge pixel. Applied after
//! partitioning, train split only, so a sample never appears transformed
//! in one split and untransformed in another.

use rand::Rng;

use crate::error::Result;
use crate::rng::{self, tags};

use super::{ImageBuf, Origin, Sample};

/// Rotation range in degrees.
pub const ROTATION_DEG: f64 = 25.0;
/// Translation range as a fraction of the image side.
pub const OFFSET_FRAC: f64 = 0.10;
/// Scale factor range.
pub const SCALE_RANGE: (f64, f64) = (0.85, 1.15);

/// Affine parameters of one augmentation draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub rotation_deg: f64,
    /// Offset in pixels, applied after rotation and scaling.
    pub dx: f64,
    pub dy: f64,
    pub scale: f64,
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        rotation_deg: 0.0,
        dx: 0.0,
        dy: 0.0,
        scale: 1.0,
    };

    pub fn sample(side: usize, rng: &mut rng::ChaCha8Rng) -> Transform {
        let max_off = side as f64 * OFFSET_FRAC;
        Transform {
            rotation_deg: rng.gen_range(-ROTATION_DEG..=ROTATION_DEG),
            dx: rng.gen_range(-max_off..=max_off),
            dy: rng.gen_range(-max_off..=max_off),
            scale: rng.gen_range(SCALE_RANGE.0..=SCALE_RANGE.1),
        }
    }
}

/// Apply `t` to an image around its center, bilinear sampling with edge
/// replication. The identity transform reproduces the input exactly.
pub fn apply_transform(image: &ImageBuf, t: &Transform) -> ImageBuf {
    if *t == Transform::IDENTITY {
        return image.clone();
    }
    let w = image.width;
    let h = image.height;
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let theta = t.rotation_deg.to_radians();
    let (sin, cos) = theta.sin_cos();

    let mut out = ImageBuf::new(w, h);
    for y in 0..h {
        for x in 0..w {
            // inverse map: undo offset, then rotation and scale about center
            let ox = x as f64 - cx - t.dx;
            let oy = y as f64 - cy - t.dy;
            let sx = (cos * ox + sin * oy) / t.scale + cx;
            let sy = (-sin * ox + cos * oy) / t.scale + cy;
            let px = sample_bilinear(image, sx, sy);
            let o = (y * w + x) * 3;
            out.pixels[o..o + 3].copy_from_slice(&px);
        }
    }
    out
}

fn sample_bilinear(image: &ImageBuf, x: f64, y: f64) -> [u8; 3] {
    let w = image.width;
    let h = image.height;
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let mut out = [0u8; 3];
    for (ch, byte) in out.iter_mut().enumerate() {
        let at = |yy: usize, xx: usize| image.pixels[(yy * w + xx) * 3 + ch] as f64;
        let v = (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x1))
            + fy * ((1.0 - fx) * at(y1, x0) + fx * at(y1, x1));
        *byte = v.round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Produce `k` independently transformed variants of an original sample.
/// Label, part and source id are preserved; origin flips to augmented.
pub fn augment(sample: &Sample, k: usize, seed: u64) -> Result<Vec<Sample>> {
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let mut r = rng::stream(seed, &[tags::AUGMENT, j as u64]);
        let t = Transform::sample(sample.image.width.max(sample.image.height), &mut r);
        out.push(Sample {
            image: apply_transform(&sample.image, &t),
            label: sample.label,
            part: sample.part,
            origin: Origin::Augmented,
            source_id: sample.source_id.clone(),
        });
    }
    Ok(out)
}

/// Expand a training split in place: each original gains `k` augmented
/// variants placed directly after it. Per-sample seeds derive from the
/// sample index so the result is order-stable and reproducible.
pub fn augment_training_split(train: &mut Vec<Sample>, k: usize, seed: u64) -> Result<()> {
    if k == 0 {
        return Ok(());
    }
    let originals = std::mem::take(train);
    let mut expanded = Vec::with_capacity(originals.len() * (k + 1));
    for (idx, sample) in originals.into_iter().enumerate() {
        let variants = augment(&sample, k, rng::derive_seed(seed, &[idx as u64]))?;
        expanded.push(sample);
        expanded.extend(variants);
    }
    *train = expanded;
    Ok(())
}
