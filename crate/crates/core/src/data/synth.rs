//! Procedural compositional dataset generator.
//!
//! Four part glyphs with pairwise distinct shape and texture stand in for
//! the object's component parts:
//!
//! * P1 "barrel": long thin bar with longitudinal stripes
//! * P2 "magazine": slanted ribbed parallelogram
//! * P3 "receiver": checker-textured rectangle
//! * P4 "stock": tapered trapezoid with a brightness gradient
//!
//! Positive scenes compose all four parts in a legal arrangement over
//! clutter; negative scenes are clutter only. Part patch pools contain the
//! glyph centered with jitter (positives) or clutter mixed with other
//! parts' glyphs (negatives), so a part network cannot pass by keying on
//! color alone. Clutter colors deliberately overlap the part palettes.
//!
//! Every pixel is determined by (config, master seed): each image draws
//! from its own derived stream.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PartKind;
use crate::rng::{self, tags, ChaCha8Rng};

use super::{ImageBuf, Label, Origin, Sample};

/// Upper bound on any one pool; beyond this the seed fanout per pool no
/// longer guarantees unique arrangements.
pub const MAX_POOL: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Side of whole-object / whole-negative scenes.
    pub scene_side: usize,
    /// Side of per-part patches.
    pub patch_side: usize,
    /// Positive and negative pool sizes per part network.
    pub part_positives: usize,
    pub part_negatives: usize,
    /// Whole-scene pool sizes.
    pub whole_positives: usize,
    pub whole_negatives: usize,
    /// Share of a part's negative pool occupied by other parts' glyphs.
    pub other_part_share: f64,
    /// Clutter shape count range (inclusive) for scenes and patches.
    pub scene_clutter: (usize, usize),
    pub patch_clutter: (usize, usize),
    pub master_seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scene_side < 48 || self.patch_side < 24 {
            return Err(Error::InvalidParameter(format!(
                "scenes need >= 48px and patches >= 24px to place the part glyphs; got {}/{}",
                self.scene_side, self.patch_side
            )));
        }
        let pools = [
            self.part_positives,
            self.part_negatives,
            self.whole_positives,
            self.whole_negatives,
        ];
        if pools.contains(&0) {
            return Err(Error::InvalidParameter("empty pool in synth config".into()));
        }
        if pools.iter().any(|&n| n > MAX_POOL) {
            return Err(Error::InvalidParameter(format!(
                "pool size exceeds the {MAX_POOL} unique arrangements the generator can produce"
            )));
        }
        if !(0.0..=1.0).contains(&self.other_part_share) {
            return Err(Error::InvalidParameter(
                "other_part_share must be in [0,1]".into(),
            ));
        }
        if self.scene_clutter.0 > self.scene_clutter.1 || self.patch_clutter.0 > self.patch_clutter.1 {
            return Err(Error::InvalidParameter("clutter range reversed".into()));
        }
        Ok(())
    }
}

/// Raw pools for one part network.
#[derive(Debug, Clone, Default)]
pub struct PartPools {
    pub positives: Vec<Sample>,
    pub negatives: Vec<Sample>,
}

/// Everything `synth_generate` produces: per-part patch pools plus
/// whole-scene pools for the single model.
#[derive(Debug, Clone)]
pub struct SynthPools {
    pub parts: Vec<PartPools>,
    pub whole_positives: Vec<Sample>,
    pub whole_negatives: Vec<Sample>,
}

// ---------------------------------------------------------------------
// low-level drawing

type Rgb = [f64; 3];

struct Canvas {
    side: usize,
    px: Vec<f64>,
}

impl Canvas {
    fn new(side: usize) -> Canvas {
        Canvas {
            side,
            px: vec![0.0; side * side * 3],
        }
    }

    fn put(&mut self, x: usize, y: usize, c: Rgb) {
        let o = (y * self.side + x) * 3;
        self.px[o] = c[0];
        self.px[o + 1] = c[1];
        self.px[o + 2] = c[2];
    }

    fn to_image(&self) -> ImageBuf {
        let pixels = self
            .px
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        ImageBuf::from_pixels(self.side, self.side, pixels).expect("canvas is square RGB")
    }

    fn fill_background(&mut self, rng: &mut ChaCha8Rng) {
        let base: Rgb = [
            rng.gen_range(0.55..0.85),
            rng.gen_range(0.55..0.85),
            rng.gen_range(0.55..0.85),
        ];
        for y in 0..self.side {
            for x in 0..self.side {
                let n = rng.gen_range(-0.07..0.07);
                self.put(x, y, [base[0] + n, base[1] + n, base[2] + n]);
            }
        }
    }
}

/// Paint every pixel whose shape-frame coordinates satisfy `inside`.
/// The shape frame is centered on (cx, cy) and rotated by `angle`.
fn paint<F>(canvas: &mut Canvas, cx: f64, cy: f64, angle: f64, reach: f64, inside: F)
where
    F: Fn(f64, f64) -> Option<Rgb>,
{
    let (sin, cos) = angle.sin_cos();
    let side = canvas.side as i64;
    let x0 = ((cx - reach).floor() as i64).max(0);
    let x1 = ((cx + reach).ceil() as i64).min(side - 1);
    let y0 = ((cy - reach).floor() as i64).max(0);
    let y1 = ((cy + reach).ceil() as i64).min(side - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let u = cos * dx + sin * dy;
            let v = -sin * dx + cos * dy;
            if let Some(c) = inside(u, v) {
                canvas.put(x as usize, y as usize, c);
            }
        }
    }
}

fn clutter_color(rng: &mut ChaCha8Rng) -> Rgb {
    if rng.gen::<bool>() {
        // dark muted range overlapping the part palettes, so raw pixel
        // mass cannot separate scenes with parts from pure clutter
        [
            rng.gen_range(0.06..0.45),
            rng.gen_range(0.06..0.45),
            rng.gen_range(0.06..0.45),
        ]
    } else {
        [
            rng.gen_range(0.05..0.95),
            rng.gen_range(0.05..0.95),
            rng.gen_range(0.05..0.95),
        ]
    }
}

/// One clutter element. Besides plain rectangles, ellipses and noise
/// blobs, a share of clutter are decoys that borrow one textural cue from
/// a part glyph (stripes, checkers, gradients) with the wrong geometry, so
/// classifiers must read shape and texture together.
fn draw_clutter(canvas: &mut Canvas, rng: &mut ChaCha8Rng) {
    let side = canvas.side as f64;
    let cx = rng.gen_range(0.0..side);
    let cy = rng.gen_range(0.0..side);
    let w = rng.gen_range(side * 0.06..side * 0.28);
    let h = rng.gen_range(side * 0.06..side * 0.28);
    let angle = rng.gen_range(0.0..std::f64::consts::PI);
    let color = clutter_color(rng);
    let kind = rng.gen_range(0..6u32);
    let reach = (w + h) * 0.75;
    // noise blobs need their own per-pixel stream; prepare outside the closure
    let noise_seed = rng.gen::<u64>();
    paint(canvas, cx, cy, angle, reach, |u, v| match kind {
        0 => (u.abs() < w / 2.0 && v.abs() < h / 2.0).then_some(color),
        1 => {
            let e = (u / (w / 2.0)).powi(2) + (v / (h / 2.0)).powi(2);
            (e <= 1.0).then_some(color)
        }
        2 => {
            if u.abs() < w / 2.0 && v.abs() < h / 2.0 {
                // hash-based speckle, stable per pixel
                let k = rng::derive_seed(noise_seed, &[u.round() as i64 as u64, v.round() as i64 as u64]);
                let t = (k % 1000) as f64 / 1000.0;
                Some([
                    (color[0] + 0.3 * (t - 0.5)).clamp(0.0, 1.0),
                    (color[1] + 0.3 * (t - 0.5)).clamp(0.0, 1.0),
                    (color[2] + 0.3 * (t - 0.5)).clamp(0.0, 1.0),
                ])
            } else {
                None
            }
        }
        3 => {
            // decoy: stripes across the short axis of a squat box
            if u.abs() < w / 2.0 && v.abs() < h / 2.0 {
                let band = ((u + w / 2.0) / (w / 5.0)) as i64;
                Some(if band % 2 == 0 {
                    color
                } else {
                    [color[0] * 0.55, color[1] * 0.55, color[2] * 0.55]
                })
            } else {
                None
            }
        }
        4 => {
            // decoy: coarse checkers on an ellipse
            let e = (u / (w / 2.0)).powi(2) + (v / (h / 2.0)).powi(2);
            if e <= 1.0 {
                let cell = (w + h) / 4.0;
                let iu = ((u + w) / cell) as i64;
                let iv = ((v + h) / cell) as i64;
                Some(if (iu + iv) % 2 == 0 {
                    color
                } else {
                    [color[0] * 0.5, color[1] * 0.5, color[2] * 0.5]
                })
            } else {
                None
            }
        }
        _ => {
            // decoy: gradient-filled box
            if u.abs() < w / 2.0 && v.abs() < h / 2.0 {
                let t = (u + w / 2.0) / w;
                let g = 0.6 + 0.8 * t;
                Some([
                    (color[0] * g).clamp(0.0, 1.0),
                    (color[1] * g).clamp(0.0, 1.0),
                    (color[2] * g).clamp(0.0, 1.0),
                ])
            } else {
                None
            }
        }
    });
}

/// One element of a fake chain: a squat box or ellipse in part-palette
/// darkness, without any part's texture signature.
fn draw_chain_link(canvas: &mut Canvas, cx: f64, cy: f64, size: f64, angle: f64, rng: &mut ChaCha8Rng) {
    let color: Rgb = [
        rng.gen_range(0.08..0.40),
        rng.gen_range(0.08..0.40),
        rng.gen_range(0.08..0.40),
    ];
    let w = size;
    let h = size * rng.gen_range(0.3..0.55);
    let ellipse = rng.gen::<bool>();
    paint(canvas, cx, cy, angle, size, move |u, v| {
        let inside = if ellipse {
            (u / (w / 2.0)).powi(2) + (v / (h / 2.0)).powi(2) <= 1.0
        } else {
            u.abs() < w / 2.0 && v.abs() < h / 2.0
        };
        inside.then_some(color)
    });
}

/// Draw one part glyph with its characteristic shape and texture.
/// `size` is the glyph's long extent in pixels.
pub fn draw_part(
    canvas: &mut Canvas2,
    part: PartKind,
    cx: f64,
    cy: f64,
    size: f64,
    angle: f64,
    rng: &mut ChaCha8Rng,
) {
    let canvas = &mut canvas.0;
    match part {
        PartKind::Barrel => {
            // long thin striped bar with a muzzle block at the tip
            let base: Rgb = [
                rng.gen_range(0.10..0.22),
                rng.gen_range(0.12..0.26),
                rng.gen_range(0.16..0.32),
            ];
            let light = [base[0] + 0.18, base[1] + 0.18, base[2] + 0.18];
            let w = size;
            let h = size * rng.gen_range(0.13..0.18);
            let stripe = h / 3.0;
            paint(canvas, cx, cy, angle, w * 0.75, |u, v| {
                if u.abs() < w / 2.0 && v.abs() < h / 2.0 {
                    // muzzle block at the right tip
                    if u > w * 0.38 {
                        return Some([base[0] * 0.5, base[1] * 0.5, base[2] * 0.5]);
                    }
                    let band = ((v + h / 2.0) / stripe) as i64;
                    Some(if band == 1 { light } else { base })
                } else {
                    None
                }
            });
        }
        PartKind::Magazine => {
            // slanted parallelogram with vertical ribs and a dark border
            let base: Rgb = [
                rng.gen_range(0.20..0.34),
                rng.gen_range(0.22..0.36),
                rng.gen_range(0.10..0.20),
            ];
            let rib = [base[0] + 0.16, base[1] + 0.16, base[2] + 0.16];
            let border = [base[0] * 0.4, base[1] * 0.4, base[2] * 0.4];
            let h = size;
            let w = size * rng.gen_range(0.42..0.55);
            let shear = rng.gen_range(0.35..0.5);
            paint(canvas, cx, cy, angle, h, |u, v| {
                let su = u - shear * v; // shear the x-extent with height
                if su.abs() < w / 2.0 && v.abs() < h / 2.0 {
                    if su.abs() > w * 0.38 || v.abs() > h * 0.42 {
                        return Some(border);
                    }
                    let band = ((v + h / 2.0) / (h / 4.0)) as i64;
                    Some(if band % 2 == 0 { rib } else { base })
                } else {
                    None
                }
            });
        }
        PartKind::Receiver => {
            // checker-textured rectangle
            let a: Rgb = [
                rng.gen_range(0.30..0.42),
                rng.gen_range(0.30..0.42),
                rng.gen_range(0.30..0.42),
            ];
            let b = [a[0] * 0.45, a[1] * 0.45, a[2] * 0.45];
            let w = size;
            let h = size * rng.gen_range(0.40..0.55);
            let cell = w / 5.0;
            paint(canvas, cx, cy, angle, w * 0.75, |u, v| {
                if u.abs() < w / 2.0 && v.abs() < h / 2.0 {
                    let iu = ((u + w / 2.0) / cell) as i64;
                    let iv = ((v + h / 2.0) / cell) as i64;
                    Some(if (iu + iv) % 2 == 0 { a } else { b })
                } else {
                    None
                }
            });
        }
        PartKind::Stock => {
            // tapered trapezoid with a lengthwise brightness gradient
            let base: Rgb = [
                rng.gen_range(0.36..0.50),
                rng.gen_range(0.20..0.30),
                rng.gen_range(0.08..0.16),
            ];
            let w = size;
            let h = size * rng.gen_range(0.38..0.5);
            paint(canvas, cx, cy, angle, w * 0.75, |u, v| {
                if u.abs() > w / 2.0 {
                    return None;
                }
                // half-height tapers from full at the left to 40% at the right
                let t = (u + w / 2.0) / w;
                let half = h / 2.0 * (1.0 - 0.6 * t);
                if v.abs() < half {
                    let g = 0.7 + 0.5 * t;
                    Some([
                        (base[0] * g).min(1.0),
                        (base[1] * g).min(1.0),
                        (base[2] * g).min(1.0),
                    ])
                } else {
                    None
                }
            });
        }
    }
}

/// Newtype so the canvas type stays private while `draw_part` is reusable
/// by the interactive demo.
pub struct Canvas2(Canvas);

impl Canvas2 {
    pub fn new(side: usize) -> Canvas2 {
        Canvas2(Canvas::new(side))
    }

    pub fn background(&mut self, rng: &mut ChaCha8Rng) {
        self.0.fill_background(rng);
    }

    pub fn clutter(&mut self, count: usize, rng: &mut ChaCha8Rng) {
        for _ in 0..count {
            draw_clutter(&mut self.0, rng);
        }
    }

    pub fn into_image(self) -> ImageBuf {
        self.0.to_image()
    }

    /// Global exposure jitter, drawn independently of the label.
    pub fn expose(&mut self, factor: f64) {
        for v in &mut self.0.px {
            *v *= factor;
        }
    }
}

// ---------------------------------------------------------------------
// sample renderers

/// Whole scene: all four parts in a legal arrangement when positive,
/// pure clutter when negative.
pub fn render_scene(
    side: usize,
    positive: bool,
    clutter: (usize, usize),
    rng: &mut ChaCha8Rng,
) -> ImageBuf {
    let mut canvas = Canvas2::new(side);
    canvas.background(rng);
    let n_clutter = rng.gen_range(clutter.0..=clutter.1);
    canvas.clutter(n_clutter, rng);

    if !positive && rng.gen::<f64>() < 0.5 {
        // fake chain: clutter shapes laid out like the object silhouette,
        // so an elongated dark cluster alone never settles the decision
        let s = side as f64;
        let unit = s * rng.gen_range(0.16..0.30);
        let cx = s * 0.5 + rng.gen_range(-0.12..0.12) * s;
        let cy = s * 0.5 + rng.gen_range(-0.12..0.12) * s;
        let tilt: f64 = rng.gen_range(-0.3..0.3);
        let (sin, cos) = tilt.sin_cos();
        for ox in [-0.85, 0.0, 0.82] {
            let px = cx + cos * ox * unit;
            let py = cy + sin * ox * unit;
            let jx = rng.gen_range(-0.06..0.06) * unit;
            let jy = rng.gen_range(-0.06..0.06) * unit;
            draw_chain_link(&mut canvas.0, px + jx, py + jy, unit * 0.9, tilt, rng);
        }
    }

    if positive {
        let s = side as f64;
        // object frame: receiver center, barrel right, magazine below,
        // stock left; mirrored half the time. The wide scale range keeps
        // the whole-image task from collapsing to texture spotting.
        let unit = s * rng.gen_range(0.16..0.30);
        let cx = s * 0.5 + rng.gen_range(-0.12..0.12) * s;
        let cy = s * 0.5 + rng.gen_range(-0.12..0.12) * s;
        let flip = if rng.gen::<bool>() { -1.0 } else { 1.0 };
        let tilt: f64 = rng.gen_range(-0.3..0.3);
        let jitter = |rng: &mut ChaCha8Rng| rng.gen_range(-0.08..0.08) * unit;

        let place = [
            (PartKind::Stock, -0.85, -0.02, 0.85),
            (PartKind::Receiver, 0.0, 0.0, 0.9),
            (PartKind::Magazine, 0.12, 0.42, 0.55),
            (PartKind::Barrel, 0.82, -0.05, 1.15),
        ];
        for (part, ox, oy, scale) in place {
            let (sin, cos) = tilt.sin_cos();
            let rx = flip * ox * unit;
            let ry = oy * unit;
            let px = cx + cos * rx - sin * ry + jitter(rng);
            let py = cy + sin * rx + cos * ry + jitter(rng);
            let angle = tilt + rng.gen_range(-0.1..0.1);
            // mirroring flips the glyph orientation too
            let angle = if flip < 0.0 {
                std::f64::consts::PI - angle
            } else {
                angle
            };
            draw_part(&mut canvas, part, px, py, unit * scale, angle, rng);
        }
        // foreground clutter can partially occlude the object
        if rng.gen::<f64>() < 0.4 {
            canvas.clutter(1, rng);
        }
    }
    canvas.expose(rng.gen_range(0.7..1.15));
    canvas.into_image()
}

/// Patch with one part glyph centered (with jitter) over clutter, or a
/// negative patch: clutter only, or a different part's glyph.
pub fn render_part_patch(
    side: usize,
    glyph: Option<PartKind>,
    clutter: (usize, usize),
    rng: &mut ChaCha8Rng,
) -> ImageBuf {
    let mut canvas = Canvas2::new(side);
    canvas.background(rng);
    let n_clutter = rng.gen_range(clutter.0..=clutter.1);
    canvas.clutter(n_clutter, rng);
    if let Some(part) = glyph {
        let s = side as f64;
        let size = s * rng.gen_range(0.45..0.8);
        let cx = s * 0.5 + rng.gen_range(-0.12..0.12) * s;
        let cy = s * 0.5 + rng.gen_range(-0.12..0.12) * s;
        let angle = rng.gen_range(-0.35..0.35);
        draw_part(&mut canvas, part, cx, cy, size, angle, rng);
        // occasional partial occlusion by a late clutter shape
        if rng.gen::<f64>() < 0.2 {
            canvas.clutter(1, rng);
        }
    }
    canvas.expose(rng.gen_range(0.7..1.15));
    canvas.into_image()
}

// ---------------------------------------------------------------------
// pool assembly

fn pool_stream(cfg: &SynthConfig, pool: u64, index: usize) -> ChaCha8Rng {
    rng::stream(cfg.master_seed, &[tags::SYNTH, pool, index as u64])
}

/// Generate all raw pools. Deterministic in (config, master seed); images
/// are independent so regenerating any subset yields identical pixels.
pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthPools> {
    cfg.validate()?;

    let mut parts = Vec::with_capacity(4);
    for part in PartKind::ALL {
        let pid = part.index() as u64;
        let mut pools = PartPools::default();
        for i in 0..cfg.part_positives {
            let mut r = pool_stream(cfg, 10 + pid, i);
            pools.positives.push(Sample {
                image: render_part_patch(cfg.patch_side, Some(part), cfg.patch_clutter, &mut r),
                label: Label::Positive,
                part: Some(part),
                origin: Origin::Original,
                source_id: format!("{}-pos-{i:06}", part.synthetic_name()),
            });
        }
        // a fixed share of negatives shows other parts' glyphs so color or
        // texture alone cannot separate the classes
        let n_other = ((cfg.part_negatives as f64) * cfg.other_part_share).round() as usize;
        let others: Vec<PartKind> = PartKind::ALL.into_iter().filter(|&p| p != part).collect();
        for i in 0..cfg.part_negatives {
            let mut r = pool_stream(cfg, 20 + pid, i);
            let glyph = if i < n_other {
                Some(others[i % others.len()])
            } else {
                None
            };
            pools.negatives.push(Sample {
                image: render_part_patch(cfg.patch_side, glyph, cfg.patch_clutter, &mut r),
                label: Label::Negative,
                part: Some(part),
                origin: Origin::Original,
                source_id: format!("{}-neg-{i:06}", part.synthetic_name()),
            });
        }
        parts.push(pools);
    }

    let mut whole_positives = Vec::with_capacity(cfg.whole_positives);
    for i in 0..cfg.whole_positives {
        let mut r = pool_stream(cfg, 30, i);
        whole_positives.push(Sample {
            image: render_scene(cfg.scene_side, true, cfg.scene_clutter, &mut r),
            label: Label::Positive,
            part: None,
            origin: Origin::Original,
            source_id: format!("whole-pos-{i:06}"),
        });
    }
    let mut whole_negatives = Vec::with_capacity(cfg.whole_negatives);
    for i in 0..cfg.whole_negatives {
        let mut r = pool_stream(cfg, 31, i);
        whole_negatives.push(Sample {
            image: render_scene(cfg.scene_side, false, cfg.scene_clutter, &mut r),
            label: Label::Negative,
            part: None,
            origin: Origin::Original,
            source_id: format!("whole-neg-{i:06}"),
        });
    }

    Ok(SynthPools {
        parts,
        whole_positives,
        whole_negatives,
    })
}
