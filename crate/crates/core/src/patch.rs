//! Deterministic sliding-window patch extraction and rescaling.
//!
//! Window size and stride are set as ratios so the grid adapts to any
//! image: the window side is a fraction of the shorter image side (square
//! windows, no distortion before rescale), the stride a fraction of the
//! window side. A final flush window per axis guarantees border pixels are
//! always covered.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// Window side as a fraction of `min(width, height)`.
    pub window_ratio: f64,
    /// Stride as a fraction of the window side.
    pub step_ratio: f64,
}

impl WindowSpec {
    pub fn new(window_ratio: f64, step_ratio: f64) -> Result<WindowSpec> {
        if !(window_ratio > 0.0 && window_ratio <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "window_ratio must be in (0,1], got {window_ratio}"
            )));
        }
        if !(step_ratio > 0.0 && step_ratio <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "step_ratio must be in (0,1], got {step_ratio}"
            )));
        }
        Ok(WindowSpec {
            window_ratio,
            step_ratio,
        })
    }
}

impl Default for WindowSpec {
    /// Half-of-image windows with an eighth-of-window stride: dense overlap,
    /// per-pixel coverage counts in the tens.
    fn default() -> WindowSpec {
        WindowSpec {
            window_ratio: 0.5,
            step_ratio: 0.125,
        }
    }
}

/// A square window in source-image pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub side: usize,
}

/// Ordered list of windows over one image, row-major by (y, x).
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    pub rects: Vec<Rect>,
    pub width: usize,
    pub height: usize,
    pub side: usize,
    pub stride: usize,
}

fn axis_positions(dim: usize, side: usize, stride: usize) -> Vec<usize> {
    if side >= dim {
        return vec![0];
    }
    let last = dim - side;
    let mut positions: Vec<usize> = (0..)
        .map(|i| i * stride)
        .take_while(|&p| p <= last)
        .collect();
    if *positions.last().expect("position 0 always present") != last {
        positions.push(last);
    }
    positions
}

/// Build the sliding-window grid for a `width x height` image.
///
/// Window side is `round(window_ratio * min(width, height))`, stride is
/// `max(1, round(step_ratio * side))`. Positions advance by the stride and
/// a final flush window is appended per axis when the regular steps do not
/// already touch the far edge.
pub fn patch_grid(width: usize, height: usize, spec: &WindowSpec) -> Result<PatchGrid> {
    let min_dim = width.min(height);
    let side_f = spec.window_ratio * min_dim as f64;
    if side_f < 8.0 {
        return Err(Error::InvalidParameter(format!(
            "window would be {side_f:.1}px; need at least 8 (image {width}x{height}, ratio {})",
            spec.window_ratio
        )));
    }
    let side = (side_f.round() as usize).min(min_dim);
    let stride = ((spec.step_ratio * side as f64).round() as usize).max(1);

    let xs = axis_positions(width, side, stride);
    let ys = axis_positions(height, side, stride);
    let mut rects = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            rects.push(Rect { x, y, side });
        }
    }
    Ok(PatchGrid {
        rects,
        width,
        height,
        side,
        stride,
    })
}

/// Cut `rect` out of `image` (`[C,H,W]`, values in [0,1]) and rescale it to
/// `target_side` with bilinear interpolation. A same-size rect is copied
/// pixel-identically.
pub fn extract_rescale(image: &Tensor, rect: Rect, target_side: usize) -> Result<Tensor> {
    let &[c, h, w] = image.shape() else {
        return Err(Error::ShapeMismatch {
            context: "extract_rescale image".into(),
            expected: vec![3],
            actual: image.shape().to_vec(),
        });
    };
    if rect.x + rect.side > w || rect.y + rect.side > h {
        return Err(Error::InvalidParameter(format!(
            "rect ({},{})+{} exceeds image {}x{}",
            rect.x, rect.y, rect.side, w, h
        )));
    }
    let src = image.data();
    let mut out = Tensor::zeros(&[c, target_side, target_side]);
    let od = out.data_mut();

    if rect.side == target_side {
        for ci in 0..c {
            for y in 0..rect.side {
                let s = ci * h * w + (rect.y + y) * w + rect.x;
                let d = ci * target_side * target_side + y * target_side;
                od[d..d + rect.side].copy_from_slice(&src[s..s + rect.side]);
            }
        }
        return Ok(out);
    }

    let scale = rect.side as f64 / target_side as f64;
    let max_idx = rect.side - 1;
    for ty in 0..target_side {
        let sy = ((ty as f64 + 0.5) * scale - 0.5).clamp(0.0, max_idx as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(max_idx);
        let fy = sy - y0 as f64;
        for tx in 0..target_side {
            let sx = ((tx as f64 + 0.5) * scale - 0.5).clamp(0.0, max_idx as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(max_idx);
            let fx = sx - x0 as f64;
            for ci in 0..c {
                let plane = ci * h * w;
                let at = |yy: usize, xx: usize| src[plane + (rect.y + yy) * w + rect.x + xx];
                let v = (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x1))
                    + fy * ((1.0 - fx) * at(y1, x0) + fx * at(y1, x1));
                od[ci * target_side * target_side + ty * target_side + tx] = v;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example_400px() {
        let spec = WindowSpec::new(0.5, 0.5).unwrap();
        let grid = patch_grid(400, 400, &spec).unwrap();
        assert_eq!(grid.side, 200);
        assert_eq!(grid.stride, 100);
        assert_eq!(grid.rects.len(), 9);
        let xs: Vec<usize> = grid.rects[0..3].iter().map(|r| r.x).collect();
        assert_eq!(xs, [0, 100, 200]);
    }

    #[test]
    fn full_ratio_single_window() {
        let spec = WindowSpec::new(1.0, 0.5).unwrap();
        let grid = patch_grid(128, 128, &spec).unwrap();
        assert_eq!(grid.rects.len(), 1);
        assert_eq!(grid.rects[0], Rect { x: 0, y: 0, side: 128 });
    }

    #[test]
    fn desk_example_64px() {
        let spec = WindowSpec::new(0.5, 0.125).unwrap();
        let grid = patch_grid(64, 64, &spec).unwrap();
        assert_eq!(grid.side, 32);
        assert_eq!(grid.stride, 4);
        assert_eq!(grid.rects.len(), 81);
    }

    #[test]
    fn flush_window_added_for_uneven_stride() {
        // dim 100, side 50, stride 40: regular 0, 40; flush 50
        let spec = WindowSpec::new(0.5, 0.8).unwrap();
        let grid = patch_grid(100, 100, &spec).unwrap();
        let xs: Vec<usize> = grid.rects[0..3].iter().map(|r| r.x).collect();
        assert_eq!(xs, [0, 40, 50]);
    }

    #[test]
    fn rect_windows_stay_inside_image() {
        let spec = WindowSpec::new(0.37, 0.21).unwrap();
        let grid = patch_grid(173, 91, &spec).unwrap();
        for r in &grid.rects {
            assert!(r.x + r.side <= 173);
            assert!(r.y + r.side <= 91);
        }
    }

    #[test]
    fn row_major_ordering() {
        let spec = WindowSpec::new(0.5, 1.0).unwrap();
        let grid = patch_grid(64, 64, &spec).unwrap();
        let coords: Vec<(usize, usize)> = grid.rects.iter().map(|r| (r.y, r.x)).collect();
        let mut sorted = coords.clone();
        sorted.sort();
        assert_eq!(coords, sorted);
    }

    #[test]
    fn tiny_window_rejected() {
        let spec = WindowSpec::new(0.1, 0.5).unwrap();
        assert!(patch_grid(64, 64, &spec).is_err());
    }

    #[test]
    fn identity_rescale_is_pixel_exact() {
        let data: Vec<f64> = (0..2 * 6 * 6).map(|i| (i as f64) / 100.0).collect();
        let img = Tensor::from_vec(&[2, 6, 6], data).unwrap();
        let rect = Rect { x: 1, y: 2, side: 4 };
        let out = extract_rescale(&img, rect, 4).unwrap();
        for ci in 0..2 {
            for y in 0..4 {
                for x in 0..4 {
                    assert_eq!(
                        out.data()[ci * 16 + y * 4 + x],
                        img.data()[ci * 36 + (2 + y) * 6 + 1 + x]
                    );
                }
            }
        }
    }

    #[test]
    fn checkerboard_upscale_interpolates() {
        let img = Tensor::from_vec(&[1, 2, 2], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let out = extract_rescale(&img, Rect { x: 0, y: 0, side: 2 }, 4).unwrap();
        // center pixels blend both values
        for &(y, x) in &[(1usize, 1usize), (1, 2), (2, 1), (2, 2)] {
            let v = out.data()[y * 4 + x];
            assert!(v > 0.0 && v < 1.0, "({y},{x}) = {v} not interpolated");
        }
        // corners keep their nearest source value
        assert_eq!(out.data()[0], 0.0);
        assert_eq!(out.data()[3], 1.0);
        assert!(out.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn constant_image_rescales_constant() {
        let img = Tensor::filled(&[3, 10, 10], 0.42);
        let out = extract_rescale(&img, Rect { x: 0, y: 0, side: 10 }, 7).unwrap();
        for &v in out.data() {
            assert!((v - 0.42).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_bounds_rect_rejected() {
        let img = Tensor::zeros(&[1, 8, 8]);
        assert!(extract_rescale(&img, Rect { x: 5, y: 0, side: 4 }, 4).is_err());
    }
}
