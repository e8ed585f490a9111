//! Non-overlapping 2x2 max-pooling.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// 2x2 max-pool with stride 2. Output is `[C, H/2, W/2]` (floor). Also
/// returns the flat input index of each window maximum; ties resolve to
/// the first maximum in row-major window order, and backward routes the
/// whole gradient there.
pub fn maxpool_forward(input: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let &[c, h, w] = input.shape() else {
        return Err(Error::ShapeMismatch {
            context: "maxpool input".into(),
            expected: vec![3],
            actual: input.shape().to_vec(),
        });
    };
    if h < 2 || w < 2 {
        return Err(Error::InvalidParameter(format!(
            "maxpool needs spatial dims >= 2, got {}x{}",
            h, w
        )));
    }
    let oh = h / 2;
    let ow = w / 2;
    let mut out = Tensor::zeros(&[c, oh, ow]);
    let mut argmax = vec![0usize; c * oh * ow];
    let data = input.data();
    let od = out.data_mut();
    for ci in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let base = ci * h * w + (2 * y) * w + 2 * x;
                let idxs = [base, base + 1, base + w, base + w + 1];
                let mut best = idxs[0];
                let mut best_v = data[best];
                for &i in &idxs[1..] {
                    if data[i] > best_v {
                        best_v = data[i];
                        best = i;
                    }
                }
                let o = ci * oh * ow + y * ow + x;
                od[o] = best_v;
                argmax[o] = best;
            }
        }
    }
    Ok((out, argmax))
}

pub fn maxpool_backward(grad_out: &Tensor, argmax: &[usize], in_shape: &[usize]) -> Tensor {
    let mut din = Tensor::zeros(in_shape);
    let d = din.data_mut();
    for (g, &idx) in grad_out.data().iter().zip(argmax) {
        d[idx] += g;
    }
    din
}
