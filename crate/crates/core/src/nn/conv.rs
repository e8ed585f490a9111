//! Valid (no-padding) 2D convolution via im2col and flat matrix multiplies.

use crate::error::{Error, Result};
use crate::tensor::{matmul_a_bt_acc, matmul_acc, matmul_at_b_acc, Tensor};

use super::ParamGrads;

#[derive(Debug, Clone)]
pub struct ConvLayer {
    /// Shape `[filters, in_channels, kernel, kernel]`.
    pub weights: Tensor,
    /// Shape `[filters]`.
    pub bias: Tensor,
    stride: usize,
}

impl ConvLayer {
    pub fn new(weights: Tensor, bias: Tensor, stride: usize) -> Result<ConvLayer> {
        if weights.shape().len() != 4 {
            return Err(Error::InvalidParameter(format!(
                "conv weights must be 4-d, got {:?}",
                weights.shape()
            )));
        }
        if weights.shape()[2] != weights.shape()[3] {
            return Err(Error::InvalidParameter(
                "conv kernels must be square".into(),
            ));
        }
        if bias.shape() != [weights.shape()[0]] {
            return Err(Error::ShapeMismatch {
                context: "conv bias".into(),
                expected: vec![weights.shape()[0]],
                actual: bias.shape().to_vec(),
            });
        }
        if stride == 0 {
            return Err(Error::InvalidParameter("conv stride must be >= 1".into()));
        }
        Ok(ConvLayer {
            weights,
            bias,
            stride,
        })
    }

    pub fn filters(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape()[2]
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn out_spatial(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let k = self.kernel();
        if h < k || w < k {
            return Err(Error::InvalidParameter(format!(
                "conv input {}x{} smaller than kernel {}",
                h, w, k
            )));
        }
        Ok(((h - k) / self.stride + 1, (w - k) / self.stride + 1))
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        forward(input, &self.weights, &self.bias, self.stride)
    }

    /// Forward pass that also returns the unfolded column matrix so the
    /// backward pass does not have to rebuild it.
    pub fn forward_with_cols(&self, input: &Tensor) -> Result<(Tensor, ConvCols)> {
        let (c, h, w) = dims3(input)?;
        if c != self.in_channels() {
            return Err(Error::ShapeMismatch {
                context: "conv input channels vs weight channels".into(),
                expected: self.weights.shape().to_vec(),
                actual: vec![self.filters(), c, self.kernel(), self.kernel()],
            });
        }
        let f = self.filters();
        let k = self.kernel();
        let (oh, ow) = self.out_spatial(h, w)?;
        let ckk = c * k * k;
        let ohw = oh * ow;
        let cols = im2col(input.data(), c, h, w, k, self.stride, oh, ow);
        let mut out = Tensor::zeros(&[f, oh, ow]);
        matmul_acc(out.data_mut(), self.weights.data(), &cols, f, ckk, ohw);
        for fi in 0..f {
            let b = self.bias.data()[fi];
            if b != 0.0 {
                for v in &mut out.data_mut()[fi * ohw..(fi + 1) * ohw] {
                    *v += b;
                }
            }
        }
        Ok((
            out,
            ConvCols {
                cols,
                in_shape: vec![c, h, w],
                out_spatial: (oh, ow),
            },
        ))
    }

    /// Returns the gradient w.r.t. the input plus this layer's parameter
    /// gradients, reusing the forward pass's column matrix.
    pub fn backward(&self, cache: &ConvCols, grad_out: &Tensor) -> Result<(Tensor, ParamGrads)> {
        let (c, h, w) = (cache.in_shape[0], cache.in_shape[1], cache.in_shape[2]);
        let f = self.filters();
        let k = self.kernel();
        let (oh, ow) = cache.out_spatial;
        debug_assert_eq!(grad_out.shape(), [f, oh, ow]);

        let ckk = c * k * k;
        let ohw = oh * ow;

        // dW[f, ckk] = gout[f, ohw] * cols^T
        let mut dw = Tensor::zeros(self.weights.shape());
        matmul_a_bt_acc(dw.data_mut(), grad_out.data(), &cache.cols, f, ohw, ckk);

        // db[f] = sum over spatial positions
        let mut db = Tensor::zeros(&[f]);
        for fi in 0..f {
            db.data_mut()[fi] = grad_out.data()[fi * ohw..(fi + 1) * ohw].iter().sum();
        }

        // dcols[ckk, ohw] = W^T * gout
        let mut dcols = vec![0.0; ckk * ohw];
        matmul_at_b_acc(&mut dcols, self.weights.data(), grad_out.data(), f, ckk, ohw);

        // scatter dcols back into the input layout
        let mut din = Tensor::zeros(&cache.in_shape);
        col2im_acc(din.data_mut(), &dcols, c, h, w, k, self.stride, oh, ow);

        Ok((din, ParamGrads { weights: dw, bias: db }))
    }
}

/// Column matrix stashed by the forward pass for backward reuse.
pub struct ConvCols {
    cols: Vec<f64>,
    in_shape: Vec<usize>,
    out_spatial: (usize, usize),
}

fn dims3(t: &Tensor) -> Result<(usize, usize, usize)> {
    match t.shape() {
        [c, h, w] => Ok((*c, *h, *w)),
        other => Err(Error::ShapeMismatch {
            context: "expected [C,H,W] tensor".into(),
            expected: vec![3],
            actual: other.to_vec(),
        }),
    }
}

/// Valid convolution: `input [C,H,W]`, `weights [F,C,k,k]`, `bias [F]`.
/// Output is `[F, (H-k)/stride+1, (W-k)/stride+1]`.
pub fn forward(input: &Tensor, weights: &Tensor, bias: &Tensor, stride: usize) -> Result<Tensor> {
    let (c, h, w) = dims3(input)?;
    let &[f, wc, k, k2] = weights.shape() else {
        return Err(Error::ShapeMismatch {
            context: "conv weights".into(),
            expected: vec![4],
            actual: weights.shape().to_vec(),
        });
    };
    debug_assert_eq!(k, k2);
    if wc != c {
        return Err(Error::ShapeMismatch {
            context: "conv input channels vs weight channels".into(),
            expected: vec![f, c, k, k],
            actual: weights.shape().to_vec(),
        });
    }
    if stride == 0 {
        return Err(Error::InvalidParameter("conv stride must be >= 1".into()));
    }
    if h < k || w < k {
        return Err(Error::InvalidParameter(format!(
            "conv input {}x{} smaller than kernel {}",
            h, w, k
        )));
    }
    let oh = (h - k) / stride + 1;
    let ow = (w - k) / stride + 1;
    let ckk = c * k * k;
    let ohw = oh * ow;

    let cols = im2col(input.data(), c, h, w, k, stride, oh, ow);
    let mut out = Tensor::zeros(&[f, oh, ow]);
    matmul_acc(out.data_mut(), weights.data(), &cols, f, ckk, ohw);
    for fi in 0..f {
        let b = bias.data()[fi];
        if b != 0.0 {
            for v in &mut out.data_mut()[fi * ohw..(fi + 1) * ohw] {
                *v += b;
            }
        }
    }
    Ok(out)
}

/// Unfold conv windows into a `[C*k*k, OH*OW]` matrix.
#[allow(clippy::too_many_arguments)]
fn im2col(
    input: &[f64],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    oh: usize,
    ow: usize,
) -> Vec<f64> {
    let ohw = oh * ow;
    let mut cols = vec![0.0; c * k * k * ohw];
    for ci in 0..c {
        let plane = &input[ci * h * w..(ci + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = ((ci * k + ki) * k + kj) * ohw;
                for y in 0..oh {
                    let src = (y * stride + ki) * w + kj;
                    let dst = row + y * ow;
                    if stride == 1 {
                        cols[dst..dst + ow].copy_from_slice(&plane[src..src + ow]);
                    } else {
                        for x in 0..ow {
                            cols[dst + x] = plane[src + x * stride];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-add the column-matrix gradient back into `[C,H,W]` layout.
#[allow(clippy::too_many_arguments)]
fn col2im_acc(
    out: &mut [f64],
    dcols: &[f64],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    oh: usize,
    ow: usize,
) {
    let ohw = oh * ow;
    for ci in 0..c {
        let plane = &mut out[ci * h * w..(ci + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = ((ci * k + ki) * k + kj) * ohw;
                for y in 0..oh {
                    let dst = (y * stride + ki) * w + kj;
                    let src = row + y * ow;
                    for x in 0..ow {
                        plane[dst + x * stride] += dcols[src + x];
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_shape_200px() {
        let input = Tensor::zeros(&[3, 200, 200]);
        let weights = Tensor::zeros(&[32, 3, 3, 3]);
        let bias = Tensor::zeros(&[32]);
        let out = forward(&input, &weights, &bias, 1).unwrap();
        assert_eq!(out.shape(), [32, 198, 198]);
    }

    #[test]
    fn all_ones_window_sums() {
        let input = Tensor::filled(&[1, 4, 4], 1.0);
        let weights = Tensor::filled(&[1, 1, 2, 2], 1.0);
        let bias = Tensor::zeros(&[1]);
        let out = forward(&input, &weights, &bias, 1).unwrap();
        assert_eq!(out.shape(), [1, 3, 3]);
        assert!(out.data().iter().all(|&v| v == 4.0));
    }

    #[test]
    fn channel_mismatch_is_structured_error() {
        let input = Tensor::zeros(&[2, 4, 4]);
        let weights = Tensor::zeros(&[1, 3, 2, 2]);
        let bias = Tensor::zeros(&[1]);
        match forward(&input, &weights, &bias, 1) {
            Err(Error::ShapeMismatch { expected, actual, .. }) => {
                assert_eq!(expected, vec![1, 2, 2, 2]);
                assert_eq!(actual, vec![1, 3, 2, 2]);
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn stride_two_shape() {
        let input = Tensor::zeros(&[1, 7, 7]);
        let weights = Tensor::zeros(&[2, 1, 3, 3]);
        let bias = Tensor::zeros(&[2]);
        let out = forward(&input, &weights, &bias, 2).unwrap();
        assert_eq!(out.shape(), [2, 3, 3]);
    }

    #[test]
    fn forward_matches_naive_reference() {
        // brute-force reference on a small random case
        let mut state = 0x12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        let (c, h, w, f, k, s) = (2, 6, 5, 3, 3, 1);
        let input = Tensor::from_vec(&[c, h, w], (0..c * h * w).map(|_| next()).collect()).unwrap();
        let weights =
            Tensor::from_vec(&[f, c, k, k], (0..f * c * k * k).map(|_| next()).collect()).unwrap();
        let bias = Tensor::from_vec(&[f], (0..f).map(|_| next()).collect()).unwrap();
        let out = forward(&input, &weights, &bias, s).unwrap();

        let (oh, ow) = ((h - k) / s + 1, (w - k) / s + 1);
        for fi in 0..f {
            for y in 0..oh {
                for x in 0..ow {
                    let mut acc = bias.data()[fi];
                    for ci in 0..c {
                        for ki in 0..k {
                            for kj in 0..k {
                                acc += weights.data()[((fi * c + ci) * k + ki) * k + kj]
                                    * input.data()[ci * h * w + (y * s + ki) * w + (x * s + kj)];
                            }
                        }
                    }
                    let got = out.data()[fi * oh * ow + y * ow + x];
                    assert!((acc - got).abs() < 1e-12, "mismatch at {fi},{y},{x}");
                }
            }
        }
    }
}
