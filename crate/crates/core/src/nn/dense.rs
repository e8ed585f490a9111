//! Fully connected layers. Inputs of any shape are treated as flat vectors.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::ParamGrads;

#[derive(Debug, Clone)]
pub struct DenseLayer {
    /// Shape `[outputs, inputs]`.
    pub weights: Tensor,
    /// Shape `[outputs]`.
    pub bias: Tensor,
}

impl DenseLayer {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<DenseLayer> {
        if weights.shape().len() != 2 {
            return Err(Error::InvalidParameter(format!(
                "dense weights must be 2-d, got {:?}",
                weights.shape()
            )));
        }
        if bias.shape() != [weights.shape()[0]] {
            return Err(Error::ShapeMismatch {
                context: "dense bias".into(),
                expected: vec![weights.shape()[0]],
                actual: bias.shape().to_vec(),
            });
        }
        Ok(DenseLayer { weights, bias })
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        forward(input, &self.weights, &self.bias)
    }

    pub fn backward(&self, input: &Tensor, grad_out: &Tensor) -> Result<(Tensor, ParamGrads)> {
        let m = self.outputs();
        let d = self.inputs();
        debug_assert_eq!(grad_out.numel(), m);

        // dW[i,j] = gout[i] * x[j]
        let mut dw = Tensor::zeros(self.weights.shape());
        let dwd = dw.data_mut();
        let x = input.data();
        let g = grad_out.data();
        for i in 0..m {
            let gi = g[i];
            for j in 0..d {
                dwd[i * d + j] = gi * x[j];
            }
        }
        let db = Tensor::from_vec(&[m], g.to_vec())?;

        // dx[j] = sum_i gout[i] * W[i,j]
        let mut din = Tensor::zeros(input.shape());
        let dd = din.data_mut();
        let w = self.weights.data();
        for i in 0..m {
            let gi = g[i];
            if gi == 0.0 {
                continue;
            }
            for j in 0..d {
                dd[j] += gi * w[i * d + j];
            }
        }
        Ok((din, ParamGrads { weights: dw, bias: db }))
    }
}

/// Affine map `W x + b` where `input` is flattened to length `d`,
/// `weights` is `[m, d]`, `bias` is `[m]`.
pub fn forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let m = weights.shape()[0];
    let d = weights.shape()[1];
    if input.numel() != d {
        return Err(Error::ShapeMismatch {
            context: "dense input".into(),
            expected: vec![d],
            actual: input.shape().to_vec(),
        });
    }
    let x = input.data();
    let w = weights.data();
    let mut out = Tensor::zeros(&[m]);
    let od = out.data_mut();
    for i in 0..m {
        let row = &w[i * d..(i + 1) * d];
        let mut acc = bias.data()[i];
        for j in 0..d {
            acc += row[j] * x[j];
        }
        od[i] = acc;
    }
    Ok(out)
}
