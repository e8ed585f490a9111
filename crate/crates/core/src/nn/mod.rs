//! Minimal trainable CNN engine.
//!
//! Supports exactly the layer vocabulary the detection models need: valid
//! convolution, ReLU, 2x2 max-pooling, dense layers, inverted dropout and a
//! final softmax. Everything runs in `f64` and every differentiable path is
//! covered by finite-difference checks in the test suite.

pub mod activation;
pub mod conv;
pub mod dense;
pub mod dropout;
pub mod gradcheck;
pub mod loss;
pub mod pool;
pub mod sgd;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::ChaCha8Rng;
use crate::tensor::Tensor;

/// Whether a forward pass is part of training (dropout active) or
/// evaluation (dropout is the identity).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Static configuration of one layer, stored alongside the weights and
/// serialized into checkpoint headers.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerConfig {
    Conv {
        filters: usize,
        in_channels: usize,
        kernel: usize,
        stride: usize,
    },
    Relu,
    MaxPool,
    Dense {
        outputs: usize,
        inputs: usize,
    },
    Dropout {
        p: f64,
    },
    Softmax,
}

#[derive(Debug, Clone)]
pub enum Layer {
    Conv(conv::ConvLayer),
    Relu,
    MaxPool,
    Dense(dense::DenseLayer),
    Dropout(dropout::DropoutLayer),
    Softmax,
}

impl Layer {
    pub fn config(&self) -> LayerConfig {
        match self {
            Layer::Conv(c) => LayerConfig::Conv {
                filters: c.filters(),
                in_channels: c.in_channels(),
                kernel: c.kernel(),
                stride: c.stride(),
            },
            Layer::Relu => LayerConfig::Relu,
            Layer::MaxPool => LayerConfig::MaxPool,
            Layer::Dense(d) => LayerConfig::Dense {
                outputs: d.outputs(),
                inputs: d.inputs(),
            },
            Layer::Dropout(d) => LayerConfig::Dropout { p: d.p() },
            Layer::Softmax => LayerConfig::Softmax,
        }
    }
}

/// Per-layer state stashed by the forward pass for use in backward.
pub enum LayerCache {
    None,
    Input(Tensor),
    Conv(conv::ConvCols),
    Pool { argmax: Vec<usize>, in_shape: Vec<usize> },
    ReluMask(Vec<bool>),
    DropoutMask(Vec<f64>),
    SoftmaxOut(Tensor),
}

/// Gradients of the loss with respect to one layer's parameters.
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Gradients for a whole network, aligned with `Network::layers`.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub per_layer: Vec<Option<ParamGrads>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Gradients {
        let per_layer = net
            .layers
            .iter()
            .map(|l| match l {
                Layer::Conv(c) => Some(ParamGrads {
                    weights: Tensor::zeros(c.weights.shape()),
                    bias: Tensor::zeros(c.bias.shape()),
                }),
                Layer::Dense(d) => Some(ParamGrads {
                    weights: Tensor::zeros(d.weights.shape()),
                    bias: Tensor::zeros(d.bias.shape()),
                }),
                _ => None,
            })
            .collect();
        Gradients { per_layer }
    }

    /// Accumulate another gradient set into this one.
    pub fn add_assign(&mut self, other: &Gradients) {
        for (mine, theirs) in self.per_layer.iter_mut().zip(&other.per_layer) {
            if let (Some(m), Some(t)) = (mine.as_mut(), theirs.as_ref()) {
                for (a, b) in m.weights.data_mut().iter_mut().zip(t.weights.data()) {
                    *a += b;
                }
                for (a, b) in m.bias.data_mut().iter_mut().zip(t.bias.data()) {
                    *a += b;
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.per_layer.iter_mut().flatten() {
            for v in g.weights.data_mut() {
                *v *= factor;
            }
            for v in g.bias.data_mut() {
                *v *= factor;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.per_layer
            .iter()
            .flatten()
            .all(|g| g.weights.is_finite() && g.bias.is_finite())
    }
}

/// An ordered stack of layers mapping a `[C, S, S]` image to 2-class
/// softmax probabilities.
#[derive(Debug, Clone)]
pub struct Network {
    pub layers: Vec<Layer>,
    /// Number of conv blocks the network was built with.
    pub conv_blocks: usize,
    /// Number of dense layers the network was built with.
    pub dense_layers: usize,
    /// Expected input side length in pixels.
    pub input_side: usize,
    /// Expected input channel count.
    pub input_channels: usize,
}

impl Network {
    fn check_input(&self, x: &Tensor) -> Result<()> {
        let expected = [self.input_channels, self.input_side, self.input_side];
        if x.shape() != expected {
            return Err(Error::ShapeMismatch {
                context: "Network::forward input".into(),
                expected: expected.to_vec(),
                actual: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Forward pass keeping per-layer caches for a subsequent backward pass.
    pub fn forward_cached(
        &self,
        x: &Tensor,
        mode: Mode,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Tensor, Vec<LayerCache>)> {
        self.check_input(x)?;
        let mut rng = rng;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let (out, cache) = match layer {
                Layer::Conv(c) => {
                    let (out, cols) = c.forward_with_cols(&cur)?;
                    (out, LayerCache::Conv(cols))
                }
                Layer::Relu => {
                    let (out, mask) = activation::relu_forward(&cur);
                    (out, LayerCache::ReluMask(mask))
                }
                Layer::MaxPool => {
                    let (out, argmax) = pool::maxpool_forward(&cur)?;
                    let in_shape = cur.shape().to_vec();
                    (out, LayerCache::Pool { argmax, in_shape })
                }
                Layer::Dense(d) => {
                    let out = d.forward(&cur)?;
                    (out, LayerCache::Input(cur))
                }
                Layer::Dropout(d) => {
                    let (out, mask) = d.forward(&cur, mode, rng.as_deref_mut())?;
                    (out, LayerCache::DropoutMask(mask))
                }
                Layer::Softmax => {
                    let out = activation::softmax(&cur);
                    (out.clone(), LayerCache::SoftmaxOut(out.clone()))
                }
            };
            caches.push(cache);
            cur = out;
        }
        Ok((cur, caches))
    }

    /// Inference-mode forward pass returning class probabilities.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward_cached(x, Mode::Eval, None)?.0)
    }

    /// Inference-mode class decision: index of the largest probability.
    pub fn classify(&self, x: &Tensor) -> Result<usize> {
        let p = self.predict(x)?;
        let d = p.data();
        Ok(if d[1] > d[0] { 1 } else { 0 })
    }

    /// Backward pass for a cross-entropy loss on the softmax output.
    ///
    /// The softmax+cross-entropy gradient is fused: backpropagation starts
    /// from `p - onehot(label)` at the softmax input, so the final softmax
    /// layer must be the last entry of `layers`.
    pub fn backward(&self, caches: &[LayerCache], label: usize) -> Result<Gradients> {
        let last = self.layers.len() - 1;
        let probs = match &caches[last] {
            LayerCache::SoftmaxOut(p) => p,
            _ => {
                return Err(Error::InvalidParameter(
                    "backward requires a softmax final layer".into(),
                ))
            }
        };
        let mut grad = loss::softmax_ce_logit_gradient(probs, label)?;
        let mut per_layer: Vec<Option<ParamGrads>> = vec![None; self.layers.len()];

        for idx in (0..last).rev() {
            match (&self.layers[idx], &caches[idx]) {
                (Layer::Conv(c), LayerCache::Conv(cols)) => {
                    let (gin, pg) = c.backward(cols, &grad)?;
                    per_layer[idx] = Some(pg);
                    grad = gin;
                }
                (Layer::Relu, LayerCache::ReluMask(mask)) => {
                    grad = activation::relu_backward(&grad, mask);
                }
                (Layer::MaxPool, LayerCache::Pool { argmax, in_shape }) => {
                    grad = pool::maxpool_backward(&grad, argmax, in_shape);
                }
                (Layer::Dense(d), LayerCache::Input(input)) => {
                    let (gin, pg) = d.backward(input, &grad)?;
                    per_layer[idx] = Some(pg);
                    grad = gin;
                }
                (Layer::Dropout(_), LayerCache::DropoutMask(mask)) => {
                    grad = dropout::backward(&grad, mask);
                }
                _ => {
                    return Err(Error::InvalidParameter(
                        "layer/cache mismatch in backward".into(),
                    ))
                }
            }
        }
        Ok(Gradients { per_layer })
    }

    /// References to all parameter tensors, layer order, weights then bias.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(&c.weights);
                    out.push(&c.bias);
                }
                Layer::Dense(d) => {
                    out.push(&d.weights);
                    out.push(&d.bias);
                }
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(&mut c.weights);
                    out.push(&mut c.bias);
                }
                Layer::Dense(d) => {
                    out.push(&mut d.weights);
                    out.push(&mut d.bias);
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.numel()).sum()
    }

    pub fn layer_configs(&self) -> Vec<LayerConfig> {
        self.layers.iter().map(Layer::config).collect()
    }
}
