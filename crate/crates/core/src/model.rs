//! Builders for the two model families and the architecture search grid.
//!
//! Both families share one layer recipe: M conv blocks (conv + ReLU + 2x2
//! max-pool) followed by N dense layers with ReLU, dropout after the
//! second-to-last dense layer, and a 2-class softmax head. Component
//! networks and the single whole-image network differ only in the data
//! they are trained on.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::conv::ConvLayer;
use crate::nn::dense::DenseLayer;
use crate::nn::dropout::DropoutLayer;
use crate::nn::{Layer, Network};
use crate::rng::{self, tags};
use crate::tensor::Tensor;

/// The object parts the ensemble decomposes detection into. Order is
/// canonical everywhere: decision vectors, threshold tables and report
/// rows all use this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartKind {
    Barrel,
    Magazine,
    Receiver,
    Stock,
}

impl PartKind {
    pub const ALL: [PartKind; 4] = [
        PartKind::Barrel,
        PartKind::Magazine,
        PartKind::Receiver,
        PartKind::Stock,
    ];

    pub fn index(self) -> usize {
        match self {
            PartKind::Barrel => 0,
            PartKind::Magazine => 1,
            PartKind::Receiver => 2,
            PartKind::Stock => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PartKind::Barrel => "barrel",
            PartKind::Magazine => "magazine",
            PartKind::Receiver => "receiver",
            PartKind::Stock => "stock",
        }
    }

    /// Neutral name used by the synthetic dataset generator.
    pub fn synthetic_name(self) -> &'static str {
        match self {
            PartKind::Barrel => "P1",
            PartKind::Magazine => "P2",
            PartKind::Receiver => "P3",
            PartKind::Stock => "P4",
        }
    }

    pub fn parse(s: &str) -> Option<PartKind> {
        match s.to_ascii_lowercase().as_str() {
            "barrel" | "barrels" | "p1" => Some(PartKind::Barrel),
            "magazine" | "magazines" | "p2" => Some(PartKind::Magazine),
            "receiver" | "receivers" | "p3" => Some(PartKind::Receiver),
            "stock" | "stocks" | "p4" => Some(PartKind::Stock),
            _ => None,
        }
    }
}

impl std::fmt::Display for PartKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// What a network is trained to look at: one part in a patch, or the whole
/// object in a rescaled image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Component,
    Single,
}

/// One point of the architecture search: M conv blocks, N dense layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArchSpec {
    pub conv_blocks: usize,
    pub dense_layers: usize,
    pub role: Role,
}

impl ArchSpec {
    pub fn new(m: usize, n: usize, role: Role) -> ArchSpec {
        ArchSpec {
            conv_blocks: m,
            dense_layers: n,
            role,
        }
    }

    /// "4x3" style label used in report tables.
    pub fn label(&self) -> String {
        format!("{}x{}", self.conv_blocks, self.dense_layers)
    }

    pub fn parse_label(s: &str, role: Role) -> Option<ArchSpec> {
        let (m, n) = s.split_once('x')?;
        Some(ArchSpec::new(m.parse().ok()?, n.parse().ok()?, role))
    }
}

/// The five (M, N) pairs explored in the architecture search, in fixed
/// order. Deliberately not the full 3x3 product.
pub fn architecture_grid(role: Role) -> Vec<ArchSpec> {
    [(3, 3), (3, 4), (4, 3), (4, 4), (5, 5)]
        .into_iter()
        .map(|(m, n)| ArchSpec::new(m, n, role))
        .collect()
}

/// Width configuration shared by every network in a run. The paper-scale
/// recipe uses 32 filters for the first two blocks and 64 after; the desk
/// profile shrinks widths so the full 25-network grid trains in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildPlan {
    pub input_side: usize,
    pub input_channels: usize,
    /// Filters in the first two conv blocks.
    pub early_filters: usize,
    /// Filters in every later conv block.
    pub late_filters: usize,
    /// Width of hidden dense layers; the final layer is always 2-way.
    pub dense_width: usize,
    pub dropout_p: f64,
    pub kernel: usize,
}

impl BuildPlan {
    pub fn paper() -> BuildPlan {
        BuildPlan {
            input_side: 200,
            input_channels: 3,
            early_filters: 32,
            late_filters: 64,
            dense_width: 128,
            dropout_p: 0.5,
            kernel: 3,
        }
    }

    pub fn desk() -> BuildPlan {
        BuildPlan {
            input_side: 64,
            input_channels: 3,
            early_filters: 8,
            late_filters: 16,
            dense_width: 48,
            dropout_p: 0.5,
            kernel: 3,
        }
    }

    fn filters_for_block(&self, block: usize) -> usize {
        if block < 2 {
            self.early_filters
        } else {
            self.late_filters
        }
    }
}

fn he_uniform_tensor(shape: &[usize], fan_in: usize, rng: &mut rng::ChaCha8Rng) -> Tensor {
    let limit = (6.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-limit..limit)).collect();
    Tensor::from_vec(shape, data).expect("shape/data length agree by construction")
}

/// Build a network for the given architecture. Conv blocks shrink the
/// spatial dims by `kernel - 1` then halve them; when fewer than `kernel`
/// pixels remain the kernel is clamped to the remaining extent, and the
/// pool is skipped once the map reaches 1x1. A block that would start from
/// an empty map is a construction error naming the offending block.
pub fn build_network(arch: ArchSpec, plan: &BuildPlan, seed: u64) -> Result<Network> {
    if arch.conv_blocks == 0 || arch.dense_layers == 0 {
        return Err(Error::BadArchitecture(
            "need at least one conv block and one dense layer".into(),
        ));
    }
    let mut layers = Vec::new();
    let mut side = plan.input_side;
    let mut channels = plan.input_channels;
    let mut layer_idx = 0u64;

    for block in 0..arch.conv_blocks {
        if side < 2 {
            return Err(Error::BadArchitecture(format!(
                "spatial dimension collapsed before conv block {} (of {}): {}x{} input leaves a {}x{} map",
                block + 1,
                arch.conv_blocks,
                plan.input_side,
                plan.input_side,
                side,
                side
            )));
        }
        let kernel = plan.kernel.min(side);
        let filters = plan.filters_for_block(block);
        let fan_in = channels * kernel * kernel;
        let mut r = rng::stream(seed, &[tags::INIT, layer_idx]);
        let weights = he_uniform_tensor(&[filters, channels, kernel, kernel], fan_in, &mut r);
        let bias = Tensor::zeros(&[filters]);
        layers.push(Layer::Conv(ConvLayer::new(weights, bias, 1)?));
        layers.push(Layer::Relu);
        layer_idx += 1;

        side = side - kernel + 1;
        if side >= 2 {
            layers.push(Layer::MaxPool);
            side /= 2;
        }
        channels = filters;
    }

    let mut features = channels * side * side;
    for d in 0..arch.dense_layers {
        let is_last = d + 1 == arch.dense_layers;
        // dropout regularizes the input of the final dense layer
        if is_last {
            layers.push(Layer::Dropout(DropoutLayer::new(plan.dropout_p)?));
        }
        let width = if is_last { 2 } else { plan.dense_width };
        let mut r = rng::stream(seed, &[tags::INIT, layer_idx]);
        let weights = he_uniform_tensor(&[width, features], features, &mut r);
        let bias = Tensor::zeros(&[width]);
        layers.push(Layer::Dense(DenseLayer::new(weights, bias)?));
        if !is_last {
            layers.push(Layer::Relu);
        }
        layer_idx += 1;
        features = width;
    }
    layers.push(Layer::Softmax);

    Ok(Network {
        layers,
        conv_blocks: arch.conv_blocks,
        dense_layers: arch.dense_layers,
        input_side: plan.input_side,
        input_channels: plan.input_channels,
    })
}

/// Network for one component part detector.
pub fn build_component_network(arch: ArchSpec, plan: &BuildPlan, seed: u64) -> Result<Network> {
    if arch.role != Role::Component {
        return Err(Error::InvalidParameter(
            "build_component_network needs a component-role arch".into(),
        ));
    }
    build_network(arch, plan, seed)
}

/// Network for the whole-image baseline.
pub fn build_single_network(arch: ArchSpec, plan: &BuildPlan, seed: u64) -> Result<Network> {
    if arch.role != Role::Single {
        return Err(Error::InvalidParameter(
            "build_single_network needs a single-role arch".into(),
        ));
    }
    build_network(arch, plan, seed)
}
