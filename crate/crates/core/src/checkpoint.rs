//! Checkpoint files.
//!
//! Layout: magic `PEDK`, format version as little-endian u16, a
//! length-prefixed UTF-8 JSON architecture descriptor, then all parameters
//! as little-endian 32-bit floats in layer order (weights then bias per
//! parameterized layer). Save/load/save round-trips are bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PartKind, Role};
use crate::nn::conv::ConvLayer;
use crate::nn::dense::DenseLayer;
use crate::nn::dropout::DropoutLayer;
use crate::nn::{Layer, LayerConfig, Network};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"PEDK";
pub const VERSION: u16 = 1;

/// Everything needed to rebuild the network structure before the
/// parameter payload is read.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ArchDescriptor {
    pub role: Role,
    /// Which part a component network detects; `None` for the single model.
    pub part: Option<PartKind>,
    pub conv_blocks: usize,
    pub dense_layers: usize,
    pub input_side: usize,
    pub input_channels: usize,
    pub layers: Vec<LayerConfig>,
}

impl ArchDescriptor {
    pub fn of(network: &Network, role: Role, part: Option<PartKind>) -> ArchDescriptor {
        ArchDescriptor {
            role,
            part,
            conv_blocks: network.conv_blocks,
            dense_layers: network.dense_layers,
            input_side: network.input_side,
            input_channels: network.input_channels,
            layers: network.layer_configs(),
        }
    }
}

pub fn serialize(network: &Network, role: Role, part: Option<PartKind>) -> Result<Vec<u8>> {
    let descriptor = ArchDescriptor::of(network, role, part);
    let json = serde_json::to_vec(&descriptor)?;
    let mut out = Vec::with_capacity(16 + json.len() + network.param_count() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for param in network.params() {
        for &v in param.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn deserialize(bytes: &[u8]) -> Result<(Network, ArchDescriptor)> {
    let header_err = |msg: &str| Error::Checkpoint(msg.to_string());
    if bytes.len() < 10 {
        return Err(header_err("file too short"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(header_err("bad magic bytes, not a checkpoint"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let json_len = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
    let json_end = 10 + json_len;
    if bytes.len() < json_end {
        return Err(header_err("truncated descriptor"));
    }
    let descriptor: ArchDescriptor = serde_json::from_slice(&bytes[10..json_end])?;

    let mut layers = Vec::with_capacity(descriptor.layers.len());
    let mut cursor = json_end;
    let read_tensor = |shape: &[usize], cursor: &mut usize| -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let end = *cursor + n * 4;
        if bytes.len() < end {
            return Err(Error::Checkpoint("truncated parameter payload".into()));
        }
        let data = bytes[*cursor..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        *cursor = end;
        Tensor::from_vec(shape, data)
    };

    for cfg in &descriptor.layers {
        let layer = match *cfg {
            LayerConfig::Conv {
                filters,
                in_channels,
                kernel,
                stride,
            } => {
                let w = read_tensor(&[filters, in_channels, kernel, kernel], &mut cursor)?;
                let b = read_tensor(&[filters], &mut cursor)?;
                Layer::Conv(ConvLayer::new(w, b, stride)?)
            }
            LayerConfig::Dense { outputs, inputs } => {
                let w = read_tensor(&[outputs, inputs], &mut cursor)?;
                let b = read_tensor(&[outputs], &mut cursor)?;
                Layer::Dense(DenseLayer::new(w, b)?)
            }
            LayerConfig::Relu => Layer::Relu,
            LayerConfig::MaxPool => Layer::MaxPool,
            LayerConfig::Dropout { p } => Layer::Dropout(DropoutLayer::new(p)?),
            LayerConfig::Softmax => Layer::Softmax,
        };
        layers.push(layer);
    }
    if cursor != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "trailing bytes after parameters: expected {} total, file has {}",
            cursor,
            bytes.len()
        )));
    }

    let network = Network {
        layers,
        conv_blocks: descriptor.conv_blocks,
        dense_layers: descriptor.dense_layers,
        input_side: descriptor.input_side,
        input_channels: descriptor.input_channels,
    };
    Ok((network, descriptor))
}

pub fn save(network: &Network, role: Role, part: Option<PartKind>, path: &Path) -> Result<()> {
    let bytes = serialize(network, role, part)?;
    fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load(path: &Path) -> Result<(Network, ArchDescriptor)> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    deserialize(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_network, ArchSpec, BuildPlan};

    fn small_net() -> Network {
        let plan = BuildPlan {
            input_side: 16,
            ..BuildPlan::desk()
        };
        build_network(ArchSpec::new(2, 2, Role::Component), &plan, 5).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let net = small_net();
        let bytes = serialize(&net, Role::Component, Some(PartKind::Barrel)).unwrap();
        let (loaded, desc) = deserialize(&bytes).unwrap();
        assert_eq!(desc.part, Some(PartKind::Barrel));
        let bytes2 = serialize(&loaded, Role::Component, Some(PartKind::Barrel)).unwrap();
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn loaded_network_predicts_identically_to_reload() {
        let net = small_net();
        let bytes = serialize(&net, Role::Component, None).unwrap();
        let (a, _) = deserialize(&bytes).unwrap();
        let (b, _) = deserialize(&bytes).unwrap();
        let x = Tensor::filled(&[3, 16, 16], 0.3);
        assert_eq!(a.predict(&x).unwrap(), b.predict(&x).unwrap());
    }

    #[test]
    fn bad_magic_rejected() {
        let net = small_net();
        let mut bytes = serialize(&net, Role::Single, None).unwrap();
        bytes[0] = b'X';
        assert!(matches!(deserialize(&bytes), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn truncation_rejected() {
        let net = small_net();
        let bytes = serialize(&net, Role::Single, None).unwrap();
        assert!(deserialize(&bytes[..bytes.len() - 3]).is_err());
    }
}
