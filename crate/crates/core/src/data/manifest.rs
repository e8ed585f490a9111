//! Manifest-backed dataset storage.
//!
//! A dataset directory holds 8-bit PNGs under `images/<split>/` plus a
//! `manifest.json` listing every sample's relative path, label, part,
//! split, origin, source id and SHA-256 content digest. Loading verifies
//! existence and digests and rejects source ids that appear in more than
//! one split.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::PartKind;

use super::{ImageBuf, Label, Origin, PartitionedDataset, Sample, Split};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestEntry {
    pub path: String,
    pub label: Label,
    pub part: Option<PartKind>,
    pub split: Split,
    pub origin: Origin,
    pub source_id: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub version: u32,
    pub entries: Vec<ManifestEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        use std::fmt::Write;
        write!(s, "{b:02x}").expect("writing to string");
    }
    s
}

/// Write a dataset to `dir`: PNGs plus the manifest. Files are named by
/// their position within the split so reruns produce identical trees.
pub fn write_dataset(dataset: &PartitionedDataset, dir: &Path) -> Result<Manifest> {
    let mut entries = Vec::new();
    for split in Split::ALL {
        let sub = dir.join("images").join(split.dir_name());
        fs::create_dir_all(&sub).map_err(|e| Error::io(sub.display().to_string(), e))?;
        for (i, sample) in dataset.split(split).iter().enumerate() {
            let rel = format!("images/{}/{:06}.png", split.dir_name(), i);
            let bytes = sample.image.to_png_bytes()?;
            let file = dir.join(&rel);
            fs::write(&file, &bytes).map_err(|e| Error::io(file.display().to_string(), e))?;
            entries.push(ManifestEntry {
                path: rel,
                label: sample.label,
                part: sample.part,
                split,
                origin: sample.origin,
                source_id: sample.source_id.clone(),
                sha256: sha256_hex(&bytes),
            });
        }
    }
    let manifest = Manifest {
        version: 1,
        entries,
    };
    let json = serde_json::to_vec_pretty(&manifest)?;
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, json).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(manifest)
}

fn validate(manifest: &Manifest) -> Result<()> {
    let mut split_of: HashMap<&str, Split> = HashMap::new();
    for e in &manifest.entries {
        match split_of.get(e.source_id.as_str()) {
            Some(&s) if s != e.split => {
                return Err(Error::Dataset(format!(
                    "source_id {} appears in both {:?} and {:?}",
                    e.source_id, s, e.split
                )));
            }
            _ => {
                split_of.insert(&e.source_id, e.split);
            }
        }
    }
    Ok(())
}

/// Load a dataset directory, verifying every referenced file and digest.
pub fn load_dataset(dir: &Path) -> Result<PartitionedDataset> {
    let manifest_path = dir.join(MANIFEST_NAME);
    if !manifest_path.exists() {
        return Err(Error::MissingFile(manifest_path));
    }
    let json = fs::read(&manifest_path)
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    let manifest: Manifest = serde_json::from_slice(&json)?;
    validate(&manifest)?;

    let mut dataset = PartitionedDataset::default();
    for e in &manifest.entries {
        let file = dir.join(&e.path);
        if !file.exists() {
            return Err(Error::MissingFile(file));
        }
        let bytes = fs::read(&file).map_err(|err| Error::io(file.display().to_string(), err))?;
        let digest = sha256_hex(&bytes);
        if digest != e.sha256 {
            return Err(Error::DigestMismatch {
                path: e.path.clone(),
                expected: e.sha256.clone(),
                actual: digest,
            });
        }
        let sample = Sample {
            image: ImageBuf::from_png_bytes(&bytes)?,
            label: e.label,
            part: e.part,
            origin: e.origin,
            source_id: e.source_id.clone(),
        };
        match e.split {
            Split::Train => dataset.train.push(sample),
            Split::Validation => dataset.validation.push(sample),
            Split::Test => dataset.test.push(sample),
        }
    }
    Ok(dataset)
}
