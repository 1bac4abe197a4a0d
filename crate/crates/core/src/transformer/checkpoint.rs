//! Two-file checkpoints: a JSON manifest next to a blob of little-endian
//! `f32` values.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ModelConfig, TransformerError, TransformerModel};
use crate::numerics::Tensor;
use crate::smiles::Vocab;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: usize,
    /// Byte length in the blob.
    pub length: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    config: ModelConfig,
    vocab: Vocab,
    blob: String,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("checkpoint format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("tensor {name}: manifest shape {found:?} does not match expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("manifest layout error: {0}")]
    Layout(String),
    #[error("blob holds {found} bytes, manifest needs {expected}")]
    Truncated { expected: usize, found: usize },
    #[error(transparent)]
    Model(#[from] TransformerError),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Blob path paired with a manifest path.
pub fn blob_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

/// Write `<path>` (manifest) and `<path>.bin` (blob, sibling with the
/// extension replaced).
pub fn save_checkpoint(model: &TransformerModel<f32>, path: &Path) -> Result<(), CheckpointError> {
    let blob = blob_path(path);
    let mut bytes = Vec::with_capacity(model.param_count() * 4);
    let mut tensors = Vec::with_capacity(model.params().len());
    for (name, t) in model.names().iter().zip(model.params()) {
        let offset = bytes.len();
        for v in t.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        tensors.push(TensorEntry {
            name: name.clone(),
            shape: t.shape().to_vec(),
            offset,
            length: bytes.len() - offset,
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        config: *model.config(),
        vocab: model.vocab().clone(),
        blob: blob
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        tensors,
    };
    fs::write(&blob, &bytes).map_err(io(&blob))?;
    fs::write(path, serde_json::to_string_pretty(&manifest)?).map_err(io(path))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<TransformerModel<f32>, CheckpointError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(CheckpointError::Version {
            found: manifest.format_version,
            expected: FORMAT_VERSION,
        });
    }
    manifest.config.validate()?;
    let blob = path.with_file_name(&manifest.blob);
    let bytes = fs::read(&blob).map_err(io(&blob))?;
    let expected = TransformerModel::<f32>::tensor_specs(&manifest.config);
    if expected.len() != manifest.tensors.len() {
        return Err(CheckpointError::Layout(format!(
            "{} tensors listed, configuration implies {}",
            manifest.tensors.len(),
            expected.len()
        )));
    }
    let mut cursor = 0;
    let mut params = Vec::with_capacity(expected.len());
    for (entry, (name, shape)) in manifest.tensors.iter().zip(&expected) {
        if &entry.name != name {
            return Err(CheckpointError::Layout(format!("expected tensor {name}, found {}", entry.name)));
        }
        if &entry.shape != shape {
            return Err(CheckpointError::ShapeMismatch {
                name: name.clone(),
                expected: shape.clone(),
                found: entry.shape.clone(),
            });
        }
        let n: usize = shape.iter().product();
        if entry.length != n * 4 || entry.offset != cursor {
            return Err(CheckpointError::Layout(format!(
                "tensor {name} occupies bytes {}..{}, expected {cursor}..{}",
                entry.offset,
                entry.offset + entry.length,
                cursor + n * 4
            )));
        }
        cursor += entry.length;
        if bytes.len() < cursor {
            return Err(CheckpointError::Truncated {
                expected: manifest.tensors.iter().map(|t| t.length).sum(),
                found: bytes.len(),
            });
        }
        let data = bytes[entry.offset..cursor]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        params.push(Tensor::new(shape.clone(), data));
    }
    if bytes.len() != cursor {
        return Err(CheckpointError::Layout(format!(
            "blob has {} trailing bytes",
            bytes.len() - cursor
        )));
    }
    Ok(TransformerModel::from_parts(manifest.config, manifest.vocab, params)?)
}
