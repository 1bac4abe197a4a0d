//! Encoder-decoder Transformer autoencoder over SMILES tokens.

mod checkpoint;
mod model;
mod train;

use serde::{Deserialize, Serialize};

use crate::numerics::{NumericsError, Scalar, Tensor};
use crate::smiles::SmilesError;

pub use checkpoint::{blob_path, load_checkpoint, save_checkpoint, CheckpointError, TensorEntry, FORMAT_VERSION};
pub use model::{Batch, TransformerModel};
pub use train::{corpus_vocab, perplexity, train, Example, TrainConfig, TrainStats};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub max_seq_len: usize,
    pub vocab_size: usize,
    pub dropout: f64,
}

impl ModelConfig {
    /// `d_ff = 4 * d_model`, 256-token limit, dropout 0.1.
    pub fn new(vocab_size: usize, n_layers: usize, n_heads: usize, d_model: usize) -> ModelConfig {
        ModelConfig {
            n_layers,
            n_heads,
            d_model,
            d_ff: 4 * d_model,
            max_seq_len: 256,
            vocab_size,
            dropout: 0.1,
        }
    }

    /// Four blocks of four heads over 256 dimensions.
    pub fn full_size(vocab_size: usize) -> ModelConfig {
        ModelConfig::new(vocab_size, 4, 4, 256)
    }

    pub fn validate(&self) -> Result<(), TransformerError> {
        let bad = |m: &str| Err(TransformerError::InvalidConfig(m.to_string()));
        if self.n_layers == 0 || self.n_heads == 0 || self.d_model == 0 || self.d_ff == 0 {
            return bad("layer, head and width counts must be positive");
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return bad("d_model must be divisible by n_heads");
        }
        if !self.d_model.is_multiple_of(2) {
            return bad("d_model must be even for the positional encoding");
        }
        if self.max_seq_len < 3 {
            return bad("max_seq_len must be at least 3");
        }
        if self.vocab_size < 5 {
            return bad("vocabulary needs at least one non-reserved token");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TransformerError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("sequence of {len} tokens exceeds the limit of {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("token id {id} outside vocabulary of {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("training diverged (non-finite loss) at step {step}")]
    Divergence { step: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Smiles(#[from] SmilesError),
}

/// Sinusoidal encoding: `PE[p,2i] = sin(p / 10000^(2i/d))`, `PE[p,2i+1] = cos(..)`.
pub fn positional_encoding<T: Scalar>(length: usize, d_model: usize) -> Tensor<T> {
    assert!(d_model.is_multiple_of(2), "d_model must be even");
    let mut data = Vec::with_capacity(length * d_model);
    for p in 0..length {
        for i in 0..d_model / 2 {
            let angle = p as f64 / 10000f64.powf(2.0 * i as f64 / d_model as f64);
            data.push(T::of(angle.sin()));
            data.push(T::of(angle.cos()));
        }
    }
    Tensor::new(vec![length, d_model], data)
}
