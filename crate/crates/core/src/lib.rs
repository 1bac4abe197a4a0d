//! Molecular fingerprints from a SMILES-pretrained Transformer autoencoder,
//! an ECFP baseline, and a data-efficiency benchmarking harness.

pub mod eval;
pub mod fingerprints;
pub mod hash;
pub mod numerics;
pub mod predictors;
pub mod smiles;
pub mod transformer;
