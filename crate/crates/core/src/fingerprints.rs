//! Molecule-level vectors: pooled encoder fingerprints, ECFP bit vectors and a
//! token-count random projection.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hash::Fnv1a;
use crate::smiles::{tokenize, MolGraph, SmilesError};
use crate::transformer::{Batch, TransformerError, TransformerModel};

#[derive(Debug, thiserror::Error)]
pub enum FingerprintError {
    #[error(transparent)]
    Smiles(#[from] SmilesError),
    #[error(transparent)]
    Model(#[from] TransformerError),
}

/// Pool the per-layer encoder outputs of sequence `b` of a batch:
/// mean and max of the last layer over non-PAD positions, then the first
/// position of the last and of the penultimate layer.
fn pool(outputs: &[crate::numerics::Tensor<f32>], batch: &Batch, b: usize, d: usize) -> Vec<f32> {
    let last = outputs.last().expect("at least one layer").data();
    let penultimate = outputs[outputs.len().saturating_sub(2)].data();
    let rows: Vec<usize> = (0..batch.len)
        .filter(|&p| !batch.is_pad(b, p))
        .map(|p| b * batch.len + p)
        .collect();
    let mut mean = vec![0.0f32; d];
    let mut max = vec![f32::NEG_INFINITY; d];
    for &r in &rows {
        for j in 0..d {
            let v = last[r * d + j];
            mean[j] += v;
            max[j] = max[j].max(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows.len() as f32);
    let first = b * batch.len * d;
    let mut out = Vec::with_capacity(4 * d);
    out.extend_from_slice(&mean);
    out.extend_from_slice(&max);
    out.extend_from_slice(&last[first..first + d]);
    out.extend_from_slice(&penultimate[first..first + d]);
    out
}

/// The `4 * d_model` pooled encoder fingerprint of one molecule.
pub fn st_fingerprint(model: &TransformerModel<f32>, smiles: &str) -> Result<Vec<f32>, FingerprintError> {
    let ids = model.vocab().encode_wrapped(&tokenize(smiles)?);
    let batch = Batch::from_sequences(&[ids]);
    let outputs = model.encode(&batch)?;
    Ok(pool(&outputs, &batch, 0, model.config().d_model))
}

/// Fingerprints for many molecules, encoded `batch_size` at a time.
/// Results agree bit for bit with [`st_fingerprint`] on each molecule.
pub fn st_fingerprints(
    model: &TransformerModel<f32>,
    smiles: &[String],
    batch_size: usize,
) -> Vec<Result<Vec<f32>, FingerprintError>> {
    let d = model.config().d_model;
    let encoded: Vec<Result<Vec<u32>, FingerprintError>> = smiles
        .iter()
        .map(|s| {
            let ids = model.vocab().encode_wrapped(&tokenize(s)?);
            if ids.len() > model.config().max_seq_len {
                return Err(TransformerError::SequenceTooLong {
                    len: ids.len(),
                    max: model.config().max_seq_len,
                }
                .into());
            }
            Ok(ids)
        })
        .collect();
    // group similar lengths together to limit padding work
    let mut order: Vec<usize> = (0..smiles.len()).filter(|&i| encoded[i].is_ok()).collect();
    order.sort_by_key(|&i| encoded[i].as_ref().map_or(0, Vec::len));
    let chunks: Vec<&[usize]> = order.chunks(batch_size.max(1)).collect();
    let run = |chunk: &&[usize]| -> Result<Vec<(usize, Vec<f32>)>, TransformerError> {
        let seqs: Vec<&[u32]> = chunk.iter().map(|&i| encoded[i].as_ref().unwrap().as_slice()).collect();
        let batch = Batch::from_sequences(&seqs);
        let outputs = model.encode(&batch)?;
        Ok(chunk.iter().enumerate().map(|(b, &i)| (i, pool(&outputs, &batch, b, d))).collect())
    };
    #[cfg(feature = "parallel")]
    let pooled: Vec<_> = {
        use rayon::prelude::*;
        chunks.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let pooled: Vec<_> = chunks.iter().map(run).collect();

    let mut out: Vec<Option<Result<Vec<f32>, FingerprintError>>> = encoded
        .into_iter()
        .map(|e| match e {
            Ok(_) => None,
            Err(err) => Some(Err(err)),
        })
        .collect();
    for (chunk, result) in chunks.iter().zip(pooled) {
        match result {
            Ok(rows) => {
                for (i, fp) in rows {
                    out[i] = Some(Ok(fp));
                }
            }
            Err(e) => {
                let msg = e.to_string();
                for &i in *chunk {
                    out[i] = Some(Err(TransformerError::InvalidConfig(msg.clone()).into()));
                }
            }
        }
    }
    out.into_iter().map(|o| o.expect("every row filled")).collect()
}

/// Fixed-length presence vector of hashed circular substructures.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EcfpFingerprint {
    words: Vec<u64>,
    n_bits: usize,
    pub diameter: u32,
}

impl EcfpFingerprint {
    pub fn len(&self) -> usize {
        self.n_bits
    }

    pub fn is_empty(&self) -> bool {
        self.n_bits == 0
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_bits).filter(|&i| self.get(i))
    }

    /// One hex digit per four bits; digit `k` holds bits `4k..4k+4` with bit
    /// `4k` as its least significant.
    pub fn to_hex(&self) -> String {
        (0..self.n_bits.div_ceil(4))
            .map(|k| {
                let nibble = (0..4)
                    .filter(|&j| 4 * k + j < self.n_bits && self.get(4 * k + j))
                    .fold(0u32, |acc, j| acc | 1 << j);
                char::from_digit(nibble, 16).unwrap()
            })
            .collect()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        (0..self.n_bits).map(|i| if self.get(i) { 1.0 } else { 0.0 }).collect()
    }
}

/// Extended-connectivity fingerprint with `diameter / 2` refinement rounds,
/// every identifier folded into `n_bits`.
pub fn ecfp(graph: &MolGraph, diameter: u32, n_bits: usize) -> EcfpFingerprint {
    assert!(n_bits > 0, "n_bits must be positive");
    let mut fp = EcfpFingerprint {
        words: vec![0; n_bits.div_ceil(64)],
        n_bits,
        diameter,
    };
    let in_ring = graph.ring_atoms();
    let mut ids: Vec<u64> = (0..graph.atom_count())
        .map(|i| {
            let a = &graph.atoms()[i];
            let mut h = Fnv1a::new();
            h.write_u8(a.element.atomic_number());
            h.write_u8(graph.degree(i) as u8);
            h.write_u8(graph.implicit_hydrogens(i));
            h.write_i8(a.formal_charge);
            h.write_u8(a.aromatic as u8);
            h.write_u8(in_ring[i] as u8);
            h.finish()
        })
        .collect();
    for &id in &ids {
        fp.set((id % n_bits as u64) as usize);
    }
    for _ in 0..diameter / 2 {
        ids = (0..graph.atom_count())
            .map(|i| {
                let mut env: Vec<(u8, u64)> = graph
                    .neighbors(i)
                    .iter()
                    .map(|&(w, b)| (graph.bonds()[b].order.code(), ids[w]))
                    .collect();
                env.sort_unstable();
                let mut h = Fnv1a::new();
                h.write_u64(ids[i]);
                for (code, id) in env {
                    h.write_u8(code);
                    h.write_u64(id);
                }
                h.finish()
            })
            .collect();
        for &id in &ids {
            fp.set((id % n_bits as u64) as usize);
        }
    }
    fp
}

/// Random projection of the token-count vector: each distinct token owns a
/// seeded pseudo-random direction, weighted by its count.
pub fn random_projection_fingerprint(smiles: &str, seed: u64, dims: usize) -> Result<Vec<f64>, SmilesError> {
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    for t in tokenize(smiles)? {
        *counts.entry(t.as_str().to_string()).or_default() += 1;
    }
    let mut out = vec![0.0; dims];
    for (token, count) in counts {
        let mut h = Fnv1a::new();
        h.write_u64(seed);
        h.write(token.as_bytes());
        let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
        for o in out.iter_mut() {
            *o += count as f64 * (rng.random::<f64>() * 2.0 - 1.0);
        }
    }
    Ok(out)
}
