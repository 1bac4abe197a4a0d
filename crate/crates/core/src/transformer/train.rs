use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::teacher_forcing;
use super::{TransformerError, TransformerModel};
use crate::numerics::{AdamConfig, AdamState, Scalar, Tape};
use crate::smiles::{enumerate_random, parse_tokens, tokenize, MolGraph, Token, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Re-serialize every molecule from a random root and neighbor order
    /// each time it is drawn.
    pub enumerate: bool,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Stop after this many optimizer steps, even mid-epoch.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5,
            batch_size: 64,
            enumerate: true,
            seed: 0,
            adam: AdamConfig::default(),
            max_steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub epoch: usize,
    /// Optimizer steps taken so far, over all epochs.
    pub step: usize,
    /// Token-weighted mean cross-entropy over the epoch.
    pub mean_loss: f64,
    pub perplexity: f64,
    pub tokens_per_sec: f64,
    /// Corpus lines that could not be used.
    pub skipped: usize,
}

/// A molecule ready for training: its source string and, when enumeration
/// is requested, its graph.
#[derive(Debug, Clone)]
pub struct Example {
    pub smiles: String,
    pub graph: Option<MolGraph>,
}

fn wrap(vocab: &Vocab, tokens: &[Token]) -> Vec<u32> {
    vocab.encode_wrapped(tokens)
}

/// Train `model` to reconstruct each corpus molecule. `on_epoch` sees each
/// epoch's statistics as soon as it completes.
pub fn train<T: Scalar>(
    model: &mut TransformerModel<T>,
    corpus: &[String],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&TrainStats),
) -> Result<Vec<TrainStats>, TransformerError> {
    let max_len = model.config().max_seq_len;
    let mut skipped = 0;
    let mut examples = Vec::with_capacity(corpus.len());
    for s in corpus {
        let usable = tokenize(s).ok().filter(|t| t.len() + 2 <= max_len).and_then(|t| {
            let graph = parse_tokens(&t).ok()?;
            Some(Example {
                smiles: s.clone(),
                graph: cfg.enumerate.then_some(graph),
            })
        });
        match usable {
            Some(e) => examples.push(e),
            None => {
                log::warn!("skipping training line {s:?}");
                skipped += 1;
            }
        }
    }
    if examples.is_empty() {
        return Err(TransformerError::EmptyCorpus);
    }
    let batch_size = cfg.batch_size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(cfg.adam, model.params());
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut stats = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    'epochs: for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let started = Instant::now();
        let (mut loss_sum, mut tokens) = (0.0f64, 0usize);
        for chunk in order.chunks(batch_size) {
            if cfg.max_steps.is_some_and(|m| step >= m) {
                break;
            }
            let wrapped: Vec<Vec<u32>> = chunk
                .iter()
                .map(|&i| {
                    let e = &examples[i];
                    let text = match &e.graph {
                        Some(g) => {
                            let s = enumerate_random(g, &mut rng);
                            let t = tokenize(&s).expect("serialized SMILES tokenizes");
                            if t.len() + 2 <= max_len {
                                return wrap(model.vocab(), &t);
                            }
                            e.smiles.clone()
                        }
                        None => e.smiles.clone(),
                    };
                    wrap(model.vocab(), &tokenize(&text).expect("checked above"))
                })
                .collect();
            let count: usize = wrapped.iter().map(|w| w.len() - 1).sum();
            let mut tape = Tape::new();
            let vars = model.bind(&mut tape, true);
            let loss = model.loss_on_tape(&mut tape, &vars, &wrapped, Some(&mut rng))?;
            let value = tape.value(loss).item().to_f64().unwrap_or(f64::NAN);
            if !value.is_finite() {
                return Err(TransformerError::Divergence { step });
            }
            let mut grads = tape.backward(loss)?;
            let grads: Vec<_> = vars.iter().map(|&v| grads.take(v)).collect();
            drop(tape);
            if grads.iter().any(|g| !g.all_finite()) {
                return Err(TransformerError::Divergence { step });
            }
            adam.step(model.params_mut(), &grads);
            step += 1;
            loss_sum += value * count as f64;
            tokens += count;
        }
        if tokens == 0 {
            break 'epochs;
        }
        let mean_loss = loss_sum / tokens as f64;
        let s = TrainStats {
            epoch,
            step,
            mean_loss,
            perplexity: mean_loss.exp(),
            tokens_per_sec: tokens as f64 / started.elapsed().as_secs_f64().max(1e-9),
            skipped,
        };
        on_epoch(&s);
        stats.push(s);
    }
    Ok(stats)
}

/// `exp` of the mean per-token cross-entropy of teacher-forced
/// reconstruction, without dropout or enumeration.
pub fn perplexity<T: Scalar>(
    model: &TransformerModel<T>,
    corpus: &[String],
    batch_size: usize,
) -> Result<f64, TransformerError> {
    let max_len = model.config().max_seq_len;
    let wrapped: Vec<Vec<u32>> = corpus
        .iter()
        .filter_map(|s| tokenize(s).ok())
        .filter(|t| t.len() + 2 <= max_len)
        .map(|t| wrap(model.vocab(), &t))
        .collect();
    if wrapped.is_empty() {
        return Err(TransformerError::EmptyCorpus);
    }
    let v = model.config().vocab_size;
    let (mut nll, mut count) = (0.0f64, 0usize);
    for chunk in wrapped.chunks(batch_size.max(1)) {
        let (src, tgt, targets, pad) = teacher_forcing(chunk);
        let logits = model.decode(&src, &tgt)?;
        for (r, (&t, &p)) in targets.iter().zip(&pad).enumerate() {
            if p {
                continue;
            }
            let row: Vec<f64> = logits.row(r).iter().map(|x| x.to_f64().unwrap()).collect();
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            debug_assert_eq!(row.len(), v);
            nll += lse - row[t as usize];
            count += 1;
        }
    }
    Ok((nll / count as f64).exp())
}

/// Vocabulary over every token of the parseable corpus lines, plus the
/// ring-closure digits that enumerated strings may need.
pub fn corpus_vocab(corpus: &[String]) -> Vocab {
    let mut tokens: Vec<Token> = (1..=9).map(|d| Token::new(d.to_string())).collect();
    for s in corpus {
        if let Ok(t) = tokenize(s) {
            tokens.extend(t);
        }
    }
    Vocab::build(&tokens)
}
