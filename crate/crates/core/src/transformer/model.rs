use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{positional_encoding, ModelConfig, TransformerError};
use crate::numerics::{Scalar, Tape, Tensor, Var};
use crate::smiles::{Vocab, PAD};

/// Right-padded id sequences stored row-major as `[batch, len]`, with a
/// padding mask that is authoritative regardless of the ids in padded slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub ids: Vec<u32>,
    pub pad: Vec<bool>,
    pub batch: usize,
    pub len: usize,
}

impl Batch {
    pub fn from_sequences<S: AsRef<[u32]>>(seqs: &[S]) -> Batch {
        Batch::padded(seqs, seqs.iter().map(|s| s.as_ref().len()).max().unwrap_or(0))
    }

    /// Pads every sequence to exactly `len` (which must cover the longest).
    pub fn padded<S: AsRef<[u32]>>(seqs: &[S], len: usize) -> Batch {
        let mut ids = Vec::with_capacity(seqs.len() * len);
        let mut pad = Vec::with_capacity(seqs.len() * len);
        for s in seqs {
            let s = s.as_ref();
            assert!(s.len() <= len, "sequence longer than the padded length");
            ids.extend_from_slice(s);
            ids.extend(std::iter::repeat_n(PAD, len - s.len()));
            pad.extend(std::iter::repeat_n(false, s.len()));
            pad.extend(std::iter::repeat_n(true, len - s.len()));
        }
        Batch {
            ids,
            pad,
            batch: seqs.len(),
            len,
        }
    }

    pub fn is_pad(&self, b: usize, p: usize) -> bool {
        self.pad[b * self.len + p]
    }

    pub fn sequence(&self, b: usize) -> &[u32] {
        &self.ids[b * self.len..(b + 1) * self.len]
    }
}

#[derive(Debug, Clone, Copy)]
struct Attn {
    wq: usize,
    bq: usize,
    wk: usize,
    bk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    gain: usize,
    bias: usize,
}

#[derive(Debug, Clone, Copy)]
struct Ffn {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone, Copy)]
struct EncoderLayer {
    attn: Attn,
    norm1: Norm,
    ffn: Ffn,
    norm2: Norm,
}

#[derive(Debug, Clone, Copy)]
struct DecoderLayer {
    self_attn: Attn,
    norm1: Norm,
    cross_attn: Attn,
    norm2: Norm,
    ffn: Ffn,
    norm3: Norm,
}

#[derive(Debug, Clone)]
struct Layout {
    embed: usize,
    encoder: Vec<EncoderLayer>,
    decoder: Vec<DecoderLayer>,
    out_w: usize,
    out_b: usize,
}

#[derive(Clone, Copy)]
enum Init {
    /// Uniform with bound `sqrt(6 / (fan_in + fan_out))`.
    Xavier,
    /// Uniform with variance `1 / d_model`.
    Embedding,
    Zeros,
    Ones,
}

struct Spec {
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    inits: Vec<Init>,
}

impl Spec {
    fn add(&mut self, name: String, shape: Vec<usize>, init: Init) -> usize {
        self.names.push(name);
        self.shapes.push(shape);
        self.inits.push(init);
        self.names.len() - 1
    }

    fn attn(&mut self, prefix: &str, d: usize) -> Attn {
        let mut w = |n: &str| self.add(format!("{prefix}.{n}"), vec![d, d], Init::Xavier);
        let (wq, wk, wv, wo) = (w("wq"), w("wk"), w("wv"), w("wo"));
        let mut b = |n: &str| self.add(format!("{prefix}.{n}"), vec![d], Init::Zeros);
        Attn {
            wq,
            bq: b("bq"),
            wk,
            bk: b("bk"),
            wv,
            bv: b("bv"),
            wo,
            bo: b("bo"),
        }
    }

    fn norm(&mut self, prefix: &str, d: usize) -> Norm {
        Norm {
            gain: self.add(format!("{prefix}.gain"), vec![d], Init::Ones),
            bias: self.add(format!("{prefix}.bias"), vec![d], Init::Zeros),
        }
    }

    fn ffn(&mut self, prefix: &str, d: usize, d_ff: usize) -> Ffn {
        Ffn {
            w1: self.add(format!("{prefix}.w1"), vec![d, d_ff], Init::Xavier),
            b1: self.add(format!("{prefix}.b1"), vec![d_ff], Init::Zeros),
            w2: self.add(format!("{prefix}.w2"), vec![d_ff, d], Init::Xavier),
            b2: self.add(format!("{prefix}.b2"), vec![d], Init::Zeros),
        }
    }
}

fn layout(c: &ModelConfig) -> (Layout, Spec) {
    let mut s = Spec {
        names: Vec::new(),
        shapes: Vec::new(),
        inits: Vec::new(),
    };
    let d = c.d_model;
    let embed = s.add("embedding".into(), vec![c.vocab_size, d], Init::Embedding);
    let encoder = (0..c.n_layers)
        .map(|l| EncoderLayer {
            attn: s.attn(&format!("encoder.{l}.self_attn"), d),
            norm1: s.norm(&format!("encoder.{l}.norm1"), d),
            ffn: s.ffn(&format!("encoder.{l}.ffn"), d, c.d_ff),
            norm2: s.norm(&format!("encoder.{l}.norm2"), d),
        })
        .collect();
    let decoder = (0..c.n_layers)
        .map(|l| DecoderLayer {
            self_attn: s.attn(&format!("decoder.{l}.self_attn"), d),
            norm1: s.norm(&format!("decoder.{l}.norm1"), d),
            cross_attn: s.attn(&format!("decoder.{l}.cross_attn"), d),
            norm2: s.norm(&format!("decoder.{l}.norm2"), d),
            ffn: s.ffn(&format!("decoder.{l}.ffn"), d, c.d_ff),
            norm3: s.norm(&format!("decoder.{l}.norm3"), d),
        })
        .collect();
    let out_w = s.add("output.w".into(), vec![d, c.vocab_size], Init::Xavier);
    let out_b = s.add("output.b".into(), vec![c.vocab_size], Init::Zeros);
    (
        Layout {
            embed,
            encoder,
            decoder,
            out_w,
            out_b,
        },
        s,
    )
}

/// Encoder-decoder weights together with the vocabulary they were trained on.
#[derive(Debug, Clone)]
pub struct TransformerModel<T = f32> {
    config: ModelConfig,
    vocab: Vocab,
    names: Vec<String>,
    params: Vec<Tensor<T>>,
    layout: Layout,
}

impl<T: Scalar> TransformerModel<T> {
    /// Randomly initialized model; `config.vocab_size` is taken from `vocab`.
    pub fn new(mut config: ModelConfig, vocab: Vocab, seed: u64) -> Result<Self, TransformerError> {
        config.vocab_size = vocab.len();
        config.validate()?;
        let (layout, spec) = layout(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = spec
            .shapes
            .iter()
            .zip(&spec.inits)
            .map(|(shape, init)| {
                let n: usize = shape.iter().product();
                let bound = match init {
                    Init::Xavier => (6.0 / (shape[0] + shape[1]) as f64).sqrt(),
                    Init::Embedding => (3.0 / config.d_model as f64).sqrt(),
                    Init::Zeros => return Tensor::zeros(shape.clone()),
                    Init::Ones => return Tensor::full(shape.clone(), T::one()),
                };
                let data = (0..n).map(|_| T::of(rng.random_range(-bound..bound))).collect();
                Tensor::new(shape.clone(), data)
            })
            .collect();
        Ok(TransformerModel {
            config,
            vocab,
            names: spec.names,
            params,
            layout,
        })
    }

    /// Assemble a model from named tensors in layout order.
    pub fn from_parts(
        config: ModelConfig,
        vocab: Vocab,
        params: Vec<Tensor<T>>,
    ) -> Result<Self, TransformerError> {
        config.validate()?;
        if config.vocab_size != vocab.len() {
            return Err(TransformerError::InvalidConfig(format!(
                "vocab_size {} but vocabulary has {} entries",
                config.vocab_size,
                vocab.len()
            )));
        }
        let (layout, spec) = layout(&config);
        if params.len() != spec.shapes.len() {
            return Err(TransformerError::InvalidConfig(format!(
                "expected {} tensors, got {}",
                spec.shapes.len(),
                params.len()
            )));
        }
        for ((p, s), n) in params.iter().zip(&spec.shapes).zip(&spec.names) {
            if p.shape() != s.as_slice() {
                return Err(TransformerError::InvalidConfig(format!(
                    "tensor {n} has shape {:?}, expected {s:?}",
                    p.shape()
                )));
            }
        }
        Ok(TransformerModel {
            config,
            vocab,
            names: spec.names,
            params,
            layout,
        })
    }

    /// Names and shapes of every tensor in layout order.
    pub fn tensor_specs(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
        let (_, spec) = layout(config);
        spec.names.into_iter().zip(spec.shapes).collect()
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> TransformerModel<U> {
        TransformerModel {
            config: self.config,
            vocab: self.vocab.clone(),
            names: self.names.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
            layout: self.layout.clone(),
        }
    }

    /// Index ranges of parameters grouped by layer name prefix
    /// (`embedding`, `encoder.0`, ..., `decoder.0`, ..., `output`).
    pub fn layer_groups(&self) -> Vec<(String, Vec<usize>)> {
        let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
        for (i, n) in self.names.iter().enumerate() {
            let parts: Vec<&str> = n.split('.').collect();
            let key = if parts[0] == "encoder" || parts[0] == "decoder" {
                format!("{}.{}", parts[0], parts[1])
            } else {
                parts[0].to_string()
            };
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, v)) => v.push(i),
                None => groups.push((key, vec![i])),
            }
        }
        groups
    }

    fn check(&self, batch: &Batch) -> Result<(), TransformerError> {
        if batch.len > self.config.max_seq_len {
            return Err(TransformerError::SequenceTooLong {
                len: batch.len,
                max: self.config.max_seq_len,
            });
        }
        if let Some(&id) = batch.ids.iter().find(|&&id| id as usize >= self.config.vocab_size) {
            return Err(TransformerError::TokenOutOfRange {
                id,
                vocab: self.config.vocab_size,
            });
        }
        Ok(())
    }

    /// Place every parameter on `tape`, as leaves when `trainable`.
    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| {
                if trainable {
                    tape.leaf(p.clone())
                } else {
                    tape.constant(p.clone())
                }
            })
            .collect()
    }

    fn embed(
        &self,
        tape: &mut Tape<T>,
        vars: &[Var],
        batch: &Batch,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> Result<Var, TransformerError> {
        let d = self.config.d_model;
        let e = tape.gather(vars[self.layout.embed], &batch.ids)?;
        let e = tape.scale(e, T::of((d as f64).sqrt()));
        let pe = positional_encoding::<T>(batch.len, d);
        let tiled: Vec<T> = (0..batch.batch).flat_map(|_| pe.data().iter().copied()).collect();
        let pe = tape.constant(Tensor::new(vec![batch.batch * batch.len, d], tiled));
        let x = tape.add(e, pe)?;
        Ok(self.dropout(tape, x, rng))
    }

    fn dropout(&self, tape: &mut Tape<T>, x: Var, rng: &mut Option<&mut ChaCha8Rng>) -> Var {
        match rng {
            Some(r) => tape.dropout(x, self.config.dropout, *r),
            None => x,
        }
    }

    fn linear(&self, tape: &mut Tape<T>, vars: &[Var], x: Var, w: usize, b: usize) -> Result<Var, TransformerError> {
        let y = tape.matmul(x, vars[w])?;
        Ok(tape.add_bias(y, vars[b])?)
    }

    #[allow(clippy::too_many_arguments)]
    fn attention(
        &self,
        tape: &mut Tape<T>,
        vars: &[Var],
        a: &Attn,
        xq: Var,
        xkv: Var,
        batch: usize,
        mask: Arc<[bool]>,
    ) -> Result<Var, TransformerError> {
        let h = self.config.n_heads;
        let dh = self.config.d_model / h;
        let q = self.linear(tape, vars, xq, a.wq, a.bq)?;
        let k = self.linear(tape, vars, xkv, a.wk, a.bk)?;
        let v = self.linear(tape, vars, xkv, a.wv, a.bv)?;
        let q = tape.split_heads(q, batch, h)?;
        let k = tape.split_heads(k, batch, h)?;
        let v = tape.split_heads(v, batch, h)?;
        let scores = tape.batch_matmul(q, k, true)?;
        let scores = tape.scale(scores, T::of(1.0 / (dh as f64).sqrt()));
        let weights = tape.softmax_rows(scores, Some(mask))?;
        let o = tape.batch_matmul(weights, v, false)?;
        let o = tape.merge_heads(o, batch)?;
        self.linear(tape, vars, o, a.wo, a.bo)
    }

    fn add_norm(
        &self,
        tape: &mut Tape<T>,
        vars: &[Var],
        x: Var,
        sub: Var,
        n: &Norm,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> Result<Var, TransformerError> {
        let sub = self.dropout(tape, sub, rng);
        let r = tape.add(x, sub)?;
        Ok(tape.layer_norm(r, vars[n.gain], vars[n.bias])?)
    }

    fn feed_forward(&self, tape: &mut Tape<T>, vars: &[Var], x: Var, f: &Ffn) -> Result<Var, TransformerError> {
        let h = self.linear(tape, vars, x, f.w1, f.b1)?;
        let h = tape.relu(h);
        self.linear(tape, vars, h, f.w2, f.b2)
    }

    /// Attention mask of shape `[batch*heads, tq, tk]`.
    fn mask(&self, batch: usize, tq: usize, tk: usize, allowed: impl Fn(usize, usize, usize) -> bool) -> Arc<[bool]> {
        let h = self.config.n_heads;
        let mut m = Vec::with_capacity(batch * h * tq * tk);
        for b in 0..batch {
            let block: Vec<bool> = (0..tq * tk).map(|i| allowed(b, i / tk, i % tk)).collect();
            for _ in 0..h {
                m.extend_from_slice(&block);
            }
        }
        Arc::from(m)
    }

    /// Encoder stack on the tape; returns each layer's output `[batch*len, d_model]`.
    pub fn encode_on_tape(
        &self,
        tape: &mut Tape<T>,
        vars: &[Var],
        src: &Batch,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Vec<Var>, TransformerError> {
        self.check(src)?;
        let mask = self.mask(src.batch, src.len, src.len, |b, _, j| !src.is_pad(b, j));
        let mut x = self.embed(tape, vars, src, &mut rng)?;
        let mut outputs = Vec::with_capacity(self.config.n_layers);
        for layer in &self.layout.encoder {
            let a = self.attention(tape, vars, &layer.attn, x, x, src.batch, mask.clone())?;
            x = self.add_norm(tape, vars, x, a, &layer.norm1, &mut rng)?;
            let f = self.feed_forward(tape, vars, x, &layer.ffn)?;
            x = self.add_norm(tape, vars, x, f, &layer.norm2, &mut rng)?;
            outputs.push(x);
        }
        Ok(outputs)
    }

    /// Teacher-forced decoder on the tape; returns logits `[batch*len, vocab]`.
    pub fn decode_on_tape(
        &self,
        tape: &mut Tape<T>,
        vars: &[Var],
        tgt: &Batch,
        memory: Var,
        src: &Batch,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Var, TransformerError> {
        self.check(tgt)?;
        if tgt.batch != src.batch {
            return Err(TransformerError::InvalidConfig("source and target batch sizes differ".into()));
        }
        let self_mask = self.mask(tgt.batch, tgt.len, tgt.len, |b, i, j| j <= i && !tgt.is_pad(b, j));
        let cross_mask = self.mask(tgt.batch, tgt.len, src.len, |b, _, j| !src.is_pad(b, j));
        let mut y = self.embed(tape, vars, tgt, &mut rng)?;
        for layer in &self.layout.decoder {
            let a = self.attention(tape, vars, &layer.self_attn, y, y, tgt.batch, self_mask.clone())?;
            y = self.add_norm(tape, vars, y, a, &layer.norm1, &mut rng)?;
            let c = self.attention(tape, vars, &layer.cross_attn, y, memory, tgt.batch, cross_mask.clone())?;
            y = self.add_norm(tape, vars, y, c, &layer.norm2, &mut rng)?;
            let f = self.feed_forward(tape, vars, y, &layer.ffn)?;
            y = self.add_norm(tape, vars, y, f, &layer.norm3, &mut rng)?;
        }
        self.linear(tape, vars, y, self.layout.out_w, self.layout.out_b)
    }

    /// Mean cross-entropy of reconstructing each wrapped sequence `[BOS, .., EOS]`.
    pub fn loss_on_tape(
        &self,
        tape: &mut Tape<T>,
        vars: &[Var],
        wrapped: &[Vec<u32>],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Var, TransformerError> {
        let (src, tgt, targets, tgt_pad) = teacher_forcing(wrapped);
        let enc = self.encode_on_tape(tape, vars, &src, rng.as_deref_mut())?;
        let memory = *enc.last().expect("at least one layer");
        let logits = self.decode_on_tape(tape, vars, &tgt, memory, &src, rng)?;
        let include: Vec<bool> = tgt_pad.iter().map(|&p| !p).collect();
        Ok(tape.cross_entropy(logits, &targets, &include)?)
    }

    /// Per-layer encoder outputs for a batch, each `[batch*len, d_model]`.
    pub fn encode(&self, src: &Batch) -> Result<Vec<Tensor<T>>, TransformerError> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape, false);
        let outs = self.encode_on_tape(&mut tape, &vars, src, None)?;
        Ok(outs.into_iter().map(|v| tape.value(v).clone()).collect())
    }

    /// Teacher-forced logits `[batch*len, vocab]` for decoder inputs `tgt`
    /// given source sequences `src`.
    pub fn decode(&self, src: &Batch, tgt: &Batch) -> Result<Tensor<T>, TransformerError> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape, false);
        let enc = self.encode_on_tape(&mut tape, &vars, src, None)?;
        let logits = self.decode_on_tape(&mut tape, &vars, tgt, *enc.last().unwrap(), src, None)?;
        Ok(tape.value(logits).clone())
    }
}

/// Split wrapped sequences into encoder input, decoder input (without the
/// final token) and flattened targets (without BOS) with their padding mask,
/// all right-padded.
pub(crate) fn teacher_forcing(wrapped: &[Vec<u32>]) -> (Batch, Batch, Vec<u32>, Vec<bool>) {
    let src = Batch::from_sequences(wrapped);
    let dec_in: Vec<&[u32]> = wrapped.iter().map(|s| &s[..s.len() - 1]).collect();
    let dec_out: Vec<&[u32]> = wrapped.iter().map(|s| &s[1..]).collect();
    let tgt = Batch::from_sequences(&dec_in);
    let out = Batch::padded(&dec_out, tgt.len);
    (src, tgt, out.ids, out.pad)
}
