//! Oracles and finite-difference checkers shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stfp::numerics::{Tape, Tensor, Var};
use stfp::smiles::tokenize;
use stfp::transformer::{corpus_vocab, ModelConfig, TransformerModel};

pub fn data(name: &str) -> std::path::PathBuf {
    std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn random(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
}

/// Central finite differences of `f` around each leaf.
pub fn check_gradients(
    leaves: &[Tensor<f64>],
    f: &dyn Fn(&mut Tape<f64>, &[Var]) -> Var,
) -> Result<(), String> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = leaves.iter().map(|l| tape.leaf(l.clone())).collect();
    let loss = f(&mut tape, &vars);
    let grads = tape.backward(loss).map_err(|e| e.to_string())?;
    let eval = |ls: &[Tensor<f64>]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ls.iter().map(|l| tape.leaf(l.clone())).collect();
        let loss = f(&mut tape, &vars);
        tape.value(loss).item()
    };
    let h = 1e-4;
    for (li, leaf) in leaves.iter().enumerate() {
        let analytic = grads.wrt(vars[li]);
        for e in 0..leaf.len() {
            let mut plus = leaves.to_vec();
            plus[li].data_mut()[e] += h;
            let mut minus = leaves.to_vec();
            minus[li].data_mut()[e] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let a = analytic.data()[e];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-3);
            if rel >= 1e-4 {
                return Err(format!("leaf {li} elem {e}: analytic {a} numeric {numeric}"));
            }
        }
    }
    Ok(())
}

/// Projects `v` onto fixed random weights so every output element matters.
pub fn weighted_sum(tape: &mut Tape<f64>, v: Var, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = tape.value(v).shape().to_vec();
    let w = tape.constant(random(&mut rng, shape));
    let p = tape.mul(v, w).unwrap();
    tape.sum(p)
}

pub fn wrapped(model: &TransformerModel<f64>, smiles: &[&str]) -> Vec<Vec<u32>> {
    smiles.iter().map(|s| model.vocab().encode_wrapped(&tokenize(s).unwrap())).collect()
}

/// Loss and the ReLU sign pattern that produced it.
pub fn loss_value(model: &TransformerModel<f64>, seqs: &[Vec<u32>]) -> (f64, Vec<bool>) {
    let mut tape = Tape::new();
    let vars = model.bind(&mut tape, false);
    let loss = model.loss_on_tape(&mut tape, &vars, seqs, None).unwrap();
    (tape.value(loss).item(), tape.relu_pattern())
}

pub fn tiny(seed: u64, layers: usize, heads: usize, d: usize) -> TransformerModel<f64> {
    let smiles = ["CCO", "c1ccccc1N", "CC(=O)O"];
    let vocab = corpus_vocab(&smiles.map(String::from));
    let mut c = ModelConfig::new(0, layers, heads, d);
    c.dropout = 0.0;
    TransformerModel::new(c, vocab, seed).unwrap()
}

/// Central differences of the full reconstruction loss with respect to a
/// sample of every parameter tensor. Elements whose perturbation flips a
/// ReLU are resampled, since the loss is not differentiable across a kink;
/// a tensor with no kink-free element is skipped.
pub fn full_loss_gradient_check(model: &TransformerModel<f64>, seqs: &[Vec<u32>], seed: u64) -> Result<(), String> {
    let mut tape = Tape::new();
    let vars = model.bind(&mut tape, true);
    let loss = model.loss_on_tape(&mut tape, &vars, seqs, None).map_err(|e| e.to_string())?;
    let grads = tape.backward(loss).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-4;
    let mut covered = 0;
    for (p, name) in model.names().iter().enumerate() {
        let analytic = grads.wrt(vars[p]);
        let n = model.params()[p].len();
        let (mut checked, mut tries) = (0, 0);
        while checked < n.min(6) && tries < 100 {
            tries += 1;
            let e = rng.random_range(0..n);
            let mut plus = model.clone();
            plus.params_mut()[p].data_mut()[e] += h;
            let mut minus = model.clone();
            minus.params_mut()[p].data_mut()[e] -= h;
            let ((fp, kp), (fm, km)) = (loss_value(&plus, seqs), loss_value(&minus, seqs));
            if kp != km {
                continue;
            }
            checked += 1;
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic.data()[e];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-3);
            if rel >= 1e-4 {
                return Err(format!("{name}[{e}]: analytic {a} numeric {numeric}"));
            }
        }
        if checked > 0 {
            covered += 1;
        }
    }
    if covered * 5 < model.names().len() * 4 {
        return Err(format!("only {covered} of {} tensors had kink-free elements", model.names().len()));
    }
    Ok(())
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, by visiting every pair.
pub fn pair_count_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Step integral of the precision-recall curve traced by lowering a
/// threshold through every distinct score.
pub fn curve_walk_ap(scores: &[f64], labels: &[bool]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let total_pos = labels.iter().filter(|&&l| l).count() as f64;
    let (mut area, mut prev_recall) = (0.0, 0.0);
    for thr in thresholds {
        let called: Vec<bool> = scores.iter().map(|&s| s >= thr).collect();
        let tp = called.iter().zip(labels).filter(|(c, l)| **c && **l).count() as f64;
        let predicted = called.iter().filter(|&&c| c).count() as f64;
        let recall = tp / total_pos;
        area += (recall - prev_recall) * (tp / predicted);
        prev_recall = recall;
    }
    area
}

pub fn scored_labels(seed: u64, n: usize, levels: u32) -> (Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
    labels[0] = true;
    labels[1] = false;
    // coarse levels force ties
    let scores = labels
        .iter()
        .map(|&l| (rng.random_range(0..levels) as f64 + if l { 2.0 } else { 0.0 }) / levels as f64)
        .collect();
    (scores, labels)
}

pub fn random_problem(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect();
    let w: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 3.0).collect();
    let y = x
        .iter()
        .map(|r| 0.5 + r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + rng.random::<f64>() * 0.3)
        .collect();
    (x, y)
}

/// Plain gradient descent on `‖Xw + b − y‖² + λ‖w‖²` with step `1/L`.
pub fn ridge_gd(x: &[Vec<f64>], y: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let (n, d) = (x.len(), x[0].len());
    let frob: f64 = x.iter().flatten().map(|v| v * v).sum::<f64>() + n as f64;
    let step = 1.0 / (2.0 * (frob + lambda));
    let (mut w, mut b) = (vec![0.0; d], 0.0);
    for _ in 0..400_000 {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (r, &t) in x.iter().zip(y) {
            let e = b + r.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() - t;
            for j in 0..d {
                gw[j] += 2.0 * e * r[j];
            }
            gb += 2.0 * e;
        }
        for j in 0..d {
            w[j] -= step * (gw[j] + 2.0 * lambda * w[j]);
        }
        b -= step * gb;
    }
    (w, b)
}

pub fn ridge_objective(x: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, lambda: f64) -> f64 {
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(r, t)| (b + r.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() - t).powi(2))
        .sum();
    sse + lambda * w.iter().map(|v| v * v).sum::<f64>()
}

pub fn log_objective(x: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, lambda: f64) -> f64 {
    let n = x.len() as f64;
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(r, &t)| {
            let z = b + r.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
            let p = 1.0 / (1.0 + (-z).exp());
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    loss / n + lambda * w.iter().map(|v| v * v).sum::<f64>() / n
}

pub fn classification_problem(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (x, y) = random_problem(seed, n, d);
    let mean = y.iter().sum::<f64>() / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    // noisy labels keep the problem non-separable
    let labels = y.iter().map(|&v| if (v > mean) ^ rng.random_bool(0.15) { 1.0 } else { 0.0 }).collect();
    (x, labels)
}
