use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, EvalError};
use crate::hash::Fnv1a;

/// Disjoint train and test row indices, each listed in canonical row order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Split seed for `(base, fraction, trial)`: FNV-1a over the base seed, the
/// fraction's bit pattern and the trial number, all little-endian.
pub fn cell_seed(base: u64, fraction: f64, trial: u64) -> u64 {
    let mut h = Fnv1a::new();
    h.write_u64(base);
    h.write_f64(fraction);
    h.write_u64(trial);
    h.finish()
}

/// Random train/test split with `round(fraction * n)` training rows.
/// Stratification uses the first task's label, with missing labels forming
/// a stratum of their own, and allots per-stratum quotas by largest
/// remainder.
pub fn make_split(dataset: &Dataset, fraction: f64, stratified: bool, seed: u64) -> Result<Split, EvalError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(EvalError::BadFraction(fraction));
    }
    let order = dataset.canonical_order();
    let n = order.len();
    let m = (fraction * n as f64).round() as usize;
    if m < 2 || m >= n {
        return Err(EvalError::TooFewRows {
            needed: 2,
            rows: n,
            fraction,
            train: m,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // positions into `order`
    let mut in_train = vec![false; n];
    if stratified {
        let stratum = |pos: usize| match dataset.rows[order[pos]].labels[0] {
            Some(v) if v > 0.5 => 1usize,
            Some(_) => 0,
            None => 2,
        };
        let mut groups: [Vec<usize>; 3] = Default::default();
        for pos in 0..n {
            groups[stratum(pos)].push(pos);
        }
        let mut quota: Vec<usize> = groups.iter().map(|g| m * g.len() / n).collect();
        let mut by_remainder: Vec<usize> = (0..3).collect();
        by_remainder.sort_by_key(|&k| (std::cmp::Reverse(m * groups[k].len() % n), k));
        let short = m - quota.iter().sum::<usize>();
        for &k in by_remainder.iter().take(short) {
            quota[k] += 1;
        }
        for (k, g) in groups.iter_mut().enumerate() {
            if k < 2 && !g.is_empty() && quota[k] == 0 {
                return Err(EvalError::TooFewPerClass {
                    fraction,
                    class: k as u8,
                });
            }
            g.shuffle(&mut rng);
            for &pos in &g[..quota[k]] {
                in_train[pos] = true;
            }
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        for &pos in &all[..m] {
            in_train[pos] = true;
        }
    }
    let (mut train, mut test) = (Vec::with_capacity(m), Vec::with_capacity(n - m));
    for (pos, &row) in order.iter().enumerate() {
        if in_train[pos] {
            train.push(row);
        } else {
            test.push(row);
        }
    }
    Ok(Split { train, test })
}
