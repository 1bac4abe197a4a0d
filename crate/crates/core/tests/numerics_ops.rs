//! Operation examples, finite-difference gradient checks and PCA against a
//! Jacobi eigen oracle.

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stfp::numerics::{NumericsError, Pca, Tape, Tensor};

mod common;
use common::*;

fn t2(rows: &[&[f64]]) -> Tensor<f64> {
    Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
}


#[test]
fn matmul_examples() {
    let mut tape = Tape::new();
    let i = tape.constant(t2(&[&[1.0, 0.0], &[0.0, 1.0]]));
    let m = tape.constant(t2(&[&[1.0, 2.0], &[3.0, 4.0]]));
    let p = tape.matmul(i, m).unwrap();
    assert_eq!(tape.value(p).data(), &[1.0, 2.0, 3.0, 4.0]);
    let a = tape.constant(t2(&[&[1.0, 2.0]]));
    let b = tape.constant(t2(&[&[3.0], &[4.0]]));
    let p = tape.matmul(a, b).unwrap();
    assert_eq!(tape.value(p).data(), &[11.0]);
    assert!(matches!(tape.matmul(a, a), Err(NumericsError::ShapeMismatch { .. })));
}

#[test]
fn matmul_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (a, b) = (random(&mut rng, vec![3, 4]), random(&mut rng, vec![4, 5]));
    let mut tape = Tape::new();
    let (va, vb) = (tape.constant(a.clone()), tape.constant(b.clone()));
    let p = tape.matmul(va, vb).unwrap();
    for i in 0..3 {
        for j in 0..5 {
            let mut s = 0.0;
            for k in 0..4 {
                s += a.data()[i * 4 + k] * b.data()[k * 5 + j];
            }
            assert!((tape.value(p).data()[i * 5 + j] - s).abs() < 1e-6);
        }
    }
}

#[test]
fn softmax_examples() {
    let mut tape = Tape::new();
    let x = tape.constant(t2(&[&[0.0, 0.0], &[1000.0, 0.0]]));
    let y = tape.softmax_rows(x, None).unwrap();
    let v = tape.value(y).data().to_vec();
    assert_eq!(&v[..2], &[0.5, 0.5]);
    assert!((v[2] - 1.0).abs() < 1e-12 && v[3] < 1e-12 && v.iter().all(|x| x.is_finite()));
    let x = tape.constant(t2(&[&[0.3, 2.0]]));
    let y = tape.softmax_rows(x, Some(Arc::from(vec![true, false]))).unwrap();
    assert_eq!(tape.value(y).data(), &[1.0, 0.0]);
    let err = tape.softmax_rows(x, Some(Arc::from(vec![false, false])));
    assert_eq!(err.unwrap_err(), NumericsError::FullyMaskedRow { row: 0 });
}

#[test]
fn layer_norm_examples() {
    let mut tape = Tape::new();
    let g = tape.constant(Tensor::full(vec![2], 1.0));
    let b = tape.constant(Tensor::zeros(vec![2]));
    let x = tape.constant(t2(&[&[3.0, 3.0], &[1.0, -1.0]]));
    let y = tape.layer_norm(x, g, b).unwrap();
    let v = tape.value(y).data();
    assert_eq!(&v[..2], &[0.0, 0.0]);
    assert!((v[2] - 1.0).abs() < 1e-5 && (v[3] + 1.0).abs() < 1e-5);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let row = random(&mut rng, vec![1, 16]);
    let g = tape.constant(Tensor::full(vec![16], 1.0));
    let b = tape.constant(Tensor::zeros(vec![16]));
    let x = tape.constant(row.clone());
    let y = tape.layer_norm(x, g, b).unwrap();
    let out = tape.value(y).data();
    let mean = out.iter().sum::<f64>() / 16.0;
    let var = out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 16.0;
    assert!(mean.abs() < 1e-6);
    // the epsilon shrinks the variance slightly below one
    let rv = row.data().iter().map(|v| v - row.data().iter().sum::<f64>() / 16.0);
    let raw_var = rv.map(|v| v * v).sum::<f64>() / 16.0;
    assert!((var - raw_var / (raw_var + 1e-5)).abs() < 1e-12);
    assert!((var - 1.0).abs() < 1e-4);
}

#[test]
fn cross_entropy_examples() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::zeros(vec![3, 4]));
    let l = tape.cross_entropy(x, &[0, 1, 3], &[true; 3]).unwrap();
    assert!((tape.value(l).item() - 4f64.ln()).abs() < 1e-12);

    let x = tape.constant(t2(&[&[60.0, 0.0, 0.0]]));
    let l = tape.cross_entropy(x, &[0], &[true]).unwrap();
    assert!(tape.value(l).item() < 1e-20);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let logits = random(&mut rng, vec![5, 7]).map(|v| v * 4.0);
    let targets = [3u32, 0, 6, 2, 2];
    let include = [true, false, true, true, false];
    let x = tape.constant(logits.clone());
    let l = tape.cross_entropy(x, &targets, &include).unwrap();
    let mut total = 0.0;
    for r in [0, 2, 3] {
        let row = logits.row(r);
        let lse = row.iter().map(|v| v.exp()).sum::<f64>().ln();
        total += lse - row[targets[r] as usize];
    }
    assert!((tape.value(l).item() - total / 3.0).abs() < 1e-6);

    assert_eq!(tape.cross_entropy(x, &targets, &[false; 5]).unwrap_err(), NumericsError::NoTargets);
}

#[test]
fn backward_examples() {
    let mut tape = Tape::new();
    let w = tape.leaf(Tensor::new(vec![3], vec![0.5, -1.0, 2.0]));
    let unused = tape.leaf(Tensor::new(vec![2], vec![1.0, 1.0]));
    let s = tape.sum(w);
    let g = tape.backward(s).unwrap();
    assert_eq!(g.wrt(w).data(), &[1.0, 1.0, 1.0]);
    assert_eq!(g.wrt(unused).data(), &[0.0, 0.0]);

    let mut tape = Tape::new();
    let w = tape.leaf(Tensor::new(vec![3], vec![0.5, -1.0, 2.0]));
    let sq = tape.mul(w, w).unwrap();
    let s = tape.sum(sq);
    let half = tape.scale(s, 0.5);
    let g = tape.backward(half).unwrap();
    assert_eq!(g.wrt(w).data(), &[0.5, -1.0, 2.0]);

    assert!(matches!(tape.backward(w), Err(NumericsError::NotScalar { .. })));
}



proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dense_ops_pass_gradient_check(m in 1usize..=8, k in 1usize..=8, n in 2usize..=8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let leaves = vec![
            random(&mut rng, vec![m, k]),
            random(&mut rng, vec![k, n]),
            random(&mut rng, vec![n]),
            random(&mut rng, vec![n]).map(|v| v + 1.5),
            random(&mut rng, vec![n]),
        ];
        let r = check_gradients(&leaves, &|t, v| {
            let p = t.matmul(v[0], v[1]).unwrap();
            let p = t.add_bias(p, v[2]).unwrap();
            let r = t.relu(p);
            let s = t.scale(r, 0.7);
            let q = t.add(s, p).unwrap();
            let ln = t.layer_norm(q, v[3], v[4]).unwrap();
            weighted_sum(t, ln, seed)
        });
        prop_assert!(r.is_ok(), "{:?}", r);
    }

    #[test]
    fn attention_ops_pass_gradient_check(batch in 1usize..=2, t in 1usize..=4, heads in 1usize..=2, dh in 1usize..=4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = heads * dh;
        let leaves = vec![
            random(&mut rng, vec![batch * t, d]),
            random(&mut rng, vec![batch * t, d]),
            random(&mut rng, vec![batch * t, d]),
        ];
        // causal mask shared across rows of each [t, t] block
        let mask: Vec<bool> = (0..batch * heads * t * t).map(|i| (i % t) <= (i / t) % t).collect();
        let mask: Arc<[bool]> = Arc::from(mask);
        let r = check_gradients(&leaves, &|tp, v| {
            let q = tp.split_heads(v[0], batch, heads).unwrap();
            let k = tp.split_heads(v[1], batch, heads).unwrap();
            let vv = tp.split_heads(v[2], batch, heads).unwrap();
            let s = tp.batch_matmul(q, k, true).unwrap();
            let a = tp.softmax_rows(s, Some(mask.clone())).unwrap();
            let o = tp.batch_matmul(a, vv, false).unwrap();
            let o = tp.merge_heads(o, batch).unwrap();
            weighted_sum(tp, o, seed)
        });
        prop_assert!(r.is_ok(), "{:?}", r);
    }

    #[test]
    fn embedding_and_loss_pass_gradient_check(rows in 1usize..=8, vocab in 2usize..=8, d in 1usize..=8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<u32> = (0..rows).map(|_| rng.random_range(0..vocab as u32)).collect();
        let targets: Vec<u32> = (0..rows).map(|_| rng.random_range(0..vocab as u32)).collect();
        let mut include: Vec<bool> = (0..rows).map(|_| rng.random_bool(0.7)).collect();
        include[0] = true;
        let leaves = vec![random(&mut rng, vec![vocab, d]), random(&mut rng, vec![d, vocab])];
        let r = check_gradients(&leaves, &|t, v| {
            let e = t.gather(v[0], &ids).unwrap();
            let logits = t.matmul(e, v[1]).unwrap();
            t.cross_entropy(logits, &targets, &include).unwrap()
        });
        prop_assert!(r.is_ok(), "{:?}", r);
    }

    #[test]
    fn batch_matmul_plain_passes_gradient_check(b in 1usize..=4, m in 1usize..=8, k in 1usize..=8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let leaves = vec![random(&mut rng, vec![b, m, k]), random(&mut rng, vec![b, k, m])];
        let r = check_gradients(&leaves, &|t, v| {
            let p = t.batch_matmul(v[0], v[1], false).unwrap();
            weighted_sum(t, p, seed)
        });
        prop_assert!(r.is_ok(), "{:?}", r);
    }

    #[test]
    fn softmax_rows_are_distributions(rows in 1usize..6, cols in 1usize..12, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tape = Tape::new();
        let x = tape.constant(random(&mut rng, vec![rows, cols]).map(|v| v * 30.0));
        let y = tape.softmax_rows(x, None).unwrap();
        for r in 0..rows {
            let row = tape.value(y).row(r);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn matmul_is_associative(m in 1usize..6, k in 1usize..6, n in 1usize..6, p in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, c) = (random(&mut rng, vec![m, k]), random(&mut rng, vec![k, n]), random(&mut rng, vec![n, p]));
        let assoc = |a: Tensor<f64>, b: Tensor<f64>, c: Tensor<f64>| {
            let mut t = Tape::<f64>::new();
            let (a, b, c) = (t.constant(a), t.constant(b), t.constant(c));
            let ab = t.matmul(a, b).unwrap();
            let l = t.matmul(ab, c).unwrap();
            let bc = t.matmul(b, c).unwrap();
            let r = t.matmul(a, bc).unwrap();
            (t.value(l).clone(), t.value(r).clone())
        };
        let (l, r) = assoc(a.clone(), b.clone(), c.clone());
        prop_assert!(l.data().iter().zip(r.data()).all(|(x, y)| (x - y).abs() < 1e-10));
        let (l, r) = {
            let mut t = Tape::<f32>::new();
            let (a, b, c) = (t.constant(a.cast()), t.constant(b.cast()), t.constant(c.cast()));
            let ab = t.matmul(a, b).unwrap();
            let l = t.matmul(ab, c).unwrap();
            let bc = t.matmul(b, c).unwrap();
            let r = t.matmul(a, bc).unwrap();
            (t.value(l).clone(), t.value(r).clone())
        };
        prop_assert!(l.data().iter().zip(r.data()).all(|(x, y)| (x - y).abs() < 1e-4));
    }

    #[test]
    fn pca_reconstruction_error_is_monotone(n in 4usize..12, d in 2usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        let mut last = f64::INFINITY;
        for k in 1..=d.min(n) {
            let p = Pca::fit(&x, k).unwrap();
            let rec = p.reconstruct(&p.transform(&x));
            let err: f64 = x.iter().zip(&rec).flat_map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v).powi(2))).sum();
            prop_assert!(err <= last + 1e-9);
            last = err;
        }
    }
}

/// Cyclic Jacobi eigenvalue iteration for a symmetric matrix.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j].powi(2)).sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

#[test]
fn pca_matches_jacobi_oracle() {
    let x = vec![
        vec![2.5, 2.4, 0.5],
        vec![0.5, 0.7, 1.9],
        vec![2.2, 2.9, -0.3],
        vec![1.9, 2.2, 0.8],
        vec![3.1, 3.0, 0.1],
    ];
    let n = x.len() as f64;
    let mean: Vec<f64> = (0..3).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let cov: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..3).map(|j| x.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1.0)).collect())
        .collect();
    let ev = jacobi_eigenvalues(cov);
    let p = Pca::fit(&x, 3).unwrap();
    assert!(p.variances[0] >= p.variances[1] && p.variances[1] >= p.variances[2]);
    for (a, b) in p.variances.iter().zip(&ev) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
    // projected coordinates carry exactly the component variances
    let z = p.transform(&x);
    for c in 0..3 {
        let var = z.iter().map(|r| r[c] * r[c]).sum::<f64>() / (n - 1.0);
        assert!((var - ev[c]).abs() < 1e-10);
    }
}
