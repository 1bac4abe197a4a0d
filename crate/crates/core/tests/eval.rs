use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stfp::eval::{
    dem, make_split, prc_auc, rmse, roc_auc, strata_eval, DemConfig, Dataset, FractionLadder, Metric, Row,
    StrataConfig,
};
use stfp::predictors::{ModelFamily, Task};

mod common;
use common::*;




#[test]
fn roc_matches_pair_counting_at_n200() {
    for seed in 0..5 {
        for levels in [5, 50, 1_000_000] {
            let (s, l) = scored_labels(seed, 200, levels);
            let d = (roc_auc(&s, &l).unwrap() - pair_count_auc(&s, &l)).abs();
            assert!(d < 1e-12, "seed {seed} levels {levels}: {d}");
        }
    }
}

#[test]
fn prc_matches_curve_walk_at_n100() {
    for seed in 0..5 {
        for levels in [4, 30, 1_000_000] {
            let (s, l) = scored_labels(seed, 100, levels);
            let d = (prc_auc(&s, &l).unwrap() - curve_walk_ap(&s, &l)).abs();
            assert!(d < 1e-10, "seed {seed} levels {levels}: {d}");
        }
    }
}

#[test]
fn rmse_hand_cases() {
    assert_eq!(rmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 12.5f64.sqrt());
    assert_eq!(rmse(&[1.0, -1.0, 2.0], &[1.0, -1.0, 2.0]).unwrap(), 0.0);
    assert_eq!(rmse(&[2.0], &[-1.0]).unwrap(), 3.0);
}

fn regression_set(n: usize, seed: u64) -> (Dataset, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut features = Vec::new();
    for i in 0..n {
        let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
        let y = 2.0 * x[0] - x[1] + 0.1 * rng.random::<f64>();
        rows.push(Row {
            smiles: "C".repeat(1 + i % 17),
            labels: vec![Some(y)],
        });
        features.push(x);
    }
    let ds = Dataset::new("reg", vec!["y".into()], Task::Regression, Metric::Rmse, rows).unwrap();
    (ds, features)
}

fn classification_set(n: usize, tasks: usize, seed: u64) -> (Dataset, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut features = Vec::new();
    for i in 0..n {
        let x: Vec<f64> = (0..2).map(|_| rng.random::<f64>()).collect();
        let labels = (0..tasks)
            .map(|k| {
                if k > 0 && rng.random_bool(0.2) {
                    None
                } else {
                    Some(if x[k % 2] + 0.3 * rng.random::<f64>() > 0.6 { 1.0 } else { 0.0 })
                }
            })
            .collect();
        rows.push(Row {
            smiles: format!("{}O{i}", "C".repeat(1 + i % 23)),
            labels,
        });
        features.push(x);
    }
    let names = (0..tasks).map(|k| format!("t{k}")).collect();
    let ds = Dataset::new("cls", names, Task::Classification, Metric::RocAuc, rows).unwrap();
    (ds, features)
}

fn small_config() -> DemConfig {
    DemConfig {
        ladder: FractionLadder::new(vec![0.1, 0.2, 0.4]).unwrap(),
        trials: 4,
        base_seed: 11,
        ..Default::default()
    }
}

#[test]
fn constant_classifier_scores_one_half() {
    let (ds, x) = classification_set(300, 3, 1);
    let r = dem(&ds, &x, &ModelFamily::Constant(0.3), "const", &small_config()).unwrap();
    assert!(r.records.iter().all(|c| c.value == 0.5));
    assert_eq!(r.dem, 0.5);
    assert!(r.missing.is_empty());
}

#[test]
fn dem_is_the_mean_of_fraction_means() {
    let (ds, x) = regression_set(200, 2);
    let r = dem(&ds, &x, &ModelFamily::Linear { lambda: 1.0 }, "ridge", &small_config()).unwrap();
    assert_eq!(r.records.len(), 12);
    let mut means = Vec::new();
    for f in [0.1, 0.2, 0.4] {
        let v: Vec<f64> = r.records.iter().filter(|c| c.fraction == f).map(|c| c.value).collect();
        means.push(v.iter().sum::<f64>() / v.len() as f64);
    }
    assert_eq!(r.dem, means.iter().sum::<f64>() / 3.0);
    for (s, m) in r.per_fraction.iter().zip(&means) {
        assert_eq!(s.mean, *m);
    }
}

#[test]
fn dem_ignores_row_order_and_job_count() {
    let (ds, x) = classification_set(240, 2, 3);
    let family = ModelFamily::Linear { lambda: 1.0 };
    let base = dem(&ds, &x, &family, "lin", &small_config()).unwrap();
    let mut perm: Vec<usize> = (0..ds.len()).collect();
    perm.reverse();
    perm.swap(3, 100);
    let shuffled = ds.subset(&perm);
    let xs: Vec<Vec<f64>> = perm.iter().map(|&i| x[i].clone()).collect();
    let cfg = DemConfig {
        jobs: 3,
        ..small_config()
    };
    let again = dem(&shuffled, &xs, &family, "lin", &cfg).unwrap();
    assert_eq!(base.records, again.records);
    assert_eq!(base.dem, again.dem);
}

#[test]
fn lost_fraction_fails_the_aggregate() {
    let (ds, x) = regression_set(30, 4);
    let cfg = DemConfig {
        ladder: FractionLadder::new(vec![0.01, 0.5]).unwrap(),
        trials: 2,
        ..Default::default()
    };
    assert!(dem(&ds, &x, &ModelFamily::Linear { lambda: 1.0 }, "r", &cfg).is_err());
}

#[test]
fn strata_groups() {
    let (ds, x) = classification_set(100, 1, 5);
    let cfg = StrataConfig {
        trials: 3,
        ..Default::default()
    };
    let r = strata_eval(&ds, &x, &ModelFamily::Constant(0.5), "const", &cfg).unwrap();
    assert_eq!(r.groups.len(), 5);
    assert!(r.groups.iter().all(|g| g.count == 20 && g.mean == 0.5));
    assert!(r.groups.windows(2).all(|w| w[0].max_len <= w[1].min_len));
    assert_eq!(r.length_histogram.iter().map(|h| h.1).sum::<usize>(), 100);

    let one = StrataConfig { n_groups: 1, ..cfg.clone() };
    assert_eq!(strata_eval(&ds, &x, &ModelFamily::Constant(0.5), "c", &one).unwrap().groups[0].count, 100);
    let (small, xs) = classification_set(40, 1, 5);
    assert!(strata_eval(&small, &xs, &ModelFamily::Constant(0.5), "c", &cfg).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn roc_ignores_monotone_transforms(seed in any::<u64>(), levels in 2u32..40) {
        let (s, l) = scored_labels(seed, 60, levels);
        let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        prop_assert_eq!(roc_auc(&s, &l).unwrap(), roc_auc(&t, &l).unwrap());
    }

    #[test]
    fn rmse_is_a_symmetric_distance(a in prop::collection::vec(-1e3f64..1e3, 1..40), shift in -10f64..10.0) {
        let b: Vec<f64> = a.iter().rev().copied().collect();
        prop_assert_eq!(rmse(&a, &b).unwrap(), rmse(&b, &a).unwrap());
        prop_assert!(rmse(&a, &b).unwrap() >= 0.0);
        prop_assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        let moved: Vec<f64> = a.iter().map(|v| v + shift).collect();
        let old = rmse(&a, &b).unwrap();
        prop_assert!(rmse(&moved, &b).unwrap() >= (old - shift.abs()).abs() - 1e-9);
    }

    #[test]
    fn splits_partition_rows(seed in any::<u64>(), n in 20usize..200, f in 0.1f64..0.9, stratified: bool) {
        let (ds, _) = classification_set(n, 1, seed);
        if let Ok(s) = make_split(&ds, f, stratified, seed) {
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(s.train.len(), (f * n as f64).round() as usize);
            if stratified {
                let pos = |ix: &[usize]| ix.iter().filter(|&&i| ds.rows[i].labels[0] == Some(1.0)).count();
                let total = pos(&(0..n).collect::<Vec<_>>()) as f64;
                let want = total * s.train.len() as f64 / n as f64;
                prop_assert!((pos(&s.train) as f64 - want).abs() <= 1.0);
            }
        }
    }
}
