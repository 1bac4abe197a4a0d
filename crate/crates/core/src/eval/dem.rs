use serde::{Deserialize, Serialize};

use super::{cell_seed, make_split, Dataset, EvalError, FractionLadder, Metric, Split};
use crate::predictors::{ModelFamily, Task};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemConfig {
    pub ladder: FractionLadder,
    pub trials: usize,
    pub base_seed: u64,
    /// Standardize each feature column on the training rows of a cell.
    pub standardize: bool,
    /// Worker threads for independent cells.
    pub jobs: usize,
}

impl Default for DemConfig {
    fn default() -> Self {
        DemConfig {
            ladder: FractionLadder::default(),
            trials: 20,
            base_seed: 0,
            standardize: false,
            jobs: 1,
        }
    }
}

/// Score of one (fraction, trial) cell, averaged over its scorable tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemRecord {
    pub fraction: f64,
    pub trial: usize,
    pub value: f64,
    pub tasks_scored: usize,
    pub tasks_dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingCell {
    pub fraction: f64,
    pub trial: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionSummary {
    pub fraction: f64,
    pub mean: f64,
    /// Sample standard deviation over trials; zero for a single trial.
    pub std: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemReport {
    pub dataset: String,
    pub model: String,
    pub metric: Metric,
    /// Sorted by fraction, then trial.
    pub records: Vec<DemRecord>,
    pub missing: Vec<MissingCell>,
    pub per_fraction: Vec<FractionSummary>,
    /// Mean over fractions of the per-fraction mean over trials.
    pub dem: f64,
}

fn summarize(fraction: f64, values: &[f64]) -> FractionSummary {
    let k = values.len();
    let mean = values.iter().sum::<f64>() / k as f64;
    let std = if k > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64).sqrt()
    } else {
        0.0
    };
    FractionSummary {
        fraction,
        mean,
        std,
        trials: k,
    }
}

fn standardizer(x: &[&Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = x.first().map_or(0, |r| r.len());
    let n = x.len() as f64;
    let mut mean = vec![0.0; d];
    for r in x {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v / n;
        }
    }
    let mut scale = vec![0.0; d];
    for r in x {
        for j in 0..d {
            scale[j] += (r[j] - mean[j]).powi(2) / n;
        }
    }
    for s in &mut scale {
        *s = if *s > 1e-24 { 1.0 / s.sqrt() } else { 1.0 };
    }
    (mean, scale)
}

/// Fit on `split.train`, score on `split.test`, task by task.
fn run_cell(
    dataset: &Dataset,
    features: &[Vec<f64>],
    family: &ModelFamily,
    split: &Split,
    standardize: bool,
    seed: u64,
) -> Result<(f64, usize, usize), EvalError> {
    let (mut sum, mut scored, mut dropped) = (0.0, 0, 0);
    for (k, name) in dataset.task_names.iter().enumerate() {
        let labelled = |rows: &[usize]| -> (Vec<usize>, Vec<f64>) {
            rows.iter()
                .filter_map(|&i| dataset.rows[i].labels[k].map(|v| (i, v)))
                .unzip()
        };
        let (train, y) = labelled(&split.train);
        let (test, truth) = labelled(&split.test);
        let two_classes = |ys: &[f64]| ys.iter().any(|&v| v > 0.5) && ys.iter().any(|&v| v <= 0.5);
        let usable = !train.is_empty()
            && !test.is_empty()
            && (dataset.task == Task::Regression || (two_classes(&y) && two_classes(&truth)));
        if !usable {
            log::info!("{}: task {name} dropped from this cell (too few labels or a single class)", dataset.name);
            dropped += 1;
            continue;
        }
        let raw_train: Vec<&Vec<f64>> = train.iter().map(|&i| &features[i]).collect();
        let (mean, scale) = if standardize {
            standardizer(&raw_train)
        } else {
            (Vec::new(), Vec::new())
        };
        let transform = |r: &Vec<f64>| -> Vec<f64> {
            if standardize {
                r.iter().zip(&mean).zip(&scale).map(|((v, m), s)| (v - m) * s).collect()
            } else {
                r.clone()
            }
        };
        let x: Vec<Vec<f64>> = raw_train.into_iter().map(transform).collect();
        let xt: Vec<Vec<f64>> = test.iter().map(|&i| transform(&features[i])).collect();
        let model = family.fit(&x, &y, dataset.task, seed)?;
        let pred = model.predict(&xt)?;
        sum += dataset.metric.score(&pred, &truth)?;
        scored += 1;
    }
    if scored == 0 {
        return Err(EvalError::NoScorableTask);
    }
    Ok((sum / scored as f64, scored, dropped))
}

type Cell = (usize, usize, f64);

fn run_cells<F>(cells: &[Cell], jobs: usize, f: F) -> Vec<Result<(f64, usize, usize), EvalError>>
where
    F: Fn(&Cell) -> Result<(f64, usize, usize), EvalError> + Sync,
{
    #[cfg(feature = "parallel")]
    if jobs > 1 {
        use rayon::prelude::*;
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            return pool.install(|| cells.par_iter().map(&f).collect());
        }
    }
    let _ = jobs;
    cells.iter().map(f).collect()
}

fn check_features(dataset: &Dataset, features: &[Vec<f64>]) -> Result<(), EvalError> {
    if features.len() != dataset.len() {
        return Err(EvalError::FeatureCount {
            expected: dataset.len(),
            rows: features.len(),
        });
    }
    Ok(())
}

/// Data-efficiency benchmark: for every ladder fraction and trial, split
/// with [`cell_seed`], fit `family` on the training rows' `features` and
/// score the dataset's metric on the test rows. Cells that fail are kept in
/// [`DemReport::missing`]; the report fails only if a fraction loses every
/// trial.
pub fn dem(
    dataset: &Dataset,
    features: &[Vec<f64>],
    family: &ModelFamily,
    model_tag: &str,
    cfg: &DemConfig,
) -> Result<DemReport, EvalError> {
    check_features(dataset, features)?;
    let stratified = dataset.task == Task::Classification;
    let cells: Vec<Cell> = cfg
        .ladder
        .fractions()
        .iter()
        .enumerate()
        .flat_map(|(fi, &f)| (0..cfg.trials).map(move |t| (fi, t, f)))
        .collect();
    let results = run_cells(&cells, cfg.jobs, |&(_, t, f)| {
        let seed = cell_seed(cfg.base_seed, f, t as u64);
        let split = make_split(dataset, f, stratified, seed)?;
        run_cell(dataset, features, family, &split, cfg.standardize, seed)
    });
    let mut records = Vec::new();
    let mut missing = Vec::new();
    for (&(_, trial, fraction), r) in cells.iter().zip(results) {
        match r {
            Ok((value, tasks_scored, tasks_dropped)) => records.push(DemRecord {
                fraction,
                trial,
                value,
                tasks_scored,
                tasks_dropped,
            }),
            Err(e) => {
                log::warn!("{} {model_tag}: fraction {fraction} trial {trial}: {e}", dataset.name);
                missing.push(MissingCell {
                    fraction,
                    trial,
                    reason: e.to_string(),
                });
            }
        }
    }
    records.sort_by(|a, b| a.fraction.total_cmp(&b.fraction).then(a.trial.cmp(&b.trial)));
    let mut per_fraction = Vec::new();
    for &f in cfg.ladder.fractions() {
        let values: Vec<f64> = records.iter().filter(|r| r.fraction == f).map(|r| r.value).collect();
        if values.is_empty() {
            return Err(EvalError::FractionLostAllTrials { fraction: f });
        }
        per_fraction.push(summarize(f, &values));
    }
    let dem = per_fraction.iter().map(|s| s.mean).sum::<f64>() / per_fraction.len() as f64;
    Ok(DemReport {
        dataset: dataset.name.clone(),
        model: model_tag.to_string(),
        metric: dataset.metric,
        records,
        missing,
        per_fraction,
        dem,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrataConfig {
    pub n_groups: usize,
    pub fraction: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub standardize: bool,
    pub jobs: usize,
}

impl Default for StrataConfig {
    fn default() -> Self {
        StrataConfig {
            n_groups: 5,
            fraction: 0.8,
            trials: 20,
            base_seed: 0,
            standardize: false,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrataGroup {
    pub index: usize,
    /// Shortest and longest SMILES in the group, in characters.
    pub min_len: usize,
    pub max_len: usize,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrataReport {
    pub dataset: String,
    pub model: String,
    pub metric: Metric,
    pub groups: Vec<StrataGroup>,
    /// `(length, molecules)` over the whole dataset, by increasing length.
    pub length_histogram: Vec<(usize, usize)>,
}

/// Sort molecules by SMILES length, cut them into `n_groups` equal-count
/// groups and run repeated split/fit/score trials inside each group. All
/// groups share the trial seeds.
pub fn strata_eval(
    dataset: &Dataset,
    features: &[Vec<f64>],
    family: &ModelFamily,
    model_tag: &str,
    cfg: &StrataConfig,
) -> Result<StrataReport, EvalError> {
    check_features(dataset, features)?;
    let n = dataset.len();
    let g = cfg.n_groups.max(1);
    if n < g * 10 {
        return Err(EvalError::GroupTooSmall {
            groups: g,
            min: g * 10,
            rows: n,
        });
    }
    let len = |i: usize| dataset.rows[i].smiles.chars().count();
    let mut order = dataset.canonical_order();
    order.sort_by_key(|&i| len(i));
    let mut length_histogram: Vec<(usize, usize)> = Vec::new();
    for &i in &order {
        match length_histogram.last_mut() {
            Some((l, c)) if *l == len(i) => *c += 1,
            _ => length_histogram.push((len(i), 1)),
        }
    }
    let stratified = dataset.task == Task::Classification;
    let mut groups = Vec::with_capacity(g);
    for k in 0..g {
        let members = &order[k * n / g..(k + 1) * n / g];
        let sub = dataset.subset(members);
        let sub_features: Vec<Vec<f64>> = members.iter().map(|&i| features[i].clone()).collect();
        let cells: Vec<Cell> = (0..cfg.trials).map(|t| (k, t, cfg.fraction)).collect();
        let results = run_cells(&cells, cfg.jobs, |&(_, t, f)| {
            let seed = cell_seed(cfg.base_seed, f, t as u64);
            let split = make_split(&sub, f, stratified, seed)?;
            run_cell(&sub, &sub_features, family, &split, cfg.standardize, seed)
        });
        let mut values = Vec::new();
        for (t, r) in results.into_iter().enumerate() {
            match r {
                Ok((v, _, _)) => values.push(v),
                Err(e) => log::warn!("{} {model_tag}: group {k} trial {t}: {e}", dataset.name),
            }
        }
        if values.is_empty() {
            return Err(EvalError::FractionLostAllTrials { fraction: cfg.fraction });
        }
        let s = summarize(cfg.fraction, &values);
        groups.push(StrataGroup {
            index: k,
            min_len: len(members[0]),
            max_len: len(members[members.len() - 1]),
            count: members.len(),
            mean: s.mean,
            std: s.std,
            trials: s.trials,
        });
    }
    Ok(StrataReport {
        dataset: dataset.name.clone(),
        model: model_tag.to_string(),
        metric: dataset.metric,
        groups,
        length_histogram,
    })
}
