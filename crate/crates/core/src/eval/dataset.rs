use std::cmp::Ordering;
use std::io::Read;
use std::path::Path;

use super::{EvalError, Metric};
use crate::predictors::Task;
use crate::smiles::parse;

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub smiles: String,
    /// One entry per task; `None` marks a missing label.
    pub labels: Vec<Option<f64>>,
}

/// Labelled molecules sharing one task type and one evaluation metric.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub task_names: Vec<String>,
    pub task: Task,
    pub metric: Metric,
    pub rows: Vec<Row>,
    /// Input rows discarded while loading.
    pub dropped: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        task_names: Vec<String>,
        task: Task,
        metric: Metric,
        rows: Vec<Row>,
    ) -> Result<Dataset, EvalError> {
        let bad = |m: String| Err(EvalError::Dataset(m));
        if task_names.is_empty() {
            return bad("no tasks".into());
        }
        if rows.is_empty() {
            return Err(EvalError::NoUsableRows);
        }
        match (task, metric) {
            (Task::Regression, Metric::Rmse) | (Task::Classification, Metric::RocAuc | Metric::PrcAuc) => {}
            _ => return bad(format!("metric {metric} does not fit a {task:?} task")),
        }
        for (i, r) in rows.iter().enumerate() {
            if r.labels.len() != task_names.len() {
                return bad(format!("row {i} has {} labels for {} tasks", r.labels.len(), task_names.len()));
            }
            if r.labels.iter().all(Option::is_none) {
                return bad(format!("row {i} has no labels"));
            }
            for v in r.labels.iter().flatten() {
                if !v.is_finite() || (task == Task::Classification && *v != 0.0 && *v != 1.0) {
                    return bad(format!("row {i} has label {v}"));
                }
            }
        }
        Ok(Dataset {
            name: name.into(),
            task_names,
            task,
            metric,
            rows,
            dropped: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn smiles(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r.smiles.as_str())
    }

    /// Row indices sorted by SMILES, then labels, so that anything defined on
    /// this order ignores how the input file happened to be arranged.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.rows.len()).collect();
        order.sort_by(|&a, &b| {
            let (ra, rb) = (&self.rows[a], &self.rows[b]);
            ra.smiles.cmp(&rb.smiles).then_with(|| {
                ra.labels
                    .iter()
                    .zip(&rb.labels)
                    .map(|(x, y)| match (x, y) {
                        (Some(x), Some(y)) => x.total_cmp(y),
                        _ => x.is_some().cmp(&y.is_some()),
                    })
                    .find(|o| *o != Ordering::Equal)
                    .unwrap_or(Ordering::Equal)
            })
        });
        order
    }

    /// The rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            dropped: 0,
            ..self.clone_header()
        }
    }

    fn clone_header(&self) -> Dataset {
        Dataset {
            name: self.name.clone(),
            task_names: self.task_names.clone(),
            task: self.task,
            metric: self.metric,
            rows: Vec::new(),
            dropped: self.dropped,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvOptions {
    pub smiles_column: String,
    /// Task columns to read; every other column when `None`.
    pub tasks: Option<Vec<String>>,
    pub task: Task,
    /// Defaults to RMSE for regression and ROC-AUC for classification.
    pub metric: Option<Metric>,
}

impl CsvOptions {
    pub fn new(task: Task) -> CsvOptions {
        CsvOptions {
            smiles_column: "smiles".into(),
            tasks: None,
            task,
            metric: None,
        }
    }
}

impl Dataset {
    /// Read a header-bearing CSV. Empty cells are missing labels; rows whose
    /// SMILES does not parse, or that carry no label, are dropped and counted.
    pub fn from_csv<R: Read>(reader: R, name: &str, opts: &CsvOptions) -> Result<Dataset, EvalError> {
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = csv.headers()?.clone();
        let find = |c: &str| header.iter().position(|h| h == c).ok_or_else(|| EvalError::MissingColumn(c.into()));
        let smiles_col = find(&opts.smiles_column)?;
        let task_names: Vec<String> = match &opts.tasks {
            Some(t) => t.clone(),
            None => header.iter().filter(|h| *h != opts.smiles_column).map(String::from).collect(),
        };
        let task_cols = task_names.iter().map(|t| find(t)).collect::<Result<Vec<_>, _>>()?;
        let mut rows = Vec::new();
        let mut dropped = 0;
        for record in csv.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let smiles = record.get(smiles_col).unwrap_or("").to_string();
            if parse(&smiles).is_err() {
                log::warn!("{name} line {line}: dropping unparseable SMILES {smiles:?}");
                dropped += 1;
                continue;
            }
            let labels = task_cols
                .iter()
                .map(|&c| match record.get(c).unwrap_or("") {
                    "" => Ok(None),
                    v => v.parse::<f64>().map(Some).map_err(|e| EvalError::BadRow {
                        line,
                        message: format!("label {v:?}: {e}"),
                    }),
                })
                .collect::<Result<Vec<_>, _>>()?;
            if labels.iter().all(Option::is_none) {
                dropped += 1;
                continue;
            }
            rows.push(Row { smiles, labels });
        }
        let metric = opts.metric.unwrap_or(match opts.task {
            Task::Regression => Metric::Rmse,
            Task::Classification => Metric::RocAuc,
        });
        let mut ds = Dataset::new(name, task_names, opts.task, metric, rows)?;
        ds.dropped = dropped;
        Ok(ds)
    }
}

/// [`Dataset::from_csv`] on a file, named after the file stem.
pub fn load_dataset_csv(path: &Path, opts: &CsvOptions) -> Result<Dataset, EvalError> {
    let name = path.file_stem().map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
    Dataset::from_csv(std::fs::File::open(path)?, &name, opts)
}
