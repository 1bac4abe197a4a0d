//! Metrics, train/test splits and the data-efficiency benchmark.

mod dataset;
mod dem;
mod metrics;
mod report;
mod split;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use dataset::{load_dataset_csv, CsvOptions, Dataset, Row};
pub use dem::{
    dem, strata_eval, DemConfig, DemRecord, DemReport, FractionSummary, MissingCell, StrataConfig, StrataGroup,
    StrataReport,
};
pub use metrics::{prc_auc, rmse, roc_auc};
pub use report::{write_plot, write_records, write_strata, write_summary};
pub use split::{cell_seed, make_split, Split};

use crate::predictors::PredictorError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no values to score")]
    Empty,
    #[error("{left} predictions but {right} targets")]
    LengthMismatch { left: usize, right: usize },
    #[error("non-finite score")]
    NonFinite,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("labels contain no positives")]
    NoPositives,
    #[error("fraction {0} is outside (0, 1)")]
    BadFraction(f64),
    #[error("a split needs at least {needed} training rows and one test row; {rows} rows at fraction {fraction} gives {train}")]
    TooFewRows {
        needed: usize,
        rows: usize,
        fraction: f64,
        train: usize,
    },
    #[error("fraction {fraction} leaves class {class} without a training row")]
    TooFewPerClass { fraction: f64, class: u8 },
    #[error("fraction ladder must be strictly increasing within (0, 1)")]
    BadLadder,
    #[error("invalid dataset: {0}")]
    Dataset(String),
    #[error("no column named {0:?}")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    BadRow { line: u64, message: String },
    #[error("no usable rows")]
    NoUsableRows,
    #[error("{rows} features for {expected} dataset rows")]
    FeatureCount { expected: usize, rows: usize },
    #[error("no task could be scored in this cell")]
    NoScorableTask,
    #[error("fraction {fraction} lost every trial")]
    FractionLostAllTrials { fraction: f64 },
    #[error("{groups} groups need at least {min} rows, dataset has {rows}")]
    GroupTooSmall { groups: usize, min: usize, rows: usize },
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Rmse,
    RocAuc,
    PrcAuc,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Rmse => "RMSE",
            Metric::RocAuc => "ROC-AUC",
            Metric::PrcAuc => "PRC-AUC",
        }
    }

    pub fn higher_is_better(self) -> bool {
        self != Metric::Rmse
    }

    pub fn score(self, pred: &[f64], truth: &[f64]) -> Result<f64, EvalError> {
        match self {
            Metric::Rmse => rmse(pred, truth),
            Metric::RocAuc => roc_auc(pred, &truth.iter().map(|&t| t > 0.5).collect::<Vec<_>>()),
            Metric::PrcAuc => prc_auc(pred, &truth.iter().map(|&t| t > 0.5).collect::<Vec<_>>()),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "rmse" => Ok(Metric::Rmse),
            "rocauc" | "roc" | "auc" => Ok(Metric::RocAuc),
            "prcauc" | "prc" | "ap" => Ok(Metric::PrcAuc),
            _ => Err(format!("unknown metric {s:?} (expected rmse, roc-auc or prc-auc)")),
        }
    }
}

/// Training fractions evaluated by [`dem`], doubling from 1.25% to 80% by
/// default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionLadder(Vec<f64>);

impl Default for FractionLadder {
    fn default() -> Self {
        FractionLadder(vec![0.0125, 0.025, 0.05, 0.1, 0.2, 0.4, 0.8])
    }
}

impl FractionLadder {
    pub fn new(fractions: Vec<f64>) -> Result<FractionLadder, EvalError> {
        let ok = !fractions.is_empty()
            && fractions.iter().all(|&f| f > 0.0 && f < 1.0)
            && fractions.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(FractionLadder(fractions))
        } else {
            Err(EvalError::BadLadder)
        }
    }

    pub fn fractions(&self) -> &[f64] {
        &self.0
    }
}

impl FromStr for FractionLadder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fractions = s
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|e| format!("{f:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        FractionLadder::new(fractions).map_err(|e| e.to_string())
    }
}
