use std::io::Write;

use super::{DemReport, EvalError, StrataReport};

/// `dataset,model,fraction,trial,task_avg_metric`, one row per scored cell.
pub fn write_records<W: Write>(w: W, reports: &[DemReport]) -> Result<(), EvalError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["dataset", "model", "fraction", "trial", "task_avg_metric"])?;
    for r in reports {
        for c in &r.records {
            out.write_record([
                r.dataset.clone(),
                r.model.clone(),
                c.fraction.to_string(),
                c.trial.to_string(),
                c.value.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `dataset,model,dem,metric`, one row per report.
pub fn write_summary<W: Write>(w: W, reports: &[DemReport]) -> Result<(), EvalError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["dataset", "model", "dem", "metric"])?;
    for r in reports {
        out.write_record([r.dataset.clone(), r.model.clone(), r.dem.to_string(), r.metric.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Per-fraction mean and standard deviation over trials, ready to plot
/// against the training fraction.
pub fn write_plot<W: Write>(w: W, reports: &[DemReport]) -> Result<(), EvalError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["dataset", "model", "metric", "fraction", "mean", "std", "trials"])?;
    for r in reports {
        for s in &r.per_fraction {
            out.write_record([
                r.dataset.clone(),
                r.model.clone(),
                r.metric.to_string(),
                s.fraction.to_string(),
                s.mean.to_string(),
                s.std.to_string(),
                s.trials.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_strata<W: Write>(w: W, reports: &[StrataReport]) -> Result<(), EvalError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "dataset", "model", "metric", "group", "min_len", "max_len", "count", "mean", "std", "trials",
    ])?;
    for r in reports {
        for g in &r.groups {
            out.write_record([
                r.dataset.clone(),
                r.model.clone(),
                r.metric.to_string(),
                g.index.to_string(),
                g.min_len.to_string(),
                g.max_len.to_string(),
                g.count.to_string(),
                g.mean.to_string(),
                g.std.to_string(),
                g.trials.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
