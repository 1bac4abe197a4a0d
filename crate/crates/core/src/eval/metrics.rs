use std::cmp::Ordering;

use super::EvalError;

fn check_lengths(a: usize, b: usize) -> Result<(), EvalError> {
    if a == 0 {
        return Err(EvalError::Empty);
    }
    if a != b {
        return Err(EvalError::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

fn check_finite(xs: &[f64]) -> Result<(), EvalError> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(EvalError::NonFinite)
    }
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64, EvalError> {
    check_lengths(pred.len(), truth.len())?;
    check_finite(pred)?;
    check_finite(truth)?;
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

/// Indices ordered by descending score.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    order
}

/// Runs of equal scores in `order`, as half-open ranges.
fn tie_blocks(scores: &[f64], order: &[usize]) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut start = 0;
    for k in 1..=order.len() {
        if k == order.len() || scores[order[k]] != scores[order[start]] {
            blocks.push((start, k));
            start = k;
        }
    }
    blocks
}

/// Area under the ROC curve as the Mann-Whitney statistic, with tied scores
/// given their average rank so that each tied pair counts one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    check_lengths(scores.len(), labels.len())?;
    check_finite(scores)?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let order = descending(scores);
    // accumulate, per block, the negatives ranked strictly below each positive
    let mut below = neg as f64;
    let mut wins = 0.0;
    for (s, e) in tie_blocks(scores, &order) {
        let (p, n) = order[s..e].iter().fold((0usize, 0usize), |(p, n), &i| {
            if labels[i] {
                (p + 1, n)
            } else {
                (p, n + 1)
            }
        });
        below -= n as f64;
        wins += p as f64 * (below + 0.5 * n as f64);
    }
    Ok(wins / (pos as f64 * neg as f64))
}

/// Average precision. Scores are walked in descending order one tie block
/// at a time; each block adds its share of the positives times the
/// precision reached at the end of the block.
pub fn prc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    check_lengths(scores.len(), labels.len())?;
    check_finite(scores)?;
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 {
        return Err(EvalError::NoPositives);
    }
    let order = descending(scores);
    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0);
    for (s, e) in tie_blocks(scores, &order) {
        let p = order[s..e].iter().filter(|&&i| labels[i]).count();
        tp += p;
        seen += e - s;
        ap += p as f64 / pos as f64 * (tp as f64 / seen as f64);
    }
    Ok(ap)
}
