//! Ranking metrics. Ties keep input order for AP; AUC counts a tie as half a
//! win.

use std::cmp::Ordering;

use crate::error::{Error, Result};

fn check(scores: &[f64], labels: &[bool]) -> Result<()> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NanScore);
    }
    Ok(())
}

fn descending(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).expect("NaN filtered earlier")
}

/// Mean of precision@k over the ranks k of the positives, ranking by
/// descending score with ties in input order.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| descending(scores[i], scores[j]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(sum / n_pos as f64)
}

/// Area under the ROC curve as the Mann-Whitney statistic. Computed from
/// integer pair counts so the result is exactly `(2 wins + ties) / (2 P N)`.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count() as u128;
    let n_neg = labels.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).expect("NaN filtered earlier"));
    let (mut wins, mut ties, mut neg_below) = (0u128, 0u128, 0u128);
    let mut g = 0;
    while g < order.len() {
        let mut end = g;
        while end < order.len() && scores[order[end]] == scores[order[g]] {
            end += 1;
        }
        let pos = order[g..end].iter().filter(|&&i| labels[i]).count() as u128;
        let neg = (end - g) as u128 - pos;
        wins += pos * neg_below;
        ties += pos * neg;
        neg_below += neg;
        g = end;
    }
    Ok((2 * wins + ties) as f64 / (2 * n_pos * n_neg) as f64)
}
