use serde::{Deserialize, Serialize};

use super::EvalError;

fn same_len(a: usize, b: usize) -> Result<(), EvalError> {
    if a == b {
        Ok(())
    } else {
        Err(EvalError::LengthMismatch { left: a, right: b })
    }
}

/// Sample Pearson correlation, accumulated with single-pass co-moment updates.
pub fn pearson_r(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    same_len(a.len(), b.len())?;
    if a.len() < 2 {
        return Err(EvalError::TooShort { found: a.len(), min: 2 });
    }
    let (mut ma, mut mb) = (0.0, 0.0);
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
        let n = (i + 1) as f64;
        let dx = x - ma;
        let dy = y - mb;
        ma += dx / n;
        mb += dy / n;
        saa += dx * (x - ma);
        sbb += dy * (y - mb);
        sab += dx * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(EvalError::ConstantInput);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    same_len(a.len(), b.len())?;
    if a.is_empty() {
        return Err(EvalError::TooShort { found: 0, min: 1 });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}

/// Mean binary cross-entropy with probabilities clipped to `[1e-15, 1 − 1e-15]`.
pub fn log_loss(y_true: &[f64], probs: &[f64]) -> Result<f64, EvalError> {
    same_len(y_true.len(), probs.len())?;
    if y_true.is_empty() {
        return Err(EvalError::TooShort { found: 0, min: 1 });
    }
    let eps = 1e-15;
    let total: f64 = y_true
        .iter()
        .zip(probs)
        .map(|(y, p)| {
            let p = p.clamp(eps, 1.0 - eps);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / y_true.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub f1_macro: f64,
    pub f1_weighted: f64,
    pub accuracy: f64,
    /// Index 0 is the negative class, 1 the positive class.
    pub per_class: [ClassStats; 2],
}

/// Per-class precision/recall/F1 with the zero convention for empty
/// denominators. Macro and weighted averages run over the labels that occur
/// in either `y_true` or `y_pred`.
pub fn classification_report(y_true: &[bool], y_pred: &[bool]) -> Result<ClassificationReport, EvalError> {
    same_len(y_true.len(), y_pred.len())?;
    if y_true.is_empty() {
        return Err(EvalError::TooShort { found: 0, min: 1 });
    }
    // counts[truth][prediction]
    let mut counts = [[0usize; 2]; 2];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        counts[t as usize][p as usize] += 1;
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let stats = |c: usize| {
        let tp = counts[c][c];
        let predicted = counts[0][c] + counts[1][c];
        let support = counts[c][0] + counts[c][1];
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        (ClassStats { precision, recall, f1, support }, predicted)
    };
    let (neg, neg_pred) = stats(0);
    let (pos, pos_pred) = stats(1);
    let present: Vec<&ClassStats> = [(&neg, neg_pred), (&pos, pos_pred)]
        .into_iter()
        .filter(|(s, pred)| s.support > 0 || *pred > 0)
        .map(|(s, _)| s)
        .collect();
    let f1_macro = present.iter().map(|s| s.f1).sum::<f64>() / present.len() as f64;
    let n = y_true.len() as f64;
    let f1_weighted = (neg.f1 * neg.support as f64 + pos.f1 * pos.support as f64) / n;
    let accuracy = (counts[0][0] + counts[1][1]) as f64 / n;
    Ok(ClassificationReport { f1_macro, f1_weighted, accuracy, per_class: [neg, pos] })
}

/// Area under the ROC curve via the Mann-Whitney statistic with average
/// ranks for ties: `(R₊ − n₊(n₊+1)/2) / (n₊ n₋)`.
pub fn auc(y_true: &[bool], scores: &[f64]) -> Result<f64, EvalError> {
    same_len(y_true.len(), scores.len())?;
    let n_pos = y_true.iter().filter(|t| **t).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if y_true[k] {
                rank_sum_pos += avg;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}
