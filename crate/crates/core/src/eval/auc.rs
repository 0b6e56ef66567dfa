//! Area under the ROC curve.

use super::EvalError;

fn class_sizes(labels: &[bool]) -> Result<(usize, usize), EvalError> {
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass { positives, negatives });
    }
    Ok((positives, negatives))
}

/// Rank-based (Mann-Whitney) AUC. Tied scores get their mean rank, so a
/// tied positive/negative pair counts one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    assert_eq!(scores.len(), labels.len(), "one label per score");
    let (n_pos, n_neg) = class_sizes(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j share their mean.
        let mid = (i + 1 + j) as f64 / 2.0;
        rank_sum += mid * order[i..j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// AUC by enumerating every positive/negative pair. Quadratic; used to
/// cross-check [`auc`].
pub fn auc_pairwise(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    let (n_pos, n_neg) = class_sizes(labels)?;
    let mut wins = 0.0;
    for (sp, _) in scores.iter().zip(labels).filter(|(_, &l)| l) {
        for (sn, _) in scores.iter().zip(labels).filter(|(_, &l)| !l) {
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (n_pos as f64 * n_neg as f64))
}
