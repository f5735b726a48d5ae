//! Discrimination and calibration scores for probabilistic predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logistic::XgModel;
use crate::shot::ShotDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `None` when the test set holds a single class.
    pub auroc: Option<f64>,
    pub brier: f64,
    pub n_test: usize,
}

/// Area under the ROC curve via the Mann-Whitney rank statistic, ties
/// receiving their average rank.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share their mean
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

pub fn brier_score(probs: &[f64], labels: &[bool]) -> f64 {
    assert_eq!(probs.len(), labels.len(), "probabilities and labels differ in length");
    if probs.is_empty() {
        return 0.0;
    }
    probs
        .iter()
        .zip(labels)
        .map(|(p, &y)| {
            let d = p - y as u8 as f64;
            d * d
        })
        .sum::<f64>()
        / probs.len() as f64
}

pub fn evaluate_predictions(probs: &[f64], labels: &[bool]) -> Result<EvalReport> {
    if probs.is_empty() {
        return Err(Error::Empty("test set"));
    }
    Ok(EvalReport {
        auroc: auroc(probs, labels),
        brier: brier_score(probs, labels),
        n_test: probs.len(),
    })
}

pub fn evaluate(model: &XgModel, test: &ShotDataset) -> Result<EvalReport> {
    let probs = model.predict_dataset(&test.shots)?;
    let labels: Vec<bool> = test.shots.iter().map(|s| s.is_goal).collect();
    evaluate_predictions(&probs, &labels)
}
