use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Split};
use crate::model::{class_probabilities, forward, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskMetric {
    Accuracy,
    Auc,
}

impl FromStr for TaskMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(TaskMetric::Accuracy),
            "auc" => Ok(TaskMetric::Auc),
            other => Err(Error::Config(format!("unknown metric '{other}'"))),
        }
    }
}

/// Fraction of `(prediction, label)` pairs that agree.
pub fn accuracy(predicted: &[usize], labels: &[usize]) -> Result<f64> {
    if predicted.is_empty() || predicted.len() != labels.len() {
        return Err(Error::State(format!(
            "accuracy over {} predictions and {} labels",
            predicted.len(),
            labels.len()
        )));
    }
    let hits = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Mann–Whitney AUC of `scores` for the positive class, ties at midrank.
pub fn auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() || scores.is_empty() {
        return Err(Error::State("AUC needs one score per label".into()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::State("AUC needs both classes present".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mid;
        }
        i = j + 1;
    }
    let rank_sum: f64 = ranks.iter().zip(positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

/// Metric of `params` on the labeled nodes of `split`.
pub fn evaluate(g: &Graph, params: &ModelParams, split: Split, metric: TaskMetric) -> Result<f64> {
    let nodes: Vec<(usize, usize)> = g
        .split_nodes(split)
        .into_iter()
        .filter_map(|v| g.label(v).map(|y| (v, y)))
        .collect();
    if nodes.is_empty() {
        return Err(Error::State(format!("no labeled {split:?} nodes to evaluate")));
    }
    let probs = class_probabilities(&forward(params, g)?.logits);
    match metric {
        TaskMetric::Accuracy => {
            let predicted: Vec<usize> = nodes
                .iter()
                .map(|&(v, _)| {
                    let row = probs.row(v);
                    (0..row.len()).fold(0, |best, k| if row[k] > row[best] { k } else { best })
                })
                .collect();
            let labels: Vec<usize> = nodes.iter().map(|&(_, y)| y).collect();
            accuracy(&predicted, &labels)
        }
        TaskMetric::Auc => {
            if probs.cols() != 2 {
                return Err(Error::State(format!("AUC needs 2 classes, model has {}", probs.cols())));
            }
            let scores: Vec<f64> = nodes.iter().map(|&(v, _)| probs[(v, 1)]).collect();
            let positive: Vec<bool> = nodes.iter().map(|&(_, y)| y == 1).collect();
            // a split with one class has no ranking to score
            if positive.iter().all(|&p| p) || positive.iter().all(|&p| !p) {
                return Ok(0.5);
            }
            auc(&scores, &positive)
        }
    }
}
