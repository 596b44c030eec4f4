//! Classification metrics over a masked node set.
//!
//! Micro-F1 pools TP/FP/FN across classes; macro-F1 averages per-class F1,
//! where a class with no true and no predicted positives counts as F1 = 1.
//! Multi-label predictions threshold the sigmoid at 0.5 (logit >= 0), and
//! multi-label accuracy is exact set match.

use crate::error::Result;
use crate::labels::{LabelSet, TaskKind};
use crate::linalg::DenseMatrix;
use crate::nn::loss::check_mask;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

/// Predicted class set per row: argmax for single-label (ties to the lowest
/// class id), logit >= 0 for multi-label.
pub fn predict(logits: &DenseMatrix, task: TaskKind) -> Vec<Vec<u32>> {
    let k = logits.cols();
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            match task {
                TaskKind::MultiClass { .. } => {
                    let mut best = 0usize;
                    for c in 1..k {
                        if row[c] > row[best] {
                            best = c;
                        }
                    }
                    vec![best as u32]
                }
                TaskKind::MultiLabel { .. } => (0..k)
                    .filter(|&c| row[c] >= 0.0)
                    .map(|c| c as u32)
                    .collect(),
            }
        })
        .collect()
}

fn f1_from_counts(tp: u64, fp: u64, fn_: u64) -> f64 {
    if tp + fp + fn_ == 0 {
        return 1.0;
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn evaluate_f1(logits: &DenseMatrix, labels: &LabelSet, mask: &[u32]) -> Result<Metrics> {
    check_mask(logits, labels, mask)?;
    let task = labels.task();
    let k = task.class_count();
    let preds = predict(logits, task);
    let mut tp = vec![0u64; k];
    let mut fp = vec![0u64; k];
    let mut fn_ = vec![0u64; k];
    let mut exact = 0u64;
    for &v in mask {
        let truth = labels.classes_of(v).expect("check_mask verified labels");
        let pred = &preds[v as usize];
        if pred.as_slice() == truth {
            exact += 1;
        }
        // Both sides are sorted ascending: truth by LabelSet validation,
        // predictions by construction.
        let (mut ti, mut pi) = (0, 0);
        while ti < truth.len() || pi < pred.len() {
            if ti < truth.len() && (pi >= pred.len() || truth[ti] < pred[pi]) {
                fn_[truth[ti] as usize] += 1;
                ti += 1;
            } else if pi < pred.len() && (ti >= truth.len() || pred[pi] < truth[ti]) {
                fp[pred[pi] as usize] += 1;
                pi += 1;
            } else {
                tp[truth[ti] as usize] += 1;
                ti += 1;
                pi += 1;
            }
        }
    }
    let micro_f1 = f1_from_counts(tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    let macro_f1 =
        (0..k).map(|c| f1_from_counts(tp[c], fp[c], fn_[c])).sum::<f64>() / k as f64;
    Ok(Metrics {
        micro_f1,
        macro_f1,
        accuracy: exact as f64 / mask.len() as f64,
    })
}
