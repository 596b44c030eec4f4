//! Classification losses over a masked node set.
//!
//! Losses are sums over the masked nodes, not means; early stopping compares
//! losses over one fixed mask so the scale is immaterial, and sums keep the
//! gradient expressions free of a 1/m factor.

use crate::error::{Error, Result};
use crate::labels::{LabelSet, TaskKind};
use crate::linalg::DenseMatrix;

pub(crate) fn check_mask(logits: &DenseMatrix, labels: &LabelSet, mask: &[u32]) -> Result<()> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    if logits.cols() != labels.task().class_count() {
        return Err(Error::shape(
            "loss",
            format!(
                "{} logit columns for {} classes",
                logits.cols(),
                labels.task().class_count()
            ),
        ));
    }
    for &v in mask {
        if v as usize >= logits.rows() {
            return Err(Error::shape(
                "loss",
                format!("masked node {v} outside the {} logit rows", logits.rows()),
            ));
        }
        if labels.classes_of(v).is_none() {
            return Err(Error::validation(format!("masked node {v} has no label")));
        }
    }
    Ok(())
}

/// Softmax cross-entropy, single-label tasks. Returns the summed loss and
/// dLoss/dlogits (softmax minus one-hot on masked rows, zero elsewhere).
pub fn softmax_cross_entropy(
    logits: &DenseMatrix,
    labels: &LabelSet,
    mask: &[u32],
) -> Result<(f64, DenseMatrix)> {
    if !matches!(labels.task(), TaskKind::MultiClass { .. }) {
        return Err(Error::validation(
            "softmax cross-entropy requires a single-label task",
        ));
    }
    check_mask(logits, labels, mask)?;
    let k = logits.cols();
    let mut grad = DenseMatrix::zeros(logits.rows(), k);
    let mut loss = 0.0;
    for &v in mask {
        let row = logits.row(v as usize);
        let y = labels.classes_of(v).unwrap()[0] as usize;
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let mut total = 0.0;
        for &x in row {
            total += (x - max).exp();
        }
        // log-sum-exp trick: lse = max + ln Σ e^{x-max}.
        loss += max + total.ln() - row[y];
        let grow = grad.row_mut(v as usize);
        for (c, &x) in row.iter().enumerate() {
            grow[c] = (x - max).exp() / total;
        }
        grow[y] -= 1.0;
    }
    Ok((loss, grad))
}

/// Numerically stable sigmoid.
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-class sigmoid cross-entropy, multi-label tasks. Summed over masked
/// nodes and classes; gradient is sigmoid(z) - y on masked rows.
pub fn binary_cross_entropy(
    logits: &DenseMatrix,
    labels: &LabelSet,
    mask: &[u32],
) -> Result<(f64, DenseMatrix)> {
    if !matches!(labels.task(), TaskKind::MultiLabel { .. }) {
        return Err(Error::validation(
            "binary cross-entropy requires a multi-label task",
        ));
    }
    check_mask(logits, labels, mask)?;
    let k = logits.cols();
    let mut grad = DenseMatrix::zeros(logits.rows(), k);
    let mut loss = 0.0;
    for &v in mask {
        let mut y = vec![0.0f64; k];
        for &c in labels.classes_of(v).unwrap() {
            y[c as usize] = 1.0;
        }
        let row = logits.row(v as usize);
        let grow = grad.row_mut(v as usize);
        for c in 0..k {
            let z = row[c];
            // max(z,0) - z·y + ln(1 + e^{-|z|}) is the stable expansion of
            // -[y ln σ(z) + (1-y) ln(1-σ(z))].
            loss += z.max(0.0) - z * y[c] + (-z.abs()).exp().ln_1p();
            grow[c] = sigmoid(z) - y[c];
        }
    }
    Ok((loss, grad))
}
