//! Parameter initialization and dropout.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Uniform Glorot: entries drawn from ±sqrt(6 / (fan_in + fan_out)) with
/// fan_in = rows, fan_out = cols.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-limit..=limit))
        .collect();
    DenseMatrix::from_vec(rows, cols, data)
}

/// Inverted dropout: in train mode each entry is zeroed with probability
/// `rate` and survivors are scaled by 1/(1-rate), so the expected value is
/// unchanged and eval needs no rescaling. Returns the transformed matrix and
/// the per-entry factors (0 or 1/(1-rate)); eval mode is the identity with no
/// mask.
pub fn dropout(
    b: &DenseMatrix,
    rate: f64,
    rng: &mut ChaCha8Rng,
    train: bool,
) -> Result<(DenseMatrix, Option<Vec<f64>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    if !train || rate == 0.0 {
        return Ok((b.clone(), None));
    }
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    let mask: Vec<f64> = (0..b.rows() * b.cols())
        .map(|_| if rng.gen_bool(keep) { scale } else { 0.0 })
        .collect();
    let mut out = b.clone();
    for (x, &f) in out.data_mut().iter_mut().zip(&mask) {
        *x *= f;
    }
    Ok((out, Some(mask)))
}
