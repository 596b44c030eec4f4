//! Per-node attention over the conv units of one layer.
//!
//! Each motif u gets a learned vector z_u. For node i the logit is
//! e_{u,i} = z_uᵀ h^u_i / sqrt(F), with F the feature width (scaled
//! dot-product convention). A per-node softmax over motifs turns the logits
//! into weights and the layer output is the weighted sum of unit outputs.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::parallel::for_each_row;

fn check_inputs(hs: &[&DenseMatrix], z: &[Vec<f64>]) -> Result<(usize, usize)> {
    if hs.is_empty() || hs.len() != z.len() {
        return Err(Error::shape(
            "attention",
            format!("{} unit outputs for {} attention vectors", hs.len(), z.len()),
        ));
    }
    let (n, f) = (hs[0].rows(), hs[0].cols());
    for h in hs {
        if h.rows() != n || h.cols() != f {
            return Err(Error::shape(
                "attention",
                format!("unit outputs disagree: {}x{} vs {n}x{f}", h.rows(), h.cols()),
            ));
        }
    }
    for zk in z {
        if zk.len() != f {
            return Err(Error::shape(
                "attention",
                format!("attention vector of length {} for width {f}", zk.len()),
            ));
        }
    }
    Ok((n, f))
}

/// Combine unit outputs. Returns the fused N×F output and the N×U weight
/// matrix (each row a softmax over motifs).
pub fn attention_combine(
    hs: &[&DenseMatrix],
    z: &[Vec<f64>],
) -> Result<(DenseMatrix, DenseMatrix)> {
    let (n, f) = check_inputs(hs, z)?;
    let u = hs.len();
    let scale = 1.0 / (f as f64).sqrt();

    let mut alpha = DenseMatrix::zeros(n, u);
    for_each_row(alpha.data_mut(), u, |i, arow| {
        for (k, zk) in z.iter().enumerate() {
            let mut dot = 0.0;
            for (a, b) in hs[k].row(i).iter().zip(zk) {
                dot += a * b;
            }
            arow[k] = dot * scale;
        }
        // Stable softmax in place.
        let max = arow.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut total = 0.0;
        for v in arow.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in arow.iter_mut() {
            *v /= total;
        }
    });

    let mut out = DenseMatrix::zeros(n, f);
    {
        let alpha_ref = &alpha;
        for_each_row(out.data_mut(), f, |i, row| {
            for k in 0..u {
                let a = alpha_ref.get(i, k);
                for (o, &hv) in row.iter_mut().zip(hs[k].row(i)) {
                    *o += a * hv;
                }
            }
        });
    }
    Ok((out, alpha))
}

/// Reverse-mode of `attention_combine`: given the loss gradient at the fused
/// output, produce gradients for every unit output and attention vector.
///
/// Per node, with g the upstream row, p_k = g·h^k and the softmax Jacobian:
///   de_k  = α_k (p_k − Σ_m α_m p_m)
///   dh^k  = α_k g + de_k z_k / sqrt(F)
///   dz_k += de_k h^k / sqrt(F)
pub fn attention_backward(
    hs: &[&DenseMatrix],
    z: &[Vec<f64>],
    alpha: &DenseMatrix,
    d_out: &DenseMatrix,
) -> Result<(Vec<DenseMatrix>, Vec<Vec<f64>>)> {
    let (n, f) = check_inputs(hs, z)?;
    let u = hs.len();
    if alpha.rows() != n || alpha.cols() != u || d_out.rows() != n || d_out.cols() != f {
        return Err(Error::shape("attention_backward", "stale tape"));
    }
    let scale = 1.0 / (f as f64).sqrt();

    let mut d_hs: Vec<DenseMatrix> = (0..u).map(|_| DenseMatrix::zeros(n, f)).collect();
    let mut d_z: Vec<Vec<f64>> = vec![vec![0.0; f]; u];
    // Sequential over nodes: dz accumulates across all nodes, so the cheap
    // safe version is a single pass (n is never the bottleneck here).
    let mut p = vec![0.0; u];
    for i in 0..n {
        let g = d_out.row(i);
        let mut weighted = 0.0;
        for k in 0..u {
            let mut dot = 0.0;
            for (a, b) in g.iter().zip(hs[k].row(i)) {
                dot += a * b;
            }
            p[k] = dot;
            weighted += alpha.get(i, k) * dot;
        }
        for k in 0..u {
            let a = alpha.get(i, k);
            let de = a * (p[k] - weighted);
            let drow = d_hs[k].row_mut(i);
            for ((d, &gv), &zv) in drow.iter_mut().zip(g).zip(&z[k]) {
                *d = a * gv + de * zv * scale;
            }
            for (dz, &hv) in d_z[k].iter_mut().zip(hs[k].row(i)) {
                *dz += de * hv * scale;
            }
        }
    }
    Ok((d_hs, d_z))
}
