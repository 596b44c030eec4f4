//! The motif convolution unit and its instance-wise reference.
//!
//! Forward: H = σ( X·W_0 + diag(1/L) Σ_k A_k·X·W_k ), where A_k are the
//! role count matrices and L the per-node instance counts. Nodes with no
//! instances get a zero motif term but keep the target term X·W_0.
//!
//! `reference_instance_conv` computes the same thing by looping over explicit
//! instances (a standard convolution per instance, then mean pooling). The
//! two paths agreeing is a core correctness check: the tensor form is exactly
//! the pooled instance form, not an approximation of it.

use crate::enumerate::MotifInstance;
use crate::error::{Error, Result};
use crate::linalg::{gemm, gemm_nt, gemm_tn, map_elementwise, row_scale, spmm, spmm_transposed, DenseMatrix};
use crate::motif::Motif;
use crate::tensor::MotifTensor;

/// Weights of one conv unit: `w[0]` multiplies the target's own features,
/// `w[k]` the pooled features of role-k neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub w: Vec<DenseMatrix>,
}

impl ConvParams {
    pub fn role_count(&self) -> usize {
        self.w.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.w[0].rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w[0].cols()
    }
}

pub fn relu(m: &DenseMatrix) -> DenseMatrix {
    map_elementwise(|x| if x > 0.0 { x } else { 0.0 }, m)
}

fn check_unit_shapes(x: &DenseMatrix, tensor: &MotifTensor, params: &ConvParams) -> Result<()> {
    if params.w.len() != tensor.role_count() + 1 {
        return Err(Error::shape(
            "conv_unit",
            format!(
                "{} weight slices for {} roles",
                params.w.len(),
                tensor.role_count()
            ),
        ));
    }
    if tensor.node_count() != x.rows() {
        return Err(Error::shape(
            "conv_unit",
            format!("tensor over {} nodes, X has {} rows", tensor.node_count(), x.rows()),
        ));
    }
    for (idx, w) in params.w.iter().enumerate() {
        if w.rows() != x.cols() || w.cols() != params.w[0].cols() {
            return Err(Error::shape(
                "conv_unit",
                format!(
                    "weight slice {idx} is {}x{}, expected {}x{}",
                    w.rows(),
                    w.cols(),
                    x.cols(),
                    params.w[0].cols()
                ),
            ));
        }
    }
    Ok(())
}

/// Forward pass of one conv unit. Returns the output and the pre-activation
/// (needed to gate gradients through the ReLU).
pub fn conv_unit_forward(
    x: &DenseMatrix,
    tensor: &MotifTensor,
    params: &ConvParams,
    activation: bool,
) -> Result<(DenseMatrix, DenseMatrix)> {
    check_unit_shapes(x, tensor, params)?;
    let mut pre = gemm(x, &params.w[0])?;
    let mut motif_acc: Option<DenseMatrix> = None;
    for (k, w_k) in params.w.iter().enumerate().skip(1) {
        let t = gemm(x, w_k)?;
        let s = spmm(tensor.role_matrix(k as u8), &t)?;
        match &mut motif_acc {
            Some(acc) => acc.add_assign(&s),
            None => motif_acc = Some(s),
        }
    }
    if let Some(acc) = motif_acc {
        pre.add_assign(&row_scale(&tensor.inverse_counts(), &acc)?);
    }
    let out = if activation { relu(&pre) } else { pre.clone() };
    Ok((out, pre))
}

/// Gradients of one conv unit.
pub struct ConvUnitGrads {
    pub w: Vec<DenseMatrix>,
    /// Gradient w.r.t. the unit's input; skipped when the caller does not
    /// need it (first layer).
    pub x: Option<DenseMatrix>,
}

/// Reverse-mode of `conv_unit_forward`. `d_out` is the loss gradient at the
/// unit's output; `pre` is the cached pre-activation.
pub fn conv_unit_backward(
    x: &DenseMatrix,
    tensor: &MotifTensor,
    params: &ConvParams,
    pre: &DenseMatrix,
    d_out: &DenseMatrix,
    activation: bool,
    want_dx: bool,
) -> Result<ConvUnitGrads> {
    check_unit_shapes(x, tensor, params)?;
    if d_out.rows() != pre.rows() || d_out.cols() != pre.cols() {
        return Err(Error::shape(
            "conv_unit_backward",
            format!(
                "gradient is {}x{}, pre-activation {}x{}",
                d_out.rows(),
                d_out.cols(),
                pre.rows(),
                pre.cols()
            ),
        ));
    }
    // Gate by the ReLU: derivative 1 where pre > 0, else 0 (0 at exactly 0).
    let d_pre = if activation {
        let mut g = d_out.clone();
        for (v, &p) in g.data_mut().iter_mut().zip(pre.data()) {
            if p <= 0.0 {
                *v = 0.0;
            }
        }
        g
    } else {
        d_out.clone()
    };

    let mut grads = Vec::with_capacity(params.w.len());
    grads.push(gemm_tn(x, &d_pre)?);
    let mut dx = if want_dx {
        Some(gemm_nt(&d_pre, &params.w[0])?)
    } else {
        None
    };
    // The row scaling is diagonal, so it transposes onto the upstream
    // gradient; each role term then peels off through A_kᵀ.
    let q = row_scale(&tensor.inverse_counts(), &d_pre)?;
    for (k, w_k) in params.w.iter().enumerate().skip(1) {
        let z_k = spmm_transposed(tensor.role_matrix(k as u8), &q)?;
        grads.push(gemm_tn(x, &z_k)?);
        if let Some(dx) = &mut dx {
            dx.add_assign(&gemm_nt(&z_k, w_k)?);
        }
    }
    Ok(ConvUnitGrads { w: grads, x: dx })
}

/// Instance-wise reference: per-instance standard convolution followed by
/// mean pooling over each node's instances, then ReLU. Deliberately naive.
pub fn reference_instance_conv(
    motif: &Motif,
    instances: &[MotifInstance],
    params: &ConvParams,
    x: &DenseMatrix,
) -> DenseMatrix {
    let n = x.rows();
    let f = params.output_dim();
    let mut pooled = DenseMatrix::zeros(n, f);
    let mut counts = vec![0.0f64; n];
    for inst in instances {
        counts[inst.target as usize] += 1.0;
        for (pos, &node) in inst.assignment.iter().enumerate() {
            let pos = pos as u8;
            if pos == motif.target() {
                continue;
            }
            let w_k = &params.w[motif.role_of(pos) as usize];
            let feats = x.row(node as usize);
            let out_row = pooled.row_mut(inst.target as usize);
            for c in 0..f {
                let mut acc = 0.0;
                for (d, &xv) in feats.iter().enumerate() {
                    acc += xv * w_k.get(d, c);
                }
                out_row[c] += acc;
            }
        }
    }
    let mut out = DenseMatrix::zeros(n, f);
    for i in 0..n {
        let own = x.row(i);
        let row = out.row_mut(i);
        for c in 0..f {
            let mut acc = 0.0;
            for (d, &xv) in own.iter().enumerate() {
                acc += xv * params.w[0].get(d, c);
            }
            if counts[i] > 0.0 {
                acc += pooled.get(i, c) / counts[i];
            }
            row[c] = acc.max(0.0);
        }
    }
    out
}
