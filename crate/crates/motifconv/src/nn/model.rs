//! The stacked model: per-layer conv units fused by attention, topped by a
//! dense classifier. Forward caches everything backward needs; backward is
//! hand-derived reverse mode, exact to floating point.

use crate::error::{Error, Result};
use crate::hash::fnv1a64;
use crate::linalg::{gemm, gemm_nt, gemm_tn, DenseMatrix};
use crate::nn::attention::{attention_backward, attention_combine};
use crate::nn::conv::{conv_unit_backward, conv_unit_forward, ConvParams};
use crate::nn::init::{dropout, glorot_uniform};
use crate::tensor::MotifTensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One conv layer: a unit per motif plus the attention vectors fusing them.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub units: Vec<ConvParams>,
    pub attn: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub layers: Vec<Layer>,
    pub classifier_w: DenseMatrix,
    pub classifier_b: Vec<f64>,
}

/// Forward-pass mode. Training applies inverted dropout to every conv
/// layer's input with a stream derived from (seed, epoch, layer), so a rerun
/// of the same epoch draws the same masks no matter what else consumed
/// randomness in between.
#[derive(Debug, Clone, Copy)]
pub enum Mode {
    Eval,
    Train { dropout: f64, seed: u64, epoch: usize },
}

fn dropout_stream(seed: u64, epoch: usize, layer: usize) -> u64 {
    let mut bytes = [0u8; 24];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&(epoch as u64).to_le_bytes());
    bytes[16..].copy_from_slice(&(layer as u64).to_le_bytes());
    fnv1a64(&bytes)
}

pub struct LayerTape {
    /// The matrix the conv units actually consumed (dropout already applied).
    pub input: DenseMatrix,
    pub mask: Option<Vec<f64>>,
    pub pre: Vec<DenseMatrix>,
    pub post: Vec<DenseMatrix>,
    pub alpha: DenseMatrix,
}

pub struct Tape {
    pub layers: Vec<LayerTape>,
    /// Classifier input: the last layer's fused output.
    pub final_h: DenseMatrix,
}

impl Model {
    /// Glorot-initialized model. `role_counts[u]` is motif u's role count;
    /// widths chain input_dim -> filters -> ... -> filters -> classes.
    pub fn init(
        input_dim: usize,
        filters: usize,
        classes: usize,
        layer_count: usize,
        role_counts: &[usize],
        seed: u64,
    ) -> Result<Model> {
        if layer_count == 0 || filters == 0 || classes == 0 || role_counts.is_empty() {
            return Err(Error::Config(
                "model needs at least one layer, one motif, one filter, one class".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(layer_count);
        for l in 0..layer_count {
            let d_in = if l == 0 { input_dim } else { filters };
            let units = role_counts
                .iter()
                .map(|&k| ConvParams {
                    w: (0..=k).map(|_| glorot_uniform(d_in, filters, &mut rng)).collect(),
                })
                .collect();
            let attn = role_counts
                .iter()
                .map(|_| glorot_uniform(filters, 1, &mut rng).data().to_vec())
                .collect();
            layers.push(Layer { units, attn });
        }
        Ok(Model {
            layers,
            classifier_w: glorot_uniform(filters, classes, &mut rng),
            classifier_b: vec![0.0; classes],
        })
    }

    /// All-zero model of the given shape. Checkpoint loading fills one in.
    pub fn zeros(
        input_dim: usize,
        filters: usize,
        classes: usize,
        layer_count: usize,
        role_counts: &[usize],
    ) -> Model {
        let layers = (0..layer_count)
            .map(|l| {
                let d_in = if l == 0 { input_dim } else { filters };
                Layer {
                    units: role_counts
                        .iter()
                        .map(|&k| ConvParams {
                            w: (0..=k).map(|_| DenseMatrix::zeros(d_in, filters)).collect(),
                        })
                        .collect(),
                    attn: role_counts.iter().map(|_| vec![0.0; filters]).collect(),
                }
            })
            .collect();
        Model {
            layers,
            classifier_w: DenseMatrix::zeros(filters, classes),
            classifier_b: vec![0.0; classes],
        }
    }

    /// Same shapes, all zeros. Gradients and optimizer moments live in
    /// model-shaped containers so traversal code is shared.
    pub fn zeros_like(&self) -> Model {
        Model {
            layers: self
                .layers
                .iter()
                .map(|layer| Layer {
                    units: layer
                        .units
                        .iter()
                        .map(|u| ConvParams {
                            w: u.w.iter().map(|w| DenseMatrix::zeros(w.rows(), w.cols())).collect(),
                        })
                        .collect(),
                    attn: layer.attn.iter().map(|z| vec![0.0; z.len()]).collect(),
                })
                .collect(),
            classifier_w: DenseMatrix::zeros(self.classifier_w.rows(), self.classifier_w.cols()),
            classifier_b: vec![0.0; self.classifier_b.len()],
        }
    }

    /// Named parameter groups in a fixed traversal order. The order defines
    /// zip alignment for the optimizer and the checkpoint layout.
    pub fn param_groups(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for (u, unit) in layer.units.iter().enumerate() {
                for (s, w) in unit.w.iter().enumerate() {
                    out.push((format!("layer{}.motif{}.w{s}", l + 1, u + 1), w.data()));
                }
            }
            for (u, z) in layer.attn.iter().enumerate() {
                out.push((format!("layer{}.motif{}.z", l + 1, u + 1), z.as_slice()));
            }
        }
        out.push(("classifier.weight".to_string(), self.classifier_w.data()));
        out.push(("classifier.bias".to_string(), self.classifier_b.as_slice()));
        out
    }

    pub fn param_groups_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = Vec::new();
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (u, unit) in layer.units.iter_mut().enumerate() {
                for (s, w) in unit.w.iter_mut().enumerate() {
                    out.push((format!("layer{}.motif{}.w{s}", l + 1, u + 1), w.data_mut()));
                }
            }
            for (u, z) in layer.attn.iter_mut().enumerate() {
                out.push((format!("layer{}.motif{}.z", l + 1, u + 1), z.as_mut_slice()));
            }
        }
        out.push(("classifier.weight".to_string(), self.classifier_w.data_mut()));
        out.push(("classifier.bias".to_string(), self.classifier_b.as_mut_slice()));
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_groups().iter().map(|(_, s)| s.len()).sum()
    }
}

fn check_model(model: &Model, tensors: &[MotifTensor]) -> Result<()> {
    if model.layers.is_empty() {
        return Err(Error::Config("model has no layers".into()));
    }
    if tensors.is_empty() {
        return Err(Error::Config("model needs at least one motif tensor".into()));
    }
    for (l, layer) in model.layers.iter().enumerate() {
        if layer.units.len() != tensors.len() || layer.attn.len() != tensors.len() {
            return Err(Error::shape(
                "model_forward",
                format!(
                    "layer {} has {} units for {} motif tensors",
                    l + 1,
                    layer.units.len(),
                    tensors.len()
                ),
            ));
        }
    }
    Ok(())
}

pub fn model_forward(
    model: &Model,
    x: &DenseMatrix,
    tensors: &[MotifTensor],
    mode: Mode,
) -> Result<(DenseMatrix, Tape)> {
    check_model(model, tensors)?;
    let mut h = x.clone();
    let mut layer_tapes = Vec::with_capacity(model.layers.len());
    for (l, layer) in model.layers.iter().enumerate() {
        let (input, mask) = match mode {
            Mode::Eval => (h, None),
            Mode::Train {
                dropout: rate,
                seed,
                epoch,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(dropout_stream(seed, epoch, l));
                dropout(&h, rate, &mut rng, true)?
            }
        };
        let mut pres = Vec::with_capacity(layer.units.len());
        let mut posts = Vec::with_capacity(layer.units.len());
        for (unit, tensor) in layer.units.iter().zip(tensors) {
            let (post, pre) = conv_unit_forward(&input, tensor, unit, true)?;
            pres.push(pre);
            posts.push(post);
        }
        let refs: Vec<&DenseMatrix> = posts.iter().collect();
        let (fused, alpha) = attention_combine(&refs, &layer.attn)?;
        layer_tapes.push(LayerTape {
            input,
            mask,
            pre: pres,
            post: posts,
            alpha,
        });
        h = fused;
    }
    let mut logits = gemm(&h, &model.classifier_w)?;
    let k = logits.cols();
    for i in 0..logits.rows() {
        let row = logits.row_mut(i);
        for c in 0..k {
            row[c] += model.classifier_b[c];
        }
    }
    Ok((
        logits,
        Tape {
            layers: layer_tapes,
            final_h: h,
        },
    ))
}

/// Exact gradients for every parameter, in a model-shaped container.
pub fn model_backward(
    model: &Model,
    tensors: &[MotifTensor],
    tape: &Tape,
    d_logits: &DenseMatrix,
) -> Result<Model> {
    check_model(model, tensors)?;
    if tape.layers.len() != model.layers.len() {
        return Err(Error::shape("model_backward", "stale tape"));
    }
    let mut grads = model.zeros_like();
    grads.classifier_w = gemm_tn(&tape.final_h, d_logits)?;
    for i in 0..d_logits.rows() {
        for (c, b) in grads.classifier_b.iter_mut().enumerate() {
            *b += d_logits.get(i, c);
        }
    }
    let mut d_h = gemm_nt(d_logits, &model.classifier_w)?;

    for l in (0..model.layers.len()).rev() {
        let layer = &model.layers[l];
        let ltape = &tape.layers[l];
        let post_refs: Vec<&DenseMatrix> = ltape.post.iter().collect();
        let (d_posts, d_z) = attention_backward(&post_refs, &layer.attn, &ltape.alpha, &d_h)?;
        grads.layers[l].attn = d_z;

        // The first layer's input is the data matrix; its gradient is dead.
        let want_dx = l > 0;
        let mut d_input: Option<DenseMatrix> = None;
        for (u, (unit, tensor)) in layer.units.iter().zip(tensors).enumerate() {
            let unit_grads = conv_unit_backward(
                &ltape.input,
                tensor,
                unit,
                &ltape.pre[u],
                &d_posts[u],
                true,
                want_dx,
            )?;
            grads.layers[l].units[u].w = unit_grads.w;
            if let Some(dx) = unit_grads.x {
                match &mut d_input {
                    Some(acc) => acc.add_assign(&dx),
                    None => d_input = Some(dx),
                }
            }
        }
        if want_dx {
            let mut d_prev = d_input.expect("want_dx produced gradients");
            if let Some(mask) = &tape.layers[l].mask {
                for (g, &f) in d_prev.data_mut().iter_mut().zip(mask) {
                    *g *= f;
                }
            }
            d_h = d_prev;
        }
    }
    Ok(grads)
}
