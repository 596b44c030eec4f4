//! Motif-based graph convolution for semi-supervised node classification.
//!
//! The pipeline: parse a typed graph ([`io`]), enumerate instances of small
//! typed motifs ([`motif`], [`enumerate`]), aggregate them into per-role
//! sparse count matrices ([`tensor`]), and run a stacked convolution whose
//! receptive field is the motif rather than the plain edge ([`nn`]), with
//! per-node attention fusing several motifs. [`train`] drives full-batch
//! optimization with windowed early stopping; [`synth`] generates seeded
//! datasets where the motif signal is planted by construction.
//!
//! Kernels and enumeration are data-parallel via rayon under the `parallel`
//! feature (on by default) and fall back to sequential loops without it;
//! results are identical either way, including float summation order.

pub mod enumerate;
pub mod error;
pub mod features;
pub mod graph;
mod hash;
pub mod io;
pub mod labels;
pub mod linalg;
pub mod metrics;
pub mod motif;
pub mod nn;
mod parallel;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
