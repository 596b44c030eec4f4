//! Joint feature matrix over a typed node set.
//!
//! Each type owns a contiguous column block. A node's row carries its type's
//! attributes inside that block and zeros everywhere else, so one weight
//! matrix can serve all types without mixing their feature spaces. Types with
//! no attributes get an identity block: node i of such a type has a single
//! one marking it, which lets the first layer learn a free embedding per node.

use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use crate::linalg::DenseMatrix;
use std::collections::HashMap;

/// Per-type attribute storage. Rows are indexed by the node's rank among
/// nodes of its type (ascending node id).
#[derive(Debug, Clone, Default)]
pub struct FeatureTable {
    by_type: HashMap<u32, (usize, Vec<f64>)>,
}

impl FeatureTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register attributes for a type. `rows` must hold one row per node of
    /// the type in ascending id order, `width` values each.
    pub fn insert(&mut self, type_id: u32, width: usize, rows: Vec<f64>) -> Result<()> {
        if width == 0 {
            return Err(Error::validation(format!(
                "feature width for type {type_id} must be positive"
            )));
        }
        if rows.len() % width != 0 {
            return Err(Error::validation(format!(
                "feature buffer for type {type_id} has {} values, not a multiple of width {width}",
                rows.len()
            )));
        }
        if self.by_type.insert(type_id, (width, rows)).is_some() {
            return Err(Error::validation(format!(
                "features for type {type_id} declared twice"
            )));
        }
        Ok(())
    }

    pub fn width(&self, type_id: u32) -> Option<usize> {
        self.by_type.get(&type_id).map(|(w, _)| *w)
    }

    pub fn has_type(&self, type_id: u32) -> bool {
        self.by_type.contains_key(&type_id)
    }
}

/// Assemble the joint matrix. Column blocks are laid out in ascending type id
/// order; a type missing from the table contributes an identity block sized
/// by its node count.
pub fn build_joint_features(graph: &HeteroGraph, table: &FeatureTable) -> Result<DenseMatrix> {
    let n = graph.node_count();
    let type_count = graph.types().len() as u32;

    // Rank of each node within its type, and per-type node counts.
    let mut counts = vec![0usize; type_count as usize];
    let mut rank = vec![0usize; n];
    for v in 0..n {
        let t = graph.node_type(v as u32) as usize;
        rank[v] = counts[t];
        counts[t] += 1;
    }

    let mut widths = vec![0usize; type_count as usize];
    for t in 0..type_count {
        let w = match table.width(t) {
            Some(w) => {
                let (_, rows) = &table.by_type[&t];
                let expected = counts[t as usize] * w;
                if rows.len() != expected {
                    return Err(Error::validation(format!(
                        "type {} has {} nodes, expected {expected} feature values, got {}",
                        graph.types().name(t),
                        counts[t as usize],
                        rows.len()
                    )));
                }
                w
            }
            None => counts[t as usize],
        };
        widths[t as usize] = w;
    }

    let mut offsets = vec![0usize; type_count as usize];
    let mut total = 0usize;
    for t in 0..type_count as usize {
        offsets[t] = total;
        total += widths[t];
    }
    if total == 0 {
        return Err(Error::validation("joint feature width is zero"));
    }

    let mut x = DenseMatrix::zeros(n, total);
    for v in 0..n {
        let t = graph.node_type(v as u32);
        let off = offsets[t as usize];
        match table.by_type.get(&t) {
            Some((w, rows)) => {
                let src = &rows[rank[v] * w..(rank[v] + 1) * w];
                x.row_mut(v)[off..off + w].copy_from_slice(src);
            }
            None => {
                x.row_mut(v)[off + rank[v]] = 1.0;
            }
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, TypeSet};

    #[test]
    fn blocks_are_disjoint_and_padded() {
        let mut types = TypeSet::new();
        let a = types.intern("a");
        let b = types.intern("b");
        let g = HeteroGraph::new(
            types,
            vec![a, b, a, b],
            vec![Edge {
                src: 0,
                dst: 1,
                directed: false,
            }],
        )
        .unwrap();
        let mut table = FeatureTable::new();
        table.insert(a, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        table.insert(b, 3, vec![5.0, 6.0, 7.0, 8.0, 9.0, 10.0]).unwrap();
        let x = build_joint_features(&g, &table).unwrap();
        assert_eq!((x.rows(), x.cols()), (4, 5));
        assert_eq!(x.row(0), &[1.0, 2.0, 0.0, 0.0, 0.0]);
        assert_eq!(x.row(1), &[0.0, 0.0, 5.0, 6.0, 7.0]);
        assert_eq!(x.row(2), &[3.0, 4.0, 0.0, 0.0, 0.0]);
        assert_eq!(x.row(3), &[0.0, 0.0, 8.0, 9.0, 10.0]);
    }

    #[test]
    fn missing_type_gets_identity_block() {
        let mut types = TypeSet::new();
        let a = types.intern("a");
        let b = types.intern("b");
        let g = HeteroGraph::new(types, vec![b, a, b, b], vec![]).unwrap();
        let mut table = FeatureTable::new();
        table.insert(a, 1, vec![0.5]).unwrap();
        let x = build_joint_features(&g, &table).unwrap();
        // Type a: width 1. Type b: 3 nodes, identity width 3.
        assert_eq!((x.rows(), x.cols()), (4, 4));
        assert_eq!(x.row(1), &[0.5, 0.0, 0.0, 0.0]);
        assert_eq!(x.row(0), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(x.row(2), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(x.row(3), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn all_types_featureless_is_full_identity() {
        let g = HeteroGraph::homogeneous(3, vec![]).unwrap();
        let x = build_joint_features(&g, &FeatureTable::new()).unwrap();
        assert_eq!(x, DenseMatrix::identity(3));
    }

    #[test]
    fn wrong_row_count_is_rejected() {
        let g = HeteroGraph::homogeneous(3, vec![]).unwrap();
        let mut table = FeatureTable::new();
        table.insert(0, 2, vec![1.0, 2.0]).unwrap();
        assert!(build_joint_features(&g, &table).is_err());
    }
}
