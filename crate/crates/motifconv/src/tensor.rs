//! Motif-adjacency tensor: one sparse count matrix per role plus the
//! per-node instance count diagonal.
//!
//! Entry (k, i, j) counts how often node j fills a role-k position across
//! instances whose target is node i. The diagonal counts instances per
//! target. Counts are exact integers stored as f64 so the matrices feed the
//! sparse kernels directly.

use crate::enumerate::{
    enumerate_triangles, enumerate_wedges, enumerate_with_budget, is_path3, is_plain_triangle,
    Budget, MotifInstance,
};
use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use crate::hash::fnv1a64_hex;
use crate::linalg::SparseMatrix;
use crate::motif::Motif;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// Default cap on instances per motif; guards dense pathological graphs.
pub const DEFAULT_INSTANCE_CAP: usize = 100_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct MotifTensor {
    // role_matrices[k-1] holds role k.
    role_matrices: Vec<SparseMatrix>,
    instance_counts: Vec<f64>,
}

impl MotifTensor {
    /// Enumerate the motif and aggregate counts, dispatching to the
    /// shape-specialized enumerators where one applies.
    pub fn build(g: &HeteroGraph, motif: &Motif) -> Result<MotifTensor> {
        Self::build_with_cap(g, motif, DEFAULT_INSTANCE_CAP)
    }

    pub fn build_with_cap(g: &HeteroGraph, motif: &Motif, cap: usize) -> Result<MotifTensor> {
        let over_cap = |n: usize| {
            Err(Error::ResourceLimit(format!(
                "motif has at least {n} instances, cap is {cap}"
            )))
        };
        let instances = if is_plain_triangle(motif) {
            let instances = enumerate_triangles(g, motif);
            if instances.len() > cap {
                return over_cap(instances.len());
            }
            instances
        } else if is_path3(motif) {
            let instances = enumerate_wedges(g, motif);
            if instances.len() > cap {
                return over_cap(instances.len());
            }
            instances
        } else {
            let budget = Budget::new(cap);
            let instances = enumerate_with_budget(g, motif, None, Some(&budget));
            if budget.exceeded() {
                return over_cap(instances.len());
            }
            instances
        };
        Ok(Self::from_instances(g, motif, &instances))
    }

    /// Aggregate an explicit instance list. This is the tensor definition
    /// spelled out, so tests can feed it the oracle's list.
    pub fn from_instances(
        g: &HeteroGraph,
        motif: &Motif,
        instances: &[MotifInstance],
    ) -> MotifTensor {
        let n = g.node_count();
        let k = motif.role_count();
        let mut counts: Vec<BTreeMap<(u32, u32), u64>> = vec![BTreeMap::new(); k];
        let mut diag = vec![0.0f64; n];
        for inst in instances {
            diag[inst.target as usize] += 1.0;
            for (x, &j) in inst.assignment.iter().enumerate() {
                let x = x as u8;
                if x == motif.target() {
                    continue;
                }
                let role = motif.role_of(x) as usize;
                *counts[role - 1].entry((inst.target, j)).or_insert(0) += 1;
            }
        }
        let role_matrices = counts
            .into_iter()
            .map(|m| {
                SparseMatrix::from_triplets(n, n, m.into_iter().map(|((i, j), c)| (i, j, c as f64)))
            })
            .collect();
        MotifTensor {
            role_matrices,
            instance_counts: diag,
        }
    }

    pub fn role_count(&self) -> usize {
        self.role_matrices.len()
    }

    pub fn node_count(&self) -> usize {
        self.instance_counts.len()
    }

    /// Count matrix for a role, 1-based to match the motif's role map.
    pub fn role_matrix(&self, role: u8) -> &SparseMatrix {
        &self.role_matrices[role as usize - 1]
    }

    pub fn role_matrices(&self) -> &[SparseMatrix] {
        &self.role_matrices
    }

    /// Instances per target node (the diagonal).
    pub fn instance_counts(&self) -> &[f64] {
        &self.instance_counts
    }

    /// 1 / count per node, with zero-count nodes mapped to 0 so their motif
    /// term vanishes instead of dividing by zero.
    pub fn inverse_counts(&self) -> Vec<f64> {
        self.instance_counts
            .iter()
            .map(|&c| if c > 0.0 { 1.0 / c } else { 0.0 })
            .collect()
    }

    /// Write one triplet file per role, the diagonal, and a metadata file
    /// carrying the caller's cache key.
    pub fn dump(&self, dir: impl AsRef<Path>, key: &str) -> Result<()> {
        let dir = dir.as_ref();
        let io_err = |path: &Path, source: std::io::Error| Error::Io {
            path: path.display().to_string(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        for (idx, m) in self.role_matrices.iter().enumerate() {
            let mut text = String::new();
            for (i, j, v) in m.iter_entries() {
                let _ = writeln!(text, "{i} {j} {}", v as u64);
            }
            let path = dir.join(format!("role_{}.txt", idx + 1));
            std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        }
        let mut diag = String::new();
        for (i, &c) in self.instance_counts.iter().enumerate() {
            if c > 0.0 {
                let _ = writeln!(diag, "{i} {}", c as u64);
            }
        }
        let path = dir.join("diagonal.txt");
        std::fs::write(&path, diag).map_err(|e| io_err(&path, e))?;
        let meta = format!(
            "nodes {}\nroles {}\nkey {key}\n",
            self.node_count(),
            self.role_count()
        );
        let path = dir.join("meta.txt");
        std::fs::write(&path, meta).map_err(|e| io_err(&path, e))?;
        Ok(())
    }

    /// Read a dumped tensor back, returning it with the stored cache key.
    pub fn load(dir: impl AsRef<Path>) -> Result<(MotifTensor, String)> {
        let dir = dir.as_ref();
        let read = |name: &str| -> Result<String> {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })
        };
        let meta_path = dir.join("meta.txt").display().to_string();
        let meta = read("meta.txt")?;
        let mut nodes: Option<usize> = None;
        let mut roles: Option<usize> = None;
        let mut key: Option<String> = None;
        for (idx, line) in meta.lines().enumerate() {
            let perr = |msg: String| Error::Parse {
                path: meta_path.clone(),
                line: idx + 1,
                msg,
            };
            let (word, rest) = line.split_once(' ').ok_or_else(|| perr("bad meta line".into()))?;
            match word {
                "nodes" => nodes = Some(rest.parse().map_err(|_| perr(format!("bad count {rest:?}")))?),
                "roles" => roles = Some(rest.parse().map_err(|_| perr(format!("bad count {rest:?}")))?),
                "key" => key = Some(rest.to_string()),
                other => return Err(perr(format!("unknown meta field {other:?}"))),
            }
        }
        let (n, k, key) = match (nodes, roles, key) {
            (Some(n), Some(k), Some(key)) => (n, k, key),
            _ => {
                return Err(Error::Parse {
                    path: meta_path,
                    line: 0,
                    msg: "meta.txt must declare nodes, roles, key".into(),
                })
            }
        };
        let parse_pairs = |name: &str, width: usize| -> Result<Vec<Vec<u64>>> {
            let text = read(name)?;
            let path = dir.join(name).display().to_string();
            let mut out = Vec::new();
            for (idx, line) in text.lines().enumerate() {
                let fields: Vec<u64> = line
                    .split_whitespace()
                    .map(|t| t.parse::<u64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Parse {
                        path: path.clone(),
                        line: idx + 1,
                        msg: format!("expected {width} integers"),
                    })?;
                if fields.len() != width {
                    return Err(Error::Parse {
                        path: path.clone(),
                        line: idx + 1,
                        msg: format!("expected {width} integers, got {}", fields.len()),
                    });
                }
                out.push(fields);
            }
            Ok(out)
        };
        let range_err = |name: &str, idx: u64| Error::Parse {
            path: dir.join(name).display().to_string(),
            line: 0,
            msg: format!("node index {idx} outside 0..{n}"),
        };
        let mut role_matrices = Vec::with_capacity(k);
        for role in 1..=k {
            let name = format!("role_{role}.txt");
            let rows = parse_pairs(&name, 3)?;
            if let Some(f) = rows.iter().find(|f| f[0] >= n as u64 || f[1] >= n as u64) {
                return Err(range_err(&name, f[0].max(f[1])));
            }
            role_matrices.push(SparseMatrix::from_triplets(
                n,
                n,
                rows.iter().map(|f| (f[0] as u32, f[1] as u32, f[2] as f64)),
            ));
        }
        let mut instance_counts = vec![0.0; n];
        for fields in parse_pairs("diagonal.txt", 2)? {
            if fields[0] >= n as u64 {
                return Err(range_err("diagonal.txt", fields[0]));
            }
            instance_counts[fields[0] as usize] = fields[1] as f64;
        }
        Ok((
            MotifTensor {
                role_matrices,
                instance_counts,
            },
            key,
        ))
    }
}

/// Bumped when enumeration semantics change, so caches from older builds
/// cannot be mistaken for current ones.
const CACHE_SEMANTICS: u32 = 2;

/// Cache key binding a tensor dump to the exact graph bytes, motif structure,
/// and cap that produced it.
pub fn tensor_cache_key(graph_text: &str, motif: &Motif, cap: usize) -> String {
    let blob = format!(
        "{CACHE_SEMANTICS}\x1f{}\x1f{}\x1f{cap}",
        graph_text,
        motif.signature()
    );
    fnv1a64_hex(blob.as_bytes())
}
