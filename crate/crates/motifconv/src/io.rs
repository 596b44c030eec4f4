//! Graph file reading and writing.
//!
//! Line-oriented UTF-8 text. `#` starts a comment, blank lines are skipped.
//!
//! ```text
//! N 4
//! TYPES author paper
//! TASK multiclass 3
//! NODE 0 author        # nodes without a NODE line take the first type
//! NODE 1 paper
//! EDGE 0 1
//! EDGE 1 2 directed
//! FEAT paper 2         # one row per node of the type, ascending id
//! 0.5 1.0
//! 0.0 2.5
//! LABEL 0 1
//! LABEL 3 0,2          # multi-label tasks separate classes with commas
//! ```
//!
//! A file without TYPES gets a single implicit type `node`.

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::graph::{Edge, HeteroGraph, TypeSet};
use crate::labels::{LabelSet, TaskKind};
use std::fmt::Write as _;
use std::path::Path;

/// Everything a graph file can carry. `labels` is present exactly when the
/// file declares a TASK header.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: HeteroGraph,
    pub features: FeatureTable,
    pub labels: Option<LabelSet>,
}

const KEYWORDS: [&str; 7] = ["N", "TYPES", "TASK", "NODE", "EDGE", "FEAT", "LABEL"];

struct FeatBlock {
    line: usize,
    type_name: String,
    width: usize,
    values: Vec<f64>,
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text, &path.display().to_string())
}

pub fn parse_dataset(text: &str, path: &str) -> Result<Dataset> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_string(),
        line,
        msg,
    };

    let mut n: Option<usize> = None;
    let mut type_names: Option<Vec<String>> = None;
    let mut task: Option<TaskKind> = None;
    let mut node_lines: Vec<(usize, u32, String)> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut feats: Vec<FeatBlock> = Vec::new();
    let mut label_lines: Vec<(usize, u32, Vec<u32>)> = Vec::new();
    let mut in_feat = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let keyword = tokens[0];
        if !KEYWORDS.contains(&keyword) {
            // Inside a FEAT block, bare numeric lines are feature rows.
            if in_feat {
                let block = feats.last_mut().unwrap();
                for tok in &tokens {
                    let v: f64 = tok.parse().map_err(|_| {
                        perr(line_no, format!("expected a number in feature row, got {tok:?}"))
                    })?;
                    block.values.push(v);
                }
                continue;
            }
            return Err(perr(line_no, format!("unknown directive {keyword:?}")));
        }
        in_feat = false;
        match keyword {
            "N" => {
                if n.is_some() {
                    return Err(perr(line_no, "N declared twice".into()));
                }
                if tokens.len() != 2 {
                    return Err(perr(line_no, "usage: N <count>".into()));
                }
                n = Some(tokens[1].parse().map_err(|_| {
                    perr(line_no, format!("invalid node count {:?}", tokens[1]))
                })?);
            }
            "TYPES" => {
                if type_names.is_some() {
                    return Err(perr(line_no, "TYPES declared twice".into()));
                }
                if tokens.len() < 2 {
                    return Err(perr(line_no, "usage: TYPES <name> [name...]".into()));
                }
                type_names = Some(tokens[1..].iter().map(|s| s.to_string()).collect());
            }
            "TASK" => {
                if task.is_some() {
                    return Err(perr(line_no, "TASK declared twice".into()));
                }
                if tokens.len() != 3 {
                    return Err(perr(line_no, "usage: TASK multiclass|multilabel <K>".into()));
                }
                let classes: usize = tokens[2].parse().map_err(|_| {
                    perr(line_no, format!("invalid class count {:?}", tokens[2]))
                })?;
                if classes == 0 {
                    return Err(perr(line_no, "class count must be positive".into()));
                }
                task = Some(match tokens[1] {
                    "multiclass" => TaskKind::MultiClass { classes },
                    "multilabel" => TaskKind::MultiLabel { classes },
                    other => {
                        return Err(perr(
                            line_no,
                            format!("task must be multiclass or multilabel, got {other:?}"),
                        ))
                    }
                });
            }
            "NODE" => {
                if tokens.len() != 3 {
                    return Err(perr(line_no, "usage: NODE <id> <type>".into()));
                }
                let id: u32 = tokens[1]
                    .parse()
                    .map_err(|_| perr(line_no, format!("invalid node id {:?}", tokens[1])))?;
                node_lines.push((line_no, id, tokens[2].to_string()));
            }
            "EDGE" => {
                if tokens.len() != 3 && !(tokens.len() == 4 && tokens[3] == "directed") {
                    return Err(perr(line_no, "usage: EDGE <src> <dst> [directed]".into()));
                }
                let src: u32 = tokens[1]
                    .parse()
                    .map_err(|_| perr(line_no, format!("invalid node id {:?}", tokens[1])))?;
                let dst: u32 = tokens[2]
                    .parse()
                    .map_err(|_| perr(line_no, format!("invalid node id {:?}", tokens[2])))?;
                edges.push(Edge {
                    src,
                    dst,
                    directed: tokens.len() == 4,
                });
            }
            "FEAT" => {
                if tokens.len() != 3 {
                    return Err(perr(line_no, "usage: FEAT <type> <width>".into()));
                }
                let width: usize = tokens[2]
                    .parse()
                    .map_err(|_| perr(line_no, format!("invalid width {:?}", tokens[2])))?;
                feats.push(FeatBlock {
                    line: line_no,
                    type_name: tokens[1].to_string(),
                    width,
                    values: Vec::new(),
                });
                in_feat = true;
            }
            "LABEL" => {
                if tokens.len() != 3 {
                    return Err(perr(line_no, "usage: LABEL <id> <class[,class...]>".into()));
                }
                let id: u32 = tokens[1]
                    .parse()
                    .map_err(|_| perr(line_no, format!("invalid node id {:?}", tokens[1])))?;
                let mut classes = Vec::new();
                for part in tokens[2].split(',') {
                    classes.push(part.parse().map_err(|_| {
                        perr(line_no, format!("invalid class {part:?}"))
                    })?);
                }
                label_lines.push((line_no, id, classes));
            }
            _ => unreachable!(),
        }
    }

    let n = n.ok_or_else(|| perr(0, "missing N header".into()))?;
    let mut types = TypeSet::new();
    match &type_names {
        Some(names) => {
            for name in names {
                let before = types.len();
                types.intern(name);
                if types.len() == before {
                    return Err(Error::validation_at(
                        path,
                        0,
                        format!("type {name:?} declared twice"),
                    ));
                }
            }
        }
        None => {
            types.intern("node");
        }
    }

    let mut node_types = vec![0u32; n];
    let mut assigned = vec![false; n];
    for (line_no, id, name) in &node_lines {
        if *id as usize >= n {
            return Err(Error::validation_at(
                path,
                *line_no,
                format!("node index {id} out of range 0..{n}"),
            ));
        }
        if assigned[*id as usize] {
            return Err(Error::validation_at(
                path,
                *line_no,
                format!("node {id} typed twice"),
            ));
        }
        let t = types.id(name).ok_or_else(|| {
            Error::validation_at(path, *line_no, format!("unknown type {name:?}"))
        })?;
        node_types[*id as usize] = t;
        assigned[*id as usize] = true;
    }

    for e in &edges {
        if e.src as usize >= n || e.dst as usize >= n {
            return Err(Error::validation_at(
                path,
                0,
                format!("node index out of range on edge ({}, {})", e.src, e.dst),
            ));
        }
    }
    let graph = HeteroGraph::new(types, node_types, edges).map_err(|e| match e {
        Error::Validation { msg, .. } => Error::Validation {
            path: Some(path.to_string()),
            line: None,
            msg,
        },
        other => other,
    })?;

    let mut features = FeatureTable::new();
    for block in feats {
        let t = graph.types().id(&block.type_name).ok_or_else(|| {
            Error::validation_at(
                path,
                block.line,
                format!("unknown type {:?}", block.type_name),
            )
        })?;
        let count = graph.nodes_of_type(t).len();
        if block.values.len() != count * block.width {
            return Err(Error::validation_at(
                path,
                block.line,
                format!(
                    "type {} has {count} nodes of width {}, expected {} values, got {}",
                    block.type_name,
                    block.width,
                    count * block.width,
                    block.values.len()
                ),
            ));
        }
        features
            .insert(t, block.width, block.values)
            .map_err(|e| match e {
                Error::Validation { msg, .. } => Error::validation_at(path, block.line, msg),
                other => other,
            })?;
    }

    let labels = match task {
        Some(task) => {
            for (line_no, id, _) in &label_lines {
                if *id as usize >= n {
                    return Err(Error::validation_at(
                        path,
                        *line_no,
                        format!("labeled node {id} out of range 0..{n}"),
                    ));
                }
            }
            let entries = label_lines
                .into_iter()
                .map(|(_, id, classes)| (id, classes))
                .collect();
            Some(LabelSet::new(task, entries).map_err(|e| match e {
                Error::Validation { msg, .. } => Error::Validation {
                    path: Some(path.to_string()),
                    line: None,
                    msg,
                },
                other => other,
            })?)
        }
        None => {
            if let Some((line_no, _, _)) = label_lines.first() {
                return Err(Error::validation_at(
                    path,
                    *line_no,
                    "LABEL requires a TASK header",
                ));
            }
            None
        }
    };

    Ok(Dataset {
        graph,
        features,
        labels,
    })
}

/// Serialize to the same format `load_dataset` reads.
pub fn format_dataset(ds: &Dataset) -> String {
    let g = &ds.graph;
    let mut out = String::new();
    let _ = writeln!(out, "N {}", g.node_count());
    let _ = writeln!(out, "TYPES {}", g.types().names().join(" "));
    if let Some(labels) = &ds.labels {
        let (kind, k) = match labels.task() {
            TaskKind::MultiClass { classes } => ("multiclass", classes),
            TaskKind::MultiLabel { classes } => ("multilabel", classes),
        };
        let _ = writeln!(out, "TASK {kind} {k}");
    }
    for v in 0..g.node_count() as u32 {
        let _ = writeln!(out, "NODE {v} {}", g.types().name(g.node_type(v)));
    }
    for e in g.edges() {
        if e.directed {
            let _ = writeln!(out, "EDGE {} {} directed", e.src, e.dst);
        } else {
            let _ = writeln!(out, "EDGE {} {}", e.src, e.dst);
        }
    }
    for t in 0..g.types().len() as u32 {
        if let Some(width) = ds.features.width(t) {
            let _ = writeln!(out, "FEAT {} {width}", g.types().name(t));
            let x = crate::features::build_joint_features(g, &ds.features)
                .expect("features validated at construction");
            // Recover the type's column offset: sum of block widths before it.
            let mut off = 0usize;
            for s in 0..t {
                off += ds
                    .features
                    .width(s)
                    .unwrap_or_else(|| g.nodes_of_type(s).len());
            }
            for v in g.nodes_of_type(t) {
                let row = &x.row(v as usize)[off..off + width];
                let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                let _ = writeln!(out, "{}", cells.join(" "));
            }
        }
    }
    if let Some(labels) = &ds.labels {
        for (v, classes) in labels.entries() {
            // The format has no spelling for an empty positive set.
            if classes.is_empty() {
                continue;
            }
            let cs: Vec<String> = classes.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(out, "LABEL {v} {}", cs.join(","));
        }
    }
    out
}

pub fn save_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_dataset(ds)).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
