//! Node labels and stratified train/val/test splitting.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// What the classifier head predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    /// Exactly one class per node; softmax cross-entropy.
    MultiClass { classes: usize },
    /// Any subset of classes per node; per-class sigmoid cross-entropy.
    MultiLabel { classes: usize },
}

impl TaskKind {
    pub fn class_count(&self) -> usize {
        match *self {
            TaskKind::MultiClass { classes } | TaskKind::MultiLabel { classes } => classes,
        }
    }
}

/// Labeled node ids with their classes, sorted by node id.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    task: TaskKind,
    entries: Vec<(u32, Vec<u32>)>,
}

impl LabelSet {
    pub fn new(task: TaskKind, mut entries: Vec<(u32, Vec<u32>)>) -> Result<Self> {
        entries.sort_unstable_by_key(|&(v, _)| v);
        let k = task.class_count() as u32;
        let mut last: Option<u32> = None;
        for (v, classes) in &mut entries {
            if last == Some(*v) {
                return Err(Error::validation(format!("node {v} labeled twice")));
            }
            last = Some(*v);
            // Multi-label nodes may carry an empty positive set; single-label
            // nodes name exactly one class.
            if matches!(task, TaskKind::MultiClass { .. }) && classes.len() != 1 {
                return Err(Error::validation(format!(
                    "node {v} has {} classes but the task is single-label",
                    classes.len()
                )));
            }
            let before = classes.len();
            classes.sort_unstable();
            classes.dedup();
            if classes.len() != before {
                return Err(Error::validation(format!("node {v} repeats a class")));
            }
            for &c in classes.iter() {
                if c >= k {
                    return Err(Error::validation(format!(
                        "node {v} has class {c}, valid classes are 0..{k}"
                    )));
                }
            }
        }
        Ok(LabelSet { task, entries })
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(u32, Vec<u32>)] {
        &self.entries
    }

    pub fn classes_of(&self, v: u32) -> Option<&[u32]> {
        self.entries
            .binary_search_by_key(&v, |&(node, _)| node)
            .ok()
            .map(|i| self.entries[i].1.as_slice())
    }

    /// N x K target matrix: one-hot rows for single-label tasks, multi-hot
    /// for multi-label. Unlabeled rows stay zero.
    pub fn to_target_matrix(&self, n: usize) -> DenseMatrix {
        let k = self.task.class_count();
        let mut y = DenseMatrix::zeros(n, k);
        for (v, classes) in &self.entries {
            for &c in classes {
                y.set(*v as usize, c as usize, 1.0);
            }
        }
        y
    }
}

/// Disjoint node id lists, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
}

/// Apportion `total` across groups proportionally to `weights`, using the
/// largest-remainder rule. `caps[g]` bounds group g. Ties and overflow
/// redistribution resolve by descending remainder, then ascending index.
fn largest_remainder(weights: &[usize], total: usize, caps: &[usize]) -> Vec<usize> {
    let weight_sum: usize = weights.iter().sum();
    let mut alloc = vec![0usize; weights.len()];
    if weight_sum == 0 || total == 0 {
        return alloc;
    }
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(weights.len());
    let mut assigned = 0usize;
    for (g, &w) in weights.iter().enumerate() {
        let exact = w as f64 * total as f64 / weight_sum as f64;
        let base = (exact.floor() as usize).min(caps[g]);
        alloc[g] = base;
        assigned += base;
        remainders.push((exact - base as f64, g));
    }
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut left = total.saturating_sub(assigned);
    while left > 0 {
        let before = left;
        for &(_, g) in &remainders {
            if left == 0 {
                break;
            }
            if alloc[g] < caps[g] {
                alloc[g] += 1;
                left -= 1;
            }
        }
        if left == before {
            break; // every group at its cap
        }
    }
    alloc
}

/// Split labeled nodes into train/val/test.
///
/// Single-label tasks stratify: each class contributes to the train and val
/// pools in proportion to its size, and global totals land on
/// round(L * frac). A class whose proportional quota is zero training
/// examples is an error; the data are too small for the fraction. Multi-label
/// tasks use a plain shuffled split, since per-class quotas conflict when
/// nodes carry several classes.
pub fn stratified_split(
    labels: &LabelSet,
    train_frac: f64,
    val_frac: f64,
    seed: u64,
) -> Result<Split> {
    let rng = &mut ChaCha8Rng::seed_from_u64(seed);
    if !(0.0..=1.0).contains(&train_frac)
        || !(0.0..=1.0).contains(&val_frac)
        || train_frac + val_frac > 1.0
    {
        return Err(Error::validation(format!(
            "fractions train={train_frac} val={val_frac} must be nonnegative and sum to at most 1"
        )));
    }
    let l = labels.len();
    if l == 0 {
        return Err(Error::EmptyMask);
    }
    let train_total = (l as f64 * train_frac).round() as usize;
    let val_total = (l as f64 * val_frac).round() as usize;
    if train_total == 0 {
        return Err(Error::validation(
            "train fraction rounds to zero labeled nodes",
        ));
    }

    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    match labels.task() {
        TaskKind::MultiClass { classes } => {
            let mut by_class: HashMap<u32, Vec<u32>> = HashMap::new();
            for (v, cs) in labels.entries() {
                by_class.entry(cs[0]).or_default().push(*v);
            }
            let mut class_ids: Vec<u32> = by_class.keys().copied().collect();
            class_ids.sort_unstable();
            let counts: Vec<usize> = class_ids.iter().map(|c| by_class[c].len()).collect();

            let train_quota = largest_remainder(&counts, train_total, &counts);
            let caps_after: Vec<usize> = counts
                .iter()
                .zip(&train_quota)
                .map(|(c, t)| c - t)
                .collect();
            let val_quota = largest_remainder(&counts, val_total, &caps_after);

            for (idx, c) in class_ids.iter().enumerate() {
                let mut nodes = by_class[c].clone();
                nodes.shuffle(rng);
                let t = train_quota[idx];
                let v = val_quota[idx];
                if t == 0 {
                    return Err(Error::validation(format!(
                        "class {c} received no training examples; raise the train fraction or add labels"
                    )));
                }
                train.extend_from_slice(&nodes[..t]);
                val.extend_from_slice(&nodes[t..t + v]);
                test.extend_from_slice(&nodes[t + v..]);
            }
            let _ = classes;
        }
        TaskKind::MultiLabel { .. } => {
            let mut nodes: Vec<u32> = labels.entries().iter().map(|&(v, _)| v).collect();
            nodes.shuffle(rng);
            train.extend_from_slice(&nodes[..train_total]);
            val.extend_from_slice(&nodes[train_total..train_total + val_total]);
            test.extend_from_slice(&nodes[train_total + val_total..]);
        }
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, val, test })
}
