//! Motif instance enumeration.
//!
//! `brute_force_instances` is the ground truth: it scans every injective
//! assignment of graph nodes to motif positions. `enumerate_instances` is the
//! production matcher, a backtracking search anchored at the target that only
//! walks adjacency lists. `enumerate_triangles` and `enumerate_wedges` are
//! shape-specialized fast paths. All four must produce identical output.
//!
//! Two embeddings that place the same node multiset in every role describe
//! the same instance; the survivor is the lexicographically smallest valid
//! assignment. Output is sorted by target, then by the per-role node tuples,
//! which makes the order independent of traversal strategy and thread count.

use crate::error::{Error, Result};
use crate::graph::{EdgeDir, HeteroGraph};
use crate::motif::{Motif, MotifNodeType};
use crate::parallel::flat_map_indexed;
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicI64, Ordering};

/// One occurrence of a motif: `assignment[x]` is the graph node playing
/// motif position x.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MotifInstance {
    pub target: u32,
    pub assignment: Vec<u32>,
}

impl MotifInstance {
    /// Dedup and ordering key: (role, node) pairs, sorted. Embeddings related
    /// by a role-preserving automorphism fixing the target share this key.
    pub fn role_key(&self, motif: &Motif) -> Vec<(u8, u32)> {
        let mut key: Vec<(u8, u32)> = self
            .assignment
            .iter()
            .enumerate()
            .filter(|&(x, _)| x as u8 != motif.target())
            .map(|(x, &v)| (motif.role_of(x as u8), v))
            .collect();
        key.sort_unstable();
        key
    }
}

/// Shared instance budget for capped tensor builds. Decremented once per
/// deduplicated instance; when it runs dry, enumeration stops early and the
/// caller sees `exceeded`.
pub(crate) struct Budget {
    remaining: AtomicI64,
    exceeded: AtomicBool,
}

impl Budget {
    pub(crate) fn new(cap: usize) -> Self {
        Budget {
            remaining: AtomicI64::new(cap.min(i64::MAX as usize) as i64),
            exceeded: AtomicBool::new(false),
        }
    }

    fn take(&self) -> bool {
        if self.remaining.fetch_sub(1, Ordering::Relaxed) <= 0 {
            self.exceeded.store(true, Ordering::Relaxed);
            return false;
        }
        true
    }

    pub(crate) fn exceeded(&self) -> bool {
        self.exceeded.load(Ordering::Relaxed)
    }
}

/// Motif node type resolved against a concrete graph.
#[derive(Clone, Copy, PartialEq)]
enum TypeFilter {
    Any,
    Id(u32),
    /// Named type that does not exist in the graph: nothing can match.
    Absent,
}

impl TypeFilter {
    fn admits(self, graph_type: u32) -> bool {
        match self {
            TypeFilter::Any => true,
            TypeFilter::Id(t) => t == graph_type,
            TypeFilter::Absent => false,
        }
    }
}

fn resolve_types(g: &HeteroGraph, motif: &Motif) -> Vec<TypeFilter> {
    (0..motif.node_count() as u8)
        .map(|x| match motif.node_type(x) {
            MotifNodeType::Any => TypeFilter::Any,
            MotifNodeType::Named(name) => match g.types().id(name) {
                Some(t) => TypeFilter::Id(t),
                None => TypeFilter::Absent,
            },
        })
        .collect()
}

/// True when motif edge (a, b, directed) is realized by ψ(a)=u, ψ(b)=v.
/// A directed pattern edge needs a directed graph edge in that orientation;
/// an undirected pattern edge accepts any connection, whichever way it runs.
fn edge_realized(g: &HeteroGraph, u: u32, v: u32, directed: bool) -> bool {
    if directed {
        g.has_edge(u, v, EdgeDir::Out)
    } else {
        g.connected(u, v)
    }
}

fn embedding_valid(
    g: &HeteroGraph,
    motif: &Motif,
    filters: &[TypeFilter],
    assignment: &[u32],
) -> bool {
    for (x, &v) in assignment.iter().enumerate() {
        if !filters[x].admits(g.node_type(v)) {
            return false;
        }
        if assignment[..x].contains(&v) {
            return false;
        }
    }
    motif
        .edges()
        .iter()
        .all(|&(a, b, d)| edge_realized(g, assignment[a as usize], assignment[b as usize], d))
}

/// Per-target collector implementing the dedup rule.
struct Collector {
    map: BTreeMap<Vec<(u8, u32)>, Vec<u32>>,
}

impl Collector {
    fn new() -> Self {
        Collector {
            map: BTreeMap::new(),
        }
    }

    /// Returns true when the key is new (a fresh instance).
    fn accept(&mut self, motif: &Motif, assignment: &[u32]) -> bool {
        let inst = MotifInstance {
            target: assignment[motif.target() as usize],
            assignment: assignment.to_vec(),
        };
        let key = inst.role_key(motif);
        match self.map.get_mut(&key) {
            Some(existing) => {
                if inst.assignment < *existing {
                    *existing = inst.assignment;
                }
                false
            }
            None => {
                self.map.insert(key, inst.assignment);
                true
            }
        }
    }

    fn into_instances(self, target: u32) -> Vec<MotifInstance> {
        self.map
            .into_values()
            .map(|assignment| MotifInstance { target, assignment })
            .collect()
    }
}

/// One matching step of the backtracking plan: which position to bind next,
/// which already-bound position anchors the candidate scan, and which other
/// motif edges must be verified once the candidate is chosen.
struct Step {
    pos: u8,
    anchor: u8,
    /// Direction tag to look for in the anchor node's adjacency list;
    /// None scans every entry (undirected pattern edge).
    anchor_dir: Option<EdgeDir>,
    checks: Vec<(u8, u8, bool)>,
}

fn build_plan(motif: &Motif) -> Vec<Step> {
    let n = motif.node_count() as u8;
    let mut bound = vec![false; n as usize];
    bound[motif.target() as usize] = true;
    let mut steps = Vec::with_capacity(n as usize - 1);
    for _ in 1..n {
        // Smallest unbound position adjacent to a bound one; the pattern is
        // connected so one always exists.
        let mut chosen: Option<(u8, (u8, u8, bool))> = None;
        for &(a, b, d) in motif.edges() {
            let (pos, edge) = if bound[a as usize] && !bound[b as usize] {
                (b, (a, b, d))
            } else if bound[b as usize] && !bound[a as usize] {
                (a, (a, b, d))
            } else {
                continue;
            };
            if chosen.map_or(true, |(p, _)| pos < p) {
                chosen = Some((pos, edge));
            }
        }
        let (pos, (ea, eb, ed)) = chosen.expect("connected pattern");
        let (anchor, anchor_dir) = if ea == pos {
            // Edge runs pos -> anchor (or undirected): from the anchor's
            // adjacency list that is In for a directed edge.
            (eb, if ed { Some(EdgeDir::In) } else { None })
        } else {
            (ea, if ed { Some(EdgeDir::Out) } else { None })
        };
        let checks = motif
            .edges()
            .iter()
            .copied()
            .filter(|&(a, b, d)| {
                let other = if a == pos {
                    b
                } else if b == pos {
                    a
                } else {
                    return false;
                };
                bound[other as usize] && (a, b, d) != (ea, eb, ed)
            })
            .collect();
        bound[pos as usize] = true;
        steps.push(Step {
            pos,
            anchor,
            anchor_dir,
            checks,
        });
    }
    steps
}

const UNBOUND: u32 = u32::MAX;

fn extend(
    g: &HeteroGraph,
    motif: &Motif,
    filters: &[TypeFilter],
    steps: &[Step],
    depth: usize,
    assignment: &mut [u32],
    collector: &mut Collector,
    budget: Option<&Budget>,
) -> bool {
    if depth == steps.len() {
        debug_assert!(embedding_valid(g, motif, filters, assignment));
        if collector.accept(motif, assignment) {
            if let Some(b) = budget {
                if !b.take() {
                    return false;
                }
            }
        }
        return true;
    }
    let step = &steps[depth];
    let anchor_node = assignment[step.anchor as usize];
    // Entries are sorted by (node, dir); a 2-cycle lists the same node twice.
    let mut last = None;
    for &(cand, dir) in g.neighbors(anchor_node) {
        if let Some(want) = step.anchor_dir {
            if dir != want {
                continue;
            }
        }
        if last == Some(cand) {
            continue;
        }
        last = Some(cand);
        if !filters[step.pos as usize].admits(g.node_type(cand)) {
            continue;
        }
        if assignment.contains(&cand) {
            continue;
        }
        let ok = step.checks.iter().all(|&(a, b, d)| {
            let (u, v) = (
                if a == step.pos { cand } else { assignment[a as usize] },
                if b == step.pos { cand } else { assignment[b as usize] },
            );
            edge_realized(g, u, v, d)
        });
        if !ok {
            continue;
        }
        assignment[step.pos as usize] = cand;
        let alive = extend(g, motif, filters, steps, depth + 1, assignment, collector, budget);
        assignment[step.pos as usize] = UNBOUND;
        if !alive {
            return false;
        }
    }
    true
}

fn instances_for_target(
    g: &HeteroGraph,
    motif: &Motif,
    filters: &[TypeFilter],
    steps: &[Step],
    target: u32,
    budget: Option<&Budget>,
) -> Vec<MotifInstance> {
    if !filters[motif.target() as usize].admits(g.node_type(target)) {
        return Vec::new();
    }
    let mut assignment = vec![UNBOUND; motif.node_count()];
    assignment[motif.target() as usize] = target;
    let mut collector = Collector::new();
    extend(g, motif, filters, steps, 0, &mut assignment, &mut collector, budget);
    collector.into_instances(target)
}

pub(crate) fn enumerate_with_budget(
    g: &HeteroGraph,
    motif: &Motif,
    target: Option<u32>,
    budget: Option<&Budget>,
) -> Vec<MotifInstance> {
    let filters = resolve_types(g, motif);
    if filters.iter().any(|f| *f == TypeFilter::Absent) {
        return Vec::new();
    }
    let steps = build_plan(motif);
    match target {
        Some(t) => instances_for_target(g, motif, &filters, &steps, t, budget),
        None => flat_map_indexed(g.node_count(), |t| {
            instances_for_target(g, motif, &filters, &steps, t as u32, budget)
        }),
    }
}

/// All instances of the motif, for every target or one given target.
/// Targets are partitioned across threads; output order is the same either way.
pub fn enumerate_instances(
    g: &HeteroGraph,
    motif: &Motif,
    target: Option<u32>,
) -> Vec<MotifInstance> {
    enumerate_with_budget(g, motif, target, None)
}

/// Cap for the exhaustive oracle; beyond this the O(N^|V_M|) scan is not a
/// reasonable test fixture.
pub const BRUTE_FORCE_NODE_CAP: usize = 60;

/// Exhaustive oracle: try every injective assignment, keep the ones whose
/// types and edges check out, dedup with the production rule.
pub fn brute_force_instances(g: &HeteroGraph, motif: &Motif) -> Result<Vec<MotifInstance>> {
    if g.node_count() > BRUTE_FORCE_NODE_CAP {
        return Err(Error::ResourceLimit(format!(
            "brute-force enumeration on {} nodes exceeds the {BRUTE_FORCE_NODE_CAP}-node cap",
            g.node_count()
        )));
    }
    let filters = resolve_types(g, motif);
    if filters.iter().any(|f| *f == TypeFilter::Absent) {
        return Ok(Vec::new());
    }
    let k = motif.node_count();
    let mut assignment = vec![UNBOUND; k];
    // Keyed by (target, role key) so the flattened order matches the
    // production enumerator's target-major order.
    let mut map: BTreeMap<(u32, Vec<(u8, u32)>), Vec<u32>> = BTreeMap::new();
    fn rec(
        g: &HeteroGraph,
        motif: &Motif,
        filters: &[TypeFilter],
        pos: usize,
        assignment: &mut Vec<u32>,
        map: &mut BTreeMap<(u32, Vec<(u8, u32)>), Vec<u32>>,
    ) {
        if pos == assignment.len() {
            if embedding_valid(g, motif, filters, assignment) {
                let inst = MotifInstance {
                    target: assignment[motif.target() as usize],
                    assignment: assignment.clone(),
                };
                let key = (inst.target, inst.role_key(motif));
                map.entry(key)
                    .and_modify(|existing| {
                        if inst.assignment < *existing {
                            *existing = inst.assignment.clone();
                        }
                    })
                    .or_insert(inst.assignment);
            }
            return;
        }
        for v in 0..g.node_count() as u32 {
            assignment[pos] = v;
            rec(g, motif, filters, pos + 1, assignment, map);
        }
        assignment[pos] = UNBOUND;
    }
    rec(g, motif, &filters, 0, &mut assignment, &mut map);
    Ok(map
        .into_iter()
        .map(|((target, _), assignment)| MotifInstance { target, assignment })
        .collect())
}

/// True when the motif is the plain untyped undirected triangle that
/// `enumerate_triangles` serves.
pub(crate) fn is_plain_triangle(motif: &Motif) -> bool {
    motif.node_count() == 3
        && motif.edges().len() == 3
        && motif.edges().iter().all(|&(_, _, d)| !d)
        && (0..3).all(|x| *motif.node_type(x) == MotifNodeType::Any)
}

/// True when the motif is a 3-node path (any types and directions).
pub(crate) fn is_path3(motif: &Motif) -> bool {
    motif.node_count() == 3 && motif.edges().len() == 2
}

/// Triangle instances of `Motif::triangle_any` (or any equivalent relabeling
/// passed as `motif`), via rank-ordered neighbor intersection.
///
/// Nodes are ranked by (degree, id); each connection is oriented toward the
/// higher rank and triangles are read off sorted forward-list intersections,
/// so each triangle is found exactly once and the work per edge is bounded
/// by the smaller forward degree.
pub fn enumerate_triangles(g: &HeteroGraph, motif: &Motif) -> Vec<MotifInstance> {
    assert!(is_plain_triangle(motif), "motif is not a plain triangle");
    let n = g.node_count();
    let mut rank = vec![0u32; n];
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_unstable_by_key(|&v| (g.degree(v), v));
    for (r, &v) in order.iter().enumerate() {
        rank[v as usize] = r as u32;
    }
    // Forward lists: connected neighbors of higher rank, sorted by node id.
    // Direction is irrelevant to the undirected pattern, so a 2-cycle must
    // collapse to one connection.
    let mut forward: Vec<Vec<u32>> = vec![Vec::new(); n];
    for e in g.edges() {
        let (lo, hi) = if rank[e.src as usize] < rank[e.dst as usize] {
            (e.src, e.dst)
        } else {
            (e.dst, e.src)
        };
        forward[lo as usize].push(hi);
    }
    for list in &mut forward {
        list.sort_unstable();
        list.dedup();
    }

    let triangles: Vec<(u32, u32, u32)> = flat_map_indexed(n, |a| {
        let mut found = Vec::new();
        let fa = &forward[a];
        for &b in fa {
            let fb = &forward[b as usize];
            // Sorted merge intersection.
            let (mut i, mut j) = (0, 0);
            while i < fa.len() && j < fb.len() {
                match fa[i].cmp(&fb[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        found.push((a as u32, b, fa[i]));
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
        found
    });

    let tpos = motif.target() as usize;
    let mut instances: Vec<MotifInstance> = Vec::with_capacity(triangles.len() * 3);
    for &(a, b, c) in &triangles {
        for &t in &[a, b, c] {
            let (mut p, mut q) = match t {
                x if x == a => (b, c),
                x if x == b => (a, c),
                _ => (a, b),
            };
            if p > q {
                std::mem::swap(&mut p, &mut q);
            }
            // Lexicographically smallest assignment: target pinned, the
            // remaining positions take the pair in ascending order.
            let mut assignment = vec![0u32; 3];
            assignment[tpos] = t;
            let mut rest = (0..3).filter(|&x| x != tpos);
            assignment[rest.next().unwrap()] = p;
            assignment[rest.next().unwrap()] = q;
            instances.push(MotifInstance {
                target: t,
                assignment,
            });
        }
    }
    instances.sort_unstable_by(|x, y| {
        (x.target, x.role_key(motif)).cmp(&(y.target, y.role_key(motif)))
    });
    instances
}

/// Instances of a 3-node path motif via a neighbor-pair scan centered on the
/// middle position: for every candidate middle node, combine one neighbor per
/// arm. Work is the sum of squared degrees.
pub fn enumerate_wedges(g: &HeteroGraph, motif: &Motif) -> Vec<MotifInstance> {
    assert!(is_path3(motif), "motif is not a 3-node path");
    let filters = resolve_types(g, motif);
    if filters.iter().any(|f| *f == TypeFilter::Absent) {
        return Vec::new();
    }
    let edges = motif.edges();
    // The middle position appears in both edges.
    let mid = (0..3u8)
        .find(|&x| edges.iter().all(|&(a, b, _)| a == x || b == x))
        .expect("a 3-node path has a middle");
    // From the middle's point of view: position at the far end of each arm
    // and the direction tag to scan for in the middle node's adjacency list.
    let arm = |&(a, b, d): &(u8, u8, bool)| -> (u8, Option<EdgeDir>) {
        if a == mid {
            (b, if d { Some(EdgeDir::Out) } else { None })
        } else {
            (a, if d { Some(EdgeDir::In) } else { None })
        }
    };
    let (end1, dir1) = arm(&edges[0]);
    let (end2, dir2) = arm(&edges[1]);
    // Adjacency entries are sorted by (node, dir); a 2-cycle lists the same
    // node twice, which an any-direction arm must not visit twice.
    let arm_candidates = |m: u32, dir: Option<EdgeDir>, end: u8| {
        let mut out: Vec<u32> = Vec::new();
        for &(cand, d) in g.neighbors(m) {
            if let Some(want) = dir {
                if d != want {
                    continue;
                }
            }
            if out.last() == Some(&cand) {
                continue;
            }
            if filters[end as usize].admits(g.node_type(cand)) {
                out.push(cand);
            }
        }
        out
    };

    let per_middle = flat_map_indexed(g.node_count(), |m| {
        let m = m as u32;
        if !filters[mid as usize].admits(g.node_type(m)) {
            return Vec::new();
        }
        let mut local = Vec::new();
        for &n1 in &arm_candidates(m, dir1, end1) {
            for &n2 in &arm_candidates(m, dir2, end2) {
                if n2 == n1 {
                    continue;
                }
                let mut assignment = vec![0u32; 3];
                assignment[mid as usize] = m;
                assignment[end1 as usize] = n1;
                assignment[end2 as usize] = n2;
                local.push(assignment);
            }
        }
        local
    });

    // Same dedup rule as the generic matcher, keyed globally by target.
    let mut map: BTreeMap<(u32, Vec<(u8, u32)>), Vec<u32>> = BTreeMap::new();
    for assignment in per_middle {
        let inst = MotifInstance {
            target: assignment[motif.target() as usize],
            assignment,
        };
        let key = (inst.target, inst.role_key(motif));
        map.entry(key)
            .and_modify(|existing| {
                if inst.assignment < *existing {
                    *existing = inst.assignment.clone();
                }
            })
            .or_insert(inst.assignment);
    }
    map.into_iter()
        .map(|((target, _), assignment)| MotifInstance { target, assignment })
        .collect()
}
