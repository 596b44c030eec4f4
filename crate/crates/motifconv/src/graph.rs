//! Heterogeneous graph storage.
//!
//! Nodes carry a type id into an interned type table. Edges are undirected or
//! directed; an undirected edge appears in both endpoint adjacency lists, a
//! directed edge appears as outgoing at the source and incoming at the
//! destination. Adjacency lists are sorted so neighbor scans are deterministic.

use crate::error::{Error, Result};
use std::collections::HashMap;

/// Direction of an edge relative to the node whose adjacency list it sits in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeDir {
    /// Undirected: traversable both ways.
    Undirected,
    /// Directed, this node is the source.
    Out,
    /// Directed, this node is the destination.
    In,
}

/// Interned node type names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeSet {
    names: Vec<String>,
    by_name: HashMap<String, u32>,
}

impl TypeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Intern a name, returning its id. Existing names keep their id.
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.by_name.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.by_name.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// An edge as stored in the graph's edge list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub src: u32,
    pub dst: u32,
    pub directed: bool,
}

/// Typed graph with mixed directed and undirected edges.
///
/// Self-loops and duplicate edges are rejected at build time: motif matching
/// counts each structural edge once, and a duplicate would silently double
/// instance counts.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGraph {
    types: TypeSet,
    node_types: Vec<u32>,
    edges: Vec<Edge>,
    // Per node, sorted by (neighbor, dir).
    adjacency: Vec<Vec<(u32, EdgeDir)>>,
}

impl HeteroGraph {
    pub fn new(types: TypeSet, node_types: Vec<u32>, edges: Vec<Edge>) -> Result<Self> {
        let n = node_types.len();
        for (i, &t) in node_types.iter().enumerate() {
            if (t as usize) >= types.len() {
                return Err(Error::validation(format!(
                    "node {i} has type id {t} but only {} types are declared",
                    types.len()
                )));
            }
        }
        let mut seen: HashMap<(u32, u32), bool> = HashMap::new();
        for e in &edges {
            if e.src as usize >= n || e.dst as usize >= n {
                return Err(Error::validation(format!(
                    "edge ({}, {}) references a node outside 0..{n}",
                    e.src, e.dst
                )));
            }
            if e.src == e.dst {
                return Err(Error::validation(format!("self-loop at node {}", e.src)));
            }
            // An undirected edge occupies both orientations; a directed edge
            // only its own. Either way a second edge on the same ordered pair
            // is a duplicate.
            let fwd = (e.src, e.dst);
            let bwd = (e.dst, e.src);
            if seen.contains_key(&fwd) || (!e.directed && seen.contains_key(&bwd)) {
                return Err(Error::validation(format!(
                    "duplicate edge between {} and {}",
                    e.src, e.dst
                )));
            }
            if let Some(&other_directed) = seen.get(&bwd) {
                if !other_directed {
                    return Err(Error::validation(format!(
                        "duplicate edge between {} and {}",
                        e.src, e.dst
                    )));
                }
            }
            seen.insert(fwd, e.directed);
            if !e.directed {
                seen.insert(bwd, e.directed);
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for e in &edges {
            if e.directed {
                adjacency[e.src as usize].push((e.dst, EdgeDir::Out));
                adjacency[e.dst as usize].push((e.src, EdgeDir::In));
            } else {
                adjacency[e.src as usize].push((e.dst, EdgeDir::Undirected));
                adjacency[e.dst as usize].push((e.src, EdgeDir::Undirected));
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(HeteroGraph {
            types,
            node_types,
            edges,
            adjacency,
        })
    }

    /// Single-type convenience constructor for homogeneous graphs.
    pub fn homogeneous(n: usize, edges: Vec<Edge>) -> Result<Self> {
        let mut types = TypeSet::new();
        let t = types.intern("node");
        HeteroGraph::new(types, vec![t; n], edges)
    }

    pub fn node_count(&self) -> usize {
        self.node_types.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn types(&self) -> &TypeSet {
        &self.types
    }

    pub fn node_type(&self, v: u32) -> u32 {
        self.node_types[v as usize]
    }

    pub fn node_types(&self) -> &[u32] {
        &self.node_types
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Sorted (neighbor, direction) pairs.
    pub fn neighbors(&self, v: u32) -> &[(u32, EdgeDir)] {
        &self.adjacency[v as usize]
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adjacency[v as usize].len()
    }

    /// Whether an edge with the given direction connects u to v.
    /// `EdgeDir::Out` asks for a directed edge u -> v, `In` for v -> u,
    /// `Undirected` for an undirected edge.
    pub fn has_edge(&self, u: u32, v: u32, dir: EdgeDir) -> bool {
        self.adjacency[u as usize]
            .binary_search(&(v, dir))
            .is_ok()
    }

    /// True if u and v are connected ignoring direction.
    pub fn connected(&self, u: u32, v: u32) -> bool {
        let list = &self.adjacency[u as usize];
        let start = list.partition_point(|&(w, _)| w < v);
        list[start..].iter().take_while(|&&(w, _)| w == v).next().is_some()
    }

    /// Nodes of one type, ascending.
    pub fn nodes_of_type(&self, t: u32) -> Vec<u32> {
        (0..self.node_count() as u32)
            .filter(|&v| self.node_types[v as usize] == t)
            .collect()
    }
}
