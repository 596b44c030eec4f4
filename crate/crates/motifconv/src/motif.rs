//! Motif patterns and semantic role derivation.
//!
//! A motif is a small connected pattern with one target position, one context
//! position, and auxiliary positions. Two non-target positions play the same
//! role when some automorphism of the typed, directed pattern that fixes the
//! target maps one onto the other: the roles are the orbits of that group.
//! The context's orbit is always role 1; remaining orbits are numbered by
//! their smallest local id. Patterns are capped at 5 nodes, so the orbit
//! computation can brute-force all permutations.

use crate::error::{Error, Result};
use serde::Deserialize;
use std::collections::BTreeSet;
use std::path::Path;

pub const MAX_MOTIF_NODES: usize = 5;

/// Node type constraint at a motif position. `Any` (spelled `*` in spec
/// files) matches every graph type; two `Any` positions count as same-typed
/// for symmetry purposes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MotifNodeType {
    Any,
    Named(String),
}

impl MotifNodeType {
    pub fn parse(s: &str) -> Self {
        if s == "*" {
            MotifNodeType::Any
        } else {
            MotifNodeType::Named(s.to_string())
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            MotifNodeType::Any => "*",
            MotifNodeType::Named(s) => s,
        }
    }
}

/// Validated motif with its derived role map.
#[derive(Debug, Clone, PartialEq)]
pub struct Motif {
    node_types: Vec<MotifNodeType>,
    edges: Vec<(u8, u8, bool)>,
    target: u8,
    context: u8,
    aux: Vec<u8>,
    // role_of[target] is 0 (no role); every other position holds 1..=role_count.
    role_of: Vec<u8>,
    role_count: usize,
    context_shares_orbit: bool,
}

impl Motif {
    /// Build and validate a motif, deriving the role map. `aux` may be
    /// omitted, in which case every position other than target and context is
    /// auxiliary; when given it must cover exactly those positions.
    pub fn new(
        node_types: Vec<MotifNodeType>,
        edges: Vec<(u8, u8, bool)>,
        target: u8,
        context: u8,
        aux: Option<Vec<u8>>,
    ) -> Result<Motif> {
        let n = node_types.len();
        if n < 2 {
            return Err(Error::Motif(
                "a motif needs at least a target and a context position".into(),
            ));
        }
        if n > MAX_MOTIF_NODES {
            return Err(Error::Motif(format!(
                "{n} positions exceed the {MAX_MOTIF_NODES}-node cap"
            )));
        }
        if target as usize >= n || context as usize >= n {
            return Err(Error::Motif("target or context id out of range".into()));
        }
        if target == context {
            return Err(Error::Motif("target and context must differ".into()));
        }

        let mut seen = BTreeSet::new();
        for &(a, b, directed) in &edges {
            if a as usize >= n || b as usize >= n {
                return Err(Error::Motif(format!("edge ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(Error::Motif(format!("self-loop at position {a}")));
            }
            let key = if directed {
                (a, b, true)
            } else {
                (a.min(b), a.max(b), false)
            };
            if !seen.insert(key) {
                return Err(Error::Motif(format!("duplicate edge ({a}, {b})")));
            }
        }

        // Connectivity, ignoring direction.
        let mut reached = vec![false; n];
        let mut stack = vec![0u8];
        reached[0] = true;
        while let Some(x) = stack.pop() {
            for &(a, b, _) in &edges {
                let other = if a == x {
                    b
                } else if b == x {
                    a
                } else {
                    continue;
                };
                if !reached[other as usize] {
                    reached[other as usize] = true;
                    stack.push(other);
                }
            }
        }
        if reached.iter().any(|r| !r) {
            return Err(Error::Motif("pattern is not connected".into()));
        }

        let expected_aux: Vec<u8> = (0..n as u8).filter(|&x| x != target && x != context).collect();
        let aux = match aux {
            Some(mut given) => {
                given.sort_unstable();
                if given != expected_aux {
                    return Err(Error::Motif(
                        "aux must list exactly the positions that are neither target nor context"
                            .into(),
                    ));
                }
                given
            }
            None => expected_aux,
        };

        let mut motif = Motif {
            node_types,
            edges,
            target,
            context,
            aux,
            role_of: vec![0; n],
            role_count: 0,
            context_shares_orbit: false,
        };
        motif.compute_role_map();
        debug_assert!(motif.role_count <= 1 + motif.aux.len());
        Ok(motif)
    }

    /// Orbits of non-target positions under automorphisms fixing the target.
    fn compute_role_map(&mut self) {
        let n = self.node_types.len();
        let edge_set: BTreeSet<(u8, u8, bool)> = self
            .edges
            .iter()
            .map(|&(a, b, d)| if d { (a, b, true) } else { (a.min(b), a.max(b), false) })
            .collect();

        // Union-find over positions. Tiny n, so path halving is plenty.
        let mut parent: Vec<u8> = (0..n as u8).collect();
        fn find(parent: &mut [u8], mut x: u8) -> u8 {
            while parent[x as usize] != x {
                parent[x as usize] = parent[parent[x as usize] as usize];
                x = parent[x as usize];
            }
            x
        }

        // Enumerate permutations fixing the target via backtracking.
        let mut perm = vec![u8::MAX; n];
        perm[self.target as usize] = self.target;
        let positions: Vec<u8> = (0..n as u8).filter(|&x| x != self.target).collect();
        let mut used = vec![false; n];
        used[self.target as usize] = true;
        self.search_automorphisms(&positions, 0, &mut perm, &mut used, &edge_set, &mut parent);

        let context_root = find(&mut parent, self.context);
        self.context_shares_orbit = self
            .aux
            .iter()
            .any(|&x| find(&mut parent, x) == context_root);

        // Role 1 is the context orbit; others by smallest member.
        let mut orbit_min: Vec<(u8, u8)> = Vec::new(); // (min member, root)
        for x in 0..n as u8 {
            if x == self.target {
                continue;
            }
            let root = find(&mut parent, x);
            match orbit_min.iter_mut().find(|(_, r)| *r == root) {
                Some(entry) => entry.0 = entry.0.min(x),
                None => orbit_min.push((x, root)),
            }
        }
        orbit_min.sort_unstable();
        let mut role_of_root = vec![0u8; n];
        let mut next = 2u8;
        for &(_, root) in &orbit_min {
            if root == context_root {
                role_of_root[root as usize] = 1;
            } else {
                role_of_root[root as usize] = next;
                next += 1;
            }
        }
        for x in 0..n as u8 {
            if x != self.target {
                self.role_of[x as usize] = role_of_root[find(&mut parent, x) as usize];
            }
        }
        self.role_count = orbit_min.len();
    }

    fn search_automorphisms(
        &self,
        positions: &[u8],
        depth: usize,
        perm: &mut [u8],
        used: &mut [bool],
        edge_set: &BTreeSet<(u8, u8, bool)>,
        parent: &mut [u8],
    ) {
        if depth == positions.len() {
            // Permutation complete; edges already checked incrementally.
            for &x in positions {
                union(parent, x, perm[x as usize]);
            }
            return;
        }
        let x = positions[depth];
        for y in 0..perm.len() as u8 {
            if used[y as usize] || self.node_types[x as usize] != self.node_types[y as usize] {
                continue;
            }
            perm[x as usize] = y;
            used[y as usize] = true;
            if self.edges_consistent(perm, edge_set) {
                self.search_automorphisms(positions, depth + 1, perm, used, edge_set, parent);
            }
            used[y as usize] = false;
            perm[x as usize] = u8::MAX;
        }
    }

    /// Every motif edge whose endpoints are both mapped must land on a motif
    /// edge of the same kind. Bijectivity makes the forward check sufficient.
    fn edges_consistent(&self, perm: &[u8], edge_set: &BTreeSet<(u8, u8, bool)>) -> bool {
        for &(a, b, d) in &self.edges {
            let (pa, pb) = (perm[a as usize], perm[b as usize]);
            if pa == u8::MAX || pb == u8::MAX {
                continue;
            }
            let key = if d { (pa, pb, true) } else { (pa.min(pb), pa.max(pb), false) };
            if !edge_set.contains(&key) {
                return false;
            }
        }
        true
    }

    pub fn node_count(&self) -> usize {
        self.node_types.len()
    }

    pub fn node_type(&self, x: u8) -> &MotifNodeType {
        &self.node_types[x as usize]
    }

    pub fn edges(&self) -> &[(u8, u8, bool)] {
        &self.edges
    }

    pub fn target(&self) -> u8 {
        self.target
    }

    pub fn context(&self) -> u8 {
        self.context
    }

    pub fn aux(&self) -> &[u8] {
        &self.aux
    }

    /// Role of a non-target position, in 1..=role_count. The target has no
    /// role; querying it returns 0.
    pub fn role_of(&self, x: u8) -> u8 {
        self.role_of[x as usize]
    }

    pub fn role_count(&self) -> usize {
        self.role_count
    }

    /// True when the context position is structurally symmetric to some
    /// auxiliary position, so role 1 covers more than the context.
    pub fn context_shares_orbit(&self) -> bool {
        self.context_shares_orbit
    }

    /// Stable textual encoding of the pattern, for content hashes. Covers
    /// structure only; role map is derived so it adds nothing.
    pub fn signature(&self) -> String {
        let mut edges: Vec<(u8, u8, bool)> = self
            .edges
            .iter()
            .map(|&(a, b, d)| if d { (a, b, d) } else { (a.min(b), a.max(b), d) })
            .collect();
        edges.sort_unstable();
        let nodes: Vec<String> = self
            .node_types
            .iter()
            .map(|t| t.as_str().to_string())
            .collect();
        let edge_strs: Vec<String> = edges
            .iter()
            .map(|&(a, b, d)| format!("{a}{}{b}", if d { ">" } else { "-" }))
            .collect();
        format!(
            "nodes:{};edges:{};t:{};c:{}",
            nodes.join(","),
            edge_strs.join(","),
            self.target,
            self.context
        )
    }

    /// Untyped single undirected edge, target 0, context 1.
    pub fn edge_any() -> Motif {
        Motif::new(
            vec![MotifNodeType::Any, MotifNodeType::Any],
            vec![(0, 1, false)],
            0,
            1,
            None,
        )
        .expect("static pattern")
    }

    /// Untyped path 0-1-2 with target at an endpoint and context at the other.
    pub fn wedge_any() -> Motif {
        Motif::new(
            vec![MotifNodeType::Any, MotifNodeType::Any, MotifNodeType::Any],
            vec![(0, 1, false), (1, 2, false)],
            0,
            2,
            None,
        )
        .expect("static pattern")
    }

    /// Untyped undirected triangle, target 0, context 1.
    pub fn triangle_any() -> Motif {
        Motif::new(
            vec![MotifNodeType::Any, MotifNodeType::Any, MotifNodeType::Any],
            vec![(0, 1, false), (1, 2, false), (0, 2, false)],
            0,
            1,
            None,
        )
        .expect("static pattern")
    }

    pub fn from_json(text: &str) -> Result<Motif> {
        let spec: MotifSpecFile = serde_json::from_str(text)
            .map_err(|e| Error::Motif(format!("malformed motif spec: {e}")))?;
        spec.into_motif()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Motif> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Motif::from_json(&text)
    }
}

fn union(parent: &mut [u8], a: u8, b: u8) {
    fn find(parent: &mut [u8], mut x: u8) -> u8 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[rb.max(ra) as usize] = rb.min(ra);
    }
}

#[derive(Deserialize)]
struct MotifSpecFile {
    nodes: Vec<SpecNode>,
    edges: Vec<SpecEdge>,
    target: u8,
    context: u8,
    #[serde(default)]
    aux: Option<Vec<u8>>,
}

#[derive(Deserialize)]
struct SpecNode {
    id: u8,
    #[serde(rename = "type")]
    ty: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpecEdge {
    Plain(u8, u8),
    Tagged(u8, u8, String),
}

impl MotifSpecFile {
    fn into_motif(self) -> Result<Motif> {
        let n = self.nodes.len();
        let mut types: Vec<Option<MotifNodeType>> = vec![None; n];
        for node in &self.nodes {
            let slot = types.get_mut(node.id as usize).ok_or_else(|| {
                Error::Motif(format!("node ids must cover 0..{n}, got id {}", node.id))
            })?;
            if slot.is_some() {
                return Err(Error::Motif(format!("node id {} declared twice", node.id)));
            }
            *slot = Some(MotifNodeType::parse(&node.ty));
        }
        let node_types: Vec<MotifNodeType> = types
            .into_iter()
            .map(|t| t.ok_or_else(|| Error::Motif(format!("node ids must cover 0..{n}"))))
            .collect::<Result<_>>()?;
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in self.edges {
            edges.push(match e {
                SpecEdge::Plain(a, b) => (a, b, false),
                SpecEdge::Tagged(a, b, tag) => {
                    if tag != "directed" {
                        return Err(Error::Motif(format!(
                            "edge tag must be \"directed\", got {tag:?}"
                        )));
                    }
                    (a, b, true)
                }
            });
        }
        Motif::new(node_types, edges, self.target, self.context, self.aux)
    }
}
