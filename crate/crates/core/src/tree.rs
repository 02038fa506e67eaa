//! Rooted binary-variable trees: parsing, validation, and path/subtree
//! queries used by every other module.
//!
//! Nodes carry opaque string names from the input document; internally they
//! are dense `usize` ids. Leaves keep their declared order, which fixes the
//! identification of leaves with coordinates `1..n` everywhere downstream.
//! Edges are directed away from the root and keep input order; an edge is
//! identified by its child node (every non-root node has exactly one parent).

use serde::Deserialize;
use std::collections::HashMap;
use thiserror::Error;

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("tree document is not valid JSON: {0}")]
    Json(String),
    #[error("root {0:?} is not a node of the tree")]
    RootNotANode(String),
    #[error("duplicate edge {0:?} -> {1:?}")]
    DuplicateEdge(String, String),
    #[error("node {0:?} has two parents ({1:?} and {2:?})")]
    TwoParents(String, String, String),
    #[error("root {0:?} has a parent edge")]
    RootHasParent(String),
    #[error("cycle detected involving node {0:?}")]
    CycleDetected(String),
    #[error("node {0:?} is disconnected from the root")]
    Disconnected(String),
    #[error("self-loop at node {0:?}")]
    SelfLoop(String),
    #[error("declared leaves do not match the degree-one nodes: {0}")]
    LeafMismatch(String),
    #[error("fewer than two leaves")]
    TooFewLeaves,
    #[error("node {0:?} has degree 2, which makes a parameter unidentifiable; only the n=2 cherry root may have two children")]
    DegreeTwoNode(String),
    #[error("unknown node id {0:?}")]
    UnknownNode(String),
    #[error("path endpoints must be distinct")]
    DegeneratePath,
    #[error("spanning leaf set needs at least two leaves")]
    LeafSetTooSmall,
    #[error("id {0:?} is not a leaf")]
    NotALeaf(String),
}

/// A rooted tree with named nodes, directed edges, and a declared leaf order.
#[derive(Debug, Clone)]
pub struct RootedTree {
    names: Vec<String>,
    name_index: HashMap<String, NodeId>,
    root: NodeId,
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    /// Declared leaf order; leaf k of the model is `leaves[k]`.
    leaves: Vec<NodeId>,
    /// (parent, child) pairs in input order.
    edges: Vec<(NodeId, NodeId)>,
    /// Parent edge of each non-root node.
    parent_edge: Vec<Option<EdgeId>>,
    depth: Vec<usize>,
    is_leaf: Vec<bool>,
}

#[derive(Debug, Deserialize)]
struct TreeDoc {
    root: String,
    leaves: Vec<String>,
    edges: Vec<(String, String)>,
}

/// The unique simple path between two nodes, as a set of edge ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgePath {
    pub endpoints: (NodeId, NodeId),
    /// Sorted, deduplicated edge ids.
    pub edges: Vec<EdgeId>,
}

impl RootedTree {
    /// Parses and validates the JSON tree document
    /// `{"root": id, "leaves": [id...], "edges": [[parent, child], ...]}`.
    pub fn parse(json: &str) -> Result<Self, TreeError> {
        let doc: TreeDoc = serde_json::from_str(json).map_err(|e| TreeError::Json(e.to_string()))?;
        Self::from_parts(&doc.root, &doc.leaves, &doc.edges)
    }

    /// Builds and validates a tree from its raw parts.
    pub fn from_parts<S: AsRef<str>>(
        root: &str,
        leaves: &[S],
        edges: &[(S, S)],
    ) -> Result<Self, TreeError> {
        let mut names: Vec<String> = Vec::new();
        let mut name_index: HashMap<String, NodeId> = HashMap::new();
        let intern = |name: &str, names: &mut Vec<String>, idx: &mut HashMap<String, NodeId>| {
            *idx.entry(name.to_string()).or_insert_with(|| {
                names.push(name.to_string());
                names.len() - 1
            })
        };

        let root_id = intern(root, &mut names, &mut name_index);
        let mut edge_pairs: Vec<(NodeId, NodeId)> = Vec::with_capacity(edges.len());
        for (p, c) in edges {
            let (p, c) = (p.as_ref(), c.as_ref());
            if p == c {
                return Err(TreeError::SelfLoop(p.to_string()));
            }
            let pi = intern(p, &mut names, &mut name_index);
            let ci = intern(c, &mut names, &mut name_index);
            edge_pairs.push((pi, ci));
        }
        let n_nodes = names.len();

        let mut parent: Vec<Option<NodeId>> = vec![None; n_nodes];
        let mut parent_edge: Vec<Option<EdgeId>> = vec![None; n_nodes];
        let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); n_nodes];
        let mut seen: HashMap<(NodeId, NodeId), ()> = HashMap::new();
        for (eid, &(p, c)) in edge_pairs.iter().enumerate() {
            if seen.insert((p, c), ()).is_some() {
                return Err(TreeError::DuplicateEdge(names[p].clone(), names[c].clone()));
            }
            if let Some(prev) = parent[c] {
                if prev != p {
                    return Err(TreeError::TwoParents(
                        names[c].clone(),
                        names[prev].clone(),
                        names[p].clone(),
                    ));
                }
            }
            if c == root_id {
                return Err(TreeError::RootHasParent(names[root_id].clone()));
            }
            parent[c] = Some(p);
            parent_edge[c] = Some(eid);
            children[p].push(c);
        }

        // Reachability from the root distinguishes cycles from plain
        // disconnection: an unreachable node on a parent-chain loop is a cycle.
        let mut depth = vec![usize::MAX; n_nodes];
        depth[root_id] = 0;
        let mut stack = vec![root_id];
        while let Some(v) = stack.pop() {
            for &c in &children[v] {
                depth[c] = depth[v] + 1;
                stack.push(c);
            }
        }
        for v in 0..n_nodes {
            if depth[v] == usize::MAX {
                let mut cur = v;
                let mut steps = 0;
                while let Some(p) = parent[cur] {
                    cur = p;
                    steps += 1;
                    if cur == v || steps > n_nodes {
                        return Err(TreeError::CycleDetected(names[v].clone()));
                    }
                }
                return Err(TreeError::Disconnected(names[v].clone()));
            }
        }

        let degree =
            |v: NodeId| -> usize { children[v].len() + usize::from(parent[v].is_some()) };
        let degree_one: Vec<NodeId> = (0..n_nodes).filter(|&v| degree(v) == 1).collect();

        let mut leaf_ids = Vec::with_capacity(leaves.len());
        for l in leaves {
            let l = l.as_ref();
            let id = *name_index
                .get(l)
                .ok_or_else(|| TreeError::UnknownNode(l.to_string()))?;
            leaf_ids.push(id);
        }
        {
            let mut declared = leaf_ids.clone();
            declared.sort_unstable();
            declared.dedup();
            let mut actual = degree_one.clone();
            actual.sort_unstable();
            if declared != actual || declared.len() != leaf_ids.len() {
                return Err(TreeError::LeafMismatch(format!(
                    "declared {:?}, degree-one nodes {:?}",
                    leaf_ids.iter().map(|&v| &names[v]).collect::<Vec<_>>(),
                    actual.iter().map(|&v| &names[v]).collect::<Vec<_>>(),
                )));
            }
        }
        if leaf_ids.len() < 2 {
            return Err(TreeError::TooFewLeaves);
        }

        let is_leaf: Vec<bool> = {
            let mut f = vec![false; n_nodes];
            for &l in &leaf_ids {
                f[l] = true;
            }
            f
        };
        // Degree-2 rejection: a chain node, or a two-child root outside the
        // n=2 cherry, adds parameters without enlarging the model.
        for v in 0..n_nodes {
            if is_leaf[v] {
                continue;
            }
            if degree(v) == 2 && !(v == root_id && leaf_ids.len() == 2) {
                return Err(TreeError::DegreeTwoNode(names[v].clone()));
            }
        }

        Ok(RootedTree {
            names,
            name_index,
            root: root_id,
            parent,
            children,
            leaves: leaf_ids,
            edges: edge_pairs,
            parent_edge,
            depth,
            is_leaf,
        })
    }

    /// Number of leaves `n`.
    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }
    /// Number of nodes `n_v`.
    pub fn n_nodes(&self) -> usize {
        self.names.len()
    }
    /// Number of edges `n_e`.
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }
    pub fn root(&self) -> NodeId {
        self.root
    }
    pub fn name(&self, v: NodeId) -> &str {
        &self.names[v]
    }
    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.name_index.get(name).copied()
    }
    /// Leaves in declared order.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }
    /// (parent, child) pairs in input order.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }
    pub fn edge(&self, e: EdgeId) -> (NodeId, NodeId) {
        self.edges[e]
    }
    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.parent[v]
    }
    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.children[v]
    }
    /// Edge whose child endpoint is `v`.
    pub fn parent_edge(&self, v: NodeId) -> Option<EdgeId> {
        self.parent_edge[v]
    }
    pub fn depth(&self, v: NodeId) -> usize {
        self.depth[v]
    }
    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.is_leaf[v]
    }
    /// Undirected degree.
    pub fn degree(&self, v: NodeId) -> usize {
        self.children[v].len() + usize::from(self.parent[v].is_some())
    }
    /// Nodes that are not leaves.
    pub fn inner_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.n_nodes()).filter(|&v| !self.is_leaf[v])
    }
    /// Leaf's position in the declared order.
    pub fn leaf_position(&self, v: NodeId) -> Option<usize> {
        self.leaves.iter().position(|&l| l == v)
    }
    /// Terminal edges: the parent edge of each leaf, plus the child edge of a
    /// leaf root. Exactly one edge per leaf.
    pub fn terminal_edges(&self) -> Vec<EdgeId> {
        self.leaves
            .iter()
            .map(|&l| match self.parent_edge[l] {
                Some(e) => e,
                // A leaf root has one child; that child edge is its terminal edge.
                None => self.parent_edge[self.children[l][0]].unwrap(),
            })
            .collect()
    }

    /// True iff every inner node has undirected degree 3.
    pub fn is_trivalent(&self) -> bool {
        self.inner_nodes().all(|v| self.degree(v) == 3)
    }

    /// The unique simple path between two distinct nodes.
    pub fn path_edges(&self, i: NodeId, j: NodeId) -> Result<EdgePath, TreeError> {
        if i == j {
            return Err(TreeError::DegeneratePath);
        }
        if i >= self.n_nodes() || j >= self.n_nodes() {
            return Err(TreeError::UnknownNode(format!("#{}", i.max(j))));
        }
        let mut edges = Vec::new();
        let (mut a, mut b) = (i, j);
        // Walk the deeper endpoint up until the two meet at the LCA.
        while a != b {
            if self.depth[a] >= self.depth[b] {
                edges.push(self.parent_edge[a].expect("non-root node has a parent edge"));
                a = self.parent[a].unwrap();
            } else {
                edges.push(self.parent_edge[b].expect("non-root node has a parent edge"));
                b = self.parent[b].unwrap();
            }
        }
        edges.sort_unstable();
        Ok(EdgePath {
            endpoints: (i, j),
            edges,
        })
    }

    /// Path between two nodes given by name.
    pub fn path_edges_named(&self, i: &str, j: &str) -> Result<EdgePath, TreeError> {
        let a = self
            .node_by_name(i)
            .ok_or_else(|| TreeError::UnknownNode(i.to_string()))?;
        let b = self
            .node_by_name(j)
            .ok_or_else(|| TreeError::UnknownNode(j.to_string()))?;
        self.path_edges(a, b)
    }

    /// True iff `w` lies strictly inside the path between `u` and `v`.
    pub fn node_separates(&self, w: NodeId, u: NodeId, v: NodeId) -> Result<bool, TreeError> {
        let path = self.path_edges(u, v)?;
        if w >= self.n_nodes() {
            return Err(TreeError::UnknownNode(format!("#{w}")));
        }
        if w == u || w == v {
            return Ok(false);
        }
        // An interior node of the path touches two of its edges.
        let touching = path
            .edges
            .iter()
            .filter(|&&e| {
                let (p, c) = self.edges[e];
                p == w || c == w
            })
            .count();
        Ok(touching == 2)
    }

    /// Minimal subtree spanning the leaf set `leaf_ids`, returned together
    /// with its root: the subtree node closest to the global root.
    ///
    /// The result bypasses degree validation: spanning subtrees legitimately
    /// contain chain nodes (interior path nodes of degree 2).
    pub fn spanning_subtree(&self, leaf_ids: &[NodeId]) -> Result<(RootedTree, NodeId), TreeError> {
        if leaf_ids.len() < 2 {
            return Err(TreeError::LeafSetTooSmall);
        }
        for &l in leaf_ids {
            if l >= self.n_nodes() {
                return Err(TreeError::UnknownNode(format!("#{l}")));
            }
            if !self.is_leaf[l] {
                return Err(TreeError::NotALeaf(self.names[l].clone()));
            }
        }
        // Union of pairwise paths = union of paths from each leaf to the
        // common LCA; mark edges on each leaf-to-LCA walk instead.
        let lca = leaf_ids
            .iter()
            .copied()
            .reduce(|a, b| self.lca(a, b))
            .unwrap();
        let mut in_sub = vec![false; self.n_edges()];
        for &l in leaf_ids {
            let mut v = l;
            while v != lca {
                let e = self.parent_edge[v].unwrap();
                if in_sub[e] {
                    break;
                }
                in_sub[e] = true;
                v = self.parent[v].unwrap();
            }
        }
        let sub_edges: Vec<(String, String)> = (0..self.n_edges())
            .filter(|&e| in_sub[e])
            .map(|e| {
                let (p, c) = self.edges[e];
                (self.names[p].clone(), self.names[c].clone())
            })
            .collect();
        let leaf_names: Vec<String> = leaf_ids.iter().map(|&l| self.names[l].clone()).collect();
        let sub = RootedTree::new_unchecked(&self.names[lca], &leaf_names, &sub_edges);
        let new_root = sub.root();
        Ok((sub, new_root))
    }

    /// Lowest common ancestor.
    pub fn lca(&self, mut a: NodeId, mut b: NodeId) -> NodeId {
        while a != b {
            if self.depth[a] >= self.depth[b] {
                a = self.parent[a].unwrap();
            } else {
                b = self.parent[b].unwrap();
            }
        }
        a
    }

    /// Internal constructor that skips leaf/degree validation (for spanning
    /// subtrees, whose interior path nodes may have degree 2). Structural
    /// soundness (connected, acyclic, unique parents) is still enforced by
    /// construction of the caller and asserted in debug builds.
    pub(crate) fn new_unchecked(root: &str, leaves: &[String], edges: &[(String, String)]) -> Self {
        let mut names: Vec<String> = Vec::new();
        let mut name_index: HashMap<String, NodeId> = HashMap::new();
        let intern = |name: &str, names: &mut Vec<String>, idx: &mut HashMap<String, NodeId>| {
            *idx.entry(name.to_string()).or_insert_with(|| {
                names.push(name.to_string());
                names.len() - 1
            })
        };
        let root_id = intern(root, &mut names, &mut name_index);
        let mut edge_pairs = Vec::with_capacity(edges.len());
        for (p, c) in edges {
            let pi = intern(p, &mut names, &mut name_index);
            let ci = intern(c, &mut names, &mut name_index);
            edge_pairs.push((pi, ci));
        }
        let n_nodes = names.len();
        let mut parent = vec![None; n_nodes];
        let mut parent_edge = vec![None; n_nodes];
        let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); n_nodes];
        for (eid, &(p, c)) in edge_pairs.iter().enumerate() {
            debug_assert!(parent[c].is_none());
            parent[c] = Some(p);
            parent_edge[c] = Some(eid);
            children[p].push(c);
        }
        let mut depth = vec![usize::MAX; n_nodes];
        depth[root_id] = 0;
        let mut stack = vec![root_id];
        while let Some(v) = stack.pop() {
            for &c in &children[v] {
                depth[c] = depth[v] + 1;
                stack.push(c);
            }
        }
        debug_assert!(depth.iter().all(|&d| d != usize::MAX));
        let mut leaf_ids = Vec::with_capacity(leaves.len());
        let mut is_leaf = vec![false; n_nodes];
        for l in leaves {
            let id = name_index[l.as_str()];
            leaf_ids.push(id);
            is_leaf[id] = true;
        }
        RootedTree {
            names,
            name_index,
            root: root_id,
            parent,
            children,
            leaves: leaf_ids,
            edges: edge_pairs,
            parent_edge,
            depth,
            is_leaf,
        }
    }
}
