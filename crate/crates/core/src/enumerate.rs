//! Exhaustive enumeration of small labeled trivalent leaf trees, all their
//! rootings, and canonical shape keys that group a rooted tree plus a node
//! degeneracy assignment into isomorphism classes. The oracle sweeps in the
//! acceptance tests run one exact computation per class instead of one per
//! labeled instance.

use crate::newton::Degeneracy;
use crate::tree::{NodeId, RootedTree};

/// An unrooted tree with all inner nodes of degree 3. Nodes `0..n_leaves`
/// are the leaves; inner nodes follow.
#[derive(Debug, Clone)]
pub struct UnrootedTrivalent {
    pub n_leaves: usize,
    pub n_nodes: usize,
    pub edges: Vec<(usize, usize)>,
}

/// Every labeled trivalent tree on `n ≥ 3` leaves, built by attaching leaf
/// k to each edge of each (k−1)-leaf tree in turn. Each labeled shape shows
/// up exactly once; the count is the double factorial (2n−5)!!.
pub fn labeled_trivalent(n: usize) -> Vec<UnrootedTrivalent> {
    assert!(n >= 3, "leaf insertion starts from the three-leaf star");
    let mut current = vec![UnrootedTrivalent {
        n_leaves: 3,
        n_nodes: 4,
        edges: vec![(3, 0), (3, 1), (3, 2)],
    }];
    for k in 3..n {
        // Insert leaf k: leaves keep ids 0..k, old inner nodes shift up by
        // one, and the subdividing node takes the largest id.
        let mut next = Vec::with_capacity(current.len() * current[0].edges.len());
        for t in &current {
            let shift = |v: usize| if v < k { v } else { v + 1 };
            for (cut, &(u, v)) in t.edges.iter().enumerate() {
                let mid = t.n_nodes + 1;
                let mut edges: Vec<(usize, usize)> = Vec::with_capacity(t.edges.len() + 2);
                for (i, &(a, b)) in t.edges.iter().enumerate() {
                    if i != cut {
                        edges.push((shift(a), shift(b)));
                    }
                }
                edges.push((shift(u), mid));
                edges.push((mid, shift(v)));
                edges.push((mid, k));
                next.push(UnrootedTrivalent {
                    n_leaves: k + 1,
                    n_nodes: t.n_nodes + 2,
                    edges,
                });
            }
        }
        current = next;
    }
    current
}

fn node_name(t: &UnrootedTrivalent, v: usize) -> String {
    if v < t.n_leaves {
        format!("l{v}")
    } else {
        format!("h{}", v - t.n_leaves)
    }
}

/// Orients an unrooted tree from the given node, producing a validated
/// rooted tree. Children are visited in ascending id order, so the edge
/// order is deterministic.
pub fn root_at(t: &UnrootedTrivalent, root: usize) -> RootedTree {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); t.n_nodes];
    for &(u, v) in &t.edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    for nbrs in adj.iter_mut() {
        nbrs.sort_unstable();
    }
    let mut oriented: Vec<(String, String)> = Vec::new();
    let mut stack = vec![(root, usize::MAX)];
    while let Some((v, parent)) = stack.pop() {
        for &w in &adj[v] {
            if w != parent {
                oriented.push((node_name(t, v), node_name(t, w)));
                stack.push((w, v));
            }
        }
    }
    let leaves: Vec<String> = (0..t.n_leaves).map(|v| node_name(t, v)).collect();
    RootedTree::from_parts(&node_name(t, root), &leaves, &oriented)
        .expect("enumerated trees are well formed")
}

/// All rootings of an unrooted tree: one rooted tree per node.
pub fn rootings(t: &UnrootedTrivalent) -> Vec<RootedTree> {
    (0..t.n_nodes).map(|v| root_at(t, v)).collect()
}

fn subtree_key(tree: &RootedTree, delta: &Degeneracy, v: NodeId) -> String {
    if tree.is_leaf(v) {
        return "L".to_string();
    }
    let mut kids: Vec<String> = tree
        .children(v)
        .iter()
        .map(|&c| subtree_key(tree, delta, c))
        .collect();
    kids.sort();
    let d = if delta.get(v) { '1' } else { '0' };
    format!("({d}{})", kids.join(""))
}

/// Canonical key of a rooted tree with degeneracy assignment: two inputs
/// get the same key exactly when a root- and δ-preserving isomorphism maps
/// one to the other. Built by sorting child subtree keys recursively.
pub fn canonical_key(tree: &RootedTree, delta: &Degeneracy) -> String {
    subtree_key(tree, delta, tree.root())
}

/// All degeneracy assignments of a rooted tree: one per subset of its
/// inner nodes.
pub fn all_degeneracies(tree: &RootedTree) -> Vec<Degeneracy> {
    let inner: Vec<NodeId> = tree.inner_nodes().collect();
    (0..(1usize << inner.len()))
        .map(|mask| {
            let mut delta = vec![false; tree.n_nodes()];
            for (bit, &v) in inner.iter().enumerate() {
                delta[v] = mask >> bit & 1 == 1;
            }
            Degeneracy::new(tree, delta).expect("inner-node subsets are valid assignments")
        })
        .collect()
}
