//! Coordinate changes between leaf-pattern probabilities, non-central
//! moments, central moments, tree cumulants, and the two parameterizations
//! (conditional-probability θ and correlation-style ω).
//!
//! All maps here are exact over `BigRational`. Subsets of the leaf set are
//! bitmasks: bit `k` refers to the k-th declared leaf, and a full pattern
//! `α ∈ {0,1}^n` is the mask of its 1-positions.

use crate::tree::{EdgeId, NodeId, RootedTree, TreeError};
use crate::BigRational;
use num_traits::{One, Zero};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("probability vector must have length 2^n (got {0})")]
    BadLength(usize),
    #[error("probabilities must be nonnegative and sum to 1")]
    NotADistribution,
    #[error("moment vector must satisfy λ_∅ = 1")]
    BadEmptyMoment,
    #[error("moments are infeasible: pattern {0:#b} gets probability {1}")]
    OutOfSimplex(usize, String),
    #[error("incomparable poset elements")]
    Incomparable,
    #[error("parameter out of range: {0}")]
    ParameterRange(String),
    #[error("ω point violates the parameter constraints: {0}")]
    ConstraintViolation(String),
    #[error("operation requires a trivalent tree")]
    NotTrivalent,
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Distribution over leaf patterns, indexed by bitmask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbVector {
    pub n: usize,
    pub p: Vec<BigRational>,
}

impl ProbVector {
    pub fn new(n: usize, p: Vec<BigRational>) -> Result<Self, TransformError> {
        if p.len() != 1 << n {
            return Err(TransformError::BadLength(p.len()));
        }
        let sum: BigRational = p.iter().sum();
        if !sum.is_one() || p.iter().any(|x| x < &BigRational::zero()) {
            return Err(TransformError::NotADistribution);
        }
        Ok(ProbVector { n, p })
    }

    pub fn uniform(n: usize) -> Self {
        let size = 1usize << n;
        ProbVector {
            n,
            p: vec![crate::ratio(1, size as i64); size],
        }
    }
}

/// Non-central moments λ_I = P(Y_i = 1 for all i in I), indexed by mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentVector {
    pub n: usize,
    pub lambda: Vec<BigRational>,
}

/// Means and central moments μ_I = E[Π_{i∈I}(Y_i − λ_i)], indexed by mask.
/// μ_∅ = 1 and all singleton entries are 0 by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CentralMoments {
    pub n: usize,
    pub means: Vec<BigRational>,
    pub mu: Vec<BigRational>,
}

/// Means plus tree cumulants κ_I for |I| ≥ 2 (entries below size 2 are 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CumulantVector {
    pub n: usize,
    pub means: Vec<BigRational>,
    pub kappa: Vec<BigRational>,
}

/// λ_I for every I: superset-sum (zeta transform) of the pattern probabilities.
pub fn probs_to_lambda(p: &ProbVector) -> MomentVector {
    let n = p.n;
    let mut a = p.p.clone();
    for i in 0..n {
        let bit = 1usize << i;
        for mask in 0..a.len() {
            if mask & bit == 0 {
                let hi = a[mask | bit].clone();
                a[mask] += hi;
            }
        }
    }
    MomentVector { n, lambda: a }
}

/// Inverse of [`probs_to_lambda`]; flags infeasible moment vectors.
pub fn lambda_to_probs(m: &MomentVector) -> Result<ProbVector, TransformError> {
    if !m.lambda[0].is_one() {
        return Err(TransformError::BadEmptyMoment);
    }
    let n = m.n;
    let mut a = m.lambda.clone();
    for i in 0..n {
        let bit = 1usize << i;
        for mask in 0..a.len() {
            if mask & bit == 0 {
                let hi = a[mask | bit].clone();
                a[mask] -= hi;
            }
        }
    }
    if let Some(mask) = a.iter().position(|x| x < &BigRational::zero()) {
        return Err(TransformError::OutOfSimplex(
            mask,
            crate::ratio_string(&a[mask]),
        ));
    }
    Ok(ProbVector { n, p: a })
}

/// Central moments via μ_I = Σ_{J⊆I} (−1)^{|J|} λ_{I∖J} Π_{i∈J} λ_i.
pub fn lambda_to_central(m: &MomentVector) -> CentralMoments {
    let n = m.n;
    let means: Vec<BigRational> = (0..n).map(|i| m.lambda[1 << i].clone()).collect();
    let full = 1usize << n;
    let mut mu = vec![BigRational::zero(); full];
    for i_mask in 0..full {
        let mut acc = BigRational::zero();
        // Iterate J over submasks of I (including ∅ and I).
        let mut j_mask = i_mask;
        loop {
            let mut term = m.lambda[i_mask & !j_mask].clone();
            for b in 0..n {
                if j_mask & (1 << b) != 0 {
                    term *= &means[b];
                }
            }
            if (j_mask.count_ones() & 1) == 1 {
                acc -= term;
            } else {
                acc += term;
            }
            if j_mask == 0 {
                break;
            }
            j_mask = (j_mask - 1) & i_mask;
        }
        mu[i_mask] = acc;
    }
    CentralMoments { n, means, mu }
}

/// Inverse of [`lambda_to_central`]: back-substitution in order of subset
/// size, using λ_I = μ_I − Σ_{∅≠J⊆I} (−1)^{|J|} λ_{I∖J} Π_{i∈J} λ_i.
pub fn central_to_lambda(c: &CentralMoments) -> MomentVector {
    let n = c.n;
    let full = 1usize << n;
    let mut lambda = vec![BigRational::zero(); full];
    lambda[0] = BigRational::one();
    for i in 0..n {
        lambda[1 << i] = c.means[i].clone();
    }
    let mut masks: Vec<usize> = (0..full).filter(|m| m.count_ones() >= 2).collect();
    masks.sort_by_key(|m| m.count_ones());
    for &i_mask in &masks {
        // λ_I = μ_I − Σ_{∅≠J⊆I} (−1)^{|J|} λ_{I∖J} Π_{i∈J} λ_i; every
        // λ_{I∖J} on the right is a strictly smaller mask, already known.
        let mut acc = c.mu[i_mask].clone();
        let mut j_mask = i_mask;
        loop {
            if j_mask != 0 {
                let mut term = lambda[i_mask & !j_mask].clone();
                for b in 0..n {
                    if j_mask & (1 << b) != 0 {
                        term *= &c.means[b];
                    }
                }
                if (j_mask.count_ones() & 1) == 1 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            if j_mask == 0 {
                break;
            }
            j_mask = (j_mask - 1) & i_mask;
        }
        lambda[i_mask] = acc;
    }
    MomentVector { n, lambda }
}

/// A partition of a leaf set, blocks as sorted bitmasks over leaf positions.
pub type Partition = Vec<usize>;

fn canonical(mut blocks: Vec<usize>) -> Partition {
    blocks.retain(|&b| b != 0);
    blocks.sort_unstable();
    blocks
}

/// Partitions of the leaf set of a spanning subtree `T(I)` obtained by
/// deleting subsets of its inner edges, ordered by refinement.
#[derive(Debug, Clone)]
pub struct PartitionPoset {
    pub elements: Vec<Partition>,
    /// `leq[a][b]` ⇔ element a refines element b.
    pub leq: Vec<Vec<bool>>,
    /// Index of the one-block partition.
    pub top: usize,
}

/// Builds the poset for a spanning subtree whose leaves are taken in the
/// subtree's declared order (block bit k = k-th leaf of `sub`).
pub fn build_partition_poset(sub: &RootedTree) -> PartitionPoset {
    let leaves = sub.leaves();
    let leaf_pos: HashMap<NodeId, usize> =
        leaves.iter().enumerate().map(|(k, &l)| (l, k)).collect();
    let inner_edges: Vec<EdgeId> = (0..sub.n_edges())
        .filter(|&e| {
            let (p, c) = sub.edge(e);
            !sub.is_leaf(p) && !sub.is_leaf(c)
        })
        .collect();

    let mut seen: HashMap<Partition, usize> = HashMap::new();
    let mut elements: Vec<Partition> = Vec::new();
    for removal in 0..(1usize << inner_edges.len()) {
        // Union-find over nodes, joining along every edge not removed.
        let mut uf: Vec<usize> = (0..sub.n_nodes()).collect();
        fn find(uf: &mut Vec<usize>, x: usize) -> usize {
            let mut r = x;
            while uf[r] != r {
                r = uf[r];
            }
            let mut c = x;
            while uf[c] != r {
                let next = uf[c];
                uf[c] = r;
                c = next;
            }
            r
        }
        for e in 0..sub.n_edges() {
            let removed = inner_edges
                .iter()
                .position(|&ie| ie == e)
                .map(|k| removal & (1 << k) != 0)
                .unwrap_or(false);
            if !removed {
                let (p, c) = sub.edge(e);
                let rp = find(&mut uf, p);
                let rc = find(&mut uf, c);
                uf[rp] = rc;
            }
        }
        let mut comp_mask: HashMap<usize, usize> = HashMap::new();
        for (&leaf, &pos) in &leaf_pos {
            let r = find(&mut uf, leaf);
            *comp_mask.entry(r).or_insert(0) |= 1 << pos;
        }
        // Components without leaves contribute no block.
        let part = canonical(comp_mask.into_values().collect());
        let next = elements.len();
        seen.entry(part.clone()).or_insert_with(|| {
            elements.push(part);
            next
        });
    }

    let refines = |a: &Partition, b: &Partition| -> bool {
        a.iter()
            .all(|&ba| b.iter().any(|&bb| ba & !bb == 0))
    };
    let leq: Vec<Vec<bool>> = elements
        .iter()
        .map(|a| elements.iter().map(|b| refines(a, b)).collect())
        .collect();
    let top = elements
        .iter()
        .position(|p| p.len() == 1)
        .expect("the empty removal gives the one-block partition");
    PartitionPoset { elements, leq, top }
}

/// Möbius function of the poset: μ(π,π) = 1, μ(π,ν) = −Σ_{π≤δ<ν} μ(π,δ).
pub fn mobius(poset: &PartitionPoset, pi: usize, nu: usize) -> Result<i64, TransformError> {
    if !poset.leq[pi][nu] {
        return Err(TransformError::Incomparable);
    }
    fn rec(poset: &PartitionPoset, pi: usize, nu: usize, memo: &mut HashMap<(usize, usize), i64>) -> i64 {
        if pi == nu {
            return 1;
        }
        if let Some(&v) = memo.get(&(pi, nu)) {
            return v;
        }
        let mut acc = 0i64;
        for d in 0..poset.elements.len() {
            if d != nu && poset.leq[pi][d] && poset.leq[d][nu] {
                acc += rec(poset, pi, d, memo);
            }
        }
        memo.insert((pi, nu), -acc);
        -acc
    }
    let mut memo = HashMap::new();
    Ok(rec(poset, pi, nu, &mut memo))
}

/// Tree cumulants κ_I = Σ_{π} μ(π, 1̂) Π_{B∈π} μ_B over the edge-removal
/// partition poset of T(I); singleton blocks kill their term since μ_i = 0.
pub fn cumulants_from_moments(
    central: &CentralMoments,
    tree: &RootedTree,
) -> Result<CumulantVector, TransformError> {
    let n = central.n;
    debug_assert_eq!(n, tree.n_leaves());
    let full = 1usize << n;
    let mut kappa = vec![BigRational::zero(); full];
    for i_mask in 0..full {
        if (i_mask as u64).count_ones() < 2 {
            continue;
        }
        let leaf_ids: Vec<NodeId> = (0..n)
            .filter(|k| i_mask & (1 << k) != 0)
            .map(|k| tree.leaves()[k])
            .collect();
        let positions: Vec<usize> = (0..n).filter(|k| i_mask & (1 << k) != 0).collect();
        let (sub, _) = tree.spanning_subtree(&leaf_ids)?;
        // Subtree leaves were passed in global order, so sub-leaf k is
        // global position positions[k].
        let poset = build_partition_poset(&sub);
        let mut acc = BigRational::zero();
        for (pi_idx, part) in poset.elements.iter().enumerate() {
            if part.iter().any(|b| b.count_ones() == 1) {
                continue;
            }
            let coef = mobius(&poset, pi_idx, poset.top)?;
            if coef == 0 {
                continue;
            }
            let mut term = BigRational::from_integer(coef.into());
            for &block in part {
                let mut global = 0usize;
                for (k, &pos) in positions.iter().enumerate() {
                    if block & (1 << k) != 0 {
                        global |= 1 << pos;
                    }
                }
                term *= &central.mu[global];
            }
            acc += term;
        }
        kappa[i_mask] = acc;
    }
    Ok(CumulantVector {
        n,
        means: central.means.clone(),
        kappa,
    })
}

/// Conditional-probability parameters: root law plus one row pair per edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThetaPoint {
    /// P(Y_root = 1).
    pub root_p1: BigRational,
    /// Per edge (input order): (P(child=1 | parent=0), P(child=1 | parent=1)).
    pub edges: Vec<(BigRational, BigRational)>,
}

impl ThetaPoint {
    pub fn dim(&self) -> usize {
        2 * self.edges.len() + 1
    }

    pub fn validate(&self, tree: &RootedTree) -> Result<(), TransformError> {
        let in_unit = |x: &BigRational| *x >= BigRational::zero() && *x <= BigRational::one();
        if self.edges.len() != tree.n_edges() {
            return Err(TransformError::ParameterRange(format!(
                "expected {} edge rows, got {}",
                tree.n_edges(),
                self.edges.len()
            )));
        }
        if !in_unit(&self.root_p1) {
            return Err(TransformError::ParameterRange("root probability".into()));
        }
        for (e, (a, b)) in self.edges.iter().enumerate() {
            if !in_unit(a) || !in_unit(b) {
                return Err(TransformError::ParameterRange(format!("edge {e}")));
            }
        }
        Ok(())
    }

    /// Flat layout `[root_p1, e0_p1|0, e0_p1|1, e1_p1|0, ...]` used by the
    /// float pipeline and by parameter files.
    pub fn to_flat_f64(&self) -> Vec<f64> {
        use num_traits::ToPrimitive;
        let mut out = Vec::with_capacity(self.dim());
        out.push(self.root_p1.to_f64().unwrap());
        for (a, b) in &self.edges {
            out.push(a.to_f64().unwrap());
            out.push(b.to_f64().unwrap());
        }
        out
    }
}

/// Correlation-style parameters: per-node s_v = 1 − 2·P(Y_v = 1) and per-edge
/// η = P(child=1|parent=1) − P(child=1|parent=0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OmegaPoint {
    pub s: Vec<BigRational>,
    pub eta: Vec<BigRational>,
}

/// Node marginals P(Y_v = 1), root-downward.
pub fn node_marginals(theta: &ThetaPoint, tree: &RootedTree) -> Vec<BigRational> {
    let mut lam = vec![BigRational::zero(); tree.n_nodes()];
    let mut order: Vec<NodeId> = vec![tree.root()];
    let mut i = 0;
    while i < order.len() {
        let v = order[i];
        i += 1;
        for &c in tree.children(v) {
            order.push(c);
        }
    }
    for v in order {
        lam[v] = match tree.parent_edge(v) {
            None => theta.root_p1.clone(),
            Some(e) => {
                let u = tree.parent(v).unwrap();
                let (p10, p11) = &theta.edges[e];
                p11 * &lam[u] + p10 * (BigRational::one() - &lam[u])
            }
        };
    }
    lam
}

pub fn theta_to_omega(theta: &ThetaPoint, tree: &RootedTree) -> OmegaPoint {
    let lam = node_marginals(theta, tree);
    let two = crate::ratio(2, 1);
    let s = lam
        .iter()
        .map(|l| BigRational::one() - &two * l)
        .collect();
    let eta = theta
        .edges
        .iter()
        .map(|(p10, p11)| p11 - p10)
        .collect();
    OmegaPoint { s, eta }
}

/// Inverts [`theta_to_omega`]; fails when the ω point leaves the valid
/// parameter region (some conditional probability would exit [0,1]).
pub fn omega_to_theta(omega: &OmegaPoint, tree: &RootedTree) -> Result<ThetaPoint, TransformError> {
    let two = crate::ratio(2, 1);
    let lam: Vec<BigRational> = omega
        .s
        .iter()
        .map(|s| (BigRational::one() - s) / &two)
        .collect();
    let root_p1 = lam[tree.root()].clone();
    let mut edges = Vec::with_capacity(tree.n_edges());
    for e in 0..tree.n_edges() {
        let (u, v) = tree.edge(e);
        let p10 = &lam[v] - &omega.eta[e] * &lam[u];
        let p11 = &p10 + &omega.eta[e];
        edges.push((p10, p11));
    }
    let theta = ThetaPoint { root_p1, edges };
    theta
        .validate(tree)
        .map_err(|e| TransformError::ConstraintViolation(e.to_string()))?;
    Ok(theta)
}

/// Leaf-pattern distribution of the model: marginalize the hidden nodes by
/// an upward product of conditional sums.
pub fn model_probs(theta: &ThetaPoint, tree: &RootedTree) -> ProbVector {
    let n = tree.n_leaves();
    let full = 1usize << n;
    // Reverse topological order: children before parents.
    let mut order: Vec<NodeId> = vec![tree.root()];
    let mut i = 0;
    while i < order.len() {
        let v = order[i];
        i += 1;
        for &c in tree.children(v) {
            order.push(c);
        }
    }
    let leaf_pos: HashMap<NodeId, usize> = tree
        .leaves()
        .iter()
        .enumerate()
        .map(|(k, &l)| (l, k))
        .collect();

    let mut p = Vec::with_capacity(full);
    for alpha in 0..full {
        // g[v][b] = P(observed leaves below v | Y_v = b), root handled last.
        let mut g = vec![[BigRational::zero(), BigRational::zero()]; tree.n_nodes()];
        for &v in order.iter().rev() {
            for b in 0..2usize {
                let mut val = match leaf_pos.get(&v) {
                    Some(&k) => {
                        let bit = (alpha >> k) & 1;
                        if bit == b {
                            BigRational::one()
                        } else {
                            BigRational::zero()
                        }
                    }
                    None => BigRational::one(),
                };
                if val.is_zero() {
                    g[v][b] = val;
                    continue;
                }
                for &c in tree.children(v) {
                    let (p10, p11) = &theta.edges[tree.parent_edge(c).unwrap()];
                    let p1 = if b == 1 { p11 } else { p10 };
                    let term = p1 * &g[c][1] + (BigRational::one() - p1) * &g[c][0];
                    val *= term;
                }
                g[v][b] = val;
            }
        }
        let r = tree.root();
        let val = &theta.root_p1 * &g[r][1] + (BigRational::one() - &theta.root_p1) * &g[r][0];
        p.push(val);
    }
    ProbVector { n, p }
}

/// Float version of [`model_probs`] over the flat θ layout; used by the
/// Monte Carlo validator where exactness is impossible anyway.
pub fn model_probs_f64(theta_flat: &[f64], tree: &RootedTree) -> Vec<f64> {
    let n = tree.n_leaves();
    let full = 1usize << n;
    let mut order: Vec<NodeId> = vec![tree.root()];
    let mut i = 0;
    while i < order.len() {
        let v = order[i];
        i += 1;
        for &c in tree.children(v) {
            order.push(c);
        }
    }
    let mut leaf_pos = vec![usize::MAX; tree.n_nodes()];
    for (k, &l) in tree.leaves().iter().enumerate() {
        leaf_pos[l] = k;
    }
    let root_p1 = theta_flat[0];
    let edge_p = |e: EdgeId, b: usize| -> f64 { theta_flat[1 + 2 * e + b] };

    let mut out = Vec::with_capacity(full);
    let mut g = vec![[0.0f64; 2]; tree.n_nodes()];
    for alpha in 0..full {
        for &v in order.iter().rev() {
            for b in 0..2usize {
                let mut val = if leaf_pos[v] != usize::MAX {
                    if ((alpha >> leaf_pos[v]) & 1) == b {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    1.0
                };
                if val != 0.0 {
                    for &c in tree.children(v) {
                        let p1 = edge_p(tree.parent_edge(c).unwrap(), b);
                        val *= p1 * g[c][1] + (1.0 - p1) * g[c][0];
                    }
                }
                g[v][b] = val;
            }
        }
        let r = tree.root();
        out.push(root_p1 * g[r][1] + (1.0 - root_p1) * g[r][0]);
    }
    out
}

/// Monomial evaluation of a tree cumulant from ω-parameters on a trivalent
/// tree: κ_I = ¼(1−s_{r(I)}²) Π_{v inner in T(I)} s_v^{deg−2} Π_{E(I)} η_e.
pub fn kappa_from_params(
    omega: &OmegaPoint,
    i_mask: usize,
    tree: &RootedTree,
) -> Result<BigRational, TransformError> {
    if !tree.is_trivalent() {
        return Err(TransformError::NotTrivalent);
    }
    let n = tree.n_leaves();
    let leaf_ids: Vec<NodeId> = (0..n)
        .filter(|k| i_mask & (1 << k) != 0)
        .map(|k| tree.leaves()[k])
        .collect();
    if leaf_ids.len() < 2 {
        return Err(TransformError::ParameterRange(
            "cumulant index needs at least two leaves".into(),
        ));
    }
    // Work on the global tree directly: collect T(I)'s edges and nodes.
    let lca = leaf_ids
        .iter()
        .copied()
        .reduce(|a, b| tree.lca(a, b))
        .unwrap();
    let mut edge_in = vec![false; tree.n_edges()];
    for &l in &leaf_ids {
        let mut v = l;
        while v != lca {
            let e = tree.parent_edge(v).unwrap();
            if edge_in[e] {
                break;
            }
            edge_in[e] = true;
            v = tree.parent(v).unwrap();
        }
    }
    let mut degree = vec![0usize; tree.n_nodes()];
    for e in 0..tree.n_edges() {
        if edge_in[e] {
            let (p, c) = tree.edge(e);
            degree[p] += 1;
            degree[c] += 1;
        }
    }
    let quarter = crate::ratio(1, 4);
    let s_r = &omega.s[lca];
    let mut value = quarter * (BigRational::one() - s_r * s_r);
    let in_i = |v: NodeId| leaf_ids.contains(&v);
    for v in 0..tree.n_nodes() {
        if degree[v] == 0 || in_i(v) {
            continue;
        }
        for _ in 2..degree[v] {
            value *= &omega.s[v];
        }
        // degree 2 contributes exponent 0; trivalent caps degree at 3.
        debug_assert!(degree[v] >= 2 && degree[v] <= 3);
    }
    for e in 0..tree.n_edges() {
        if edge_in[e] {
            value *= &omega.eta[e];
        }
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio;

    fn star3() -> RootedTree {
        RootedTree::parse(
            r#"{"root":"h","leaves":["1","2","3"],
                "edges":[["h","1"],["h","2"],["h","3"]]}"#,
        )
        .unwrap()
    }

    fn quartet() -> RootedTree {
        RootedTree::parse(
            r#"{"root":"a","leaves":["1","2","3","4"],
                "edges":[["a","1"],["a","2"],["a","b"],["b","3"],["b","4"]]}"#,
        )
        .unwrap()
    }

    #[test]
    fn lambda_of_small_distributions() {
        // Uniform independent pair.
        let p = ProbVector::uniform(2);
        let m = probs_to_lambda(&p);
        assert_eq!(m.lambda[0b01], ratio(1, 2));
        assert_eq!(m.lambda[0b10], ratio(1, 2));
        assert_eq!(m.lambda[0b11], ratio(1, 4));

        // Perfectly correlated pair (1/2, 0, 0, 1/2).
        let p = ProbVector::new(
            2,
            vec![ratio(1, 2), ratio(0, 1), ratio(0, 1), ratio(1, 2)],
        )
        .unwrap();
        let m = probs_to_lambda(&p);
        assert_eq!(m.lambda[0b01], ratio(1, 2));
        assert_eq!(m.lambda[0b11], ratio(1, 2));

        let back = lambda_to_probs(&m).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn infeasible_moments_are_flagged() {
        // λ_{12} > min(λ_1, λ_2) cannot come from a distribution.
        let m = MomentVector {
            n: 2,
            lambda: vec![ratio(1, 1), ratio(1, 2), ratio(1, 2), ratio(3, 4)],
        };
        assert!(matches!(
            lambda_to_probs(&m),
            Err(TransformError::OutOfSimplex(_, _))
        ));
    }

    #[test]
    fn central_moments_and_inverse() {
        let p = ProbVector::uniform(2);
        let m = probs_to_lambda(&p);
        let c = lambda_to_central(&m);
        // Independent coins: μ_12 = λ_12 − λ_1λ_2 = 0.
        assert_eq!(c.mu[0b11], ratio(0, 1));
        assert_eq!(c.mu[0], ratio(1, 1));
        assert_eq!(c.mu[0b01], ratio(0, 1));

        // Symmetric ±three-way: odd central moment vanishes.
        let mut probs = vec![ratio(0, 1); 8];
        probs[0b000] = ratio(1, 2);
        probs[0b111] = ratio(1, 2);
        let p = ProbVector::new(3, probs).unwrap();
        let c = lambda_to_central(&probs_to_lambda(&p));
        assert_eq!(c.mu[0b111], ratio(0, 1));
        assert_eq!(c.mu[0b011], ratio(1, 4));

        let m2 = central_to_lambda(&c);
        assert_eq!(m2, probs_to_lambda(&p));
    }

    #[test]
    fn quartet_poset_has_two_elements() {
        let q = quartet();
        let ids: Vec<_> = q.leaves().to_vec();
        let (sub, _) = q.spanning_subtree(&ids).unwrap();
        let poset = build_partition_poset(&sub);
        assert_eq!(poset.elements.len(), 2);
        let bottom = (0..2).find(|&i| i != poset.top).unwrap();
        // One inner edge: removing it splits 12|34.
        assert_eq!(poset.elements[bottom], vec![0b0011, 0b1100]);
        assert_eq!(mobius(&poset, bottom, poset.top).unwrap(), -1);
        assert_eq!(mobius(&poset, poset.top, poset.top).unwrap(), 1);
    }

    #[test]
    fn mobius_alternating_sum_vanishes() {
        // Chain-of-three caterpillar gives a bigger poset.
        let t = RootedTree::parse(
            r#"{"root":"a","leaves":["1","2","3","4","5"],
                "edges":[["a","1"],["a","2"],["a","b"],["b","3"],["b","c"],["c","4"],["c","5"]]}"#,
        )
        .unwrap();
        let (sub, _) = t.spanning_subtree(&t.leaves().to_vec()).unwrap();
        let poset = build_partition_poset(&sub);
        assert!(poset.elements.len() >= 4);
        for pi in 0..poset.elements.len() {
            for nu in 0..poset.elements.len() {
                if pi == nu || !poset.leq[pi][nu] {
                    continue;
                }
                let mut total = 0i64;
                for d in 0..poset.elements.len() {
                    if poset.leq[pi][d] && poset.leq[d][nu] {
                        total += mobius(&poset, d, nu).unwrap();
                    }
                }
                assert_eq!(total, 0, "alternating sum must vanish for {pi} < {nu}");
            }
        }
    }

    #[test]
    fn quartet_cumulant_formula() {
        // Random-ish rational θ; κ_1234 must equal μ_1234 − μ_12 μ_34 and
        // every pair/triple cumulant must equal its central moment.
        let q = quartet();
        let theta = ThetaPoint {
            root_p1: ratio(2, 5),
            edges: vec![
                (ratio(1, 3), ratio(4, 5)),
                (ratio(1, 4), ratio(2, 3)),
                (ratio(1, 5), ratio(5, 7)),
                (ratio(2, 7), ratio(3, 4)),
                (ratio(1, 6), ratio(7, 9)),
            ],
        };
        let p = model_probs(&theta, &q);
        let m = probs_to_lambda(&p);
        let c = lambda_to_central(&m);
        let k = cumulants_from_moments(&c, &q).unwrap();
        for pair in [0b0011usize, 0b0101, 0b1010, 0b1100, 0b1001, 0b0110] {
            assert_eq!(k.kappa[pair], c.mu[pair]);
        }
        for triple in [0b0111usize, 0b1011, 0b1101, 0b1110] {
            assert_eq!(k.kappa[triple], c.mu[triple]);
        }
        let expect = &c.mu[0b1111] - &c.mu[0b0011] * &c.mu[0b1100];
        assert_eq!(k.kappa[0b1111], expect);
    }

    #[test]
    fn copying_edges_give_unit_correlations() {
        let s = star3();
        let theta = ThetaPoint {
            root_p1: ratio(1, 2),
            edges: vec![
                (ratio(0, 1), ratio(1, 1));
                3
            ],
        };
        let om = theta_to_omega(&theta, &s);
        for v in 0..s.n_nodes() {
            assert_eq!(om.s[v], ratio(0, 1));
        }
        for e in 0..3 {
            assert_eq!(om.eta[e], ratio(1, 1));
        }
        let p = model_probs(&theta, &s);
        assert_eq!(p.p[0b000], ratio(1, 2));
        assert_eq!(p.p[0b111], ratio(1, 2));
        assert_eq!(p.p[0b001], ratio(0, 1));

        let back = omega_to_theta(&om, &s).unwrap();
        assert_eq!(back, theta);
    }

    #[test]
    fn all_half_theta_gives_uniform() {
        let s = star3();
        let theta = ThetaPoint {
            root_p1: ratio(1, 2),
            edges: vec![(ratio(1, 2), ratio(1, 2)); 3],
        };
        let p = model_probs(&theta, &s);
        assert_eq!(p, ProbVector::uniform(3));
        let om = theta_to_omega(&theta, &s);
        assert!(om.eta.iter().all(|e| e.is_zero()));
    }

    #[test]
    fn omega_constraint_violation_is_reported() {
        let s = star3();
        // s all zero forces marginals 1/2; η = 3/2 pushes θ_{1|1} above 1.
        let om = OmegaPoint {
            s: vec![ratio(0, 1); 4],
            eta: vec![ratio(3, 2), ratio(0, 1), ratio(0, 1)],
        };
        assert!(matches!(
            omega_to_theta(&om, &s),
            Err(TransformError::ConstraintViolation(_))
        ));
    }

    #[test]
    fn cherry_pair_cumulant_monomial() {
        let q = quartet();
        let theta = ThetaPoint {
            root_p1: ratio(1, 3),
            edges: vec![
                (ratio(1, 4), ratio(3, 4)),
                (ratio(1, 5), ratio(4, 5)),
                (ratio(1, 3), ratio(2, 3)),
                (ratio(2, 5), ratio(4, 7)),
                (ratio(1, 7), ratio(6, 7)),
            ],
        };
        let om = theta_to_omega(&theta, &q);
        // Pair {1,2} sits under the root a: κ_12 = ¼(1−s_a²)η_1η_2.
        let a = q.node_by_name("a").unwrap();
        let expect = ratio(1, 4)
            * (BigRational::one() - &om.s[a] * &om.s[a])
            * &om.eta[0]
            * &om.eta[1];
        assert_eq!(kappa_from_params(&om, 0b0011, &q).unwrap(), expect);

        // Zero η on a path edge kills the cumulant.
        let mut om0 = om.clone();
        om0.eta[2] = ratio(0, 1);
        assert_eq!(
            kappa_from_params(&om0, 0b0101, &q).unwrap(),
            ratio(0, 1)
        );
    }

    #[test]
    fn model_probs_f64_matches_exact() {
        use num_traits::ToPrimitive;
        let q = quartet();
        let theta = ThetaPoint {
            root_p1: ratio(2, 5),
            edges: vec![
                (ratio(1, 3), ratio(4, 5)),
                (ratio(1, 4), ratio(2, 3)),
                (ratio(1, 5), ratio(5, 7)),
                (ratio(2, 7), ratio(3, 4)),
                (ratio(1, 6), ratio(7, 9)),
            ],
        };
        let exact = model_probs(&theta, &q);
        let flat = theta.to_flat_f64();
        let approx = model_probs_f64(&flat, &q);
        for (e, a) in exact.p.iter().zip(approx.iter()) {
            assert!((e.to_f64().unwrap() - a).abs() < 1e-12);
        }
        let total: f64 = approx.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
