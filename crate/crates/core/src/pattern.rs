//! Empirical input handling: pattern-count tables, tolerance policy, the
//! isolated-edge covariance pattern with its promotion fixpoint, and the
//! structural decomposition of the tree induced by that pattern.

use crate::moments::{lambda_to_central, probs_to_lambda, CentralMoments, ProbVector, ThetaPoint};
use crate::tree::{EdgeId, NodeId, RootedTree};
use crate::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use std::collections::HashMap;
use thiserror::Error;

/// Maximum sup-norm gap between the empirical distribution and the best
/// model fit found by EM before we stop treating the empirical distribution
/// as a member of the model. Fiber data built from exact parameters fits to
/// machine precision, so 1e-6 separates "in the model" from "off the model"
/// with a wide margin on both sides.
pub const MODEL_FIT_TOL: f64 = 1e-6;

/// Synthetic-data tolerance: exact-rational inputs carry no sampling noise,
/// so any covariance at or below 1/10^8 is treated as structurally zero.
pub fn synthetic_tol() -> BigRational {
    crate::ratio(1, 100_000_000)
}

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("count table line {0}: expected `pattern,count`")]
    BadLine(usize),
    #[error("count table line {0}: pattern must be {1} characters of 0/1")]
    BadPattern(usize, usize),
    #[error("count table line {0}: unparsable count {1:?}")]
    BadCount(usize, String),
    #[error("count table line {0}: duplicate pattern")]
    DuplicatePattern(usize),
    #[error("counts must be nonnegative")]
    NegativeCount,
    #[error("count table is empty (total count zero)")]
    EmptyTable,
    #[error("tolerance must be positive")]
    BadTolerance,
}

/// Observed pattern counts, indexed by leaf-pattern bitmask. Fractional
/// counts are first-class: entries are exact rationals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    pub n: usize,
    pub counts: Vec<BigRational>,
    pub total: BigRational,
}

impl CountTable {
    pub fn new(n: usize, counts: Vec<BigRational>) -> Result<Self, PatternError> {
        assert_eq!(counts.len(), 1 << n);
        if counts.iter().any(|c| c < &BigRational::zero()) {
            return Err(PatternError::NegativeCount);
        }
        let total: BigRational = counts.iter().sum();
        if total.is_zero() {
            return Err(PatternError::EmptyTable);
        }
        Ok(CountTable { n, counts, total })
    }

    /// Parses `pattern,count` lines. Character k of the pattern is the value
    /// of the k-th declared leaf. Counts may be integers, decimals, or
    /// fractions `p/q`. Missing patterns count as zero; duplicates are
    /// rejected. An optional `pattern,count` header line is skipped.
    pub fn parse_csv(text: &str, n: usize) -> Result<Self, PatternError> {
        let mut counts = vec![BigRational::zero(); 1 << n];
        let mut seen = vec![false; 1 << n];
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if idx == 0 && line.eq_ignore_ascii_case("pattern,count") {
                continue;
            }
            let (pat, cnt) = line
                .split_once(',')
                .ok_or(PatternError::BadLine(line_no))?;
            let pat = pat.trim();
            let cnt = cnt.trim();
            if pat.len() != n || !pat.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(PatternError::BadPattern(line_no, n));
            }
            let mut mask = 0usize;
            for (k, b) in pat.bytes().enumerate() {
                if b == b'1' {
                    mask |= 1 << k;
                }
            }
            if seen[mask] {
                return Err(PatternError::DuplicatePattern(line_no));
            }
            seen[mask] = true;
            counts[mask] = parse_count(cnt)
                .ok_or_else(|| PatternError::BadCount(line_no, cnt.to_string()))?;
        }
        CountTable::new(n, counts)
    }

    /// Empirical distribution p̂ = counts / total.
    pub fn empirical(&self) -> ProbVector {
        ProbVector {
            n: self.n,
            p: self.counts.iter().map(|c| c / &self.total).collect(),
        }
    }

    /// True when every count is an integer (sampling data rather than an
    /// exact synthetic table).
    pub fn all_integer(&self) -> bool {
        self.counts.iter().all(|c| c.is_integer())
    }

    pub fn total_f64(&self) -> f64 {
        self.total.to_f64().unwrap_or(f64::NAN)
    }
}

fn parse_count(s: &str) -> Option<BigRational> {
    if let Some(r) = crate::parse_ratio(s) {
        if r >= BigRational::zero() {
            return Some(r);
        }
        return None;
    }
    // Decimal form like 12.5 or 0.25.
    let (int_part, frac_part) = s.split_once('.')?;
    if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let num: num_bigint::BigInt = digits.parse().ok()?;
    let den = num_bigint::BigInt::from(10u32).pow(frac_part.len() as u32);
    let r = BigRational::new(num, den);
    if r >= BigRational::zero() {
        Some(r)
    } else {
        None
    }
}

/// How the zero-covariance threshold is chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TolPolicy {
    /// Caller-provided exact threshold.
    Explicit(BigRational),
    /// Fixed small threshold for exact synthetic tables.
    Synthetic,
    /// √(ln n / N): the scale below which sample covariances of N draws are
    /// statistically indistinguishable from zero.
    Empirical,
}

/// Resolves the policy to an exact threshold. With no explicit choice,
/// fractional counts select the synthetic policy and integer counts the
/// empirical one.
pub fn resolve_tol(policy: Option<&TolPolicy>, table: &CountTable) -> Result<BigRational, PatternError> {
    let policy = match policy {
        Some(p) => p.clone(),
        None if table.all_integer() => TolPolicy::Empirical,
        None => TolPolicy::Synthetic,
    };
    let tol = match policy {
        TolPolicy::Explicit(t) => t,
        TolPolicy::Synthetic => synthetic_tol(),
        TolPolicy::Empirical => {
            let n_leaves = table.n.max(2) as f64;
            let total = table.total_f64();
            let t = (n_leaves.ln() / total).sqrt();
            BigRational::from_float(t).ok_or(PatternError::BadTolerance)?
        }
    };
    if tol <= BigRational::zero() {
        return Err(PatternError::BadTolerance);
    }
    Ok(tol)
}

/// Sample moments of the empirical distribution (means and central moments,
/// exact). Pairwise entries are the sample covariances used for the pattern.
pub fn sample_moments(table: &CountTable) -> CentralMoments {
    lambda_to_central(&probs_to_lambda(&table.empirical()))
}

/// An edge is isolated when every leaf pair whose connecting path uses it
/// has |covariance| ≤ tol.
pub fn isolated_edges(
    tree: &RootedTree,
    moments: &CentralMoments,
    tol: &BigRational,
) -> Vec<bool> {
    let n = tree.n_leaves();
    let mut isolated = vec![true; tree.n_edges()];
    for i in 0..n {
        for j in (i + 1)..n {
            let mu = &moments.mu[(1 << i) | (1 << j)];
            if mu.abs() > *tol {
                let li = tree.leaves()[i];
                let lj = tree.leaves()[j];
                let path = tree
                    .path_edges(li, lj)
                    .expect("declared leaves always have a connecting path");
                for e in path.edges {
                    isolated[e] = false;
                }
            }
        }
    }
    isolated
}

/// One promotion step: an inner node kept exactly one non-isolated edge,
/// which is impossible for an exact covariance pattern, so that edge is
/// reclassified as isolated.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct PromotionEvent {
    pub node: String,
    pub edge: (String, String),
}

/// Connected component of the non-isolated edge set.
#[derive(Debug, Clone)]
pub struct SComponent {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
    /// Original leaves of the tree contained in this component.
    pub leaf_count: usize,
    /// Inner nodes of the tree with component-degree 2.
    pub l2: usize,
}

/// Connected component of the isolated edge set.
#[derive(Debug, Clone)]
pub struct TComponent {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
    /// Nodes of component-degree 1.
    pub leaf_nodes: Vec<NodeId>,
    /// Component node closest to the global root.
    pub root: NodeId,
    /// Component-degree of that node.
    pub root_degree: usize,
    /// True when every component-neighbor of the root has component-degree ≥ 2.
    pub root_neighbors_all_inner: bool,
    /// True when every component-neighbor of the root has component-degree 1.
    pub root_neighbors_all_leaves: bool,
}

/// The full structural classification of a covariance pattern on a tree.
#[derive(Debug, Clone)]
pub struct CovariancePattern {
    /// Post-promotion isolation flags, indexed by edge.
    pub isolated: Vec<bool>,
    pub promotions: Vec<PromotionEvent>,
    /// Inner nodes all of whose incident edges are isolated.
    pub degenerate_nodes: Vec<NodeId>,
    /// Inner-node counts by remaining degree: 0, 2 and 3.
    pub l1: usize,
    pub l2: usize,
    pub l3: usize,
    /// Leaves whose terminal edge is isolated.
    pub z: usize,
    pub s_components: Vec<SComponent>,
    pub t_components: Vec<TComponent>,
}

impl CovariancePattern {
    pub fn isolated_count(&self) -> usize {
        self.isolated.iter().filter(|&&b| b).count()
    }

    pub fn has_degenerate(&self) -> bool {
        !self.degenerate_nodes.is_empty()
    }
}

/// Classifies a pattern: runs the promotion fixpoint, counts node classes,
/// and splits the tree into components along the isolated/non-isolated
/// boundary. Panics on violated internal degree identities (those indicate
/// a bug, not bad input).
pub fn classify_pattern(tree: &RootedTree, initial_isolated: &[bool]) -> CovariancePattern {
    assert_eq!(initial_isolated.len(), tree.n_edges());
    let mut isolated = initial_isolated.to_vec();
    let mut promotions = Vec::new();

    // Remaining-degree bookkeeping over non-isolated edges.
    let degree = |isolated: &[bool], v: NodeId| -> usize {
        let mut d = 0;
        for e in 0..tree.n_edges() {
            if isolated[e] {
                continue;
            }
            let (p, c) = tree.edge(e);
            if p == v || c == v {
                d += 1;
            }
        }
        d
    };

    let mut queue: Vec<NodeId> = tree.inner_nodes().collect();
    while let Some(v) = queue.pop() {
        if tree.is_leaf(v) || degree(&isolated, v) != 1 {
            continue;
        }
        let e = (0..tree.n_edges())
            .find(|&e| {
                if isolated[e] {
                    return false;
                }
                let (p, c) = tree.edge(e);
                p == v || c == v
            })
            .unwrap();
        isolated[e] = true;
        let (p, c) = tree.edge(e);
        promotions.push(PromotionEvent {
            node: tree.name(v).to_string(),
            edge: (tree.name(p).to_string(), tree.name(c).to_string()),
        });
        // Both endpoints may now have degree 1; recheck them.
        queue.push(p);
        queue.push(c);
    }

    let mut degenerate_nodes = Vec::new();
    let (mut l1, mut l2, mut l3) = (0usize, 0usize, 0usize);
    let mut high_degree_sum = 0usize;
    for v in tree.inner_nodes() {
        match degree(&isolated, v) {
            0 => {
                degenerate_nodes.push(v);
                l1 += 1;
            }
            1 => unreachable!("promotion fixpoint left a degree-1 inner node"),
            2 => l2 += 1,
            3 => l3 += 1,
            // Degrees above 3 occur on non-trivalent trees; they enter the
            // handshake below but no closed-form count.
            d => high_degree_sum += d,
        }
    }
    let z = tree
        .leaves()
        .iter()
        .filter(|&&l| isolated[tree.terminal_edges()[tree.leaf_position(l).unwrap()]])
        .count();

    let kept: usize = isolated.iter().filter(|&&b| !b).count();
    // Degree handshake over the non-isolated subgraph.
    assert_eq!(
        (tree.n_leaves() - z) + 2 * l2 + 3 * l3 + high_degree_sum,
        2 * kept,
        "degree bookkeeping is inconsistent"
    );

    let s_components = edge_components(tree, &isolated, false)
        .into_iter()
        .map(|(nodes, edges)| {
            let leaf_count = nodes.iter().filter(|&&v| tree.is_leaf(v)).count();
            let l2 = nodes
                .iter()
                .filter(|&&v| !tree.is_leaf(v) && comp_degree(tree, &edges, v) == 2)
                .count();
            SComponent {
                nodes,
                edges,
                leaf_count,
                l2,
            }
        })
        .collect();

    let t_components = edge_components(tree, &isolated, true)
        .into_iter()
        .map(|(nodes, edges)| {
            let leaf_nodes: Vec<NodeId> = nodes
                .iter()
                .copied()
                .filter(|&v| comp_degree(tree, &edges, v) == 1)
                .collect();
            let root = *nodes
                .iter()
                .min_by_key(|&&v| tree.depth(v))
                .expect("components are nonempty");
            let root_degree = comp_degree(tree, &edges, root);
            let neighbor_degrees: Vec<usize> = edges
                .iter()
                .filter_map(|&e| {
                    let (p, c) = tree.edge(e);
                    if p == root {
                        Some(c)
                    } else if c == root {
                        Some(p)
                    } else {
                        None
                    }
                })
                .map(|w| comp_degree(tree, &edges, w))
                .collect();
            let root_neighbors_all_inner = neighbor_degrees.iter().all(|&d| d >= 2);
            let root_neighbors_all_leaves = neighbor_degrees.iter().all(|&d| d == 1);
            TComponent {
                nodes,
                edges,
                leaf_nodes,
                root,
                root_degree,
                root_neighbors_all_inner,
                root_neighbors_all_leaves,
            }
        })
        .collect();

    CovariancePattern {
        isolated,
        promotions,
        degenerate_nodes,
        l1,
        l2,
        l3,
        z,
        s_components,
        t_components,
    }
}

fn comp_degree(tree: &RootedTree, edges: &[EdgeId], v: NodeId) -> usize {
    edges
        .iter()
        .filter(|&&e| {
            let (p, c) = tree.edge(e);
            p == v || c == v
        })
        .count()
}

/// Connected components of the chosen edge class (isolated or not), as
/// (sorted nodes, sorted edges) pairs. Edge-free nodes appear in none.
fn edge_components(
    tree: &RootedTree,
    isolated: &[bool],
    take_isolated: bool,
) -> Vec<(Vec<NodeId>, Vec<EdgeId>)> {
    let mut uf: Vec<usize> = (0..tree.n_nodes()).collect();
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
    for e in 0..tree.n_edges() {
        if isolated[e] == take_isolated {
            let (p, c) = tree.edge(e);
            let rp = find(&mut uf, p);
            let rc = find(&mut uf, c);
            uf[rp] = rc;
        }
    }
    let mut groups: HashMap<usize, (Vec<NodeId>, Vec<EdgeId>)> = HashMap::new();
    for e in 0..tree.n_edges() {
        if isolated[e] == take_isolated {
            let (p, _) = tree.edge(e);
            let r = find(&mut uf, p);
            groups.entry(r).or_default().1.push(e);
        }
    }
    for v in 0..tree.n_nodes() {
        let r = find(&mut uf, v);
        if let Some(g) = groups.get_mut(&r) {
            g.0.push(v);
        }
    }
    let mut out: Vec<(Vec<NodeId>, Vec<EdgeId>)> = groups.into_values().collect();
    for (nodes, edges) in &mut out {
        nodes.sort_unstable();
        edges.sort_unstable();
    }
    // Deterministic order: by smallest node id.
    out.sort_by_key(|(nodes, _)| nodes[0]);
    out
}

/// Result of checking strict positivity and model membership of the
/// empirical distribution.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub strictly_positive: bool,
    /// Sup-norm gap between p̂ and the best EM fit found.
    pub residual: f64,
    pub fits_model: bool,
    /// Log-likelihood of the EM fit at the observed counts.
    pub em_loglik: f64,
    /// Log-likelihood of the empirical distribution itself (the maximum over
    /// all distributions, attained inside the model iff p̂ fits).
    pub empirical_loglik: f64,
}

impl FitReport {
    /// The maximized log-likelihood to report: empirical when the empirical
    /// distribution lies in the model, otherwise the best fit found.
    pub fn max_loglik(&self) -> f64 {
        if self.strictly_positive && self.fits_model {
            self.empirical_loglik
        } else {
            self.em_loglik
        }
    }
}

/// Checks positivity of p̂ and fits the model by EM (joint enumeration over
/// hidden node configurations, closed-form updates, restarts from fixed
/// seeds). Deterministic for a given seed.
pub fn check_positivity_and_fit(table: &CountTable, tree: &RootedTree, seed: u64) -> FitReport {
    use rand::{Rng, SeedableRng};

    let n = table.n;
    let full = 1usize << n;
    let strictly_positive = table.counts.iter().all(|c| c > &BigRational::zero());
    let counts: Vec<f64> = table
        .counts
        .iter()
        .map(|c| c.to_f64().unwrap())
        .collect();
    let total: f64 = counts.iter().sum();
    let p_hat: Vec<f64> = counts.iter().map(|c| c / total).collect();
    let empirical_loglik: f64 = counts
        .iter()
        .zip(&p_hat)
        .filter(|(c, _)| **c > 0.0)
        .map(|(c, p)| c * p.ln())
        .sum();

    let inner: Vec<NodeId> = tree.inner_nodes().collect();
    let n_inner = inner.len();
    let mut inner_pos = vec![usize::MAX; tree.n_nodes()];
    for (k, &v) in inner.iter().enumerate() {
        inner_pos[v] = k;
    }
    let mut leaf_pos = vec![usize::MAX; tree.n_nodes()];
    for (k, &l) in tree.leaves().iter().enumerate() {
        leaf_pos[l] = k;
    }
    let node_bit = |v: NodeId, alpha: usize, hidden: usize| -> usize {
        if leaf_pos[v] != usize::MAX {
            (alpha >> leaf_pos[v]) & 1
        } else {
            (hidden >> inner_pos[v]) & 1
        }
    };

    // θ layout: [root_p1, per-edge (p1|0, p1|1)].
    let dim = 1 + 2 * tree.n_edges();
    let loglik_and_update = |theta: &[f64]| -> (f64, Vec<f64>) {
        let mut ll = 0.0;
        let mut root1 = 0.0;
        let mut edge_stats = vec![[0.0f64; 4]; tree.n_edges()]; // [n00, n01, n10, n11]
        for alpha in 0..full {
            if counts[alpha] == 0.0 {
                continue;
            }
            // Joint weights over hidden configurations.
            let mut weights = Vec::with_capacity(1 << n_inner);
            let mut z = 0.0;
            for hidden in 0..(1usize << n_inner) {
                let rb = node_bit(tree.root(), alpha, hidden);
                let mut w = if rb == 1 { theta[0] } else { 1.0 - theta[0] };
                for e in 0..tree.n_edges() {
                    let (u, v) = tree.edge(e);
                    let ub = node_bit(u, alpha, hidden);
                    let vb = node_bit(v, alpha, hidden);
                    let p1 = theta[1 + 2 * e + ub];
                    w *= if vb == 1 { p1 } else { 1.0 - p1 };
                    if w == 0.0 {
                        break;
                    }
                }
                weights.push(w);
                z += w;
            }
            if z <= 0.0 {
                return (f64::NEG_INFINITY, theta.to_vec());
            }
            ll += counts[alpha] * z.ln();
            let scale = counts[alpha] / z;
            for (hidden, w) in weights.iter().enumerate() {
                if *w == 0.0 {
                    continue;
                }
                let ww = w * scale;
                if node_bit(tree.root(), alpha, hidden) == 1 {
                    root1 += ww;
                }
                for e in 0..tree.n_edges() {
                    let (u, v) = tree.edge(e);
                    let ub = node_bit(u, alpha, hidden);
                    let vb = node_bit(v, alpha, hidden);
                    edge_stats[e][2 * ub + vb] += ww;
                }
            }
        }
        let mut next = vec![0.0; dim];
        next[0] = (root1 / total).clamp(0.0, 1.0);
        for e in 0..tree.n_edges() {
            let [n00, n01, n10, n11] = edge_stats[e];
            next[1 + 2 * e] = if n00 + n01 > 0.0 { n01 / (n00 + n01) } else { 0.5 };
            next[1 + 2 * e + 1] = if n10 + n11 > 0.0 { n11 / (n10 + n11) } else { 0.5 };
        }
        (ll, next)
    };

    let model_sup_gap = |theta: &[f64]| -> f64 {
        let probs = crate::moments::model_probs_f64(theta, tree);
        probs
            .iter()
            .zip(&p_hat)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };

    let mut best_ll = f64::NEG_INFINITY;
    let mut best_theta = vec![0.5; dim];
    let mut best_gap = f64::INFINITY;
    for restart in 0..5u64 {
        // A near-exact fit cannot be improved on; skip further restarts.
        if best_gap < 1e-8 {
            break;
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(
            seed ^ (0x9e3779b97f4a7c15u64.wrapping_mul(restart + 1)),
        );
        let mut theta: Vec<f64> = if restart == 0 {
            vec![0.5; dim]
        } else {
            (0..dim).map(|_| rng.gen_range(0.05..0.95)).collect()
        };
        let mut last_ll = f64::NEG_INFINITY;
        for it in 0..2000 {
            let (ll, next) = loglik_and_update(&theta);
            theta = next;
            if !ll.is_finite() {
                break;
            }
            // EM improves slowly near a fit, so a stalled log-likelihood
            // or an already negligible sup-norm gap both end the run.
            if (ll - last_ll).abs() < 1e-13 * (1.0 + ll.abs()) {
                break;
            }
            last_ll = ll;
            if it % 16 == 15 && model_sup_gap(&theta) < 1e-8 {
                break;
            }
        }
        let (ll, _) = loglik_and_update(&theta);
        if ll > best_ll {
            best_ll = ll;
            best_theta = theta;
            best_gap = model_sup_gap(&best_theta);
        }
    }

    let residual = model_sup_gap(&best_theta);
    FitReport {
        strictly_positive,
        residual,
        fits_model: residual <= MODEL_FIT_TOL,
        em_loglik: best_ll,
        empirical_loglik,
    }
}

/// Exact fiber data: counts = N · p_θ(α), so the empirical distribution is
/// exactly the model distribution at θ.
pub fn make_fiber_data(theta: &ThetaPoint, tree: &RootedTree, total: &BigRational) -> CountTable {
    let p = crate::moments::model_probs(theta, tree);
    let counts: Vec<BigRational> = p.p.iter().map(|x| x * total).collect();
    CountTable::new(tree.n_leaves(), counts).expect("model probabilities sum to the total")
}
