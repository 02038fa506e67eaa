//! Newton-polyhedron RLCT calculator for monomial ideals, and the polytope
//! constructions that re-derive the closed-form learning coefficients from
//! the pair-cumulant monomial system of a trivalent tree.
//!
//! For a finite exponent set A ⊂ ℚ₊^d (each a ∈ A is half the exponent
//! vector of a squared monomial) and a nonnegative prior exponent vector h,
//! the real log canonical threshold of Σ_{a∈A} x^{2a} against the measure
//! |x^h| dx is controlled by the Newton region Γ₊ = conv(A) + ℝ₊^d:
//!
//! * threshold = 1/t* where t* = min { t : t·(𝟙+h) ∈ Γ₊ },
//! * multiplicity = d − dim F, where F is the minimal face of Γ₊
//!   containing the hit point t*·(𝟙+h).
//!
//! Both are computed exactly: t* by rational LP, dim F as the dimension of
//! the lineality space of the tangent cone of Γ₊ at the hit point.

use crate::hull;
use crate::lp::{feasible_point, solve_min, LpOutcome};
use crate::score::RlctPair;
use crate::tree::{EdgeId, NodeId, RootedTree, TreeError};
use crate::{ratio, BigRational};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::collections::VecDeque;
use thiserror::Error;

/// Dimension cap for the face-wise nondegeneracy guard. The certificate is
/// uniform over faces, but callers feeding systems wider than this are
/// almost certainly misusing the monomial route, so the guard refuses them.
pub const PRINCIPAL_PART_DIM_CAP: usize = 14;

#[derive(Debug, Error)]
pub enum NewtonError {
    #[error("exponent set must contain at least one point in dimension >= 1")]
    EmptySet,
    #[error("exponent point {index} has {got} coordinates, expected {want}")]
    BadDimension {
        index: usize,
        got: usize,
        want: usize,
    },
    #[error("exponent point {index} has a negative coordinate")]
    NegativeCoordinate { index: usize },
    #[error("prior exponent vector must list one nonnegative entry per coordinate")]
    BadPrior,
    #[error("dimension {dim} exceeds the nondegeneracy-guard cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("degeneracy vector has {got} entries, tree has {want} nodes")]
    BadDeltaLength { got: usize, want: usize },
    #[error("degeneracy vector must assign 0 to every leaf")]
    DegenerateLeaf { node: NodeId },
    #[error("this construction needs a trivalent tree")]
    NotTrivalent,
    #[error("this construction needs at least {need} leaves, tree has {got}")]
    TooFewLeaves { got: usize, need: usize },
    #[error("three-leaf trees take the dedicated special-case score, not this route")]
    ThreeLeafExcluded,
    #[error("tree: {0}")]
    Tree(#[from] TreeError),
}

/// A finite set of exponent vectors in ℚ₊^d plus an optional prior exponent
/// vector h ≥ 0 (the measure weight |x^h| dx).
#[derive(Debug, Clone)]
pub struct ExponentSet {
    dim: usize,
    points: Vec<Vec<BigRational>>,
    prior: Option<Vec<BigRational>>,
}

impl ExponentSet {
    pub fn new(dim: usize, points: Vec<Vec<BigRational>>) -> Result<Self, NewtonError> {
        if dim == 0 || points.is_empty() {
            return Err(NewtonError::EmptySet);
        }
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(NewtonError::BadDimension {
                    index,
                    got: p.len(),
                    want: dim,
                });
            }
            if p.iter().any(|x| x.is_negative()) {
                return Err(NewtonError::NegativeCoordinate { index });
            }
        }
        Ok(ExponentSet {
            dim,
            points,
            prior: None,
        })
    }

    pub fn with_prior(mut self, h: Vec<BigRational>) -> Result<Self, NewtonError> {
        if h.len() != self.dim || h.iter().any(|x| x.is_negative()) {
            return Err(NewtonError::BadPrior);
        }
        self.prior = Some(h);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<BigRational>] {
        &self.points
    }

    /// Per-coordinate target weights 1 + h_j.
    fn weights(&self) -> Vec<BigRational> {
        let one = BigRational::one();
        match &self.prior {
            Some(h) => h.iter().map(|hj| &one + hj).collect(),
            None => vec![one; self.dim],
        }
    }
}

/// Result of a threshold computation. A monomial among the generators that
/// is identically 1 (the zero exponent vector) makes the ideal trivial: the
/// zeta integrand has no pole, reported with the convention
/// (threshold, multiplicity) = (∞, d).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RlctOutcome {
    Pole(RlctPair),
    NoPole { dim: usize },
}

impl RlctOutcome {
    pub fn pair(&self) -> Option<&RlctPair> {
        match self {
            RlctOutcome::Pole(p) => Some(p),
            RlctOutcome::NoPole { .. } => None,
        }
    }
}

/// Exact threshold and multiplicity of the monomial-ideal zeta function for
/// an exponent set, against the prior weight stored in it.
pub fn monomial_rlct(e: &ExponentSet) -> Result<RlctOutcome, NewtonError> {
    let d = e.dim;
    let m = e.points.len();
    if e.points.iter().any(|p| p.iter().all(|x| x.is_zero())) {
        return Ok(RlctOutcome::NoPole { dim: d });
    }
    let w = e.weights();

    // Phase 1: t* = min t such that t·w lies in conv(points) + ℝ₊^d.
    // Variables: [λ_0..λ_{m−1}, t, s_0..s_{d−1}], all ≥ 0.
    //   Σ_a λ_a = 1
    //   Σ_a λ_a a_j − w_j t + s_j = 0   for each coordinate j
    let vars = m + 1 + d;
    let mut rows: Vec<Vec<BigRational>> = Vec::with_capacity(d + 1);
    let mut rhs: Vec<BigRational> = Vec::with_capacity(d + 1);
    let mut row0 = vec![BigRational::zero(); vars];
    for cell in row0.iter_mut().take(m) {
        *cell = BigRational::one();
    }
    rows.push(row0);
    rhs.push(BigRational::one());
    for j in 0..d {
        let mut row = vec![BigRational::zero(); vars];
        for (a, p) in e.points.iter().enumerate() {
            row[a] = p[j].clone();
        }
        row[m] = -w[j].clone();
        row[m + 1 + j] = BigRational::one();
        rows.push(row);
        rhs.push(BigRational::zero());
    }
    let mut cost = vec![BigRational::zero(); vars];
    cost[m] = BigRational::one();
    let t_star = match solve_min(&rows, &rhs, &cost) {
        LpOutcome::Optimal { value, .. } => value,
        // Any λ on the simplex is feasible with t large enough, and t ≥ 0
        // bounds the objective below.
        other => unreachable!("threshold program is feasible and bounded, got {other:?}"),
    };
    if t_star.is_zero() {
        return Ok(RlctOutcome::NoPole { dim: d });
    }
    let threshold = BigRational::one() / &t_star;

    // Phase 2: multiplicity. The tangent cone of Γ₊ at z = t*·w is generated
    // by G = {a − z : a ∈ points} ∪ {unit vectors}; the minimal face of Γ₊
    // through z has dimension equal to the lineality space of that cone,
    // which is spanned by the generators whose negation stays in the cone.
    let z: Vec<BigRational> = w.iter().map(|wj| wj * &t_star).collect();
    let mut gens: Vec<Vec<BigRational>> = e
        .points
        .iter()
        .map(|p| p.iter().zip(&z).map(|(a, b)| a - b).collect())
        .collect();
    for j in 0..d {
        let mut unit = vec![BigRational::zero(); d];
        unit[j] = BigRational::one();
        gens.push(unit);
    }
    let cols = gens.len();
    let cone_rows: Vec<Vec<BigRational>> = (0..d)
        .map(|j| gens.iter().map(|g| g[j].clone()).collect())
        .collect();
    let mut lineal: Vec<Vec<BigRational>> = Vec::new();
    for g in &gens {
        let target: Vec<BigRational> = g.iter().map(|x| -x).collect();
        debug_assert_eq!(cone_rows.len(), d);
        debug_assert!(cone_rows.iter().all(|r| r.len() == cols));
        if feasible_point(&cone_rows, &target).is_some() {
            lineal.push(g.clone());
        }
    }
    let mult = d - hull::rank(&lineal);
    assert!(mult >= 1, "a finite threshold pins the hit point to a proper face");
    Ok(RlctOutcome::Pole(RlctPair::new(threshold, mult as u64)))
}

/// True iff t·(𝟙+h) lies in the Newton region of the exponent set. Used to
/// re-certify LP optimality: feasible at t*, infeasible just below.
pub fn threshold_feasible(e: &ExponentSet, t: &BigRational) -> bool {
    let d = e.dim;
    let m = e.points.len();
    let w = e.weights();
    let vars = m + d;
    let mut rows = Vec::with_capacity(d + 1);
    let mut rhs = Vec::with_capacity(d + 1);
    let mut row0 = vec![BigRational::zero(); vars];
    for cell in row0.iter_mut().take(m) {
        *cell = BigRational::one();
    }
    rows.push(row0);
    rhs.push(BigRational::one());
    for j in 0..d {
        let mut row = vec![BigRational::zero(); vars];
        for (a, p) in e.points.iter().enumerate() {
            row[a] = p[j].clone();
        }
        row[m + j] = BigRational::one();
        rows.push(row);
        rhs.push(t * &w[j]);
    }
    feasible_point(&rows, &rhs).is_some()
}

/// Node degeneracy assignment δ: 1 on a subset of inner nodes, 0 on leaves.
#[derive(Debug, Clone)]
pub struct Degeneracy {
    delta: Vec<bool>,
}

impl Degeneracy {
    pub fn new(tree: &RootedTree, delta: Vec<bool>) -> Result<Self, NewtonError> {
        if delta.len() != tree.n_nodes() {
            return Err(NewtonError::BadDeltaLength {
                got: delta.len(),
                want: tree.n_nodes(),
            });
        }
        for &leaf in tree.leaves() {
            if delta[leaf] {
                return Err(NewtonError::DegenerateLeaf { node: leaf });
            }
        }
        Ok(Degeneracy { delta })
    }

    /// δ = 1 on every inner node.
    pub fn all_inner(tree: &RootedTree) -> Self {
        let mut delta = vec![false; tree.n_nodes()];
        for v in tree.inner_nodes() {
            delta[v] = true;
        }
        Degeneracy { delta }
    }

    /// δ = 0 everywhere.
    pub fn none(tree: &RootedTree) -> Self {
        Degeneracy {
            delta: vec![false; tree.n_nodes()],
        }
    }

    pub fn get(&self, v: NodeId) -> bool {
        self.delta[v]
    }

    /// Nodes with δ = 1 in ascending id order; this is the coordinate order
    /// of the y block.
    pub fn active_nodes(&self) -> Vec<NodeId> {
        (0..self.delta.len()).filter(|&v| self.delta[v]).collect()
    }

    pub fn count(&self) -> usize {
        self.delta.iter().filter(|&&b| b).count()
    }
}

/// The monomial system Q_δ of a tree: one squared monomial per leaf pair
/// (i, j), with exponent 2 on y_{r(ij)} when δ is 1 at the pair's meet
/// r(ij), and exponent 2 on x_e for every edge e of the connecting path.
///
/// Coordinates: first the y block (one per δ = 1 node, ascending node id),
/// then the x block (one per edge, input order).
#[derive(Debug, Clone)]
pub struct QDeltaSystem {
    pub exponents: ExponentSet,
    pub y_nodes: Vec<NodeId>,
    /// Leaf-position pair of each exponent point, lexicographic order.
    pub pairs: Vec<(usize, usize)>,
}

fn monomial_point(
    y_nodes: &[NodeId],
    n_edges: usize,
    delta: &Degeneracy,
    meet: NodeId,
    edges: &[EdgeId],
) -> Vec<BigRational> {
    let mut pt = vec![BigRational::zero(); y_nodes.len() + n_edges];
    if delta.get(meet) {
        let k = y_nodes
            .iter()
            .position(|&w| w == meet)
            .expect("every active node is listed in the y block");
        pt[k] = ratio(2, 1);
    }
    for &e in edges {
        pt[y_nodes.len() + e] = ratio(2, 1);
    }
    pt
}

pub fn build_q_delta(tree: &RootedTree, delta: &Degeneracy) -> Result<QDeltaSystem, NewtonError> {
    let n = tree.n_leaves();
    if n < 2 {
        return Err(NewtonError::TooFewLeaves { got: n, need: 2 });
    }
    let y_nodes = delta.active_nodes();
    let leaves = tree.leaves();
    let mut points = Vec::new();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let path = tree
                .path_edges(leaves[i], leaves[j])
                .expect("distinct leaves are joined by a path");
            let meet = tree.lca(leaves[i], leaves[j]);
            points.push(monomial_point(&y_nodes, tree.n_edges(), delta, meet, &path.edges));
            pairs.push((i, j));
        }
    }
    Ok(QDeltaSystem {
        exponents: ExponentSet::new(y_nodes.len() + tree.n_edges(), points)?,
        y_nodes,
        pairs,
    })
}

/// Threshold and multiplicity of the pair-cumulant monomial system of a
/// trivalent tree under degeneracy δ. Three-leaf trees are excluded: their
/// score takes a dedicated correction and is not certified via this route.
pub fn verify_score_via_newton(
    tree: &RootedTree,
    delta: &Degeneracy,
) -> Result<RlctPair, NewtonError> {
    if tree.n_leaves() == 3 {
        return Err(NewtonError::ThreeLeafExcluded);
    }
    if !tree.is_trivalent() {
        return Err(NewtonError::NotTrivalent);
    }
    let q = build_q_delta(tree, delta)?;
    match monomial_rlct(&q.exponents)? {
        RlctOutcome::Pole(p) => Ok(p),
        RlctOutcome::NoPole { .. } => unreachable!("pair monomials are never constant"),
    }
}

/// A leaf-to-leaf path with its meet node recorded.
#[derive(Debug, Clone)]
pub struct NetPath {
    pub meet: NodeId,
    pub endpoints: (NodeId, NodeId),
    pub edges: Vec<EdgeId>,
}

/// A multiset of leaf-pair paths whose monomial points average to a
/// certificate barycenter q with q ≤ (4/n)·𝟙 coordinatewise. Together with
/// the valid inequality Σ_{terminal e} x_e ≥ 4 this pins the threshold of
/// Q_δ to exactly n/4.
#[derive(Debug, Clone)]
pub struct PathNetwork {
    pub paths: Vec<NetPath>,
    pub y_nodes: Vec<NodeId>,
    /// Mean of the path monomial points, in Q_δ coordinates.
    pub barycenter: Vec<BigRational>,
}

fn sorted_children(tree: &RootedTree, v: NodeId) -> Vec<NodeId> {
    let mut c = tree.children(v).to_vec();
    c.sort_unstable();
    c
}

fn pair_path(tree: &RootedTree, u: NodeId, v: NodeId) -> NetPath {
    let path = tree.path_edges(u, v).expect("distinct nodes in one tree");
    NetPath {
        meet: tree.lca(u, v),
        endpoints: (u, v),
        edges: path.edges,
    }
}

pub fn build_path_network(
    tree: &RootedTree,
    delta: &Degeneracy,
) -> Result<PathNetwork, NewtonError> {
    let n = tree.n_leaves();
    if !tree.is_trivalent() {
        return Err(NewtonError::NotTrivalent);
    }
    if n < 4 {
        return Err(NewtonError::TooFewLeaves { got: n, need: 4 });
    }
    let root = tree.root();
    let root_active = delta.get(root);

    // Anchor pair (a, b): a core inner edge. With δ = 1 at the root the
    // recursion starts from two cherries hanging off the root and its
    // first inner child, and the core edge (a, b) itself stays uncovered.
    // With δ = 0 at the root it starts from all six pairs of the four
    // nodes around (a, b), cherry pairs doubled, and covers every edge
    // exactly four times. Anchoring at the root keeps every path meet at
    // a node that either carries its own y coordinate or needs none.
    let a = if tree.is_leaf(root) {
        tree.children(root)[0]
    } else {
        root
    };
    let b = *sorted_children(tree, a)
        .iter()
        .find(|&&c| !tree.is_leaf(c))
        .expect("a trivalent tree with at least four leaves has an inner child at the anchor");

    let mut around_a: Vec<NodeId> = sorted_children(tree, a)
        .into_iter()
        .filter(|&c| c != b)
        .collect();
    if let Some(p) = tree.parent(a) {
        around_a.push(p);
    }
    around_a.sort_unstable();
    let around_b = sorted_children(tree, b);
    debug_assert_eq!((around_a.len(), around_b.len()), (2, 2));

    let mut paths: Vec<NetPath> = Vec::new();
    let copies = if root_active { 1 } else { 2 };
    if root_active {
        // Root must be inner to carry δ = 1, and a = root.
        for _ in 0..2 {
            paths.push(pair_path(tree, around_a[0], around_a[1]));
        }
        for _ in 0..2 {
            paths.push(pair_path(tree, around_b[0], around_b[1]));
        }
    } else {
        for _ in 0..2 {
            paths.push(pair_path(tree, around_a[0], around_a[1]));
        }
        for _ in 0..2 {
            paths.push(pair_path(tree, around_b[0], around_b[1]));
        }
        for &u in &around_a {
            for &w in &around_b {
                paths.push(pair_path(tree, u, w));
            }
        }
    }

    let mut frontier: VecDeque<NodeId> = around_a
        .iter()
        .chain(&around_b)
        .copied()
        .filter(|&v| !tree.is_leaf(v))
        .collect();

    while let Some(v) = frontier.pop_front() {
        let kids = sorted_children(tree, v);
        debug_assert_eq!(kids.len(), 2, "frontier nodes are non-anchor inner nodes");
        let down = [
            tree.parent_edge(kids[0]).expect("child edge exists"),
            tree.parent_edge(kids[1]).expect("child edge exists"),
        ];
        let incident: Vec<usize> = paths
            .iter()
            .enumerate()
            .filter(|(_, p)| p.endpoints.0 == v || p.endpoints.1 == v)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(
            incident.len(),
            2 * copies,
            "each frontier node terminates exactly the paths its cherry created"
        );
        for (k, &pi) in incident.iter().enumerate() {
            let side = k / copies;
            let p = &mut paths[pi];
            if p.endpoints.0 == v {
                p.endpoints.0 = kids[side];
            } else {
                p.endpoints.1 = kids[side];
            }
            p.edges.push(down[side]);
        }
        for _ in 0..copies {
            paths.push(NetPath {
                meet: v,
                endpoints: (kids[0], kids[1]),
                edges: vec![down[0], down[1]],
            });
        }
        frontier.extend(kids.into_iter().filter(|&c| !tree.is_leaf(c)));
    }

    assert_eq!(paths.len(), if root_active { n } else { 2 * n });

    // Every finished path must be a genuine leaf-pair path with its meet
    // recorded correctly; this also certifies that the barycenter is a
    // convex combination of Q_δ points.
    let mut coverage = vec![0usize; tree.n_edges()];
    for p in &mut paths {
        assert!(tree.is_leaf(p.endpoints.0) && tree.is_leaf(p.endpoints.1));
        p.edges.sort_unstable();
        let reference = tree
            .path_edges(p.endpoints.0, p.endpoints.1)
            .expect("distinct leaves");
        assert_eq!(p.edges, reference.edges, "grown paths stay simple");
        assert_eq!(p.meet, tree.lca(p.endpoints.0, p.endpoints.1));
        for &e in &p.edges {
            coverage[e] += 1;
        }
    }
    let core_edge = tree.parent_edge(b).expect("b hangs below a");
    for e in 0..tree.n_edges() {
        let expect = if root_active {
            if e == core_edge {
                0
            } else {
                2
            }
        } else {
            4
        };
        assert_eq!(coverage[e], expect, "uniform edge coverage up to the core edge");
    }

    let y_nodes = delta.active_nodes();
    let d = y_nodes.len() + tree.n_edges();
    let mut sum = vec![BigRational::zero(); d];
    for p in &paths {
        let pt = monomial_point(&y_nodes, tree.n_edges(), delta, p.meet, &p.edges);
        for (acc, x) in sum.iter_mut().zip(pt) {
            *acc += x;
        }
    }
    let count = ratio(paths.len() as i64, 1);
    let barycenter: Vec<BigRational> = sum.into_iter().map(|s| s / &count).collect();

    // Closed form of the barycenter, asserted coordinate by coordinate.
    let four_over_n = ratio(4, n as i64);
    let two_over_n = ratio(2, n as i64);
    for (k, &v) in y_nodes.iter().enumerate() {
        let expect = if root_active && (v == a || v == b) {
            four_over_n.clone()
        } else {
            two_over_n.clone()
        };
        assert_eq!(barycenter[k], expect);
    }
    for e in 0..tree.n_edges() {
        let expect = if root_active && e == core_edge {
            BigRational::zero()
        } else {
            four_over_n.clone()
        };
        assert_eq!(barycenter[y_nodes.len() + e], expect);
    }

    Ok(PathNetwork {
        paths,
        y_nodes,
        barycenter,
    })
}

/// Structural facts checked for one point in Q_δ coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QPointStructure {
    /// Σ over terminal edges of x_e equals 4.
    pub terminal_sum: bool,
    /// Every y coordinate is the linear image of the x block:
    /// 2·y_v = Σ_{child edges of v} x − x_{parent edge of v}.
    pub linear_map: bool,
    /// The doubled pair-edge-polytope inequalities hold: for each inner
    /// node, each incident edge's x is at most the sum of the other two.
    pub halfspaces: bool,
}

impl QPointStructure {
    pub fn all(&self) -> bool {
        self.terminal_sum && self.linear_map && self.halfspaces
    }
}

fn incident_edges(tree: &RootedTree, v: NodeId) -> Vec<EdgeId> {
    let mut es: Vec<EdgeId> = tree
        .children(v)
        .iter()
        .map(|&c| tree.parent_edge(c).expect("child edge exists"))
        .collect();
    if let Some(e) = tree.parent_edge(v) {
        es.push(e);
    }
    es.sort_unstable();
    es
}

/// Checks one point (y block then x block) against the linear structure of
/// the Q_δ polytope.
pub fn q_point_structure(
    tree: &RootedTree,
    delta: &Degeneracy,
    point: &[BigRational],
) -> Result<QPointStructure, NewtonError> {
    let y_nodes = delta.active_nodes();
    let d = y_nodes.len() + tree.n_edges();
    if point.len() != d {
        return Err(NewtonError::BadDimension {
            index: 0,
            got: point.len(),
            want: d,
        });
    }
    let x = |e: EdgeId| -> &BigRational { &point[y_nodes.len() + e] };

    let mut terminal_sum = BigRational::zero();
    for e in tree.terminal_edges() {
        terminal_sum += x(e);
    }
    let terminal_ok = terminal_sum == ratio(4, 1);

    let mut map_ok = true;
    for (k, &v) in y_nodes.iter().enumerate() {
        let mut rhs = BigRational::zero();
        for &c in tree.children(v) {
            rhs += x(tree.parent_edge(c).expect("child edge exists"));
        }
        if let Some(up) = tree.parent_edge(v) {
            rhs -= x(up);
        }
        if ratio(2, 1) * &point[k] != rhs {
            map_ok = false;
        }
    }

    let mut half_ok = true;
    for v in tree.inner_nodes() {
        let es = incident_edges(tree, v);
        if es.len() != 3 {
            return Err(NewtonError::NotTrivalent);
        }
        for i in 0..3 {
            let others: BigRational = (0..3).filter(|&j| j != i).map(|j| x(es[j]).clone()).sum();
            if &others < x(es[i]) {
                half_ok = false;
            }
        }
    }

    Ok(QPointStructure {
        terminal_sum: terminal_ok,
        linear_map: map_ok,
        halfspaces: half_ok,
    })
}

/// Aggregate structure report over all Q_δ points, plus the path-network
/// barycenter when the tree is large enough to build one.
#[derive(Debug, Clone, Copy)]
pub struct GammaStructureReport {
    pub points_checked: usize,
    pub terminal_sum_ok: bool,
    pub linear_map_ok: bool,
    pub halfspaces_ok: bool,
    /// Barycenter satisfies the same structure and is ≤ (4/n)·𝟙. True
    /// vacuously for three-leaf trees, which have no path network.
    pub barycenter_ok: bool,
}

impl GammaStructureReport {
    pub fn all_ok(&self) -> bool {
        self.terminal_sum_ok && self.linear_map_ok && self.halfspaces_ok && self.barycenter_ok
    }
}

pub fn gamma_q_structure_check(
    tree: &RootedTree,
    delta: &Degeneracy,
) -> Result<GammaStructureReport, NewtonError> {
    if !tree.is_trivalent() {
        return Err(NewtonError::NotTrivalent);
    }
    let n = tree.n_leaves();
    if n < 3 {
        return Err(NewtonError::TooFewLeaves { got: n, need: 3 });
    }
    let q = build_q_delta(tree, delta)?;
    let mut report = GammaStructureReport {
        points_checked: 0,
        terminal_sum_ok: true,
        linear_map_ok: true,
        halfspaces_ok: true,
        barycenter_ok: true,
    };
    for pt in q.exponents.points() {
        let s = q_point_structure(tree, delta, pt)?;
        report.points_checked += 1;
        report.terminal_sum_ok &= s.terminal_sum;
        report.linear_map_ok &= s.linear_map;
        report.halfspaces_ok &= s.halfspaces;
    }
    if n >= 4 {
        let net = build_path_network(tree, delta)?;
        let s = q_point_structure(tree, delta, &net.barycenter)?;
        let bound = ratio(4, n as i64);
        let bounded = net.barycenter.iter().all(|v| v <= &bound);
        // The barycenter sits on the scaled polytope, not the point lattice:
        // its terminal sum is 4·(paths touching two terminal edges)/|paths|,
        // which equals 4 for both variants, so the same check applies.
        report.barycenter_ok = s.all() && bounded;
    }
    Ok(report)
}

/// Report on the pair-edge incidence polytope of a trivalent tree: the
/// convex hull of the edge indicator vectors of all leaf-pair paths.
#[derive(Debug, Clone)]
pub struct PairEdgeReport {
    pub ambient_dim: usize,
    pub affine_dim: usize,
    pub expected_dim: usize,
    /// Every vertex satisfies Σ over terminal edges of x_e = 2.
    pub on_equation: bool,
    pub claimed_count: usize,
    pub claims_valid: bool,
    pub claims_supporting: bool,
    /// Brute-force facet count (small trees only).
    pub hull_facets: Option<usize>,
    pub hull_matches_claims: Option<bool>,
}

impl PairEdgeReport {
    pub fn all_ok(&self) -> bool {
        self.affine_dim == self.expected_dim
            && self.on_equation
            && self.claims_valid
            && self.claims_supporting
            && self.hull_matches_claims.unwrap_or(true)
    }
}

/// Vertices and facet verification of the pair-edge polytope. The claimed
/// facet list is: for every inner node and each of its three incident
/// edges, x on that edge is at most the sum of x on the other two. Hull
/// facets are enumerated brute force for trees with at most 5 leaves.
pub fn pair_edge_polytope(
    tree: &RootedTree,
) -> Result<(Vec<Vec<BigRational>>, PairEdgeReport), NewtonError> {
    if !tree.is_trivalent() {
        return Err(NewtonError::NotTrivalent);
    }
    let n = tree.n_leaves();
    if n < 3 {
        return Err(NewtonError::TooFewLeaves { got: n, need: 3 });
    }
    let leaves = tree.leaves();
    let n_edges = tree.n_edges();
    let mut vertices: Vec<Vec<BigRational>> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let path = tree
                .path_edges(leaves[i], leaves[j])
                .expect("distinct leaves");
            let mut v = vec![BigRational::zero(); n_edges];
            for &e in &path.edges {
                v[e] = BigRational::one();
            }
            vertices.push(v);
        }
    }

    let terminal = tree.terminal_edges();
    let two = ratio(2, 1);
    let on_equation = vertices.iter().all(|v| {
        let s: BigRational = terminal.iter().map(|&e| v[e].clone()).sum();
        s == two
    });

    let chart = hull::AffineChart::build(&vertices);
    let affine_dim = chart.dim();
    let coords: Vec<Vec<BigRational>> = vertices
        .iter()
        .map(|v| chart.coords(v).expect("vertices span their own hull"))
        .collect();

    // Claimed facet inequalities in ambient coordinates.
    let mut claimed: Vec<(Vec<BigRational>, BigRational)> = Vec::new();
    for v in tree.inner_nodes() {
        let es = incident_edges(tree, v);
        debug_assert_eq!(es.len(), 3);
        for i in 0..3 {
            let mut a = vec![BigRational::zero(); n_edges];
            for j in 0..3 {
                a[es[j]] = if j == i {
                    -BigRational::one()
                } else {
                    BigRational::one()
                };
            }
            claimed.push((a, BigRational::zero()));
        }
    }

    let mut claims_valid = true;
    let mut claims_supporting = true;
    let mut claimed_facets: Vec<hull::Facet> = Vec::new();
    for (a, c) in &claimed {
        let values: Vec<BigRational> = vertices
            .iter()
            .map(|v| a.iter().zip(v).map(|(ai, vi)| ai * vi).sum())
            .collect();
        if values.iter().any(|val| val < c) {
            claims_valid = false;
        }
        let tight: Vec<Vec<BigRational>> = coords
            .iter()
            .zip(&values)
            .filter(|(_, val)| *val == c)
            .map(|(p, _)| p.clone())
            .collect();
        let supporting = !tight.is_empty() && {
            let diffs: Vec<Vec<BigRational>> = tight[1..]
                .iter()
                .map(|p| p.iter().zip(&tight[0]).map(|(x, y)| x - y).collect())
                .collect();
            hull::rank(&diffs) + 1 == affine_dim
        };
        if !supporting {
            claims_supporting = false;
        }
        let (na, nc) = chart.inequality(a, c);
        let f = hull::canonical_facet(&na, &nc);
        if !claimed_facets.contains(&f) {
            claimed_facets.push(f);
        }
    }

    let (hull_facets, hull_matches_claims) = if n <= 5 {
        let facets = hull::facets_brute(&coords);
        claimed_facets.sort();
        let matches = facets == claimed_facets;
        (Some(facets.len()), Some(matches))
    } else {
        (None, None)
    };

    let report = PairEdgeReport {
        ambient_dim: n_edges,
        affine_dim,
        expected_dim: 2 * n - 4,
        on_equation,
        claimed_count: claimed.len(),
        claims_valid,
        claims_supporting,
        hull_facets,
        hull_matches_claims,
    };
    Ok((vertices, report))
}

/// Face-wise nondegeneracy guard for a squared-monomial system. Every
/// generator of such a system is the square of a monomial, so the
/// restriction of the sum to any face of the Newton polyhedron is strictly
/// positive wherever all coordinates are nonzero; its gradient system has
/// no zeros on that set. The guard certifies exactly that shape: every
/// exponent coordinate must be an even nonnegative integer.
pub fn principal_part_nondegenerate(e: &ExponentSet) -> Result<bool, NewtonError> {
    if e.dim > PRINCIPAL_PART_DIM_CAP {
        return Err(NewtonError::DimensionCap {
            dim: e.dim,
            cap: PRINCIPAL_PART_DIM_CAP,
        });
    }
    Ok(e.points.iter().all(|p| {
        p.iter()
            .all(|x| x.is_integer() && x.numer().is_even() && !x.is_negative())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::classify_pattern;
    use crate::score::score_pattern;

    fn pts(raw: &[&[i64]]) -> Vec<Vec<BigRational>> {
        raw.iter().map(|r| r.iter().map(|&x| ratio(x, 1)).collect()).collect()
    }

    fn pair(outcome: RlctOutcome) -> RlctPair {
        match outcome {
            RlctOutcome::Pole(p) => p,
            RlctOutcome::NoPole { .. } => panic!("expected a pole"),
        }
    }

    fn quartet() -> RootedTree {
        RootedTree::parse(
            r#"{"root":"a","leaves":["1","2","3","4"],
                "edges":[["a","1"],["a","2"],["a","b"],["b","3"],["b","4"]]}"#,
        )
        .unwrap()
    }

    fn quartet_leaf_rooted() -> RootedTree {
        RootedTree::parse(
            r#"{"root":"1","leaves":["1","2","3","4"],
                "edges":[["1","a"],["a","2"],["a","b"],["b","3"],["b","4"]]}"#,
        )
        .unwrap()
    }

    fn snowflake() -> RootedTree {
        RootedTree::parse(
            r#"{"root":"c","leaves":["1","2","3","4","5","6"],
                "edges":[["c","x"],["c","y"],["c","z"],
                         ["x","1"],["x","2"],["y","3"],["y","4"],["z","5"],["z","6"]]}"#,
        )
        .unwrap()
    }

    fn caterpillar5() -> RootedTree {
        RootedTree::parse(
            r#"{"root":"a","leaves":["1","2","3","4","5"],
                "edges":[["a","1"],["a","2"],["a","b"],["b","3"],["b","c"],["c","4"],["c","5"]]}"#,
        )
        .unwrap()
    }

    fn star3() -> RootedTree {
        RootedTree::parse(
            r#"{"root":"h","leaves":["1","2","3"],
                "edges":[["h","1"],["h","2"],["h","3"]]}"#,
        )
        .unwrap()
    }

    fn delta_at(tree: &RootedTree, names: &[&str]) -> Degeneracy {
        let mut delta = vec![false; tree.n_nodes()];
        for name in names {
            delta[tree.node_by_name(name).unwrap()] = true;
        }
        Degeneracy::new(tree, delta).unwrap()
    }

    #[test]
    fn sum_of_three_squares() {
        let e = ExponentSet::new(3, pts(&[&[2, 0, 0], &[0, 2, 0], &[0, 0, 2]])).unwrap();
        let p = pair(monomial_rlct(&e).unwrap());
        assert_eq!(p.threshold, ratio(3, 2));
        assert_eq!(p.multiplicity, 1);
    }

    #[test]
    fn three_star_pair_system() {
        let e = ExponentSet::new(3, pts(&[&[2, 2, 0], &[2, 0, 2], &[0, 2, 2]])).unwrap();
        let p = pair(monomial_rlct(&e).unwrap());
        assert_eq!(p.threshold, ratio(3, 4));
        assert_eq!(p.multiplicity, 1);
    }

    #[test]
    fn single_monomials_with_priors() {
        // One variable, u = 1, prior h: threshold (1+h)/2.
        let e = ExponentSet::new(1, pts(&[&[2]]))
            .unwrap()
            .with_prior(vec![ratio(3, 1)])
            .unwrap();
        let p = pair(monomial_rlct(&e).unwrap());
        assert_eq!(p.threshold, ratio(2, 1));
        assert_eq!(p.multiplicity, 1);

        // Three variables, the per-coordinate minimum decides, ties add up.
        let e = ExponentSet::new(3, pts(&[&[2, 2, 4]]))
            .unwrap()
            .with_prior(vec![ratio(1, 1), ratio(1, 1), ratio(3, 1)])
            .unwrap();
        let p = pair(monomial_rlct(&e).unwrap());
        assert_eq!(p.threshold, ratio(1, 1));
        assert_eq!(p.multiplicity, 3);

        let e = ExponentSet::new(3, pts(&[&[2, 4, 2]])).unwrap();
        let p = pair(monomial_rlct(&e).unwrap());
        assert_eq!(p.threshold, ratio(1, 4));
        assert_eq!(p.multiplicity, 1);
    }

    #[test]
    fn constant_generator_has_no_pole() {
        let e = ExponentSet::new(2, pts(&[&[0, 0], &[2, 0]])).unwrap();
        assert_eq!(monomial_rlct(&e).unwrap(), RlctOutcome::NoPole { dim: 2 });
    }

    #[test]
    fn redundant_points_do_not_move_the_answer() {
        // (2,2,2) = (2,2,0) + (0,0,2) lies inside the Newton region.
        let e = ExponentSet::new(
            3,
            pts(&[&[2, 2, 0], &[2, 0, 2], &[0, 2, 2], &[2, 2, 2]]),
        )
        .unwrap();
        let p = pair(monomial_rlct(&e).unwrap());
        assert_eq!(p.threshold, ratio(3, 4));
        assert_eq!(p.multiplicity, 1);
    }

    #[test]
    fn coordinate_permutation_equivariance() {
        let e = ExponentSet::new(3, pts(&[&[2, 4, 0], &[0, 2, 4], &[4, 0, 2]])).unwrap();
        let p1 = pair(monomial_rlct(&e).unwrap());
        // Cyclic shift of every point.
        let shifted = ExponentSet::new(3, pts(&[&[0, 2, 4], &[4, 0, 2], &[2, 4, 0]])).unwrap();
        let p2 = pair(monomial_rlct(&shifted).unwrap());
        assert_eq!(p1, p2);
    }

    #[test]
    fn feasibility_flips_exactly_at_the_threshold() {
        let e = ExponentSet::new(3, pts(&[&[2, 2, 0], &[2, 0, 2], &[0, 2, 2]])).unwrap();
        let p = pair(monomial_rlct(&e).unwrap());
        let t_star = BigRational::one() / &p.threshold;
        assert!(threshold_feasible(&e, &t_star));
        let just_below = &t_star - ratio(1, 1_000_000);
        assert!(!threshold_feasible(&e, &just_below));
        let above = &t_star + ratio(1, 1_000_000);
        assert!(threshold_feasible(&e, &above));
    }

    #[test]
    fn quartet_thresholds_and_proven_multiplicities() {
        let t = quartet();
        // Inner root: multiplicity is pinned to 1 when δ is 0 at the root.
        for names in [&[][..], &["b"][..]] {
            let p = verify_score_via_newton(&t, &delta_at(&t, names)).unwrap();
            assert_eq!(p.threshold, ratio(1, 1));
            assert_eq!(p.multiplicity, 1);
        }
        // δ = 1 at the root with a leaf child: threshold still n/4; the
        // multiplicity of the monomial system is the combinatorial value
        // of its Newton region, larger than 1 here.
        let p = verify_score_via_newton(&t, &Degeneracy::all_inner(&t)).unwrap();
        assert_eq!(p.threshold, ratio(1, 1));
        assert_eq!(p.multiplicity, 5);

        // Leaf root: every δ is a proven multiplicity-1 case.
        let t = quartet_leaf_rooted();
        for names in [&[][..], &["a"][..], &["b"][..], &["a", "b"][..]] {
            let p = verify_score_via_newton(&t, &delta_at(&t, names)).unwrap();
            assert_eq!(p.threshold, ratio(1, 1));
            assert_eq!(p.multiplicity, 1, "delta at {names:?}");
        }
    }

    #[test]
    fn snowflake_all_inner_root_children_are_degenerate() {
        // Root children are all inner and all carry δ = 1: multiplicity 1
        // is proven even with δ = 1 at the root.
        let t = snowflake();
        let p = verify_score_via_newton(&t, &Degeneracy::all_inner(&t)).unwrap();
        assert_eq!(p.threshold, ratio(6, 4));
        assert_eq!(p.multiplicity, 1);
    }

    #[test]
    fn thresholds_match_the_closed_form_scores() {
        // For the all-isolated pattern the score is n/2 plus the monomial
        // threshold, and the threshold is n/4 for every δ.
        for tree in [quartet(), quartet_leaf_rooted(), snowflake(), caterpillar5()] {
            let n = tree.n_leaves() as i64;
            let p = verify_score_via_newton(&tree, &Degeneracy::all_inner(&tree)).unwrap();
            assert_eq!(p.threshold, ratio(n, 4));
            let pattern = classify_pattern(&tree, &vec![true; tree.n_edges()]);
            let score = score_pattern(&tree, &pattern).unwrap();
            assert_eq!(score.lambda, ratio(n, 2) + &p.threshold);
        }
    }

    #[test]
    fn two_leaf_edge_has_threshold_one_half() {
        let t = RootedTree::parse(r#"{"root":"1","leaves":["1","2"],"edges":[["1","2"]]}"#).unwrap();
        let p = verify_score_via_newton(&t, &Degeneracy::none(&t)).unwrap();
        assert_eq!(p.threshold, ratio(1, 2));
        assert_eq!(p.multiplicity, 1);

        // The two-leaf cherry carries the same threshold over two edge
        // coordinates; its root has degree 2, so the trivalent-only
        // verification route refuses it.
        let cherry =
            RootedTree::parse(r#"{"root":"h","leaves":["1","2"],"edges":[["h","1"],["h","2"]]}"#)
                .unwrap();
        assert!(matches!(
            verify_score_via_newton(&cherry, &Degeneracy::none(&cherry)),
            Err(NewtonError::NotTrivalent)
        ));
        let q = build_q_delta(&cherry, &Degeneracy::none(&cherry)).unwrap();
        let p = pair(monomial_rlct(&q.exponents).unwrap());
        assert_eq!(p.threshold, ratio(1, 2));
    }

    #[test]
    fn three_leaf_trees_are_refused_by_the_verifier() {
        let t = star3();
        assert!(matches!(
            verify_score_via_newton(&t, &Degeneracy::all_inner(&t)),
            Err(NewtonError::ThreeLeafExcluded)
        ));
        // The raw monomial system is still available by hand.
        let q = build_q_delta(&t, &Degeneracy::none(&t)).unwrap();
        let p = pair(monomial_rlct(&q.exponents).unwrap());
        assert_eq!(p.threshold, ratio(3, 4));
        assert_eq!(p.multiplicity, 1);
    }

    #[test]
    fn quartet_q_delta_points() {
        let t = quartet();
        let delta = Degeneracy::all_inner(&t);
        let q = build_q_delta(&t, &delta).unwrap();
        assert_eq!(q.exponents.dim(), 2 + 5);
        assert_eq!(q.pairs.len(), 6);
        // y block lists a (the root) before b; pair (1,2) meets at a and
        // covers the two leaf edges at a.
        let a = t.node_by_name("a").unwrap();
        let b = t.node_by_name("b").unwrap();
        assert_eq!(q.y_nodes, vec![a, b]);
        let p12 = &q.exponents.points()[0];
        assert_eq!(q.pairs[0], (0, 1));
        let e1 = t.path_edges_named("1", "2").unwrap().edges;
        let expect = monomial_point(&q.y_nodes, t.n_edges(), &delta, a, &e1);
        assert_eq!(p12, &expect);
        assert_eq!(p12[0], ratio(2, 1));
        assert_eq!(p12[1], ratio(0, 1));
    }

    #[test]
    fn path_network_barycenters() {
        // Inner root with δ = 1 there: n paths, core edge uncovered.
        let t = quartet();
        let net = build_path_network(&t, &Degeneracy::all_inner(&t)).unwrap();
        assert_eq!(net.paths.len(), 4);
        let y: Vec<BigRational> = net.barycenter[..2].to_vec();
        assert_eq!(y, vec![ratio(1, 1), ratio(1, 1)]);
        let core = t
            .parent_edge(t.node_by_name("b").unwrap())
            .unwrap();
        for e in 0..t.n_edges() {
            let expect = if e == core { ratio(0, 1) } else { ratio(1, 1) };
            assert_eq!(net.barycenter[2 + e], expect);
        }

        // δ = 0 at the root: 2n paths, every edge covered four times.
        let t = quartet_leaf_rooted();
        let net = build_path_network(&t, &delta_at(&t, &["b"])).unwrap();
        assert_eq!(net.paths.len(), 8);
        assert_eq!(net.barycenter[0], ratio(1, 2));
        for e in 0..t.n_edges() {
            assert_eq!(net.barycenter[1 + e], ratio(1, 1));
        }

        // Larger trees: barycenter bounded by (4/n)·𝟙 coordinatewise.
        for tree in [snowflake(), caterpillar5()] {
            for delta in [Degeneracy::all_inner(&tree), Degeneracy::none(&tree)] {
                let net = build_path_network(&tree, &delta).unwrap();
                let bound = ratio(4, tree.n_leaves() as i64);
                assert!(net.barycenter.iter().all(|v| v <= &bound));
            }
        }
    }

    #[test]
    fn structure_check_and_negative_control() {
        for tree in [quartet(), quartet_leaf_rooted(), snowflake(), caterpillar5(), star3()] {
            for delta in [Degeneracy::all_inner(&tree), Degeneracy::none(&tree)] {
                let report = gamma_q_structure_check(&tree, &delta).unwrap();
                assert!(report.all_ok(), "structure failed on {tree:?}");
                assert_eq!(report.points_checked, tree.n_leaves() * (tree.n_leaves() - 1) / 2);
            }
        }

        // Corrupting a terminal coordinate breaks the sum equation and the
        // checker notices.
        let t = quartet();
        let delta = Degeneracy::all_inner(&t);
        let q = build_q_delta(&t, &delta).unwrap();
        let mut bad = q.exponents.points()[0].clone();
        let terminal = t.terminal_edges()[0];
        bad[q.y_nodes.len() + terminal] += ratio(1, 1);
        let s = q_point_structure(&t, &delta, &bad).unwrap();
        assert!(!s.terminal_sum);
    }

    #[test]
    fn pair_edge_polytope_of_the_quartet() {
        let t = quartet();
        let (vertices, report) = pair_edge_polytope(&t).unwrap();
        assert_eq!(vertices.len(), 6);
        assert_eq!(report.ambient_dim, 5);
        assert_eq!(report.affine_dim, 4);
        assert_eq!(report.expected_dim, 4);
        assert!(report.on_equation);
        assert_eq!(report.claimed_count, 6);
        assert!(report.claims_valid);
        assert!(report.claims_supporting);
        assert_eq!(report.hull_facets, Some(6));
        assert_eq!(report.hull_matches_claims, Some(true));
        assert!(report.all_ok());

        // Vertices in edge input order (a1, a2, ab, b3, b4).
        let find = |target: &[i64]| {
            let t: Vec<BigRational> = target.iter().map(|&x| ratio(x, 1)).collect();
            vertices.iter().any(|v| v == &t)
        };
        assert!(find(&[1, 1, 0, 0, 0]));
        assert!(find(&[1, 0, 1, 1, 0]));
        assert!(find(&[0, 0, 0, 1, 1]));
    }

    #[test]
    fn pair_edge_polytope_of_the_five_leaf_caterpillar() {
        let t = caterpillar5();
        let (vertices, report) = pair_edge_polytope(&t).unwrap();
        assert_eq!(vertices.len(), 10);
        assert_eq!(report.affine_dim, 6);
        assert_eq!(report.expected_dim, 6);
        assert!(report.on_equation);
        assert_eq!(report.claimed_count, 9);
        assert_eq!(report.hull_facets, Some(9));
        assert_eq!(report.hull_matches_claims, Some(true));
        assert!(report.all_ok());
    }

    #[test]
    fn nondegeneracy_guard() {
        let q = build_q_delta(&quartet(), &Degeneracy::all_inner(&quartet())).unwrap();
        assert!(principal_part_nondegenerate(&q.exponents).unwrap());

        // Odd exponents are not certified.
        let e = ExponentSet::new(2, pts(&[&[1, 2]])).unwrap();
        assert!(!principal_part_nondegenerate(&e).unwrap());

        // Oversized systems are refused.
        let wide = ExponentSet::new(15, vec![vec![ratio(2, 1); 15]]).unwrap();
        assert!(matches!(
            principal_part_nondegenerate(&wide),
            Err(NewtonError::DimensionCap { dim: 15, cap: 14 })
        ));
    }

    #[test]
    fn degeneracy_validation() {
        let t = quartet();
        assert!(matches!(
            Degeneracy::new(&t, vec![true; 6]),
            Err(NewtonError::DegenerateLeaf { .. })
        ));
        assert!(matches!(
            Degeneracy::new(&t, vec![false; 3]),
            Err(NewtonError::BadDeltaLength { got: 3, want: 6 })
        ));
        let d = Degeneracy::all_inner(&t);
        assert_eq!(d.count(), 2);
    }
}
