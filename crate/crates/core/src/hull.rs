//! Exact rational linear algebra and brute-force polytope facet enumeration
//! for low dimensions: affine hulls, ranks, and the facet list of a convex
//! hull of a small point set. Used to verify claimed facet descriptions and
//! to compute face codimensions.

use crate::BigRational;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

/// Rank of a set of row vectors, by fraction-free Gaussian elimination.
pub fn rank(rows: &[Vec<BigRational>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let cols = rows[0].len();
    let mut m: Vec<Vec<BigRational>> = rows.to_vec();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let pivot = m[r][c].clone();
        for i in 0..m.len() {
            if i == r || m[i][c].is_zero() {
                continue;
            }
            let factor = &m[i][c] / &pivot;
            for j in c..cols {
                let delta = &factor * &m[r][j];
                m[i][j] -= delta;
            }
        }
        r += 1;
        if r == m.len() {
            break;
        }
    }
    r
}

/// Solves Σ_k x_k · cols[k] = target exactly; None when inconsistent.
pub fn solve_columns(cols: &[Vec<BigRational>], target: &[BigRational]) -> Option<Vec<BigRational>> {
    let n = cols.len();
    let m = target.len();
    // Augmented row-reduction on the transpose system.
    let mut aug: Vec<Vec<BigRational>> = (0..m)
        .map(|i| {
            let mut row: Vec<BigRational> = cols.iter().map(|c| c[i].clone()).collect();
            row.push(target[i].clone());
            row
        })
        .collect();
    let mut pivot_col_of_row = Vec::new();
    let mut r = 0;
    for c in 0..n {
        let Some(p) = (r..m).find(|&i| !aug[i][c].is_zero()) else {
            continue;
        };
        aug.swap(r, p);
        let pivot = aug[r][c].clone();
        for j in c..=n {
            let scaled = &aug[r][j] / &pivot;
            aug[r][j] = scaled;
        }
        for i in 0..m {
            if i == r || aug[i][c].is_zero() {
                continue;
            }
            let factor = aug[i][c].clone();
            for j in c..=n {
                let delta = &factor * &aug[r][j];
                aug[i][j] -= delta;
            }
        }
        pivot_col_of_row.push(c);
        r += 1;
        if r == m {
            break;
        }
    }
    // Inconsistent when a zero row has nonzero rhs.
    for i in r..m {
        if !aug[i][n].is_zero() {
            return None;
        }
    }
    let mut x = vec![BigRational::zero(); n];
    for (row, &c) in pivot_col_of_row.iter().enumerate() {
        x[c] = aug[row][n].clone();
    }
    Some(x)
}

/// One-dimensional null space of a set of row vectors whose rank is
/// (columns − 1); None when the rank is different.
pub fn null_vector(rows: &[Vec<BigRational>]) -> Option<Vec<BigRational>> {
    let cols = rows.first()?.len();
    if rank(rows) + 1 != cols {
        return None;
    }
    let mut m: Vec<Vec<BigRational>> = rows.to_vec();
    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, col)
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let pivot = m[r][c].clone();
        for j in c..cols {
            let scaled = &m[r][j] / &pivot;
            m[r][j] = scaled;
        }
        for i in 0..m.len() {
            if i == r || m[i][c].is_zero() {
                continue;
            }
            let factor = m[i][c].clone();
            for j in c..cols {
                let delta = &factor * &m[r][j];
                m[i][j] -= delta;
            }
        }
        pivots.push((r, c));
        r += 1;
    }
    let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
    let free = (0..cols).find(|c| !pivot_cols.contains(c))?;
    let mut v = vec![BigRational::zero(); cols];
    v[free] = BigRational::one();
    for &(row, col) in &pivots {
        v[col] = -m[row][free].clone();
    }
    Some(v)
}

/// Scales a rational vector to a primitive integer vector (gcd 1), keeping
/// its direction. The all-zero vector stays zero.
pub fn primitive_integer(v: &[BigRational]) -> Vec<BigInt> {
    let mut lcm = BigInt::one();
    for x in v {
        lcm = lcm.lcm(x.denom());
    }
    let ints: Vec<BigInt> = v.iter().map(|x| (x * BigRational::from_integer(lcm.clone())).to_integer()).collect();
    let mut g = BigInt::zero();
    for i in &ints {
        g = g.gcd(i);
    }
    if g.is_zero() {
        return ints;
    }
    ints.into_iter().map(|i| i / &g).collect()
}

/// Affine coordinate chart for a point set: an origin plus an independent
/// difference basis, with exact coordinates for any point in the hull's
/// affine span.
pub struct AffineChart {
    pub origin: Vec<BigRational>,
    pub basis: Vec<Vec<BigRational>>,
}

impl AffineChart {
    pub fn build(points: &[Vec<BigRational>]) -> Self {
        let origin = points[0].clone();
        let mut basis: Vec<Vec<BigRational>> = Vec::new();
        for p in &points[1..] {
            let diff: Vec<BigRational> = p.iter().zip(&origin).map(|(a, b)| a - b).collect();
            let mut trial = basis.clone();
            trial.push(diff.clone());
            if rank(&trial) == basis.len() + 1 {
                basis.push(diff);
            }
        }
        AffineChart { origin, basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Coordinates of an ambient point; None when it lies off the span.
    pub fn coords(&self, p: &[BigRational]) -> Option<Vec<BigRational>> {
        let diff: Vec<BigRational> = p.iter().zip(&self.origin).map(|(a, b)| a - b).collect();
        solve_columns(&self.basis, &diff)
    }

    /// Pushes an ambient linear inequality a·x ≥ c into chart coordinates.
    pub fn inequality(&self, a: &[BigRational], c: &BigRational) -> (Vec<BigRational>, BigRational) {
        let normal: Vec<BigRational> = self
            .basis
            .iter()
            .map(|bk| a.iter().zip(bk).map(|(ai, bi)| ai * bi).sum())
            .collect();
        let shift: BigRational = a.iter().zip(&self.origin).map(|(ai, oi)| ai * oi).sum();
        (normal, c - shift)
    }
}

/// A facet inequality normal·x ≥ rhs in chart coordinates, canonicalized to
/// a primitive integer normal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Facet {
    pub normal: Vec<BigInt>,
    pub rhs: BigInt,
}

/// Canonicalizes a valid inequality (already oriented so the polytope side
/// is ≥) by clearing denominators to a primitive integer form.
pub fn canonical_facet(normal: &[BigRational], rhs: &BigRational) -> Facet {
    let mut all: Vec<BigRational> = normal.to_vec();
    all.push(rhs.clone());
    let ints = primitive_integer(&all);
    let rhs_i = ints.last().unwrap().clone();
    Facet {
        normal: ints[..ints.len() - 1].to_vec(),
        rhs: rhs_i,
    }
}

/// All facets of conv(points), by brute force over point subsets of size
/// equal to the affine dimension. Points must be given in chart coordinates
/// of their own affine hull (full-dimensional). Intended for small inputs
/// (≤ ~12 points, dimension ≤ ~6).
pub fn facets_brute(points: &[Vec<BigRational>]) -> Vec<Facet> {
    let d = points.first().map(|p| p.len()).unwrap_or(0);
    assert!(d > 0, "need a full-dimensional chart");
    let m = points.len();
    let mut found: Vec<Facet> = Vec::new();
    let mut subset: Vec<usize> = (0..d).collect();
    let mut done = m < d;
    while !done {
        // The affine span of the subset is a candidate hyperplane when the
        // subset is affinely independent of rank d−1.
        let diffs: Vec<Vec<BigRational>> = subset[1..]
            .iter()
            .map(|&i| {
                points[i]
                    .iter()
                    .zip(&points[subset[0]])
                    .map(|(a, b)| a - b)
                    .collect()
            })
            .collect();
        if let Some(mut normal) = null_vector(&diffs) {
            let dot = |n: &[BigRational], p: &[BigRational]| -> BigRational {
                n.iter().zip(p).map(|(a, b)| a * b).sum()
            };
            let rhs = dot(&normal, &points[subset[0]]);
            let mut has_above = false;
            let mut has_below = false;
            for p in points {
                let v = dot(&normal, p);
                if v > rhs {
                    has_above = true;
                } else if v < rhs {
                    has_below = true;
                }
            }
            if !(has_above && has_below) {
                if has_below {
                    for x in normal.iter_mut() {
                        *x = -x.clone();
                    }
                }
                let rhs = dot(&normal, &points[subset[0]]);
                // Supporting: the tight set must span a (d−1)-dim face.
                let tight: Vec<Vec<BigRational>> = points
                    .iter()
                    .filter(|p| dot(&normal, p) == rhs)
                    .cloned()
                    .collect();
                let tight_diffs: Vec<Vec<BigRational>> = tight[1..]
                    .iter()
                    .map(|p| p.iter().zip(&tight[0]).map(|(a, b)| a - b).collect())
                    .collect();
                if rank(&tight_diffs) == d - 1 {
                    let f = canonical_facet(&normal, &rhs);
                    if !found.contains(&f) {
                        found.push(f);
                    }
                }
            }
        }
        // Next d-combination of {0..m}.
        done = true;
        for i in (0..d).rev() {
            if subset[i] + 1 <= m - (d - i) {
                subset[i] += 1;
                for j in (i + 1)..d {
                    subset[j] = subset[j - 1] + 1;
                }
                done = false;
                break;
            }
        }
    }
    found.sort();
    found
}
