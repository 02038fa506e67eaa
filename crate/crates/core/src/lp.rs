//! Exact linear programming over rationals: a dense two-phase simplex with
//! Bland's rule, for the small polyhedral problems in this crate (threshold
//! computation and cone-membership tests). Everything is exact; there is no
//! floating point anywhere in the pivoting.

use crate::BigRational;
use num_traits::{One, Zero};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal {
        value: BigRational,
        x: Vec<BigRational>,
    },
    Infeasible,
    Unbounded,
}

/// Minimizes c·x subject to Ax = b, x ≥ 0.
///
/// `a` is row-major with `a.len()` constraints over `c.len()` variables.
/// Redundant rows are tolerated; Bland's rule guarantees termination on
/// degenerate problems.
pub fn solve_min(a: &[Vec<BigRational>], b: &[BigRational], c: &[BigRational]) -> LpOutcome {
    let m = a.len();
    let n = c.len();
    assert_eq!(b.len(), m);
    for row in a {
        assert_eq!(row.len(), n);
    }

    // Tableau with artificial variables: columns [x (n) | artificial (m) | rhs].
    let total = n + m;
    let mut t: Vec<Vec<BigRational>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut row: Vec<BigRational> = Vec::with_capacity(total + 1);
        let flip = b[i] < BigRational::zero();
        for j in 0..n {
            row.push(if flip { -&a[i][j] } else { a[i][j].clone() });
        }
        for k in 0..m {
            row.push(if k == i {
                BigRational::one()
            } else {
                BigRational::zero()
            });
        }
        row.push(if flip { -&b[i] } else { b[i].clone() });
        t.push(row);
    }
    let mut basis: Vec<usize> = (n..total).collect();

    // Phase 1 objective: sum of artificials. Reduced-cost row z_j = Σ_i t_ij
    // for original columns (artificial columns start basic with cost 1).
    let mut z: Vec<BigRational> = vec![BigRational::zero(); total + 1];
    for row in &t {
        for (j, zj) in z.iter_mut().enumerate().take(n) {
            *zj += &row[j];
        }
        let rhs = row[total].clone();
        z[total] += rhs;
    }
    // In this representation we pivot to drive z[total] (the artificial sum)
    // to zero, choosing entering columns with positive z_j.
    simplex_loop(&mut t, &mut basis, &mut z, total, true);
    if !z[total].is_zero() {
        return LpOutcome::Infeasible;
    }

    // Drive leftover artificials out of the basis; drop redundant rows.
    let mut keep_rows: Vec<bool> = vec![true; t.len()];
    for i in 0..t.len() {
        if basis[i] < n {
            continue;
        }
        if let Some(j) = (0..n).find(|&j| !t[i][j].is_zero()) {
            pivot(&mut t, &mut z, i, j, total);
            basis[i] = j;
        } else {
            keep_rows[i] = false;
        }
    }
    let mut t: Vec<Vec<BigRational>> = t
        .into_iter()
        .zip(keep_rows.iter())
        .filter(|(_, &k)| k)
        .map(|(mut row, _)| {
            // Truncate the artificial columns; keep rhs at index n.
            let rhs = row[total].clone();
            row.truncate(n);
            row.push(rhs);
            row
        })
        .collect();
    let mut basis: Vec<usize> = basis
        .into_iter()
        .zip(keep_rows.iter())
        .filter(|(_, &k)| k)
        .map(|(v, _)| v)
        .collect();

    // Phase 2 reduced costs: z_j = c_B B⁻¹ A_j − c_j, so entering columns
    // again have z_j > 0 and the objective value is z[n] = c_B B⁻¹ b
    // (negated cost convention keeps one pivot routine for both phases).
    let mut z: Vec<BigRational> = vec![BigRational::zero(); n + 1];
    for (j, zj) in z.iter_mut().enumerate().take(n) {
        *zj = -&c[j];
    }
    for (i, &bi) in basis.iter().enumerate() {
        if c[bi].is_zero() {
            continue;
        }
        let coef = c[bi].clone();
        for j in 0..=n {
            let delta = &coef * &t[i][j];
            z[j] += delta;
        }
    }
    if !simplex_loop(&mut t, &mut basis, &mut z, n, false) {
        return LpOutcome::Unbounded;
    }

    let mut x = vec![BigRational::zero(); n];
    for (i, &bi) in basis.iter().enumerate() {
        x[bi] = t[i][n].clone();
    }
    let value: BigRational = c
        .iter()
        .zip(&x)
        .map(|(ci, xi)| ci * xi)
        .sum();
    LpOutcome::Optimal { value, x }
}

/// Bland pivoting until no entering column remains. Returns false when the
/// problem is unbounded (only possible in phase 2).
fn simplex_loop(
    t: &mut [Vec<BigRational>],
    basis: &mut [usize],
    z: &mut [BigRational],
    width: usize,
    phase1: bool,
) -> bool {
    loop {
        // Bland: smallest index with positive reduced cost enters.
        let entering = (0..width).find(|&j| z[j] > BigRational::zero());
        let Some(j) = entering else {
            return true;
        };
        // Ratio test over positive column entries; Bland tie-break by
        // smallest basis variable index.
        let mut best: Option<(usize, BigRational)> = None;
        for i in 0..t.len() {
            if t[i][j] <= BigRational::zero() {
                continue;
            }
            let ratio = &t[i][width] / &t[i][j];
            match &best {
                None => best = Some((i, ratio)),
                Some((bi, br)) => {
                    if ratio < *br || (ratio == *br && basis[i] < basis[*bi]) {
                        best = Some((i, ratio));
                    }
                }
            }
        }
        let Some((i, _)) = best else {
            // Phase 1 is always bounded below by zero.
            assert!(!phase1, "phase-1 objective cannot be unbounded");
            return false;
        };
        pivot(t, z, i, j, width);
        basis[i] = j;
    }
}

fn pivot(t: &mut [Vec<BigRational>], z: &mut [BigRational], pr: usize, pc: usize, width: usize) {
    let inv = {
        let p = &t[pr][pc];
        assert!(!p.is_zero());
        BigRational::one() / p
    };
    for j in 0..=width {
        let scaled = &t[pr][j] * &inv;
        t[pr][j] = scaled;
    }
    for i in 0..t.len() {
        if i == pr || t[i][pc].is_zero() {
            continue;
        }
        let factor = t[i][pc].clone();
        for j in 0..=width {
            let delta = &factor * &t[pr][j];
            t[i][j] -= delta;
        }
    }
    if !z[pc].is_zero() {
        let factor = z[pc].clone();
        for j in 0..=width {
            let delta = &factor * &t[pr][j];
            z[j] -= delta;
        }
    }
}

/// Is there an x ≥ 0 with Ax = b? Returns a witness when one exists.
pub fn feasible_point(a: &[Vec<BigRational>], b: &[BigRational]) -> Option<Vec<BigRational>> {
    let n = a.first().map(|r| r.len()).unwrap_or(0);
    let c = vec![BigRational::zero(); n];
    match solve_min(a, b, &c) {
        LpOutcome::Optimal { x, .. } => Some(x),
        _ => None,
    }
}
