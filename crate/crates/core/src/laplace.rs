//! Monte Carlo confirmation of the score asymptotics: estimates the Laplace
//! integral `I(N) = ∫ exp(−N·f(θ)) φ(θ) dθ` over the parameter cube, where
//! `f` is the normalized log-likelihood drop (a KL divergence, minimized to
//! zero exactly on the fiber of the data distribution), then regresses
//! `log I(N)` on `log N`; the slope recovers minus the learning coefficient.
//!
//! The estimator is defensive importance sampling: half of each draw budget
//! comes from the prior itself, half from heavy-tailed product kernels
//! centered at known fiber points and shaped by a finite-difference Hessian
//! of `f`. Importance weights are bounded by 2, so the estimate is robust;
//! the kernels supply the concentrating mass that plain prior sampling
//! misses once `N` is large. Everything is deterministic for a fixed seed:
//! the budget is split into fixed batches, each with a seed derived from
//! (seed, N, batch), and batch means also provide the standard error.

use crate::moments::{model_probs_f64, ThetaPoint};
use crate::pattern::CountTable;
use crate::score::full_score;
use crate::tree::RootedTree;
use nalgebra::DMatrix;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LaplaceError {
    #[error("N grid must be nonempty and strictly increasing")]
    BadGrid,
    #[error("need at least 10000 samples per N, got {got}")]
    FewSamples { got: usize },
    #[error("Beta prior needs alpha >= 1 and beta >= 1")]
    BadPriorParams,
    #[error("all samples underflowed at N = {n}; increase samples or shrink N")]
    AllUnderflow { n: f64 },
    #[error("regression needs at least {need} points, got {got}")]
    FewPoints { got: usize, need: usize },
    #[error("non-finite value in regression input")]
    NonFinite,
    #[error("input mismatch: {0}")]
    BadInput(String),
    #[error(transparent)]
    Score(#[from] crate::score::ScoreError),
}

/// Prior density on the parameter cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorSpec {
    Uniform,
    /// Independent Beta(alpha, beta) on every coordinate; both parameters
    /// must be at least 1 so the density is bounded.
    Beta { alpha: f64, beta: f64 },
}

impl PriorSpec {
    fn validate(&self) -> Result<(), LaplaceError> {
        match *self {
            PriorSpec::Uniform => Ok(()),
            PriorSpec::Beta { alpha, beta } => {
                if alpha >= 1.0 && beta >= 1.0 && alpha.is_finite() && beta.is_finite() {
                    Ok(())
                } else {
                    Err(LaplaceError::BadPriorParams)
                }
            }
        }
    }

    /// Log density at a point inside the cube.
    fn log_density(&self, x: &[f64]) -> f64 {
        match *self {
            PriorSpec::Uniform => 0.0,
            PriorSpec::Beta { alpha, beta } => {
                let ln_b = ln_gamma(alpha) + ln_gamma(beta) - ln_gamma(alpha + beta);
                let mut total = 0.0;
                for &xi in x {
                    // alpha = 1 (or beta = 1) contributes a flat factor even
                    // at the boundary, so skip the 0·ln 0 form.
                    if alpha != 1.0 {
                        total += (alpha - 1.0) * xi.ln();
                    }
                    if beta != 1.0 {
                        total += (beta - 1.0) * (1.0 - xi).ln();
                    }
                    total -= ln_b;
                }
                total
            }
        }
    }
}

/// Settings for one validation run.
#[derive(Debug, Clone)]
pub struct ValidationConfig {
    pub grid: Vec<u64>,
    pub samples: usize,
    pub seed: u64,
    pub prior: PriorSpec,
}

impl ValidationConfig {
    pub fn new(
        grid: Vec<u64>,
        samples: usize,
        seed: u64,
        prior: PriorSpec,
    ) -> Result<Self, LaplaceError> {
        if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LaplaceError::BadGrid);
        }
        if samples < 10_000 {
            return Err(LaplaceError::FewSamples { got: samples });
        }
        prior.validate()?;
        Ok(ValidationConfig {
            grid,
            samples,
            seed,
            prior,
        })
    }

    /// Geometric grid 2^7 .. 2^15.
    pub fn default_grid() -> Vec<u64> {
        (7..=15).map(|k| 1u64 << k).collect()
    }
}

/// One Laplace integral estimate in log space.
#[derive(Debug, Clone, Copy)]
pub struct LaplaceEstimate {
    pub log_i: f64,
    pub stderr: f64,
}

/// Normalized log-likelihood drop at θ:
/// `f(θ) = Σ_α p̂_α (ln p̂_α − ln p_α(θ))`, the KL divergence from the model
/// distribution at θ to the empirical one. Nonnegative; +∞ when the model
/// puts zero mass on an observed pattern. Zero-count patterns contribute
/// nothing (0·ln 0 = 0).
pub fn normalized_loglik(theta_flat: &[f64], tree: &RootedTree, p_hat: &[f64]) -> f64 {
    let q = model_probs_f64(theta_flat, tree);
    debug_assert_eq!(q.len(), p_hat.len());
    let mut total = 0.0;
    for (ph, qh) in p_hat.iter().zip(&q) {
        if *ph <= 0.0 {
            continue;
        }
        if *qh <= 0.0 {
            return f64::INFINITY;
        }
        total += ph * (ph.ln() - qh.ln());
    }
    // Tiny negative values are float noise around a fiber point.
    total.max(0.0)
}

fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Student-t with 2 degrees of freedom: quantile and standard log density.
/// The closed-form quantile keeps sampling allocation-free.
fn t2_quantile(u: f64) -> f64 {
    let a = (2.0 * u - 1.0).clamp(-1.0 + 1e-12, 1.0 - 1e-12);
    a * (2.0 / (1.0 - a * a)).sqrt()
}

fn t2_log_pdf(z: f64) -> f64 {
    -1.5 * (1.0 + z * z / 2.0).ln() - (2.0 * 2.0_f64.sqrt()).ln()
}

/// Product importance kernel in the eigenbasis of a local Hessian.
struct Kernel {
    center: Vec<f64>,
    /// Orthonormal columns.
    basis: DMatrix<f64>,
    widths: Vec<f64>,
}

impl Kernel {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let d = self.center.len();
        let mut x = self.center.clone();
        for i in 0..d {
            let z = t2_quantile(rng.gen::<f64>()) * self.widths[i];
            for (j, xj) in x.iter_mut().enumerate() {
                *xj += self.basis[(j, i)] * z;
            }
        }
        x
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.center.len();
        let mut total = 0.0;
        for i in 0..d {
            let mut z = 0.0;
            for j in 0..d {
                z += self.basis[(j, i)] * (x[j] - self.center[j]);
            }
            z /= self.widths[i];
            total += t2_log_pdf(z) - self.widths[i].ln();
        }
        total
    }
}

const FD_STEP: f64 = 1e-4;
const FD_MARGIN: f64 = 1e-2;

/// Symmetric finite-difference Hessian of f, anchored at the center clamped
/// slightly into the open cube so boundary centers stay evaluable.
fn fd_hessian<F: Fn(&[f64]) -> f64>(f: &F, center: &[f64]) -> DMatrix<f64> {
    let d = center.len();
    let anchor: Vec<f64> = center
        .iter()
        .map(|&c| c.clamp(FD_MARGIN, 1.0 - FD_MARGIN))
        .collect();
    let h = FD_STEP;
    let eval = |x: &[f64]| -> f64 {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let f0 = eval(&anchor);
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        let mut xp = anchor.clone();
        let mut xm = anchor.clone();
        xp[i] += h;
        xm[i] -= h;
        m[(i, i)] = (eval(&xp) - 2.0 * f0 + eval(&xm)) / (h * h);
        for j in (i + 1)..d {
            let mut xpp = anchor.clone();
            let mut xpm = anchor.clone();
            let mut xmp = anchor.clone();
            let mut xmm = anchor.clone();
            xpp[i] += h;
            xpp[j] += h;
            xpm[i] += h;
            xpm[j] -= h;
            xmp[i] -= h;
            xmp[j] += h;
            xmm[i] -= h;
            xmm[j] -= h;
            let v = (eval(&xpp) - eval(&xpm) - eval(&xmp) + eval(&xmm)) / (4.0 * h * h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Two kernels per center: a narrow one matched to the local curvature at
/// scale N and a 4x wider companion that hedges the Hessian estimate.
fn build_kernels<F: Fn(&[f64]) -> f64>(f: &F, centers: &[Vec<f64>], n: f64) -> Vec<Kernel> {
    let mut kernels = Vec::with_capacity(centers.len() * 2);
    for c in centers {
        let hess = fd_hessian(f, c);
        let eig = nalgebra::SymmetricEigen::new(hess);
        let lam_max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let floor = if lam_max > 0.0 { lam_max * 1e-9 } else { 1.0 };
        for mult in [1.0, 4.0] {
            let widths: Vec<f64> = eig
                .eigenvalues
                .iter()
                .map(|&l| {
                    let l = l.max(floor);
                    let scale = n * l;
                    if scale > 0.0 {
                        (mult / scale.sqrt()).min(0.4)
                    } else {
                        0.4
                    }
                })
                .collect();
            kernels.push(Kernel {
                center: c.clone(),
                basis: eig.eigenvectors.clone(),
                widths,
            });
        }
    }
    kernels
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn batch_seed(seed: u64, n: f64, batch: u64) -> u64 {
    splitmix64(seed ^ splitmix64(n.to_bits() ^ splitmix64(batch)))
}

const BATCHES: usize = 50;

/// Estimates `log ∫ exp(−N f(θ)) φ(θ) dθ` over the unit cube of the given
/// dimension. `centers` aim the importance kernels (pass fiber points of f);
/// an empty list degrades to plain prior sampling. Deterministic in
/// (config.seed, N, config.samples): the budget is split into fixed batches
/// whose means also give the reported standard error.
pub fn mc_laplace<F: Fn(&[f64]) -> f64>(
    f: &F,
    dim: usize,
    n: f64,
    config: &ValidationConfig,
    centers: &[Vec<f64>],
) -> Result<LaplaceEstimate, LaplaceError> {
    if dim == 0 {
        return Err(LaplaceError::BadInput("dimension must be positive".into()));
    }
    for c in centers {
        if c.len() != dim {
            return Err(LaplaceError::BadInput(format!(
                "center length {} does not match dimension {dim}",
                c.len()
            )));
        }
    }
    let kernels = build_kernels(f, centers, n);
    let k = kernels.len();
    let ln_half = 0.5_f64.ln();

    let base = config.samples / BATCHES;
    let extra = config.samples % BATCHES;
    let mut batch_means = Vec::with_capacity(BATCHES);
    let mut all_lse = f64::NEG_INFINITY;
    for b in 0..BATCHES {
        let size = base + usize::from(b < extra);
        if size == 0 {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(batch_seed(config.seed, n, b as u64));
        let mut lse = f64::NEG_INFINITY;
        for _ in 0..size {
            let from_kernel = k > 0 && rng.gen::<f64>() >= 0.5;
            let x: Vec<f64> = if from_kernel {
                let pick = rng.gen_range(0..k);
                kernels[pick].sample(&mut rng)
            } else {
                (0..dim).map(|_| rng.gen::<f64>()).collect()
            };
            let inside = x.iter().all(|&xi| (0.0..=1.0).contains(&xi));
            if !inside {
                continue;
            }
            let log_q = if k == 0 {
                0.0
            } else {
                let mut mix = f64::NEG_INFINITY;
                for kern in &kernels {
                    mix = logaddexp(mix, kern.log_density(&x));
                }
                logaddexp(ln_half, ln_half + mix - (k as f64).ln())
            };
            let fx = f(&x);
            if !fx.is_finite() {
                continue;
            }
            let term = config.prior.log_density(&x) - log_q - n * fx;
            lse = logaddexp(lse, term);
        }
        batch_means.push(lse - (size as f64).ln());
        all_lse = logaddexp(all_lse, lse);
    }
    let log_i = all_lse - (config.samples as f64).ln();
    if log_i == f64::NEG_INFINITY {
        return Err(LaplaceError::AllUnderflow { n });
    }

    // Standard error of the batch means, transferred to the log scale by
    // dividing by the mean.
    let m_max = batch_means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let r: Vec<f64> = batch_means.iter().map(|&m| (m - m_max).exp()).collect();
    let nb = r.len() as f64;
    let r_bar = r.iter().sum::<f64>() / nb;
    let var = r.iter().map(|&v| (v - r_bar) * (v - r_bar)).sum::<f64>() / (nb - 1.0);
    let stderr = (var / nb).sqrt() / r_bar;
    Ok(LaplaceEstimate { log_i, stderr })
}

/// Importance centers for a tree model at a known fiber point θ0: the orbit
/// of θ0 under hidden-node label swaps (every member parameterizes the same
/// leaf distribution) plus copies with the root weight pushed to each
/// corner, deduplicated and capped at 8.
pub fn tree_centers(tree: &RootedTree, theta0: &[f64]) -> Vec<Vec<f64>> {
    let inner: Vec<usize> = tree.inner_nodes().collect();
    let mut centers: Vec<Vec<f64>> = Vec::new();
    let push = |c: Vec<f64>, centers: &mut Vec<Vec<f64>>| {
        if centers.len() < 8 && !centers.contains(&c) {
            centers.push(c);
        }
    };
    let masks = 1usize << inner.len().min(6);
    for mask in 0..masks {
        let flip = |v: usize| -> bool {
            inner
                .iter()
                .position(|&w| w == v)
                .is_some_and(|i| mask >> i & 1 == 1)
        };
        let mut th = theta0.to_vec();
        if flip(tree.root()) {
            th[0] = 1.0 - th[0];
        }
        for (e, &(pa, ch)) in tree.edges().iter().enumerate() {
            let (i0, i1) = (1 + 2 * e, 2 + 2 * e);
            if flip(pa) {
                th.swap(i0, i1);
            }
            if flip(ch) {
                th[i0] = 1.0 - th[i0];
                th[i1] = 1.0 - th[i1];
            }
        }
        push(th, &mut centers);
    }
    for corner in [0.0, 1.0] {
        let mut th = theta0.to_vec();
        th[0] = corner;
        push(th, &mut centers);
    }
    centers
}

/// Laplace estimate for a tree model: `f` is the likelihood drop against
/// `p_hat`, kernels are aimed by [`tree_centers`] at θ0.
pub fn mc_laplace_tree(
    tree: &RootedTree,
    p_hat: &[f64],
    theta0: &[f64],
    n: f64,
    config: &ValidationConfig,
) -> Result<LaplaceEstimate, LaplaceError> {
    let dim = 1 + 2 * tree.n_edges();
    if theta0.len() != dim {
        return Err(LaplaceError::BadInput(format!(
            "theta has {} coordinates, tree needs {dim}",
            theta0.len()
        )));
    }
    if p_hat.len() != 1 << tree.n_leaves() {
        return Err(LaplaceError::BadInput(format!(
            "p_hat has {} entries, tree needs {}",
            p_hat.len(),
            1 << tree.n_leaves()
        )));
    }
    let centers = tree_centers(tree, theta0);
    let f = |x: &[f64]| normalized_loglik(x, tree, p_hat);
    mc_laplace(&f, dim, n, config, &centers)
}

/// Ordinary least squares of log I(N) on log N.
#[derive(Debug, Clone)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    /// The (log N, log I) points actually regressed.
    pub points: Vec<(f64, f64)>,
}

/// Fits log I = intercept + slope·log N after dropping the smallest
/// `drop_smallest` grid values, where the O(1) term still dominates. Needs
/// at least 4 rows in, 3 rows after the drop.
pub fn slope_regression(
    rows: &[(u64, f64)],
    drop_smallest: usize,
) -> Result<RegressionResult, LaplaceError> {
    if rows.len() < 4 {
        return Err(LaplaceError::FewPoints {
            got: rows.len(),
            need: 4,
        });
    }
    let mut sorted = rows.to_vec();
    sorted.sort_by_key(|&(n, _)| n);
    let used = &sorted[drop_smallest.min(sorted.len())..];
    if used.len() < 3 {
        return Err(LaplaceError::FewPoints {
            got: used.len(),
            need: 3,
        });
    }
    let points: Vec<(f64, f64)> = used.iter().map(|&(n, y)| ((n as f64).ln(), y)).collect();
    if points.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(LaplaceError::NonFinite);
    }
    let m = points.len() as f64;
    let x_bar = points.iter().map(|p| p.0).sum::<f64>() / m;
    let y_bar = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - x_bar) * (p.0 - x_bar)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - x_bar) * (p.1 - y_bar)).sum();
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let ss_res: f64 = points
        .iter()
        .map(|&(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let df = (m - 2.0).max(1.0);
    let stderr = (ss_res / df / sxx).sqrt();
    Ok(RegressionResult {
        slope,
        intercept,
        stderr,
        points,
    })
}

/// One grid row of a validation run.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ValidationRow {
    pub n: u64,
    pub log_i: f64,
    pub stderr: f64,
}

/// Full validation outcome: per-N estimates, the fitted slope, and the
/// verdict comparing it against the closed-form learning coefficient.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
    pub regression: RegressionResult,
    pub expected_lambda: f64,
    pub slope_tolerance: f64,
    pub verdict: bool,
}

/// Runs the whole pipeline on one tree and data table: score the data for
/// the expected learning coefficient, estimate the Laplace integral over
/// the grid with kernels aimed at θ0, regress, and compare. θ0 must
/// parameterize the data distribution (on-model data) for the slope to
/// mean anything; the report carries the evidence either way.
pub fn validate_tree(
    tree: &RootedTree,
    table: &CountTable,
    theta0: &ThetaPoint,
    config: &ValidationConfig,
    slope_tolerance: f64,
    drop_smallest: usize,
) -> Result<ValidationReport, LaplaceError> {
    let score = full_score(tree, table, None, config.seed)?;
    let expected_lambda = score
        .lambda
        .to_f64()
        .expect("learning coefficients are small rationals");
    let p_hat: Vec<f64> = table
        .empirical()
        .p
        .iter()
        .map(|r| r.to_f64().expect("probabilities fit in f64"))
        .collect();
    let theta_flat = theta0.to_flat_f64();
    let mut rows = Vec::with_capacity(config.grid.len());
    for &n in &config.grid {
        let est = mc_laplace_tree(tree, &p_hat, &theta_flat, n as f64, config)?;
        rows.push(ValidationRow {
            n,
            log_i: est.log_i,
            stderr: est.stderr,
        });
    }
    let reg_rows: Vec<(u64, f64)> = rows.iter().map(|r| (r.n, r.log_i)).collect();
    let regression = slope_regression(&reg_rows, drop_smallest)?;
    let verdict = (regression.slope + expected_lambda).abs() <= slope_tolerance;
    Ok(ValidationReport {
        rows,
        regression,
        expected_lambda,
        slope_tolerance,
        verdict,
    })
}
