//! Variable selection run on the selection half of each split.
//!
//! Two procedures are provided: an oracle that always keeps the truly active
//! variables (plus random extras), and a Lasso calibrated to return a target
//! number of variables. Selections never exceed half the number of rows used
//! to fit them.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::linalg::{axpy, check_index_set, dot, Matrix};
use crate::rng::{rng_from_seed, Rng};

/// Convergence threshold on the largest coefficient change in one sweep.
pub const LASSO_TOL: f64 = 1e-7;
/// Sweep cap per grid point.
pub const LASSO_MAX_SWEEPS: usize = 100_000;
/// Points on the calibration grid of [`lasso_select`].
pub const LASSO_GRID_LEN: usize = 100;
/// Smallest grid value as a fraction of `λ_max`.
pub const LASSO_GRID_RATIO: f64 = 1e-4;

/// Sorted, duplicate-free set of 0-based variable indices.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct SelectedSet(Vec<usize>);

impl SelectedSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        SelectedSet(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    /// Position of `j` within the sorted set.
    pub fn position(&self, j: usize) -> Option<usize> {
        self.0.binary_search(&j).ok()
    }
}

/// Maximum selection size for `n_fit` rows.
#[inline]
pub fn capacity(n_fit: usize) -> usize {
    n_fit / 2
}

/// How each split chooses its candidate variables.
#[derive(Debug, Clone, PartialEq)]
pub enum Selector {
    /// The given truly active variables plus `extra` uniformly drawn others.
    Oracle { active: Vec<usize>, extra: usize },
    /// Lasso calibrated to `k` variables.
    Lasso { k: usize },
}

impl Selector {
    /// Number of variables the selector aims to return.
    pub fn target_size(&self) -> usize {
        match self {
            Selector::Oracle { active, extra } => active.len() + extra,
            Selector::Lasso { k } => *k,
        }
    }

    /// Runs the selector on the fitting rows `x`, `y`.
    pub fn select(&self, x: &Matrix, y: &[f64], rng: &mut Rng) -> Result<SelectedSet> {
        match self {
            Selector::Oracle { active, extra } => oracle_select_with(active, x.cols(), *extra, x.rows(), rng),
            Selector::Lasso { k } => lasso_select(x, y, *k),
        }
    }
}

/// Oracle selection seeded directly; see [`oracle_select_with`].
pub fn oracle_select(truly_active: &[usize], m: usize, extra: usize, n_fit: usize, seed: u64) -> Result<SelectedSet> {
    oracle_select_with(truly_active, m, extra, n_fit, &mut rng_from_seed(seed))
}

/// Keeps every index of `truly_active` and adds `extra` indices drawn
/// uniformly without replacement from the rest of `0..m`.
pub fn oracle_select_with(
    truly_active: &[usize],
    m: usize,
    extra: usize,
    n_fit: usize,
    rng: &mut Rng,
) -> Result<SelectedSet> {
    check_index_set(truly_active, m)?;
    let requested = truly_active.len() + extra;
    let cap = capacity(n_fit);
    if requested > cap {
        return Err(Error::CapacityExceeded {
            requested,
            capacity: cap,
        });
    }
    let complement: Vec<usize> = {
        let mut is_active = vec![false; m];
        truly_active.iter().for_each(|&j| is_active[j] = true);
        (0..m).filter(|&j| !is_active[j]).collect()
    };
    if extra > complement.len() {
        return Err(Error::CapacityExceeded { requested, capacity: m });
    }
    let mut out = truly_active.to_vec();
    out.extend(sample(rng, complement.len(), extra).into_iter().map(|k| complement[k]));
    Ok(SelectedSet::new(out))
}

// Columns centered and scaled to norm √n; constant columns are dropped.
struct Standardized {
    x: Matrix,
    y: Vec<f64>,
    usable: Vec<bool>,
}

impl Standardized {
    fn new(x: &Matrix, y: &[f64]) -> Result<Self> {
        let n = x.rows();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                what: "response length vs design rows",
                expected: n,
                found: y.len(),
            });
        }
        if n == 0 {
            return Err(Error::InvalidArgument("lasso needs at least one observation"));
        }
        let nf = n as f64;
        let mut xs = x.clone();
        let mut usable = vec![true; x.cols()];
        for j in 0..x.cols() {
            let col = xs.column_mut(j);
            let mean = col.iter().sum::<f64>() / nf;
            col.iter_mut().for_each(|v| *v -= mean);
            let nrm = libm::sqrt(dot(col, col));
            let scale = nrm.max(mean.abs()).max(1.0);
            if nrm <= 1e-10 * scale {
                col.iter_mut().for_each(|v| *v = 0.0);
                usable[j] = false;
            } else {
                let f = libm::sqrt(nf) / nrm;
                col.iter_mut().for_each(|v| *v *= f);
            }
        }
        let ymean = y.iter().sum::<f64>() / nf;
        let yc = y.iter().map(|v| v - ymean).collect();
        Ok(Standardized { x: xs, y: yc, usable })
    }

    fn lambda_max(&self) -> f64 {
        let n = self.x.rows() as f64;
        (0..self.x.cols())
            .filter(|&j| self.usable[j])
            .map(|j| dot(self.x.column(j), &self.y).abs() / n)
            .fold(0.0, f64::max)
    }
}

#[inline]
fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

// Coordinate descent for (1/2n)‖y − Xβ‖² + λ‖β‖₁ on unit-scaled columns
// (XⱼᵀXⱼ = n), warm-started from `beta` with `resid = y − Xβ` maintained.
fn coordinate_descent(s: &Standardized, lambda: f64, beta: &mut [f64], resid: &mut [f64]) -> Result<()> {
    let n = s.x.rows() as f64;
    let m = s.x.cols();
    let mut full_pass = true;
    for _ in 0..LASSO_MAX_SWEEPS {
        let mut max_change = 0.0f64;
        for j in 0..m {
            if !s.usable[j] || (!full_pass && beta[j] == 0.0) {
                continue;
            }
            let col = s.x.column(j);
            let old = beta[j];
            let new = soft_threshold(old + dot(col, resid) / n, lambda);
            if new != old {
                axpy(old - new, col, resid);
                beta[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        if max_change < LASSO_TOL {
            if full_pass {
                return Ok(());
            }
            // Active set converged; confirm with a sweep over every variable.
            full_pass = true;
        } else {
            full_pass = false;
        }
    }
    Err(Error::NoConvergence {
        lambda,
        iterations: LASSO_MAX_SWEEPS,
    })
}

/// Lasso solutions along a decreasing `lambdas` grid with warm starts.
///
/// Columns of `x` are centered and scaled to norm `√n` and `y` is centered
/// before fitting; the returned coefficients are on that standardized scale.
/// Constant columns always get a zero coefficient.
pub fn lasso_path(x: &Matrix, y: &[f64], lambdas: &[f64]) -> Result<Vec<Vec<f64>>> {
    let s = Standardized::new(x, y)?;
    let mut beta = vec![0.0; x.cols()];
    let mut resid = s.y.clone();
    let mut path = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        coordinate_descent(&s, lambda, &mut beta, &mut resid)?;
        path.push(beta.clone());
    }
    Ok(path)
}

/// `λ_max = maxⱼ |XⱼᵀY| / n` on the standardized data.
pub fn lambda_max(x: &Matrix, y: &[f64]) -> Result<f64> {
    Ok(Standardized::new(x, y)?.lambda_max())
}

/// The calibration grid: [`LASSO_GRID_LEN`] log-spaced values from `λ_max`
/// down to `LASSO_GRID_RATIO · λ_max`.
pub fn lambda_grid(lambda_max: f64) -> Vec<f64> {
    let last = (LASSO_GRID_LEN - 1) as f64;
    (0..LASSO_GRID_LEN)
        .map(|i| lambda_max * libm::pow(LASSO_GRID_RATIO, i as f64 / last))
        .collect()
}

/// Lasso selection of (at most) `k` variables.
///
/// Walks the calibration grid from `λ_max` downwards and stops at the first
/// λ whose support has at least `k` variables; an overshooting support is
/// trimmed to the `k` largest absolute standardized coefficients. If no grid
/// point reaches `k`, the support at the smallest λ is returned.
pub fn lasso_select(x: &Matrix, y: &[f64], k: usize) -> Result<SelectedSet> {
    let cap = capacity(x.rows());
    if k < 1 || k > cap {
        return Err(Error::CapacityExceeded {
            requested: k,
            capacity: cap,
        });
    }
    let s = Standardized::new(x, y)?;
    let lmax = s.lambda_max();
    if lmax <= 0.0 {
        return Ok(SelectedSet::default());
    }
    let mut beta = vec![0.0; x.cols()];
    let mut resid = s.y.clone();
    for lambda in lambda_grid(lmax) {
        coordinate_descent(&s, lambda, &mut beta, &mut resid)?;
        if beta.iter().filter(|&&b| b != 0.0).count() >= k {
            break;
        }
    }
    let mut support: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
    // Largest magnitude first; index breaks ties.
    support.sort_by(|&a, &b| beta[b].abs().total_cmp(&beta[a].abs()).then(a.cmp(&b)));
    support.truncate(k);
    Ok(SelectedSet::new(support))
}
