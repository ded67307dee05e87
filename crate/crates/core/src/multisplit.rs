//! Multisplit p-values: per-split OLS t-tests on the selected variables,
//! Bonferroni adjustment by the selection size, and quantile aggregation
//! over splits.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::DesignData;
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::selection::{SelectedSet, Selector};
use crate::special::student_t_two_sided;
use crate::stats::{make_splits, SplitPlan};

/// Default lower bound of the aggregation quantile range.
pub const DEFAULT_GAMMA_MIN: f64 = 0.05;

/// Raw, adjusted and aggregated Multisplit p-values.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueTable {
    /// `Q × m`, row-major.
    pub raw: Vec<Vec<f64>>,
    /// `Q × m`, row-major.
    pub adjusted: Vec<Vec<f64>>,
    pub aggregated: Vec<f64>,
    pub gamma_min: f64,
}

impl PValueTable {
    pub fn q(&self) -> usize {
        self.raw.len()
    }

    pub fn m(&self) -> usize {
        self.aggregated.len()
    }

    /// Variables with aggregated p-value at most `alpha`.
    pub fn rejected(&self, alpha: f64) -> Vec<usize> {
        (0..self.m()).filter(|&j| self.aggregated[j] <= alpha).collect()
    }
}

/// Two-sided OLS t-test p-values for each column of `x_out`.
///
/// An intercept column is fitted alongside the given columns, so the residual
/// degrees of freedom are `rows − cols − 1`.
pub fn ols_pvalues(y_out: &[f64], x_out: &Matrix) -> Result<Vec<f64>> {
    let (n, k) = (x_out.rows(), x_out.cols());
    if y_out.len() != n {
        return Err(Error::DimensionMismatch {
            what: "response length vs design rows",
            expected: n,
            found: y_out.len(),
        });
    }
    let df = n as i64 - k as i64 - 1;
    if df <= 0 {
        return Err(Error::NonPositiveDf(df));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let design = Matrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { x_out.get(i, j - 1) });
    let chol = Cholesky::new(&design.gram())?;
    let coef = chol.solve(&design.tr_mat_vec(y_out));
    let fit = design.mat_vec(&coef);
    let rss: f64 = y_out.iter().zip(&fit).map(|(y, f)| (y - f) * (y - f)).sum();
    let sigma2 = rss / df as f64;
    let inv_diag = chol.inverse_diag();
    Ok((1..=k)
        .map(|c| {
            if coef[c] == 0.0 {
                return 1.0;
            }
            let se = libm::sqrt(sigma2 * inv_diag[c]);
            if se == 0.0 {
                return 0.0;
            }
            student_t_two_sided(coef[c] / se, df as f64)
        })
        .collect())
}

/// `min(|A^q| · raw, 1)` entrywise, one row per split.
pub fn adjust(raw: &[Vec<f64>], selections: &[SelectedSet]) -> Vec<Vec<f64>> {
    raw.iter()
        .zip(selections)
        .map(|(row, sel)| {
            let size = sel.len() as f64;
            row.iter().map(|&p| (size * p).min(1.0)).collect()
        })
        .collect()
}

/// Quantile aggregation of one variable's adjusted p-values over splits:
/// `min{1, (1 − ln γ_min) · inf_{γ ∈ (γ_min, 1)} Q(γ)}` where `Q(γ)` is the
/// lower empirical γ-quantile of `{p^q / γ}` capped at 1.
///
/// The empirical quantile is the `⌈γQ⌉`-th smallest value, so on each
/// interval `((k−1)/Q, k/Q]` the infimum is `p_(k) · Q / k`; only `k` with
/// `k/Q > γ_min` contribute.
///
/// # Panics
///
/// If `adjusted` is empty or `gamma_min` is outside `(0, 1)`.
pub fn aggregate(adjusted: &[f64], gamma_min: f64) -> f64 {
    assert!(!adjusted.is_empty(), "aggregate needs at least one split");
    assert!(gamma_min > 0.0 && gamma_min < 1.0, "gamma_min must lie in (0, 1)");
    let q = adjusted.len();
    let mut sorted = adjusted.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k_min = first_rank_above(gamma_min, q);
    let inf = (k_min..=q)
        .map(|k| (sorted[k - 1] * q as f64 / k as f64).min(1.0))
        .fold(f64::INFINITY, f64::min);
    ((1.0 - libm::log(gamma_min)) * inf).min(1.0)
}

// Smallest k ≥ 1 with k/q > gamma_min, treating γ_min·q within 1e-9 of an
// integer as that integer.
fn first_rank_above(gamma_min: f64, q: usize) -> usize {
    let g = gamma_min * q as f64;
    let r = libm::round(g);
    let base = if (g - r).abs() < 1e-9 { r } else { libm::floor(g) };
    (base as usize + 1).min(q)
}

/// Runs the Multisplit procedure on an existing split plan.
pub fn multisplit_from_plan(data: &DesignData, plan: &SplitPlan, gamma_min: f64) -> Result<PValueTable> {
    if !(gamma_min > 0.0 && gamma_min < 1.0) {
        return Err(Error::InvalidArgument("gamma_min must lie in (0, 1)"));
    }
    if plan.n() != data.n() {
        return Err(Error::DimensionMismatch {
            what: "split plan vs observations",
            expected: data.n(),
            found: plan.n(),
        });
    }
    let m = data.m();
    let mut raw = Vec::with_capacity(plan.q());
    for (split, sel) in plan.splits().iter().zip(plan.selections()) {
        let mut row = vec![1.0; m];
        if !sel.is_empty() {
            let x_out = data.x().select(&split.outer, sel.indices());
            let y_out: Vec<f64> = split.outer.iter().map(|&i| data.y()[i]).collect();
            for (&j, p) in sel.indices().iter().zip(ols_pvalues(&y_out, &x_out)?) {
                row[j] = p;
            }
        }
        raw.push(row);
    }
    let adjusted = adjust(&raw, plan.selections());
    let aggregated = (0..m)
        .map(|j| {
            let col: Vec<f64> = adjusted.iter().map(|row| row[j]).collect();
            aggregate(&col, gamma_min)
        })
        .collect();
    Ok(PValueTable {
        raw,
        adjusted,
        aggregated,
        gamma_min,
    })
}

/// Full Multisplit pipeline; uses the same split machinery (and therefore
/// the same splits for the same seed) as the sign-flip statistics.
pub fn multisplit_run(
    data: &DesignData,
    q: usize,
    selector: &Selector,
    alpha: f64,
    gamma_min: f64,
    seed: u64,
) -> Result<(PValueTable, Vec<usize>)> {
    let plan = make_splits(data, q, selector, seed)?;
    let table = multisplit_from_plan(data, &plan, gamma_min)?;
    let rejected = table.rejected(alpha);
    Ok((table, rejected))
}
