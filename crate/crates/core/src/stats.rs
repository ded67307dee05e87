//! Split-based sign-flip statistics for every variable.
//!
//! Each of the `Q` splits partitions the observations into a selection half
//! `D_in` and a testing half `D_out`. For a variable `j` selected in split
//! `q`, the split's residual maker `R^q` is the residual maker of the selected
//! design without `j`, computed on `D_out` and zero elsewhere. With one global
//! set of sign flips `F_b`:
//!
//! * the exact statistic sums per-split scores, `u_b = n^{-1/2} Σ_q R^q F_b R^q X_j`;
//! * the approximate statistic sums the residual makers first,
//!   `v_b = n^{-1/2} R̄ F_b R̄ X_j` with `R̄ = Σ_q R^q`.
//!
//! Entry `(b, j)` of the resulting [`StatMatrix`] is `wᵀY / ‖w‖` (zero when
//! `‖w‖ ≤ 1e-12`), for `w = u_b` or `v_b`.
//!
//! Residual makers are only ever formed on their nonzero block: the exact
//! method keeps one `|D_out| × |D_out|` block per split selecting `j`, the
//! approximate method a single accumulator over the union of those `D_out`.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::DesignData;
use crate::error::{Error, Result};
use crate::flip::{FlipSet, ZERO_NORM_TOL};
use crate::linalg::{dot, residual_maker, Matrix};
use crate::rng::{derive_seed, rng_from_seed, Stream};
use crate::selection::{capacity, SelectedSet, Selector};

/// One random partition of the observations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    /// Rows used for variable selection, sorted.
    pub inner: Vec<usize>,
    /// Rows used for the scores, sorted.
    pub outer: Vec<usize>,
}

/// `Q` splits with the variables selected in each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    n: usize,
    seed: u64,
    splits: Vec<Split>,
    selections: Vec<SelectedSet>,
}

impl SplitPlan {
    /// Assembles a plan from explicit parts, checking that every split
    /// partitions `0..n` and that selections stay within `⌊|D_out|/2⌋`.
    pub fn from_parts(n: usize, m: usize, splits: Vec<Split>, selections: Vec<SelectedSet>, seed: u64) -> Result<Self> {
        if splits.len() != selections.len() {
            return Err(Error::DimensionMismatch {
                what: "selections vs splits",
                expected: splits.len(),
                found: selections.len(),
            });
        }
        for (split, sel) in splits.iter().zip(&selections) {
            let mut all: Vec<usize> = split.inner.iter().chain(&split.outer).copied().collect();
            if all.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "split sizes vs observations",
                    expected: n,
                    found: all.len(),
                });
            }
            crate::linalg::check_index_set(&all, n)?;
            all.clear();
            if split.inner.len().abs_diff(split.outer.len()) > 1 {
                return Err(Error::InvalidArgument("split halves differ in size by more than one"));
            }
            if let Some(&j) = sel.indices().last() {
                if j >= m {
                    return Err(Error::IndexOutOfRange { index: j, size: m });
                }
            }
            let cap = capacity(split.outer.len());
            if sel.len() > cap {
                return Err(Error::CapacityExceeded {
                    requested: sel.len(),
                    capacity: cap,
                });
            }
        }
        Ok(SplitPlan {
            n,
            seed,
            splits,
            selections,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.splits.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn selections(&self) -> &[SelectedSet] {
        &self.selections
    }
}

/// Draws `q` uniform partitions (`|D_in| = ⌈n/2⌉`, `|D_out| = ⌊n/2⌋`) and runs
/// `selector` on the `D_in` rows of each. Splits and selection randomness use
/// separate streams derived from `seed`.
pub fn make_splits(data: &DesignData, q: usize, selector: &Selector, seed: u64) -> Result<SplitPlan> {
    let n = data.n();
    if q < 1 {
        return Err(Error::InvalidArgument("at least one split is required"));
    }
    if n < 4 {
        return Err(Error::InvalidArgument("at least four observations are required"));
    }
    let cap = capacity(n / 2);
    if selector.target_size() > cap {
        return Err(Error::CapacityExceeded {
            requested: selector.target_size(),
            capacity: cap,
        });
    }
    let mut split_rng = rng_from_seed(derive_seed(seed, Stream::Splits));
    let mut select_rng = rng_from_seed(derive_seed(seed, Stream::Selection));
    let all_cols: Vec<usize> = (0..data.m()).collect();
    let mut splits = Vec::with_capacity(q);
    let mut selections = Vec::with_capacity(q);
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..q {
        perm.shuffle(&mut split_rng);
        let mut outer = perm[..n / 2].to_vec();
        let mut inner = perm[n / 2..].to_vec();
        outer.sort_unstable();
        inner.sort_unstable();
        let x_in = data.x().select(&inner, &all_cols);
        let y_in: Vec<f64> = inner.iter().map(|&i| data.y()[i]).collect();
        selections.push(selector.select(&x_in, &y_in, &mut select_rng)?);
        splits.push(Split { inner, outer });
    }
    SplitPlan::from_parts(n, data.m(), splits, selections, seed)
}

/// Which construction produced a [`StatMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Exact,
    Approximate,
}

/// Execution policy for the per-variable loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    /// Rayon parallel-for over variables when the `parallel` feature is on,
    /// sequential otherwise. Results are identical either way.
    #[default]
    Parallel,
}

/// `B × m` standardized statistics; row 0 is the identity transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct StatMatrix {
    b: usize,
    m: usize,
    method: Method,
    // Column-major: values[j * b + row].
    values: Vec<f64>,
}

impl StatMatrix {
    /// Builds a matrix from its columns.
    pub fn from_columns(b: usize, method: Method, columns: Vec<Vec<f64>>) -> Result<Self> {
        let m = columns.len();
        let mut values = Vec::with_capacity(b * m);
        for (j, col) in columns.into_iter().enumerate() {
            if col.len() != b {
                return Err(Error::DimensionMismatch {
                    what: "statistic column length",
                    expected: b,
                    found: col.len(),
                });
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row, col: j });
            }
            values.extend(col);
        }
        Ok(StatMatrix { b, m, method, values })
    }

    /// Number of transformations (rows).
    pub fn b(&self) -> usize {
        self.b
    }

    /// Number of variables (columns).
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn method(&self) -> Method {
        self.method
    }

    #[inline]
    pub fn get(&self, row: usize, j: usize) -> f64 {
        self.values[j * self.b + row]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.b..(j + 1) * self.b]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        (0..self.m).map(|j| self.get(row, j)).collect()
    }

    /// Multiplies column `j` by `c`.
    pub fn scale_column(&mut self, j: usize, c: f64) {
        let b = self.b;
        self.values[j * b..(j + 1) * b].iter_mut().for_each(|v| *v *= c);
    }
}

fn check_compat(data: &DesignData, plan: &SplitPlan, flips: &FlipSet) -> Result<()> {
    if plan.n() != data.n() {
        return Err(Error::DimensionMismatch {
            what: "split plan vs observations",
            expected: data.n(),
            found: plan.n(),
        });
    }
    if flips.n() != data.n() {
        return Err(Error::DimensionMismatch {
            what: "flip length vs observations",
            expected: data.n(),
            found: flips.n(),
        });
    }
    for sel in plan.selections() {
        if let Some(&j) = sel.indices().last() {
            if j >= data.m() {
                return Err(Error::IndexOutOfRange {
                    index: j,
                    size: data.m(),
                });
            }
        }
    }
    Ok(())
}

/// Nonzero block of `R^q` for variable `j`: residual maker of
/// `X[D_out, A^q \ {j}]`.
pub fn split_residual_block(data: &DesignData, split: &Split, selected: &SelectedSet, j: usize) -> Result<Matrix> {
    let others: Vec<usize> = selected.indices().iter().copied().filter(|&c| c != j).collect();
    residual_maker(&data.x().select(&split.outer, &others))
}

/// Splits in which `j` is selected.
fn splits_selecting(plan: &SplitPlan, j: usize) -> impl Iterator<Item = (&Split, &SelectedSet)> {
    plan.splits()
        .iter()
        .zip(plan.selections())
        .filter(move |(_, sel)| sel.contains(j))
}

// `wᵀy / ‖w‖` with the zero branch, where `w` already carries the n^{-1/2}.
#[inline]
fn standardized(w: &[f64], y: &[f64]) -> f64 {
    let nrm = libm::sqrt(dot(w, w));
    if nrm <= ZERO_NORM_TOL {
        0.0
    } else {
        dot(w, y) / nrm
    }
}

fn exact_column(data: &DesignData, plan: &SplitPlan, flips: &FlipSet, j: usize) -> Result<Vec<f64>> {
    let n = data.n();
    let scale = 1.0 / libm::sqrt(n as f64);
    let xj = data.x().column(j);
    // Cached per split selecting j: (D_out rows, R^q block, R^q X_j on D_out).
    let mut blocks: Vec<(&[usize], Matrix, Vec<f64>)> = Vec::new();
    for (split, sel) in splits_selecting(plan, j) {
        let r = split_residual_block(data, split, sel, j)?;
        let x_out: Vec<f64> = split.outer.iter().map(|&i| xj[i]).collect();
        let rx = r.mat_vec(&x_out);
        blocks.push((&split.outer, r, rx));
    }
    if blocks.is_empty() {
        return Ok(vec![0.0; flips.b()]);
    }
    let mut u = vec![0.0; n];
    let mut flipped = Vec::new();
    let mut out = Vec::with_capacity(flips.b());
    for b in 0..flips.b() {
        u.iter_mut().for_each(|v| *v = 0.0);
        for (rows, r, rx) in &blocks {
            flipped.resize(rows.len(), 0.0);
            flips.apply_on(b, rows, rx, &mut flipped);
            let contrib = r.mat_vec(&flipped);
            for (&i, c) in rows.iter().zip(contrib) {
                u[i] += scale * c;
            }
        }
        out.push(standardized(&u, data.y()));
    }
    Ok(out)
}

fn approx_column(data: &DesignData, plan: &SplitPlan, flips: &FlipSet, j: usize) -> Result<Vec<f64>> {
    let n = data.n();
    let scale = 1.0 / libm::sqrt(n as f64);
    // Support of R̄: union of D_out over the splits selecting j.
    let mut in_support = vec![false; n];
    for (split, _) in splits_selecting(plan, j) {
        split.outer.iter().for_each(|&i| in_support[i] = true);
    }
    let support: Vec<usize> = (0..n).filter(|&i| in_support[i]).collect();
    if support.is_empty() {
        return Ok(vec![0.0; flips.b()]);
    }
    let mut pos = vec![usize::MAX; n];
    for (k, &i) in support.iter().enumerate() {
        pos[i] = k;
    }
    let s = support.len();
    let mut rbar = Matrix::zeros(s, s);
    for (split, sel) in splits_selecting(plan, j) {
        let r = split_residual_block(data, split, sel, j)?;
        for (bj, &oj) in split.outer.iter().enumerate() {
            let dst = rbar.column_mut(pos[oj]);
            for (bi, &oi) in split.outer.iter().enumerate() {
                dst[pos[oi]] += r.get(bi, bj);
            }
        }
    }
    let xj: Vec<f64> = support.iter().map(|&i| data.x().get(i, j)).collect();
    let y: Vec<f64> = support.iter().map(|&i| data.y()[i]).collect();
    let rx = rbar.mat_vec(&xj);
    let mut flipped = vec![0.0; s];
    let mut out = Vec::with_capacity(flips.b());
    for b in 0..flips.b() {
        flips.apply_on(b, &support, &rx, &mut flipped);
        let mut v = rbar.mat_vec(&flipped);
        v.iter_mut().for_each(|x| *x *= scale);
        out.push(standardized(&v, &y));
    }
    Ok(out)
}

fn build(data: &DesignData, plan: &SplitPlan, flips: &FlipSet, exec: Exec, method: Method) -> Result<StatMatrix> {
    check_compat(data, plan, flips)?;
    let column = |j: usize| match method {
        Method::Exact => exact_column(data, plan, flips, j),
        Method::Approximate => approx_column(data, plan, flips, j),
    };
    let columns: Result<Vec<Vec<f64>>> = match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..data.m()).into_par_iter().map(column).collect()
        }
        _ => (0..data.m()).map(column).collect(),
    };
    StatMatrix::from_columns(flips.b(), method, columns?)
}

/// Exact statistics (sum of per-split effective scores), in parallel when
/// available.
pub fn exact_stats(data: &DesignData, plan: &SplitPlan, flips: &FlipSet) -> Result<StatMatrix> {
    build(data, plan, flips, Exec::Parallel, Method::Exact)
}

pub fn exact_stats_with(data: &DesignData, plan: &SplitPlan, flips: &FlipSet, exec: Exec) -> Result<StatMatrix> {
    build(data, plan, flips, exec, Method::Exact)
}

/// Approximate statistics (scores from the summed residual makers), in
/// parallel when available. Each variable holds one accumulator matrix.
pub fn approx_stats(data: &DesignData, plan: &SplitPlan, flips: &FlipSet) -> Result<StatMatrix> {
    build(data, plan, flips, Exec::Parallel, Method::Approximate)
}

pub fn approx_stats_with(data: &DesignData, plan: &SplitPlan, flips: &FlipSet, exec: Exec) -> Result<StatMatrix> {
    build(data, plan, flips, exec, Method::Approximate)
}

/// Dispatches on `method`.
pub fn compute_stats(
    data: &DesignData,
    plan: &SplitPlan,
    flips: &FlipSet,
    method: Method,
    exec: Exec,
) -> Result<StatMatrix> {
    build(data, plan, flips, exec, method)
}
