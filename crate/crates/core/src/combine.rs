//! Subset tests built from a [`StatMatrix`], maxT multiplicity correction,
//! and a brute-force closed-testing bound on the number of true discoveries.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flip::{decide, rejection_count};
use crate::linalg::check_index_set;
use crate::stats::StatMatrix;

/// Largest subset accepted by [`closed_testing_tdp`].
pub const MAX_TDP_SUBSET: usize = 20;

/// Coordinatewise increasing combining function.
#[derive(Debug, Clone, PartialEq)]
pub enum Combiner {
    Max,
    Sum,
    /// Weighted sum; one nonnegative weight per subset member, in subset order.
    WeightedSum(Vec<f64>),
}

impl Combiner {
    fn validate(&self, len: usize) -> Result<()> {
        if let Combiner::WeightedSum(w) = self {
            if w.len() != len {
                return Err(Error::InvalidWeights("one weight per subset member is required"));
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidWeights("weights must be finite and nonnegative"));
            }
            if w.iter().all(|&v| v == 0.0) {
                return Err(Error::InvalidWeights("weights must not all be zero"));
            }
        }
        Ok(())
    }

    /// Applies the combiner to values that are already nonnegative.
    #[inline]
    fn apply(&self, abs: impl Iterator<Item = f64>) -> f64 {
        match self {
            Combiner::Max => abs.fold(0.0, f64::max),
            Combiner::Sum => abs.sum(),
            Combiner::WeightedSum(w) => abs.zip(w).map(|(a, w)| a * w).sum(),
        }
    }
}

/// Result of testing one intersection hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetResult {
    pub subset: Vec<usize>,
    pub combined: Vec<f64>,
    pub pvalue: f64,
    pub reject: bool,
}

fn check_subset(g: &StatMatrix, subset: &[usize]) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    check_index_set(subset, g.m())
}

/// Combined statistic per transformation: `g(|G_{b,s1}|, …, |G_{b,sk}|)`.
pub fn combine(g: &StatMatrix, subset: &[usize], combiner: &Combiner) -> Result<Vec<f64>> {
    check_subset(g, subset)?;
    combiner.validate(subset.len())?;
    Ok((0..g.b())
        .map(|b| combiner.apply(subset.iter().map(|&j| g.get(b, j).abs())))
        .collect())
}

/// Tests `H_S` by applying the sign-flip decision rule to the combined
/// statistics.
pub fn subset_test(g: &StatMatrix, subset: &[usize], combiner: &Combiner, alpha: f64) -> Result<SubsetResult> {
    check_alpha(alpha)?;
    let combined = combine(g, subset, combiner)?;
    let mut work = combined.clone();
    let d = decide(&mut work, alpha);
    Ok(SubsetResult {
        subset: subset.to_vec(),
        combined,
        pvalue: d.pvalue,
        reject: d.reject,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidArgument("alpha must lie in [0, 1)"))
    }
}

/// maxT-adjusted p-values and rejections for every variable.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxTResult {
    pub adjusted: Vec<f64>,
    pub rejected: Vec<usize>,
}

/// maxT multiplicity correction on all columns of `g`.
///
/// Single-step: `p_j = #{b : max_k |G_bk| ≥ |G_1j|} / B`. With `step_down`
/// the maximum runs only over variables not more significant than `j`
/// (ordered by `|G_1j|`), and adjusted p-values are made monotone. `H_j` is
/// rejected when `p_j ≤ ⌊αB⌋/B`.
pub fn maxt_adjusted(g: &StatMatrix, alpha: f64, step_down: bool) -> Result<MaxTResult> {
    check_alpha(alpha)?;
    let (b, m) = (g.b(), g.m());
    let observed: Vec<f64> = (0..m).map(|j| g.get(0, j).abs()).collect();
    let mut adjusted = vec![1.0; m];
    if m == 0 {
        return Ok(MaxTResult {
            adjusted,
            rejected: vec![],
        });
    }
    if step_down {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &c| observed[c].total_cmp(&observed[a]).then(a.cmp(&c)));
        // Successive maxima from the least significant variable upwards.
        let mut running = vec![0.0f64; b];
        let mut raw = vec![0.0; m];
        for &j in order.iter().rev() {
            for (row, r) in running.iter_mut().enumerate() {
                *r = r.max(g.get(row, j).abs());
            }
            raw[j] = running.iter().filter(|&&v| v >= observed[j]).count() as f64 / b as f64;
        }
        let mut floor = 0.0f64;
        for &j in &order {
            floor = floor.max(raw[j]);
            adjusted[j] = floor;
        }
    } else {
        let row_max: Vec<f64> = (0..b)
            .map(|row| (0..m).map(|j| g.get(row, j).abs()).fold(0.0, f64::max))
            .collect();
        for j in 0..m {
            adjusted[j] = row_max.iter().filter(|&&v| v >= observed[j]).count() as f64 / b as f64;
        }
    }
    let threshold = rejection_count(alpha, b) as f64 / b as f64;
    let rejected = (0..m).filter(|&j| adjusted[j] <= threshold).collect();
    Ok(MaxTResult { adjusted, rejected })
}

/// Lower `(1−α)` confidence bound for the number of false hypotheses
/// (true discoveries) in `subset`, by closed testing over the subsets of
/// `subset`.
///
/// `H_U` is rejected by the closed procedure when every `V` with
/// `U ⊆ V ⊆ subset` is rejected by [`subset_test`]. The bound is
/// `|S| − max{|U| : H_U not rejected}`, which reduces to `|S|` minus the size
/// of the largest locally non-rejected `V`. Enumerates `2^|S|` subsets, so
/// `|S| ≤ 20`.
pub fn closed_testing_tdp(g: &StatMatrix, subset: &[usize], combiner: &Combiner, alpha: f64) -> Result<usize> {
    check_alpha(alpha)?;
    check_subset(g, subset)?;
    let s = subset.len();
    if s > MAX_TDP_SUBSET {
        return Err(Error::SubsetTooLarge(s));
    }
    combiner.validate(s)?;
    let weights: Option<&[f64]> = match combiner {
        Combiner::WeightedSum(w) => Some(w),
        _ => None,
    };
    // Absolute statistics of the subset, row-major B × s.
    let b = g.b();
    let abs: Vec<f64> = (0..b)
        .flat_map(|row| subset.iter().map(move |&j| g.get(row, j).abs()))
        .collect();
    let mut largest_accepted = 0usize;
    let mut combined = vec![0.0; b];
    for mask in 1u32..(1u32 << s) {
        let size = mask.count_ones() as usize;
        if size <= largest_accepted {
            continue;
        }
        for (row, c) in combined.iter_mut().enumerate() {
            let vals = &abs[row * s..(row + 1) * s];
            let members = (0..s).filter(|&k| mask & (1 << k) != 0);
            *c = match (combiner, weights) {
                (Combiner::Max, _) => members.map(|k| vals[k]).fold(0.0, f64::max),
                (_, Some(w)) => members.map(|k| vals[k] * w[k]).sum(),
                _ => members.map(|k| vals[k]).sum(),
            };
        }
        if !decide(&mut combined, alpha).reject {
            largest_accepted = size;
        }
    }
    Ok(s - largest_accepted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flip::flip_test;
    use crate::rng::rng_from_seed;
    use crate::stats::Method;
    use proptest::prelude::*;
    use rand::Rng;

    fn matrix_from_rows(rows: &[&[f64]]) -> StatMatrix {
        let m = rows[0].len();
        let cols = (0..m).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        StatMatrix::from_columns(rows.len(), Method::Approximate, cols).unwrap()
    }

    fn random_matrix(b: usize, m: usize, seed: u64, boost: &[usize]) -> StatMatrix {
        let mut rng = rng_from_seed(seed);
        let cols = (0..m)
            .map(|j| {
                (0..b)
                    .map(|row| {
                        let v: f64 = rng.random_range(-1.0..1.0);
                        if row == 0 && boost.contains(&j) {
                            v.signum() * 3.0
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        StatMatrix::from_columns(b, Method::Approximate, cols).unwrap()
    }

    #[test]
    fn singleton_combination_is_absolute_column() {
        let g = random_matrix(10, 3, 1, &[]);
        for c in [Combiner::Max, Combiner::Sum, Combiner::WeightedSum(vec![1.0])] {
            let out = combine(&g, &[2], &c).unwrap();
            for b in 0..10 {
                assert_eq!(out[b], g.get(b, 2).abs());
            }
        }
    }

    #[test]
    fn max_of_row() {
        let g = matrix_from_rows(&[&[-3.0, 2.0]]);
        assert_eq!(combine(&g, &[0, 1], &Combiner::Max).unwrap(), vec![3.0]);
    }

    #[test]
    fn sum_matches_recomputation() {
        for seed in 0..20 {
            let g = random_matrix(4, 3, seed, &[]);
            let s = [0usize, 2];
            let out = combine(&g, &s, &Combiner::Sum).unwrap();
            for b in 0..4 {
                let mut direct = 0.0;
                for &j in &s {
                    direct += g.get(b, j).abs();
                }
                assert_eq!(out[b], direct);
            }
        }
    }

    #[test]
    fn bad_inputs() {
        let g = random_matrix(4, 3, 1, &[]);
        assert_eq!(combine(&g, &[], &Combiner::Max), Err(Error::EmptySubset));
        assert!(combine(&g, &[3], &Combiner::Max).is_err());
        assert!(combine(&g, &[0, 1], &Combiner::WeightedSum(vec![1.0])).is_err());
        assert!(combine(&g, &[0, 1], &Combiner::WeightedSum(vec![0.0, 0.0])).is_err());
        assert!(combine(&g, &[0, 1], &Combiner::WeightedSum(vec![-1.0, 2.0])).is_err());
        let big = random_matrix(4, 25, 1, &[]);
        let s: Vec<usize> = (0..21).collect();
        assert_eq!(
            closed_testing_tdp(&big, &s, &Combiner::Sum, 0.05),
            Err(Error::SubsetTooLarge(21))
        );
    }

    #[test]
    fn zero_columns_never_reject() {
        let g = StatMatrix::from_columns(20, Method::Exact, vec![vec![0.0; 20]; 3]).unwrap();
        let r = subset_test(&g, &[0, 1, 2], &Combiner::Sum, 0.05).unwrap();
        assert!(!r.reject);
        assert_eq!(closed_testing_tdp(&g, &[0, 1, 2], &Combiner::Sum, 0.05).unwrap(), 0);
    }

    #[test]
    fn singleton_subset_is_individual_test() {
        let g = random_matrix(40, 4, 3, &[1]);
        for j in 0..4 {
            let s = subset_test(&g, &[j], &Combiner::Max, 0.05).unwrap();
            let d = flip_test(g.column(j), 0.05);
            assert_eq!((s.pvalue, s.reject), (d.pvalue, d.reject));
        }
        assert!(subset_test(&g, &[1], &Combiner::Sum, 0.05).unwrap().reject);
        assert_eq!(closed_testing_tdp(&g, &[1], &Combiner::Sum, 0.05).unwrap(), 1);
    }

    #[test]
    fn maxt_single_variable_is_flip_test() {
        let g = random_matrix(50, 1, 4, &[0]);
        let r = maxt_adjusted(&g, 0.05, false).unwrap();
        assert_eq!(r.adjusted[0], flip_test(g.column(0), 0.05).pvalue);
        assert_eq!(r.rejected, vec![0]);
    }

    #[test]
    fn step_down_is_no_less_powerful() {
        for seed in 0..30 {
            let g = random_matrix(100, 8, seed, &[0, 3]);
            let single = maxt_adjusted(&g, 0.05, false).unwrap();
            let down = maxt_adjusted(&g, 0.05, true).unwrap();
            for j in 0..8 {
                assert!(down.adjusted[j] <= single.adjusted[j] + 1e-15);
            }
        }
    }

    // Literal closed testing: H_U is rejected iff every superset within S is
    // locally rejected; the bound is |S| minus the largest non-rejected U.
    fn tdp_oracle(g: &StatMatrix, s: &[usize], c: &Combiner, alpha: f64) -> usize {
        let k = s.len();
        let local = |mask: u32| {
            let members: Vec<usize> = (0..k).filter(|&i| mask & (1 << i) != 0).map(|i| s[i]).collect();
            let comb = match c {
                Combiner::WeightedSum(w) => {
                    let ws: Vec<f64> = (0..k).filter(|&i| mask & (1 << i) != 0).map(|i| w[i]).collect();
                    Combiner::WeightedSum(ws)
                }
                other => other.clone(),
            };
            subset_test(g, &members, &comb, alpha).unwrap().reject
        };
        let mut best = 0;
        for u in 1u32..(1 << k) {
            let closed_reject = (1u32..(1 << k)).filter(|v| v & u == u).all(local);
            if !closed_reject {
                best = best.max(u.count_ones() as usize);
            }
        }
        k - best
    }

    #[test]
    fn tdp_matches_literal_closed_testing() {
        for seed in 0..40 {
            let g = random_matrix(40, 6, seed, &[0, 2, 5]);
            let s = [0usize, 1, 2, 5];
            for c in [
                Combiner::Max,
                Combiner::Sum,
                Combiner::WeightedSum(vec![1.0, 0.5, 2.0, 1.0]),
            ] {
                assert_eq!(
                    closed_testing_tdp(&g, &s, &c, 0.1).unwrap(),
                    tdp_oracle(&g, &s, &c, 0.1),
                    "seed {seed}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn maxt_adjusted_dominates_raw(seed in any::<u64>(), step_down in any::<bool>()) {
            let g = random_matrix(30, 5, seed, &[1]);
            let r = maxt_adjusted(&g, 0.05, step_down).unwrap();
            for j in 0..5 {
                prop_assert!(r.adjusted[j] >= flip_test(g.column(j), 0.05).pvalue);
            }
        }

        // If maxT rejects some j in S, the max-combined test of S rejects too.
        #[test]
        fn maxt_rejection_implies_subset_rejection(seed in any::<u64>(), mask in 1u32..64) {
            let g = random_matrix(40, 6, seed, &[2, 4]);
            let s: Vec<usize> = (0..6).filter(|&j| mask & (1 << j) != 0).collect();
            let mt = maxt_adjusted(&g, 0.05, false).unwrap();
            if mt.rejected.iter().any(|j| s.contains(j)) {
                prop_assert!(subset_test(&g, &s, &Combiner::Max, 0.05).unwrap().reject);
            }
        }

        #[test]
        fn combiner_is_monotone(seed in any::<u64>(), j in 0usize..4, bump in 0.0f64..2.0) {
            let g = random_matrix(8, 4, seed, &[]);
            let s = [0usize, 1, 2, 3];
            let mut bigger = g.clone();
            bigger.scale_column(j, 1.0 + bump);
            for c in [Combiner::Max, Combiner::Sum, Combiner::WeightedSum(vec![0.5, 1.0, 0.0, 2.0])] {
                let a = combine(&g, &s, &c).unwrap();
                let b = combine(&bigger, &s, &c).unwrap();
                for row in 0..8 {
                    prop_assert!(b[row] >= a[row]);
                }
            }
        }

        #[test]
        fn tdp_is_bounded_and_monotone_in_alpha(seed in any::<u64>()) {
            let g = random_matrix(40, 5, seed, &[0, 1]);
            let s = [0usize, 1, 2, 3];
            let loose = closed_testing_tdp(&g, &s, &Combiner::Sum, 0.2).unwrap();
            let strict = closed_testing_tdp(&g, &s, &Combiner::Sum, 0.05).unwrap();
            prop_assert!(strict <= loose);
            prop_assert!(loose <= s.len());
        }

        #[test]
        fn column_scaling_keeps_decisions(seed in any::<u64>(), c in 0.01f64..100.0) {
            let g = random_matrix(40, 3, seed, &[0]);
            let mut scaled = g.clone();
            scaled.scale_column(0, c);
            let a = subset_test(&g, &[0], &Combiner::Max, 0.05).unwrap();
            let b = subset_test(&scaled, &[0], &Combiner::Max, 0.05).unwrap();
            prop_assert_eq!(a.reject, b.reject);
        }
    }
}
