//! Low-dimensional sign-flip score test for a single coefficient.
//!
//! For variable `j`, the effective score under flip `b` is
//! `T^b = n^{-1/2} X_jᵀ R F_b R Y`, with `R` the residual maker of the design
//! without column `j` and `F_b` a diagonal sign matrix (`F_1 = I`). The
//! standardized score divides the generating vector `R F_b R X_j` by its norm,
//! which makes the test exact for any `n`.

use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, residual_maker, Matrix};
use crate::rng::rng_from_seed;

/// Norm below which a score vector is treated as zero.
pub const ZERO_NORM_TOL: f64 = 1e-12;

/// `B` sign vectors of length `n`; the first is all `+1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlipSet {
    n: usize,
    b: usize,
    seed: u64,
    // Row-major, B × n.
    signs: Vec<i8>,
}

impl FlipSet {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of transformations, including the identity.
    pub fn b(&self) -> usize {
        self.b
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Signs of transformation `b` (0-based; `b = 0` is the identity).
    pub fn signs(&self, b: usize) -> &[i8] {
        &self.signs[b * self.n..(b + 1) * self.n]
    }

    /// Elementwise `F_b v`, restricted to the observations in `rows`
    /// (`v[k]` pairs with observation `rows[k]`).
    pub fn apply_on(&self, b: usize, rows: &[usize], v: &[f64], out: &mut [f64]) {
        let s = self.signs(b);
        for ((o, &x), &i) in out.iter_mut().zip(v).zip(rows) {
            *o = if s[i] < 0 { -x } else { x };
        }
    }

    /// Elementwise `F_b v` over all observations.
    pub fn apply(&self, b: usize, v: &[f64]) -> Vec<f64> {
        self.signs(b)
            .iter()
            .zip(v)
            .map(|(&s, &x)| if s < 0 { -x } else { x })
            .collect()
    }
}

/// Draws `b` sign vectors of length `n`; the first is the identity and the
/// remaining entries are i.i.d. uniform on `{-1, +1}`.
pub fn make_flips(n: usize, b: usize, seed: u64) -> Result<FlipSet> {
    if b < 1 {
        return Err(Error::InvalidB);
    }
    let mut rng = rng_from_seed(seed);
    let mut signs = Vec::with_capacity(n * b);
    signs.extend(core::iter::repeat_n(1i8, n));
    for _ in n..n * b {
        signs.push(if rng.random::<bool>() { 1 } else { -1 });
    }
    Ok(FlipSet { n, b, seed, signs })
}

/// Unit-norm rescaling of `t`, or the zero vector when `‖t‖ ≤ 1e-12`.
pub fn standardize(t: &[f64]) -> Vec<f64> {
    let nrm = norm(t);
    if nrm <= ZERO_NORM_TOL {
        alloc::vec![0.0; t.len()]
    } else {
        t.iter().map(|v| v / nrm).collect()
    }
}

fn check_inputs(x: &Matrix, j: usize, flips: &FlipSet) -> Result<()> {
    if j >= x.cols() {
        return Err(Error::IndexOutOfRange {
            index: j,
            size: x.cols(),
        });
    }
    if flips.n() != x.rows() {
        return Err(Error::DimensionMismatch {
            what: "flip length vs observations",
            expected: x.rows(),
            found: flips.n(),
        });
    }
    Ok(())
}

/// The generating vectors `t_b = n^{-1/2} R F_b R X_j`, one per flip.
pub fn score_vectors(x: &Matrix, j: usize, flips: &FlipSet) -> Result<Vec<Vec<f64>>> {
    check_inputs(x, j, flips)?;
    let n = x.rows();
    let r = residual_maker(&x.without_column(j))?;
    let rx = r.mat_vec(x.column(j));
    let scale = 1.0 / libm::sqrt(n as f64);
    Ok((0..flips.b())
        .map(|b| {
            let mut t = r.mat_vec(&flips.apply(b, &rx));
            t.iter_mut().for_each(|v| *v *= scale);
            t
        })
        .collect())
}

/// Effective scores `T^b = t_bᵀ Y` for `b = 1..B`.
pub fn effective_scores(x: &Matrix, y: &[f64], j: usize, flips: &FlipSet) -> Result<Vec<f64>> {
    check_response(x, y)?;
    Ok(score_vectors(x, j, flips)?.iter().map(|t| dot(t, y)).collect())
}

/// Standardized scores `standardize(t_b)ᵀ Y` for `b = 1..B`.
pub fn standardized_scores(x: &Matrix, y: &[f64], j: usize, flips: &FlipSet) -> Result<Vec<f64>> {
    check_response(x, y)?;
    Ok(score_vectors(x, j, flips)?
        .iter()
        .map(|t| dot(&standardize(t), y))
        .collect())
}

fn check_response(x: &Matrix, y: &[f64]) -> Result<()> {
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            what: "response length vs design rows",
            expected: x.rows(),
            found: y.len(),
        });
    }
    Ok(())
}

/// Outcome of a sign-flip test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestDecision {
    /// `|stat_1|`, the statistic of the identity transformation.
    pub statistic_observed: f64,
    /// 1-based rank `⌈(1−α)B⌉` of the critical value among the sorted statistics.
    pub critical_index: usize,
    pub critical_value: f64,
    /// `#{b : |stat_b| ≥ |stat_1|} / B`.
    pub pvalue: f64,
    pub reject: bool,
}

/// `⌈(1−α)B⌉`, guarded against round-off in the product.
pub fn critical_index(alpha: f64, b: usize) -> usize {
    let raw = (1.0 - alpha) * b as f64;
    let idx = libm::ceil(raw - 1e-9 * raw.max(1.0)) as usize;
    idx.clamp(1, b)
}

/// `⌊αB⌋`, guarded against round-off in the product.
pub fn rejection_count(alpha: f64, b: usize) -> usize {
    let raw = alpha * b as f64;
    libm::floor(raw + 1e-9 * raw.max(1.0)) as usize
}

/// Sign-flip decision rule: reject when `|stat_1|` strictly exceeds the
/// `⌈(1−α)B⌉`-th smallest absolute statistic. Ties never reject.
///
/// # Panics
///
/// If `stats` is empty or `alpha` lies outside `[0, 1)`.
pub fn flip_test(stats: &[f64], alpha: f64) -> TestDecision {
    assert!(!stats.is_empty(), "flip_test needs at least one statistic");
    assert!((0.0..1.0).contains(&alpha), "alpha must lie in [0, 1)");
    let mut abs: Vec<f64> = stats.iter().map(|s| s.abs()).collect();
    decide(&mut abs, alpha)
}

/// Same rule as [`flip_test`] on statistics that are already nonnegative
/// (e.g. combined statistics); sorts `stats` in place.
pub(crate) fn decide(stats: &mut [f64], alpha: f64) -> TestDecision {
    let b = stats.len();
    let observed = stats[0];
    let exceed = stats.iter().filter(|&&s| s >= observed).count();
    stats.sort_by(f64::total_cmp);
    let ci = critical_index(alpha, b);
    let critical_value = stats[ci - 1];
    TestDecision {
        statistic_observed: observed,
        critical_index: ci,
        critical_value,
        pvalue: exceed as f64 / b as f64,
        reject: observed > critical_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = rng_from_seed(seed);
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn gaussian_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    // Dense n × n arithmetic straight from the definition, with an explicit
    // Gauss-Jordan inverse of the Gram matrix.
    mod naive {
        use alloc::vec;
        use alloc::vec::Vec;

        pub type M = Vec<Vec<f64>>;

        pub fn mul(a: &M, b: &M) -> M {
            let (n, k, p) = (a.len(), b.len(), b[0].len());
            let mut out = vec![vec![0.0; p]; n];
            for i in 0..n {
                for j in 0..p {
                    out[i][j] = (0..k).map(|l| a[i][l] * b[l][j]).sum();
                }
            }
            out
        }

        pub fn transpose(a: &M) -> M {
            (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
        }

        pub fn inverse(a: &M) -> M {
            let k = a.len();
            let mut aug: M = a
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let mut row = r.clone();
                    row.extend((0..k).map(|j| if i == j { 1.0 } else { 0.0 }));
                    row
                })
                .collect();
            for c in 0..k {
                let piv = (c..k)
                    .max_by(|&x, &y| aug[x][c].abs().partial_cmp(&aug[y][c].abs()).unwrap())
                    .unwrap();
                aug.swap(c, piv);
                let d = aug[c][c];
                aug[c].iter_mut().for_each(|v| *v /= d);
                for r in 0..k {
                    if r != c {
                        let f = aug[r][c];
                        for q in 0..2 * k {
                            aug[r][q] -= f * aug[c][q];
                        }
                    }
                }
            }
            aug.into_iter().map(|r| r[k..].to_vec()).collect()
        }

        pub fn residual_maker(z: &M, n: usize) -> M {
            let mut r: M = (0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            if z.is_empty() || z[0].is_empty() {
                return r;
            }
            let zt = transpose(z);
            let h = mul(&mul(z, &inverse(&mul(&zt, z))), &zt);
            for i in 0..n {
                for j in 0..n {
                    r[i][j] -= h[i][j];
                }
            }
            r
        }
    }

    #[test]
    fn single_flip_is_identity() {
        let f = make_flips(5, 1, 99).unwrap();
        assert_eq!(f.signs(0), &[1, 1, 1, 1, 1]);
        assert_eq!(make_flips(5, 0, 1), Err(Error::InvalidB));
    }

    #[test]
    fn flips_are_balanced_and_deterministic() {
        let f = make_flips(3, 1000, 17).unwrap();
        for i in 0..3 {
            let mean: f64 = (1..1000).map(|b| f.signs(b)[i] as f64).sum::<f64>() / 999.0;
            assert!(mean.abs() < 0.1, "mean {mean}");
        }
        assert_eq!(f, make_flips(3, 1000, 17).unwrap());
        assert_ne!(f, make_flips(3, 1000, 18).unwrap());
    }

    #[test]
    fn zero_response_gives_zero_scores() {
        let x = gaussian_matrix(10, 3, 1);
        let flips = make_flips(10, 6, 2).unwrap();
        let s = effective_scores(&x, &[0.0; 10], 1, &flips).unwrap();
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_score_is_ols_residual_projection() {
        let n = 12;
        let x = gaussian_matrix(n, 3, 3);
        let y = gaussian_vec(n, 4);
        let flips = make_flips(n, 5, 5).unwrap();
        let j = 2;
        // Textbook OLS residuals of Y on X_{-j}: r = Y - Z (ZᵀZ)⁻¹ ZᵀY.
        let z: naive::M = (0..n).map(|i| vec![x.get(i, 0), x.get(i, 1)]).collect();
        let zt = naive::transpose(&z);
        let coef = naive::mul(
            &naive::inverse(&naive::mul(&zt, &z)),
            &naive::mul(&zt, &y.iter().map(|&v| vec![v]).collect()),
        );
        let r: Vec<f64> = (0..n)
            .map(|i| y[i] - z[i][0] * coef[0][0] - z[i][1] * coef[1][0])
            .collect();
        let expected = dot(x.column(j), &r) / (n as f64).sqrt();
        let s = effective_scores(&x, &y, j, &flips).unwrap();
        assert!((s[0] - expected).abs() < 1e-10);
    }

    #[test]
    fn scores_match_dense_oracle() {
        let (n, m, b) = (6, 2, 4);
        let x = gaussian_matrix(n, m, 21);
        let y = gaussian_vec(n, 22);
        let flips = make_flips(n, b, 23).unwrap();
        for j in 0..m {
            let z: naive::M = (0..n)
                .map(|i| (0..m).filter(|&c| c != j).map(|c| x.get(i, c)).collect())
                .collect();
            let r = naive::residual_maker(&z, n);
            let s = effective_scores(&x, &y, j, &flips).unwrap();
            let st = standardized_scores(&x, &y, j, &flips).unwrap();
            for bb in 0..b {
                let f: naive::M = (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|k| if i == k { flips.signs(bb)[i] as f64 } else { 0.0 })
                            .collect()
                    })
                    .collect();
                let rfr = naive::mul(&naive::mul(&r, &f), &r);
                let t: Vec<f64> = (0..n)
                    .map(|i| (0..n).map(|k| rfr[i][k] * x.get(k, j)).sum::<f64>() / (n as f64).sqrt())
                    .collect();
                let expected = dot(&t, &y);
                assert!((s[bb] - expected).abs() < 1e-10, "j={j} b={bb}");
                let expected_std = expected / norm(&t);
                assert!((st[bb] - expected_std).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn standardize_examples() {
        assert_eq!(standardize(&[0.0, 0.0, 0.0]), vec![0.0, 0.0, 0.0]);
        let s = standardize(&[3.0, 4.0]);
        assert!((s[0] - 0.6).abs() < 1e-15 && (s[1] - 0.8).abs() < 1e-15);
        assert_eq!(standardize(&[1e-13, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn flip_test_examples() {
        let d = flip_test(&[2.0; 10], 0.05);
        assert!(!d.reject);
        assert_eq!(d.pvalue, 1.0);
        assert_eq!(critical_index(0.05, 20), 19);
        assert_eq!(critical_index(0.05, 200), 190);
        assert_eq!(critical_index(0.1, 10), 9);
        assert_eq!(rejection_count(0.05, 200), 10);

        let mut stats: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        stats[0] = -5.0;
        let d = flip_test(&stats, 0.05);
        assert!(d.reject);
        assert_eq!(d.critical_index, 95);
        assert!((d.pvalue - 0.01).abs() < 1e-15);
        assert_eq!(d.statistic_observed, 5.0);
    }

    #[test]
    fn negating_response_negates_scores() {
        let n = 15;
        let x = gaussian_matrix(n, 4, 31);
        let y = gaussian_vec(n, 32);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let flips = make_flips(n, 40, 33).unwrap();
        let a = standardized_scores(&x, &y, 0, &flips).unwrap();
        let b = standardized_scores(&x, &neg, 0, &flips).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u + v).abs() < 1e-12);
        }
        assert_eq!(flip_test(&a, 0.05), flip_test(&b, 0.05));
    }

    // Under a true null with a fixed design the rejection frequency of the
    // standardized test stays within Monte-Carlo error of alpha, and its
    // p-value is close to uniform on {1/B, ..., 1}.
    #[test]
    fn null_level_and_uniform_pvalues() {
        let (n, m, b, reps) = (30, 3, 40, 1000);
        let alpha = 0.05;
        let x = gaussian_matrix(n, m, 41);
        let beta = [0.0, 1.0, -0.5];
        let signal = x.mat_vec(&beta);
        let mut rejections = 0usize;
        let mut pvals = Vec::with_capacity(reps);
        for rep in 0..reps {
            let eps = gaussian_vec(n, 1000 + rep as u64);
            let y: Vec<f64> = signal.iter().zip(&eps).map(|(s, e)| s + e).collect();
            let flips = make_flips(n, b, 5000 + rep as u64).unwrap();
            let d = flip_test(&standardized_scores(&x, &y, 0, &flips).unwrap(), alpha);
            rejections += d.reject as usize;
            pvals.push(d.pvalue);
        }
        let rate = rejections as f64 / reps as f64;
        let se = (alpha * (1.0 - alpha) / reps as f64).sqrt();
        assert!(rate <= alpha + 2.0 * se, "rate {rate}");
        // P(p ≤ 0.25) should be ≈ 0.25.
        let low = pvals.iter().filter(|&&p| p <= 0.25).count() as f64 / reps as f64;
        assert!(
            (low - 0.25).abs() < 4.0 * (0.25f64 * 0.75 / reps as f64).sqrt(),
            "low {low}"
        );
    }

    proptest! {
        #[test]
        fn standardize_norm_is_zero_or_one(v in proptest::collection::vec(-1e3f64..1e3, 1..20)) {
            let s = standardize(&v);
            let nn = norm(&s);
            prop_assert!(nn.abs() < 1e-12 || (nn - 1.0).abs() < 1e-12);
        }

        #[test]
        fn pvalue_matches_decision(v in proptest::collection::vec(-10f64..10.0, 1..60), alpha in 0.0f64..0.5) {
            let d = flip_test(&v, alpha);
            let b = v.len();
            let threshold = rejection_count(alpha, b) as f64 / b as f64;
            prop_assert_eq!(d.reject, d.pvalue <= threshold + 1e-12);
            prop_assert!(d.pvalue >= 1.0 / b as f64 - 1e-12 && d.pvalue <= 1.0);
        }
    }
}
