//! Simulation designs: Toeplitz Gaussian covariates, sparse coefficient
//! vectors, noise calibration to a signal-to-noise ratio, and responses.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::rng_from_seed;

/// Magnitudes of the active coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strength {
    /// All active coefficients equal 1.
    Uniform,
    /// Active coefficients `1, 2, …, m1`.
    Increasing,
}

/// `n × m` design with i.i.d. rows from `N(0, Σ)`, `Σ_jh = ρ^|j−h|`.
///
/// Rows follow the AR(1) recursion `X_1 = Z_1`,
/// `X_j = ρ X_{j−1} + √(1−ρ²) Z_j`, which realizes that covariance exactly.
pub fn gen_toeplitz_design(n: usize, m: usize, rho: f64, seed: u64) -> Result<Matrix> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidRho(rho));
    }
    let mut rng = rng_from_seed(seed);
    let innovation = libm::sqrt(1.0 - rho * rho);
    let mut x = Matrix::zeros(n, m);
    for i in 0..n {
        let mut prev = 0.0;
        for j in 0..m {
            let z: f64 = StandardNormal.sample(&mut rng);
            let v = if j == 0 { z } else { rho * prev + innovation * z };
            x.set(i, j, v);
            prev = v;
        }
    }
    Ok(x)
}

/// Coefficients with the first `m1` entries active.
///
/// # Panics
///
/// If `m1 > m`.
pub fn make_beta(m: usize, m1: usize, strength: Strength) -> Vec<f64> {
    assert!(m1 <= m, "more active variables than variables");
    let mut beta = vec![0.0; m];
    for (k, b) in beta.iter_mut().take(m1).enumerate() {
        *b = match strength {
            Strength::Uniform => 1.0,
            Strength::Increasing => (k + 1) as f64,
        };
    }
    beta
}

/// Coefficients with the active entries at the given positions, valued
/// according to `strength` in the order listed.
pub fn make_beta_at(m: usize, positions: &[usize], strength: Strength) -> Result<Vec<f64>> {
    crate::linalg::check_index_set(positions, m)?;
    let mut beta = vec![0.0; m];
    for (k, &j) in positions.iter().enumerate() {
        beta[j] = match strength {
            Strength::Uniform => 1.0,
            Strength::Increasing => (k + 1) as f64,
        };
    }
    Ok(beta)
}

/// Sample variance (denominator `n − 1`) of the signal `Xβ`.
pub fn signal_variance(x: &Matrix, beta: &[f64]) -> f64 {
    let s = x.mat_vec(beta);
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// Noise level with `Var̂(Xβ) / σ² = snr`.
pub fn calibrate_sigma(x: &Matrix, beta: &[f64], snr: f64) -> Result<f64> {
    if snr.is_nan() || snr <= 0.0 {
        return Err(Error::InvalidArgument("snr must be positive"));
    }
    if x.rows() < 2 {
        return Err(Error::InvalidArgument("at least two observations are required"));
    }
    let var = signal_variance(x, beta);
    if var.is_nan() || var <= 0.0 {
        return Err(Error::ZeroSignal);
    }
    Ok(libm::sqrt(var / snr))
}

/// `Y = Xβ + σ ε` with standard normal `ε`.
pub fn gen_response(x: &Matrix, beta: &[f64], sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let mut y = x.mat_vec(beta);
    for v in y.iter_mut() {
        let e: f64 = StandardNormal.sample(&mut rng);
        *v += sigma * e;
    }
    y
}
