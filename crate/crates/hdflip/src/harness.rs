//! Monte Carlo experiments: FWER and mean number of rejections.

use std::time::Instant;

use hdflip_core::combine::{closed_testing_tdp, maxt_adjusted};
use hdflip_core::flip::{flip_test, make_flips};
use hdflip_core::multisplit::multisplit_from_plan;
use hdflip_core::rng::{child_seed, derive_seed, rng_from_seed, Stream};
use hdflip_core::sim::{calibrate_sigma, gen_response, gen_toeplitz_design, make_beta_at};
use hdflip_core::stats::{compute_stats, make_splits};
use hdflip_core::{Combiner, DesignData, Exec, Matrix, Method, Selector};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AdjustKind, CombinerKind, ExperimentConfig, MethodKind, SelectorKind};
use crate::error::{Error, Result};
use crate::io::read_table;

/// Largest subset the `sum` pipeline hands to closed testing.
const MAX_SUM_SUBSET: usize = 20;

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub index: usize,
    pub seed: u64,
    /// `None` when the replication was excluded.
    pub rejections: Option<usize>,
    pub false_rejections: Option<usize>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Share of successful replications with at least one false rejection.
    pub fwer: f64,
    /// Binomial standard error of `fwer`.
    pub fwer_stderr: f64,
    pub mean_rejections: f64,
    pub completed: usize,
    pub failed: usize,
    pub wall_time_seconds: f64,
    pub records: Vec<ReplicationRecord>,
}

impl ExperimentReport {
    /// Copy with the wall time zeroed, for comparisons across runs.
    pub fn without_timing(&self) -> Self {
        ExperimentReport {
            wall_time_seconds: 0.0,
            ..self.clone()
        }
    }
}

/// Counts of one analysed dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tally {
    pub rejections: usize,
    pub false_rejections: usize,
}

fn fixed_design(cfg: &ExperimentConfig) -> Result<Option<Matrix>> {
    let Some(path) = &cfg.design_path else {
        return Ok(None);
    };
    let t = read_table(path)?;
    if t.rows < cfg.n || t.cols < cfg.m {
        return Err(Error::Config(format!(
            "{} is {}×{}, smaller than n×m = {}×{}",
            path.display(),
            t.rows,
            t.cols,
            cfg.n,
            cfg.m
        )));
    }
    Ok(Some(Matrix::from_fn(cfg.n, cfg.m, |i, j| t.values[i * t.cols + j])))
}

/// Active positions of one replication.
pub fn active_set(cfg: &ExperimentConfig, seed: u64) -> Vec<usize> {
    if cfg.randomize_active {
        let mut rng = rng_from_seed(derive_seed(seed, Stream::Placement));
        let mut a = sample(&mut rng, cfg.m, cfg.m1).into_vec();
        a.sort_unstable();
        a
    } else {
        (0..cfg.m1).collect()
    }
}

pub fn selector_for(cfg: &ExperimentConfig, active: &[usize]) -> Selector {
    let k = cfg.selection_target();
    match cfg.selector {
        SelectorKind::Oracle => Selector::Oracle {
            active: active.to_vec(),
            extra: k - active.len(),
        },
        SelectorKind::Lasso => Selector::Lasso { k },
    }
}

/// Simulates one dataset: `(data, active positions)`.
pub fn simulate_dataset(
    cfg: &ExperimentConfig,
    design: Option<&Matrix>,
    seed: u64,
) -> Result<(DesignData, Vec<usize>)> {
    let x = match design {
        Some(x) => x.clone(),
        None => gen_toeplitz_design(cfg.n, cfg.m, cfg.rho, derive_seed(seed, Stream::Design))?,
    };
    let active = active_set(cfg, seed);
    let beta = make_beta_at(cfg.m, &active, cfg.strength.into())?;
    let sigma = if cfg.m1 == 0 {
        1.0
    } else {
        calibrate_sigma(&x, &beta, cfg.snr)?
    };
    let y = gen_response(&x, &beta, sigma, derive_seed(seed, Stream::Noise));
    Ok((DesignData::new(x, y)?, active))
}

/// Runs the configured pipeline on one dataset and counts (false) rejections.
pub fn analyse(cfg: &ExperimentConfig, data: &DesignData, active: &[usize], seed: u64) -> Result<Tally> {
    let selector = selector_for(cfg, active);
    let plan = make_splits(data, cfg.q, &selector, seed)?;
    let is_active = |j: &usize| active.contains(j);
    let count = |rejected: &[usize]| Tally {
        rejections: rejected.len(),
        false_rejections: rejected.iter().filter(|j| !is_active(j)).count(),
    };
    let method = match cfg.method {
        MethodKind::Multisplit => {
            let table = multisplit_from_plan(data, &plan, cfg.gamma_min)?;
            return Ok(count(&table.rejected(cfg.alpha)));
        }
        MethodKind::Exact => Method::Exact,
        MethodKind::Approximate => Method::Approximate,
    };
    let flips = make_flips(data.n(), cfg.b, derive_seed(seed, Stream::Flips))?;
    let g = compute_stats(data, &plan, &flips, method, Exec::Sequential)?;
    match cfg.combiner {
        CombinerKind::Max => {
            let rejected: Vec<usize> = match cfg.adjust {
                AdjustKind::Maxt => maxt_adjusted(&g, cfg.alpha, false)?.rejected,
                AdjustKind::Stepdown => maxt_adjusted(&g, cfg.alpha, true)?.rejected,
                AdjustKind::None => (0..g.m())
                    .filter(|&j| flip_test(g.column(j), cfg.alpha).reject)
                    .collect(),
            };
            Ok(count(&rejected))
        }
        CombinerKind::Sum => {
            // Lower bound on true discoveries among the actives plus as many
            // inactive variables; a bound above the number of actives in the
            // set is a false claim.
            let size = (2 * cfg.m1).clamp(10, MAX_SUM_SUBSET).min(cfg.m);
            let mut subset: Vec<usize> = active.iter().copied().take(size).collect();
            subset.extend((0..cfg.m).filter(|j| !is_active(j)).take(size - subset.len()));
            subset.sort_unstable();
            let actives_in = subset.iter().filter(|j| is_active(j)).count();
            let bound = closed_testing_tdp(&g, &subset, &Combiner::Sum, cfg.alpha)?;
            Ok(Tally {
                rejections: bound,
                false_rejections: bound.saturating_sub(actives_in),
            })
        }
    }
}

fn replicate(cfg: &ExperimentConfig, design: Option<&Matrix>, index: usize) -> Result<ReplicationRecord> {
    let seed = child_seed(cfg.seed, index as u64);
    let outcome = simulate_dataset(cfg, design, seed).and_then(|(data, active)| analyse(cfg, &data, &active, seed));
    match outcome {
        Ok(t) => Ok(ReplicationRecord {
            index,
            seed,
            rejections: Some(t.rejections),
            false_rejections: Some(t.false_rejections),
            failure: None,
        }),
        Err(Error::Numerical(e @ hdflip_core::Error::SingularGram { .. })) => Ok(ReplicationRecord {
            index,
            seed,
            rejections: None,
            false_rejections: None,
            failure: Some(e.to_string()),
        }),
        Err(e) => Err(e),
    }
}

/// Runs every replication of `cfg` in parallel. Each replication draws its
/// randomness from `child_seed(cfg.seed, index)`, so the report does not
/// depend on scheduling. Replications with a singular Gram matrix are
/// excluded and counted; more than 1% of them is an error.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let design = fixed_design(cfg)?;
    let records = (0..cfg.replications)
        .into_par_iter()
        .map(|r| replicate(cfg, design.as_ref(), r))
        .collect::<Result<Vec<_>>>()?;
    let failed = records.iter().filter(|r| r.failure.is_some()).count();
    if failed * 100 > cfg.replications {
        return Err(Error::TooManyFailures {
            failed,
            total: cfg.replications,
        });
    }
    let completed = cfg.replications - failed;
    let ok = records.iter().filter(|r| r.failure.is_none());
    let false_hits = ok.clone().filter(|r| r.false_rejections > Some(0)).count();
    let total_rej: usize = ok.filter_map(|r| r.rejections).sum();
    let fwer = false_hits as f64 / completed as f64;
    Ok(ExperimentReport {
        config: cfg.clone(),
        fwer,
        fwer_stderr: (fwer * (1.0 - fwer) / completed as f64).sqrt(),
        mean_rejections: total_rej as f64 / completed as f64,
        completed,
        failed,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        records,
    })
}
