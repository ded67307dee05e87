//! Resampling-based inference for high-dimensional linear regression.
//!
//! The crate builds sign-flipped score statistics for every coefficient of a
//! linear model `Y = Xβ + ε`, using repeated sample splits: one half of the
//! observations selects candidate variables, the other half computes
//! residualized effective scores. The resulting `B × m` [`stats::StatMatrix`]
//! is enough to test any subset of coefficients through a combining function
//! ([`combine`]), to run the maxT multiplicity correction, or to feed a
//! closed-testing bound on the number of true discoveries.
//!
//! Two constructions are provided: [`stats::exact_stats`] sums the per-split
//! effective scores, [`stats::approx_stats`] first sums the per-split residual
//! makers and needs a single `n × n` accumulator. The Multisplit p-value
//! procedure ([`multisplit`]) is included as a baseline, together with the
//! design generators used for simulation studies ([`sim`]).
//!
//! The crate is `no_std` (with `alloc`) when built without default features.
//! The `parallel` feature spreads per-variable work over a rayon pool; results
//! do not depend on the number of threads.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod combine;
pub mod data;
pub mod error;
pub mod flip;
pub mod linalg;
pub mod multisplit;
pub mod rng;
pub mod selection;
pub mod sim;
pub mod special;
pub mod stats;

pub use combine::{Combiner, SubsetResult};
pub use data::DesignData;
pub use error::{Error, Result};
pub use flip::{FlipSet, TestDecision};
pub use linalg::Matrix;
pub use selection::{SelectedSet, Selector};
pub use stats::{Exec, Method, SplitPlan, StatMatrix};
