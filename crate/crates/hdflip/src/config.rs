//! Simulation experiment configuration, read from a flat JSON object.

use std::path::{Path, PathBuf};

use hdflip_core::selection::capacity;
use hdflip_core::sim::Strength;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrengthKind {
    Uniform,
    Increasing,
}

impl From<StrengthKind> for Strength {
    fn from(s: StrengthKind) -> Self {
        match s {
            StrengthKind::Uniform => Strength::Uniform,
            StrengthKind::Increasing => Strength::Increasing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorKind {
    Oracle,
    Lasso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Exact,
    Approximate,
    Multisplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombinerKind {
    Max,
    Sum,
}

/// Multiplicity handling of the per-variable decisions under `combiner = max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjustKind {
    /// Single-step maxT.
    #[default]
    Maxt,
    /// Step-down maxT.
    Stepdown,
    /// Unadjusted per-variable tests.
    None,
}

/// Default selection size when no variable is active.
pub const NULL_SELECTION: usize = 10;

fn default_gamma_min() -> f64 {
    hdflip_core::multisplit::DEFAULT_GAMMA_MIN
}

/// One simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub m1: usize,
    pub rho: f64,
    pub snr: f64,
    pub strength: StrengthKind,
    #[serde(rename = "Q", alias = "q")]
    pub q: usize,
    #[serde(rename = "B", alias = "b")]
    pub b: usize,
    pub alpha: f64,
    pub selector: SelectorKind,
    pub replications: usize,
    pub seed: u64,
    pub method: MethodKind,
    pub combiner: CombinerKind,
    #[serde(default)]
    pub adjust: AdjustKind,
    #[serde(default = "default_gamma_min")]
    pub gamma_min: f64,
    /// Draw the active positions uniformly per replication instead of using
    /// the first `m1` variables.
    #[serde(default)]
    pub randomize_active: bool,
    /// Variables selected per split; defaults to [`Self::selection_target`]'s
    /// rule.
    #[serde(default)]
    pub select: Option<usize>,
    /// Fixed design (CSV) used in every replication; its top-left `n × m`
    /// block is taken.
    #[serde(default)]
    pub design_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Variables handed to each split's selector: `select` when given,
    /// otherwise `2·m1`; under the global null, 10 (or the capacity if
    /// smaller).
    pub fn selection_target(&self) -> usize {
        if let Some(k) = self.select {
            k
        } else if self.m1 == 0 {
            NULL_SELECTION.min(capacity(self.n / 2)).min(self.m)
        } else {
            (2 * self.m1).min(self.m)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n < 4 {
            return fail(format!("n = {} is too small (need at least 4)", self.n));
        }
        if self.m == 0 {
            return fail("m must be positive".into());
        }
        if self.m1 > self.m {
            return fail(format!("m1 = {} exceeds m = {}", self.m1, self.m));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return fail(format!("rho = {} outside [0, 1)", self.rho));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return fail(format!("snr = {} must be positive", self.snr));
        }
        if self.q == 0 {
            return fail("Q must be positive".into());
        }
        if self.b == 0 {
            return fail("B must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha = {} outside (0, 1)", self.alpha));
        }
        if self.replications == 0 {
            return fail("replications must be positive".into());
        }
        if !(self.gamma_min > 0.0 && self.gamma_min < 1.0) {
            return fail(format!("gamma_min = {} outside (0, 1)", self.gamma_min));
        }
        if let Some(k) = self.select {
            if k < self.m1 || k > self.m {
                return fail(format!(
                    "select = {k} must lie between m1 = {} and m = {}",
                    self.m1, self.m
                ));
            }
        }
        let cap = capacity(self.n / 2);
        if self.selection_target() > cap {
            return fail(format!(
                "selecting {} variables needs at least {} observations per half, got {}",
                self.selection_target(),
                2 * self.selection_target(),
                self.n / 2
            ));
        }
        if self.method == MethodKind::Multisplit && self.combiner != CombinerKind::Max {
            return fail("multisplit supports only combiner = max".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"{
        "n": 100, "m": 100, "m1": 5, "rho": 0.0, "snr": 4.0, "strength": "uniform",
        "Q": 10, "B": 200, "alpha": 0.05, "selector": "oracle", "replications": 500,
        "seed": 1, "method": "approximate", "combiner": "max"
    }"#;

    #[test]
    fn parses_basic_scenario() {
        let c = ExperimentConfig::from_json(BASIC).unwrap();
        assert_eq!((c.n, c.q, c.b), (100, 10, 200));
        assert_eq!(c.adjust, AdjustKind::Maxt);
        assert_eq!(c.gamma_min, 0.05);
        assert_eq!(c.selection_target(), 10);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let text = BASIC.replace("\"seed\": 1", "\"seed\": 1, \"colour\": 3");
        assert!(matches!(ExperimentConfig::from_json(&text), Err(Error::Config(_))));
    }

    #[test]
    fn missing_key_is_an_error() {
        let text = BASIC.replace("\"seed\": 1,", "");
        assert!(matches!(ExperimentConfig::from_json(&text), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_values() {
        for (from, to) in [
            ("\"m1\": 5", "\"m1\": 101"),
            ("\"rho\": 0.0", "\"rho\": 1.0"),
            ("\"snr\": 4.0", "\"snr\": 0.0"),
            ("\"m1\": 5", "\"m1\": 13"),
            ("\"alpha\": 0.05", "\"alpha\": 1.5"),
        ] {
            let text = BASIC.replace(from, to);
            assert!(ExperimentConfig::from_json(&text).is_err(), "{to}");
        }
    }
}
