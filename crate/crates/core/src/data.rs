use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// A response vector together with its fixed design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignData {
    x: Matrix,
    y: Vec<f64>,
    names: Vec<String>,
}

impl DesignData {
    /// Validates dimensions and finiteness; variables are named `x1..xm`.
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        let names = (1..=x.cols()).map(|j| format!("x{j}")).collect();
        Self::with_names(x, y, names)
    }

    pub fn with_names(x: Matrix, y: Vec<f64>, names: Vec<String>) -> Result<Self> {
        if y.len() != x.rows() {
            return Err(Error::DimensionMismatch {
                what: "response length vs design rows",
                expected: x.rows(),
                found: y.len(),
            });
        }
        if names.len() != x.cols() {
            return Err(Error::DimensionMismatch {
                what: "variable names vs design columns",
                expected: x.cols(),
                found: names.len(),
            });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
        for j in 0..x.cols() {
            if let Some(i) = x.column(j).iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
        Ok(DesignData { x, y, names })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    /// Number of variables.
    pub fn m(&self) -> usize {
        self.x.cols()
    }
}
