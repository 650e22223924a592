//! Normalized calibration weights with solver diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights over a cohort, summing to one, with the diagnostics needed to
/// judge the solve that produced them: dual coefficients, balance residuals
/// against the target, and effective sample size 1/Σw².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSet {
    pub weights: Vec<f64>,
    pub dual_coefficients: Vec<f64>,
    pub balance_residuals: Vec<f64>,
    pub ess: f64,
}

impl WeightSet {
    /// Uniform weights 1/n, the "no adjustment" case.
    pub fn uniform(n: usize) -> Self {
        let w = 1.0 / n as f64;
        WeightSet {
            weights: vec![w; n],
            dual_coefficients: Vec::new(),
            balance_residuals: Vec::new(),
            ess: n as f64,
        }
    }

    /// Build from raw positive weights: normalizes to sum one and computes ess.
    pub fn from_raw(raw: Vec<f64>, dual: Vec<f64>, residuals: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyCohort);
        }
        let total: f64 = raw.iter().sum();
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::NoConvergence(format!(
                "weight normalization failed, total {total}"
            )));
        }
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
        Ok(WeightSet {
            weights,
            dual_coefficients: dual,
            balance_residuals: residuals,
            ess: 1.0 / sum_sq,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Largest absolute balance residual, or 0 when no constraints were used.
    pub fn max_residual(&self) -> f64 {
        self.balance_residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}
