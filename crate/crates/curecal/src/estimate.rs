//! Point estimators of the control-arm cure rate and survival function,
//! each tagged with how it was computed and which weights it used.

use serde::{Deserialize, Serialize};

use crate::calibrate::OutcomeModelFit;
use crate::cohort::Cohort;
use crate::error::{Error, Result};
use crate::numeric::{expit, logit};
use crate::pseudo::{pseudo_survival, PseudoObservations};
use crate::survival::{last_observed_time, weighted_kaplan_meier};
use crate::weights::WeightSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CureMethod {
    /// Weighted mean of cure-scale pseudo-observations; can leave [0,1].
    Po,
    /// Same mean pushed through the logit link; always in (0,1).
    Pol,
    /// Weighted product-limit curve at the last observed time.
    Km,
    /// Mean predicted cure probability over the trial population.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMethod {
    Uniform,
    Maic,
    Ma,
    MaicMa,
    Ipw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CureRateEstimate {
    pub value: f64,
    pub method: CureMethod,
    pub weight_method: WeightMethod,
    /// Set when a pseudo-observation mean lands outside [0,1]. The value is
    /// reported as computed, never clamped.
    pub out_of_range: bool,
    /// The weights behind the estimate, when weights were involved.
    pub diagnostics: Option<WeightSet>,
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

fn weighted_mean(values: &[f64], weights: &WeightSet) -> f64 {
    values.iter().zip(&weights.weights).map(|(v, w)| v * w).sum()
}

/// Weighted mean of cure pseudo-observations.
pub fn estimate_cure_po(
    pos: &PseudoObservations,
    weights: &WeightSet,
    weight_method: WeightMethod,
) -> Result<CureRateEstimate> {
    check_lengths(pos.len(), weights.len())?;
    let value = weighted_mean(&pos.values, weights);
    Ok(CureRateEstimate {
        value,
        method: CureMethod::Po,
        weight_method,
        out_of_range: !(0.0..=1.0).contains(&value),
        diagnostics: Some(weights.clone()),
    })
}

/// Logit-link variant: solves the intercept-only estimating equation, whose
/// closed form is the logit of the weighted mean. The estimate equals the
/// plain weighted mean whenever that mean is interior, but the logit scale
/// is the one interval estimates should be built on.
pub fn estimate_cure_pol(
    pos: &PseudoObservations,
    weights: &WeightSet,
    weight_method: WeightMethod,
) -> Result<CureRateEstimate> {
    check_lengths(pos.len(), weights.len())?;
    let mean = weighted_mean(&pos.values, weights);
    if !(mean > 0.0 && mean < 1.0) {
        return Err(Error::LogitBoundary(mean));
    }
    let value = expit(logit(mean));
    Ok(CureRateEstimate {
        value,
        method: CureMethod::Pol,
        weight_method,
        out_of_range: false,
        diagnostics: Some(weights.clone()),
    })
}

/// Weighted product-limit curve evaluated at the last observed time.
pub fn estimate_cure_km(
    cohort: &Cohort,
    weights: &WeightSet,
    weight_method: WeightMethod,
) -> Result<CureRateEstimate> {
    let curve = weighted_kaplan_meier(cohort, weights)?;
    let value = curve.evaluate(last_observed_time(cohort));
    Ok(CureRateEstimate {
        value,
        method: CureMethod::Km,
        weight_method,
        out_of_range: false,
        diagnostics: Some(weights.clone()),
    })
}

/// Average the fitted cure model over the trial covariate rows.
pub fn estimate_cure_direct(
    fit: &OutcomeModelFit,
    trial: &Cohort,
    weight_method: WeightMethod,
) -> Result<CureRateEstimate> {
    if !fit.converged {
        return Err(Error::NoConvergence("outcome model did not converge".into()));
    }
    if fit.coefficients.len() != trial.dim() + 1 {
        return Err(Error::LengthMismatch {
            left: fit.coefficients.len(),
            right: trial.dim() + 1,
        });
    }
    let value = trial
        .records
        .iter()
        .map(|r| fit.predict(&r.covariates))
        .sum::<f64>()
        / trial.len() as f64;
    Ok(CureRateEstimate {
        value,
        method: CureMethod::Direct,
        weight_method,
        out_of_range: false,
        diagnostics: None,
    })
}

/// Weighted pseudo-observation survival estimate at each requested time.
pub fn estimate_survival_po(
    cohort: &Cohort,
    weights: &WeightSet,
    times: &[f64],
) -> Result<Vec<(f64, f64)>> {
    check_lengths(weights.len(), cohort.len())?;
    times
        .iter()
        .map(|&t| {
            let pos = pseudo_survival(cohort, t)?;
            Ok((t, weighted_mean(&pos.values, weights)))
        })
        .collect()
}

/// Weighted product-limit estimate at each requested time.
pub fn estimate_survival_km(
    cohort: &Cohort,
    weights: &WeightSet,
    times: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let curve = weighted_kaplan_meier(cohort, weights)?;
    Ok(times.iter().map(|&t| (t, curve.evaluate(t))).collect())
}
