//! Interval estimation: nonparametric bootstrap over the historical cohort
//! plus two closed-form variance formulas for weighted means.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::Cohort;
use crate::error::{Error, Result};
use crate::numeric::{expit, logit};
use crate::weights::WeightSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformScale {
    /// Percentile interval on the estimates as they are.
    Identity,
    /// Percentile interval on the log-odds scale, mapped back; keeps the
    /// interval inside [0,1].
    Logit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub replicates: usize,
    pub seed: u64,
    pub ci_level: f64,
    pub transform_scale: TransformScale,
}

impl BootstrapSpec {
    pub fn new(replicates: usize, seed: u64) -> Self {
        BootstrapSpec { replicates, seed, ci_level: 0.95, transform_scale: TransformScale::Identity }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub point: f64,
    /// Sample variance of the replicate estimates, on the natural scale.
    pub variance: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replicates_used: usize,
    pub failures: usize,
}

/// Replicate-level bootstrap output, for callers that want the raw draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSamples {
    /// (replicate index, estimate) for replicates whose pipeline succeeded.
    pub estimates: Vec<(usize, f64)>,
    pub failures: usize,
    pub first_failure: Option<String>,
}

fn validate(spec: &BootstrapSpec) -> Result<()> {
    if spec.replicates < 2 {
        return Err(Error::InvalidSpec(format!(
            "at least 2 bootstrap replicates required, got {}",
            spec.replicates
        )));
    }
    if !(spec.ci_level > 0.0 && spec.ci_level < 1.0) {
        return Err(Error::InvalidSpec(format!(
            "confidence level must be in (0,1), got {}",
            spec.ci_level
        )));
    }
    if spec.replicates < 100 {
        eprintln!(
            "warning: {} bootstrap replicates is low for percentile intervals; 100 or more recommended",
            spec.replicates
        );
    }
    Ok(())
}

/// Run the pipeline over resampled cohorts. Each replicate draws its own
/// substream of a counter-based generator keyed by (seed, replicate), so the
/// output does not depend on thread count or scheduling.
pub fn bootstrap_samples<F>(
    historical: &Cohort,
    pipeline: F,
    spec: &BootstrapSpec,
) -> Result<BootstrapSamples>
where
    F: Fn(&Cohort) -> Result<f64> + Sync,
{
    validate(spec)?;
    let n = historical.len();
    let outcomes: Vec<std::result::Result<f64, String>> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(r as u64 + 1);
            let records = (0..n)
                .map(|_| historical.records[rng.gen_range(0..n)].clone())
                .collect();
            let resampled =
                Cohort::new(records, historical.covariate_names.clone(), &historical.label)
                    .map_err(|e| e.to_string())?;
            pipeline(&resampled).map_err(|e| e.to_string())
        })
        .collect();

    let mut estimates = Vec::with_capacity(spec.replicates);
    let mut failures = 0;
    let mut first_failure = None;
    for (r, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(v) => estimates.push((r, v)),
            Err(msg) => {
                failures += 1;
                first_failure.get_or_insert(msg);
            }
        }
    }
    if failures * 5 > spec.replicates {
        return Err(Error::TooManyFailures {
            failed: failures,
            total: spec.replicates,
            first: first_failure.unwrap_or_default(),
        });
    }
    Ok(BootstrapSamples { estimates, failures, first_failure })
}

pub(crate) fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (h - lo as f64)
}

/// Full bootstrap interval: point estimate from the original cohort,
/// percentile confidence interval and variance from the replicates.
/// Replicates whose pipeline fails (or whose estimate cannot be transformed)
/// are dropped and counted; more than 20% of them aborts.
pub fn bootstrap_estimate<F>(
    historical: &Cohort,
    pipeline: F,
    spec: &BootstrapSpec,
) -> Result<IntervalEstimate>
where
    F: Fn(&Cohort) -> Result<f64> + Sync,
{
    validate(spec)?;
    let point = pipeline(historical)?;
    if spec.transform_scale == TransformScale::Logit && !(point > 0.0 && point < 1.0) {
        return Err(Error::LogitBoundary(point));
    }
    let samples = bootstrap_samples(historical, pipeline, spec)?;

    let mut failures = samples.failures;
    let mut first_failure = samples.first_failure;
    let mut good = Vec::with_capacity(samples.estimates.len());
    for (_, v) in &samples.estimates {
        if spec.transform_scale == TransformScale::Logit && !(*v > 0.0 && *v < 1.0) {
            failures += 1;
            first_failure
                .get_or_insert_with(|| format!("replicate estimate {v} outside (0,1)"));
        } else {
            good.push(*v);
        }
    }
    if failures * 5 > spec.replicates {
        return Err(Error::TooManyFailures {
            failed: failures,
            total: spec.replicates,
            first: first_failure.unwrap_or_default(),
        });
    }

    let used = good.len();
    let mean = good.iter().sum::<f64>() / used as f64;
    let variance =
        good.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (used as f64 - 1.0);

    let alpha = (1.0 - spec.ci_level) / 2.0;
    let mut sorted = good;
    sorted.sort_by(f64::total_cmp);
    let (ci_low, ci_high) = match spec.transform_scale {
        TransformScale::Identity => (quantile(&sorted, alpha), quantile(&sorted, 1.0 - alpha)),
        TransformScale::Logit => {
            let b: Vec<f64> = sorted.iter().map(|&v| logit(v)).collect();
            (expit(quantile(&b, alpha)), expit(quantile(&b, 1.0 - alpha)))
        }
    };
    Ok(IntervalEstimate { point, variance, ci_low, ci_high, replicates_used: used, failures })
}

/// `Σ wᵢ² (yᵢ − μ̂)²`: the plug-in variance of a weighted mean that ignores
/// estimation of the weights. Conservative in calibrated settings.
pub fn variance_naive(values: &[f64], weights: &WeightSet, mu_hat: f64) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch { left: values.len(), right: weights.len() });
    }
    Ok(values
        .iter()
        .zip(&weights.weights)
        .map(|(y, w)| w * w * (y - mu_hat).powi(2))
        .sum())
}

/// `Σ wᵢ² (yᵢ − m̂(xᵢ))²`: survey-sampling form with outcome-model residuals
/// in place of deviations from the overall mean.
pub fn variance_survey(values: &[f64], weights: &WeightSet, fitted: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch { left: values.len(), right: weights.len() });
    }
    if values.len() != fitted.len() {
        return Err(Error::LengthMismatch { left: values.len(), right: fitted.len() });
    }
    Ok(values
        .iter()
        .zip(&weights.weights)
        .zip(fitted)
        .map(|((y, w), m)| w * w * (y - m).powi(2))
        .sum())
}
