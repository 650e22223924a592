//! Product-limit survival curves, standard and weighted.
//!
//! Both estimators run through one grouped pass so that the weighted curve
//! with uniform weights reproduces the standard curve bit for bit. Ties are
//! grouped; events at a time are removed from the risk set before the
//! censorings at that same time.

use serde::{Deserialize, Serialize};

use crate::cohort::Cohort;
use crate::error::{Error, Result};
use crate::weights::WeightSet;

/// Right-continuous step survival function. `times` holds the distinct times
/// where at least one event occurred; the value is 1 before the first entry
/// and `probs[j]` from `times[j]` (inclusive) onward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub probs: Vec<f64>,
    /// Subjects at risk at each event time; only for the unweighted curve.
    pub n_at_risk: Option<Vec<u64>>,
}

impl SurvivalCurve {
    /// Right-continuous evaluation: value at the rightmost event time ≤ t,
    /// 1.0 before the first event time, flat beyond the last.
    pub fn evaluate(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&tj| tj <= t);
        if idx == 0 {
            1.0
        } else {
            self.probs[idx - 1]
        }
    }
}

/// One grouped product-limit pass over (time, event, weight) triples.
/// Returns event times, survival probabilities, and the weighted risk set
/// just before each event group.
fn product_limit(times: &[f64], events: &[bool], w: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = times.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut at_risk: f64 = order.iter().map(|&i| w[i]).sum();
    let mut out_t = Vec::new();
    let mut out_s = Vec::new();
    let mut out_r = Vec::new();
    let mut surv = 1.0_f64;

    let mut g = 0;
    while g < n {
        let t = times[order[g]];
        let mut dw = 0.0_f64;
        let mut aw = 0.0_f64;
        let mut h = g;
        while h < n && times[order[h]] == t {
            let i = order[h];
            if events[i] {
                dw += w[i];
            }
            aw += w[i];
            h += 1;
        }
        if dw > 0.0 {
            if at_risk <= 0.0 {
                return Err(Error::ZeroRiskSet(t));
            }
            surv *= 1.0 - dw / at_risk;
            out_t.push(t);
            out_s.push(surv);
            out_r.push(at_risk);
        }
        at_risk -= aw;
        g = h;
    }
    Ok((out_t, out_s, out_r))
}

/// Standard Kaplan-Meier estimate.
pub fn kaplan_meier(cohort: &Cohort) -> Result<SurvivalCurve> {
    let n = cohort.len();
    let times = cohort.times();
    let events = cohort.events();
    let unit = vec![1.0; n];
    let (t, s, r) = product_limit(&times, &events, &unit)?;
    let n_at_risk = r.iter().map(|x| x.round() as u64).collect();
    Ok(SurvivalCurve { times: t, probs: s, n_at_risk: Some(n_at_risk) })
}

/// Kaplan-Meier with calibration weights: each drop uses the weighted event
/// mass over the weighted risk set. Weights are rescaled by their maximum
/// before the pass, so uniform weights run through the exact arithmetic of
/// the standard estimator.
pub fn weighted_kaplan_meier(cohort: &Cohort, weights: &WeightSet) -> Result<SurvivalCurve> {
    let n = cohort.len();
    if weights.len() != n {
        return Err(Error::LengthMismatch { left: weights.len(), right: n });
    }
    let wmax = weights.weights.iter().fold(0.0_f64, |m, &w| m.max(w));
    if !(wmax > 0.0) {
        return Err(Error::NoConvergence("all weights are zero".into()));
    }
    let scaled: Vec<f64> = weights.weights.iter().map(|w| w / wmax).collect();
    let times = cohort.times();
    let events = cohort.events();
    let (t, s, _) = product_limit(&times, &events, &scaled)?;
    Ok(SurvivalCurve { times: t, probs: s, n_at_risk: None })
}

/// Largest observed time in the cohort, event or censored.
pub fn last_observed_time(cohort: &Cohort) -> f64 {
    cohort
        .records
        .iter()
        .map(|r| r.time)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Follow-up adequacy heuristic: a cure fraction is only identifiable when
/// the curve is flat at the end of observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauReport {
    /// No event lands in the final window of observed time.
    pub sufficient_follow_up: bool,
    /// Events inside that final window.
    pub late_events: usize,
    /// Censored records strictly after the last event.
    pub censored_beyond_last_event: usize,
}

/// Check whether any event falls within the last `window_fraction` of the
/// observed time span. Advisory only.
pub fn plateau_diagnostic(curve: &SurvivalCurve, cohort: &Cohort, window_fraction: f64) -> PlateauReport {
    let span = last_observed_time(cohort);
    let window_start = span * (1.0 - window_fraction);
    let late_events = curve.times.iter().filter(|&&t| t > window_start).count();
    let last_event = curve.times.last().copied().unwrap_or(f64::NEG_INFINITY);
    let censored_beyond_last_event = cohort
        .records
        .iter()
        .filter(|r| !r.event && r.time > last_event)
        .count();
    PlateauReport {
        sufficient_follow_up: late_events == 0,
        late_events,
        censored_beyond_last_event,
    }
}

pub const DEFAULT_PLATEAU_WINDOW: f64 = 0.1;
