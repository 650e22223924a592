//! Jackknife pseudo-observations of the survival function.
//!
//! The pseudo-observation for subject i at time t is
//! `n·Ŝ(t) − (n−1)·Ŝ⁻ⁱ(t)`, where `Ŝ⁻ⁱ` is the product-limit estimate with
//! subject i removed. Under censoring these values can leave [0,1]; their
//! conditional expectation recovers the survival probability, which is what
//! makes them usable as regression outcomes. Evaluated at the last observed
//! time they estimate each subject's probability of being cured, provided
//! follow-up is long enough for the curve to have flattened.

use serde::{Deserialize, Serialize};

use crate::cohort::Cohort;
use crate::error::{Error, Result};
use crate::survival::{kaplan_meier, last_observed_time, plateau_diagnostic, DEFAULT_PLATEAU_WINDOW};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoObservations {
    /// One value per subject, in cohort order. May fall outside [0,1].
    pub values: Vec<f64>,
    pub eval_time: f64,
    /// True when evaluated at the cohort's last observed time (cure scale).
    pub at_last_time: bool,
}

impl PseudoObservations {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Tie-grouped event table: distinct observed times with event count,
/// total departures, and the risk set just before each group.
struct GroupTable {
    times: Vec<f64>,
    events: Vec<u64>,
    leaving: Vec<u64>,
    at_risk: Vec<u64>,
    /// Group index of each subject, in original cohort order.
    group_of: Vec<usize>,
}

fn group_times(cohort: &Cohort) -> GroupTable {
    let n = cohort.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cohort.records[a].time.total_cmp(&cohort.records[b].time));

    let mut table = GroupTable {
        times: Vec::new(),
        events: Vec::new(),
        leaving: Vec::new(),
        at_risk: Vec::new(),
        group_of: vec![0; n],
    };
    let mut at_risk = n as u64;
    let mut g = 0;
    while g < n {
        let t = cohort.records[order[g]].time;
        let mut d = 0u64;
        let mut a = 0u64;
        let mut h = g;
        while h < n && cohort.records[order[h]].time == t {
            let i = order[h];
            if cohort.records[i].event {
                d += 1;
            }
            a += 1;
            table.group_of[i] = table.times.len();
            h += 1;
        }
        table.times.push(t);
        table.events.push(d);
        table.leaving.push(a);
        table.at_risk.push(at_risk);
        at_risk -= a;
        g = h;
    }
    table
}

/// Jackknife pseudo-observations of S(t).
///
/// The leave-one-out estimates reuse the full-sample event table: groups
/// before the removed subject's time see their risk set shrink by one,
/// the subject's own group additionally loses its event if it had one, and
/// later groups are untouched. Factors are multiplied in the same
/// left-to-right order a fresh fit would use, so each leave-one-out value
/// agrees bit for bit with recomputing the estimator on the reduced cohort.
pub fn pseudo_survival(cohort: &Cohort, t: f64) -> Result<PseudoObservations> {
    let n = cohort.len();
    if n < 2 {
        return Err(Error::TooFewRecords(n));
    }

    // With no censoring the product-limit estimate is the empirical survivor
    // function, and the jackknife of a sample mean returns the subject's own
    // contribution. Taking that closed form keeps the identity exact instead
    // of accurate to a few ulps.
    if cohort.records.iter().all(|r| r.event) {
        let values = cohort
            .records
            .iter()
            .map(|r| if r.time > t { 1.0 } else { 0.0 })
            .collect();
        return Ok(PseudoObservations { values, eval_time: t, at_last_time: false });
    }

    let table = group_times(cohort);
    let m = table.times.len();
    // groups 0..j_end fall at or before the evaluation time
    let j_end = table.times.partition_point(|&tj| tj <= t);

    // full-sample drop factors, 1 − d/r per event group
    let a_factor: Vec<f64> = (0..m)
        .map(|j| {
            if table.events[j] > 0 {
                1.0 - table.events[j] as f64 / table.at_risk[j] as f64
            } else {
                1.0
            }
        })
        .collect();
    let mut s_full = 1.0;
    for j in 0..j_end {
        if table.events[j] > 0 {
            s_full *= a_factor[j];
        }
    }

    // prefix_b[j]: leave-one-out product over event groups before j, each
    // with the risk set reduced by one. A reduced risk set of zero can only
    // happen in the final group, whose prefix value is never consumed.
    let mut prefix_b = vec![1.0; m + 1];
    let mut acc = 1.0;
    for j in 0..m {
        if table.events[j] > 0 && table.at_risk[j] > 1 {
            acc *= 1.0 - table.events[j] as f64 / (table.at_risk[j] - 1) as f64;
        }
        prefix_b[j + 1] = acc;
    }

    // leave-one-out survival for a subject removed from group g, by event
    // status; subjects observed after t share a single value
    let mut loo_event = vec![f64::NAN; j_end];
    let mut loo_censor = vec![f64::NAN; j_end];
    for g in 0..j_end {
        let d = table.events[g];
        let c = table.leaving[g] - d;
        for (slot, delta) in [(&mut loo_event, 1u64), (&mut loo_censor, 0u64)] {
            if (delta == 1 && d == 0) || (delta == 0 && c == 0) {
                continue;
            }
            let mut s = prefix_b[g];
            let dd = d - delta;
            if table.at_risk[g] > 1 && dd > 0 {
                s *= 1.0 - dd as f64 / (table.at_risk[g] - 1) as f64;
            }
            for j in g + 1..j_end {
                if table.events[j] > 0 {
                    s *= a_factor[j];
                }
            }
            slot[g] = s;
        }
    }
    let loo_late = prefix_b[j_end];

    let nf = n as f64;
    let nm1 = (n - 1) as f64;
    let values = (0..n)
        .map(|i| {
            let g = table.group_of[i];
            let s_loo = if g >= j_end {
                loo_late
            } else if cohort.records[i].event {
                loo_event[g]
            } else {
                loo_censor[g]
            };
            nf * s_full - nm1 * s_loo
        })
        .collect();
    Ok(PseudoObservations { values, eval_time: t, at_last_time: false })
}

/// Pseudo-observations at the last observed time: each subject's estimated
/// cure probability. Warns on stderr when events still occur in the final
/// stretch of follow-up, since the cure fraction is then poorly identified.
pub fn pseudo_cure(cohort: &Cohort) -> Result<PseudoObservations> {
    let t_last = last_observed_time(cohort);
    let mut pos = pseudo_survival(cohort, t_last)?;
    pos.at_last_time = true;
    let km = kaplan_meier(cohort)?;
    let report = plateau_diagnostic(&km, cohort, DEFAULT_PLATEAU_WINDOW);
    if !report.sufficient_follow_up {
        eprintln!(
            "warning: {} event(s) in the final {:.0}% of follow-up ({} censored past the last event); the survival curve may not have reached its plateau",
            report.late_events,
            100.0 * DEFAULT_PLATEAU_WINDOW,
            report.censored_beyond_last_event,
        );
    }
    Ok(pos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::SubjectRecord;
    use crate::survival::kaplan_meier;
    use approx::assert_abs_diff_eq;

    fn cohort(data: &[(f64, bool)]) -> Cohort {
        let records = data
            .iter()
            .map(|&(time, event)| SubjectRecord { time, event, covariates: vec![] })
            .collect();
        Cohort::new(records, vec![], "test").unwrap()
    }

    /// Reference implementation: n fresh product-limit fits, one per
    /// left-out subject.
    fn naive_pseudo(c: &Cohort, t: f64) -> Vec<f64> {
        let n = c.len();
        let full = kaplan_meier(c).unwrap().evaluate(t);
        (0..n)
            .map(|i| {
                let mut records = c.records.clone();
                records.remove(i);
                let sub = Cohort::new(records, c.covariate_names.clone(), "loo").unwrap();
                let loo = kaplan_meier(&sub).unwrap().evaluate(t);
                n as f64 * full - (n - 1) as f64 * loo
            })
            .collect()
    }

    #[test]
    fn single_record_is_an_error() {
        let err = pseudo_survival(&cohort(&[(1.0, true)]), 0.5).unwrap_err();
        assert!(matches!(err, Error::TooFewRecords(1)));
    }

    #[test]
    fn no_censoring_gives_exact_indicators() {
        let c = cohort(&[(1.0, true), (2.0, true), (3.0, true)]);
        assert_eq!(pseudo_survival(&c, 1.5).unwrap().values, vec![0.0, 1.0, 1.0]);
        assert_eq!(pseudo_survival(&c, 10.0).unwrap().values, vec![0.0, 0.0, 0.0]);
        assert_eq!(pseudo_survival(&c, 2.0).unwrap().values, vec![0.0, 0.0, 1.0]);
        assert_eq!(pseudo_survival(&c, 0.5).unwrap().values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn early_event_then_censoring_fixture() {
        // subjects at times 1..6, events at 1 and 3 only
        let c = cohort(&[
            (1.0, true),
            (2.0, false),
            (3.0, true),
            (4.0, false),
            (5.0, false),
            (6.0, false),
        ]);
        let pos = pseudo_cure(&c).unwrap();
        assert!(pos.at_last_time);
        assert_eq!(pos.eval_time, 6.0);
        let expected = [0.0, 0.75, -0.25, 13.0 / 12.0, 13.0 / 12.0, 13.0 / 12.0];
        for (v, e) in pos.values.iter().zip(expected) {
            assert_abs_diff_eq!(v, &e, epsilon = 1e-15);
        }
        // mid-curve evaluation
        let mid = pseudo_survival(&c, 2.0).unwrap();
        let expected_mid = [0.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        for (v, e) in mid.values.iter().zip(expected_mid) {
            assert_abs_diff_eq!(v, &e, epsilon = 1e-15);
        }
    }

    #[test]
    fn late_censoring_clusters_fixture() {
        let c = cohort(&[
            (1.0, true),
            (2.0, true),
            (3.0, false),
            (4.0, false),
            (5.0, false),
            (6.0, false),
        ]);
        let pos = pseudo_cure(&c).unwrap();
        let expected = [0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        for (v, e) in pos.values.iter().zip(expected) {
            assert_abs_diff_eq!(v, &e, epsilon = 1e-15);
        }
    }

    #[test]
    fn lone_terminal_event_goes_negative() {
        let c = cohort(&[(1.0, false), (2.0, false), (3.0, false), (4.0, true)]);
        let pos = pseudo_cure(&c).unwrap();
        assert_eq!(pos.values, vec![0.0, 0.0, 0.0, -3.0]);
    }

    #[test]
    fn all_censored_gives_all_ones() {
        let c = cohort(&[(1.0, false), (2.0, false), (3.0, false)]);
        assert_eq!(pseudo_cure(&c).unwrap().values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn matches_fresh_refits_bitwise_on_mixed_cohorts() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..40 {
            let n = 2 + (next() * 40.0) as usize;
            let data: Vec<(f64, bool)> = (0..n)
                .map(|_| (((next() * 12.0).ceil()).max(1.0), next() < 0.65))
                .collect();
            if data.iter().all(|&(_, e)| e) {
                continue; // indicator path, covered separately
            }
            let c = cohort(&data);
            for t in [1.0, 3.5, 7.0, 12.0, last_observed_time(&c)] {
                let fast = pseudo_survival(&c, t).unwrap().values;
                let slow = naive_pseudo(&c, t);
                for (a, b) in fast.iter().zip(&slow) {
                    assert_eq!(a.to_bits(), b.to_bits(), "t={t} n={n}");
                }
            }
        }
    }

    #[test]
    fn mean_recovers_the_curve_on_a_mixed_fixture() {
        let c = cohort(&[
            (1.0, true),
            (2.0, false),
            (3.0, true),
            (4.0, true),
            (5.0, false),
            (6.0, true),
            (7.0, false),
            (8.0, true),
        ]);
        let km = kaplan_meier(&c).unwrap();
        for t in [2.5, 4.5, 6.5] {
            let pos = pseudo_survival(&c, t).unwrap();
            assert_abs_diff_eq!(pos.mean(), km.evaluate(t), epsilon = 1e-9);
        }
    }
}
