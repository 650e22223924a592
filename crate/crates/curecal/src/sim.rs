//! Monte Carlo harness: generates historical and trial populations from a
//! cure-fraction Weibull model, runs the whole estimator battery on each
//! replicate, and summarizes bias and spread against simulated truth.
//!
//! Replicates are independent ChaCha streams (stream 0 is reserved for the
//! truth sample, replicate r uses stream r + 1), so results do not depend on
//! thread count or scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{
    fit_pseudo_logistic, ipw_weights, ma_balance_design, maic_ma_design, solve_entropy_weights,
    EntropyDualProblem,
};
use crate::cohort::{covariate_target, Cohort, CovariateTarget, SubjectRecord};
use crate::error::{Error, Result};
use crate::estimate::{estimate_cure_km, estimate_cure_po, WeightMethod};
use crate::inference::quantile;
use crate::numeric::expit;
use crate::pseudo::{pseudo_survival, PseudoObservations};
use crate::survival::{kaplan_meier, last_observed_time};
use crate::weights::WeightSet;

/// One simulation scenario. Covariates are standard normal around a
/// population mean; the cure probability is expit(a·Σx), non-cured event
/// times are Weibull with scale exp(3 + g·Σx), and censoring is exponential
/// with scale exp(censor_log_scale), truncated at that same scale (an
/// administrative end of follow-up).
///
/// The trial population sits at mean zero and the historical population is
/// shifted by ±0.75·b along the all-ones direction: down for the cure-rate
/// scenarios, up for the survival scenarios. A reviewer preferring the
/// complementary reading of the cure convention (expit as the non-cure
/// probability) gets it by negating `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    /// Historical cohort size per replicate.
    pub n: usize,
    /// Covariate dimension.
    pub p: usize,
    /// Cure coefficient; every covariate gets the same one.
    pub a: f64,
    /// Survival (log-scale) coefficient, shared across covariates.
    pub g: f64,
    /// Population separation scalar.
    pub b: f64,
    /// Weibull shape.
    pub shape: f64,
    #[serde(default = "default_censor_log_scale")]
    pub censor_log_scale: f64,
    /// Size of the truth sample drawn on stream 0.
    #[serde(default = "default_truth_n")]
    pub truth_n: usize,
    /// Trial cohort size for the survival scenarios, which draw a fresh
    /// trial covariate sample every replicate.
    #[serde(default = "default_trial_n")]
    pub trial_n: usize,
    pub replicates: usize,
    pub seed: u64,
}

fn default_censor_log_scale() -> f64 {
    5.5
}

fn default_truth_n() -> usize {
    100_000
}

fn default_trial_n() -> usize {
    300
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidSpec("historical cohort size must be at least 2".into()));
        }
        if self.p == 0 {
            return Err(Error::InvalidSpec("at least one covariate is required".into()));
        }
        if !(self.shape > 0.0 && self.shape.is_finite()) {
            return Err(Error::InvalidSpec(format!("shape {} must be positive", self.shape)));
        }
        for (name, value) in [
            ("a", self.a),
            ("g", self.g),
            ("b", self.b),
            ("censor_log_scale", self.censor_log_scale),
        ] {
            if !value.is_finite() {
                return Err(Error::InvalidSpec(format!("{name} = {value} is not finite")));
            }
        }
        if self.truth_n < 10_000 {
            return Err(Error::InvalidSpec(
                "truth sample needs at least 10000 subjects".into(),
            ));
        }
        if self.trial_n < 2 {
            return Err(Error::InvalidSpec("trial cohort size must be at least 2".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidSpec("at least one replicate is required".into()));
        }
        Ok(())
    }
}

/// A freshly simulated subject, with the latent state the estimators never
/// get to see.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSubject {
    pub record: SubjectRecord,
    pub cured: bool,
    pub cure_probability: f64,
    /// Event time before censoring; infinite for cured subjects.
    pub latent_time: f64,
}

fn weibull_inverse(log_scale: f64, shape: f64, u: f64) -> f64 {
    log_scale.exp() * (-(1.0 - u).ln()).powf(1.0 / shape)
}

/// Draw one subject. `mean_shift` is the population mean, one entry per
/// covariate.
pub fn generate_subject<R: Rng + ?Sized>(
    spec: &ScenarioSpec,
    mean_shift: &[f64],
    rng: &mut R,
) -> GeneratedSubject {
    assert_eq!(mean_shift.len(), spec.p, "mean shift has one entry per covariate");
    let covariates: Vec<f64> = mean_shift
        .iter()
        .map(|&m| m + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let s: f64 = covariates.iter().sum();
    let cure_probability = expit(spec.a * s);
    let cured = rng.gen::<f64>() < cure_probability;
    let latent = weibull_inverse(3.0 + spec.g * s, spec.shape, rng.gen());
    let latent_time = if cured { f64::INFINITY } else { latent };
    let horizon = spec.censor_log_scale.exp();
    let censor = (horizon * -(1.0 - rng.gen::<f64>()).ln()).min(horizon);
    let time = latent_time.min(censor);
    let event = latent_time <= censor;
    GeneratedSubject {
        record: SubjectRecord { time, event, covariates },
        cured,
        cure_probability,
        latent_time,
    }
}

fn covariate_labels(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Truth sample and the targets derived from it.
struct Truth {
    cohort: Cohort,
    target: CovariateTarget,
    q0: f64,
    s0: Vec<f64>,
}

fn draw_truth<R: Rng + ?Sized>(spec: &ScenarioSpec, times: &[f64], rng: &mut R) -> Truth {
    let shift = vec![0.0; spec.p];
    let mut records = Vec::with_capacity(spec.truth_n);
    let mut latent = Vec::with_capacity(spec.truth_n);
    let mut prob_sum = 0.0;
    for _ in 0..spec.truth_n {
        let s = generate_subject(spec, &shift, rng);
        prob_sum += s.cure_probability;
        latent.push(s.latent_time);
        records.push(s.record);
    }
    let cohort = Cohort::new(records, covariate_labels(spec.p), "trial-truth")
        .expect("generated records are always valid");
    let target = covariate_target(&cohort);
    let q0 = prob_sum / spec.truth_n as f64;
    let s0 = times
        .iter()
        .map(|&t| latent.iter().filter(|&&x| x > t).count() as f64 / spec.truth_n as f64)
        .collect();
    Truth { cohort, target, q0, s0 }
}

/// True cure rate and survival values for the trial population, from a
/// simulated sample of `truth_n` subjects. The cure rate averages the latent
/// cure probabilities; the survival values come from the latent, uncensored
/// outcomes.
pub fn compute_truth<R: Rng + ?Sized>(
    spec: &ScenarioSpec,
    times: &[f64],
    rng: &mut R,
) -> Result<(f64, Vec<(f64, f64)>)> {
    spec.validate()?;
    let truth = draw_truth(spec, times, rng);
    Ok((truth.q0, times.iter().copied().zip(truth.s0).collect()))
}

/// Cure-rate estimator columns, in table order.
pub const SCENARIO_ESTIMATORS: [&str; 5] = ["Unadj", "MAIC", "MA", "MAIC+MA", "MAIC+MA-KM"];

/// Survival estimator columns.
pub const SURVIVAL_ESTIMATORS: [&str; 4] = ["Unadj-KM", "MAIC", "MA", "IPW"];

/// Evaluation grid used by the survival scenarios unless overridden.
pub const DEFAULT_SURVIVAL_TIMES: [f64; 6] = [25.0, 50.0, 100.0, 150.0, 250.0, 400.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub label: String,
    pub bias_x100: f64,
    pub se_x100: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub spec: ScenarioSpec,
    pub truth_q0: f64,
    /// Mean censored fraction across replicates.
    pub censored_share: f64,
    pub estimators: Vec<EstimatorSummary>,
}

struct CureRep {
    censored_share: f64,
    values: Vec<std::result::Result<f64, String>>,
}

fn weighted_sum(pos: &PseudoObservations, weights: &WeightSet) -> f64 {
    pos.values.iter().zip(&weights.weights).map(|(v, w)| v * w).sum()
}

fn cure_replicate(spec: &ScenarioSpec, truth: &Truth, r: usize) -> CureRep {
    let mut rng = stream_rng(spec.seed, r as u64 + 1);
    let shift = vec![-0.75 * spec.b; spec.p];
    let mut records = Vec::with_capacity(spec.n);
    let mut censored = 0usize;
    for _ in 0..spec.n {
        let s = generate_subject(spec, &shift, &mut rng);
        if !s.record.event {
            censored += 1;
        }
        records.push(s.record);
    }
    let censored_share = censored as f64 / spec.n as f64;
    let cohort = Cohort::new(records, covariate_labels(spec.p), "historical")
        .expect("generated records are always valid");

    let pos = match pseudo_survival(&cohort, last_observed_time(&cohort)) {
        Ok(pos) => pos,
        Err(e) => {
            return CureRep { censored_share, values: vec![Err(e.to_string()); 5] };
        }
    };

    let unadj = estimate_cure_po(&pos, &WeightSet::uniform(spec.n), WeightMethod::Uniform)
        .map(|e| e.value)
        .map_err(|e| e.to_string());

    let maic = EntropyDualProblem::from_covariates(&cohort, &truth.target)
        .and_then(|problem| solve_entropy_weights(&problem))
        .and_then(|w| estimate_cure_po(&pos, &w, WeightMethod::Maic).map(|e| e.value))
        .map_err(|e| e.to_string());

    let (ma, mm, mm_km) = match fit_pseudo_logistic(&pos, &cohort, None) {
        Err(e) => {
            let msg = e.to_string();
            (Err(msg.clone()), Err(msg.clone()), Err(msg))
        }
        Ok(fit) => {
            let ma = ma_balance_design(&fit, &cohort, &truth.cohort)
                .and_then(|problem| solve_entropy_weights(&problem))
                .and_then(|w| estimate_cure_po(&pos, &w, WeightMethod::Ma).map(|e| e.value))
                .map_err(|e| e.to_string());
            match maic_ma_design(&fit, &cohort, &truth.cohort)
                .and_then(|problem| solve_entropy_weights(&problem))
            {
                Err(e) => {
                    let msg = e.to_string();
                    (ma, Err(msg.clone()), Err(msg))
                }
                Ok(w) => {
                    let mm = estimate_cure_po(&pos, &w, WeightMethod::MaicMa)
                        .map(|e| e.value)
                        .map_err(|e| e.to_string());
                    let mm_km = estimate_cure_km(&cohort, &w, WeightMethod::MaicMa)
                        .map(|e| e.value)
                        .map_err(|e| e.to_string());
                    (ma, mm, mm_km)
                }
            }
        }
    };

    CureRep { censored_share, values: vec![unadj, maic, ma, mm, mm_km] }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

fn collect_column(
    reps: &[Vec<std::result::Result<f64, String>>],
    k: usize,
) -> (Vec<f64>, usize, Option<String>) {
    let mut values = Vec::with_capacity(reps.len());
    let mut first = None;
    for rep in reps {
        match &rep[k] {
            Ok(v) => values.push(*v),
            Err(msg) => {
                if first.is_none() {
                    first = Some(msg.clone());
                }
            }
        }
    }
    let failures = reps.len() - values.len();
    (values, failures, first)
}

/// Run one cure-rate scenario: per replicate, draw a historical cohort,
/// compute cure pseudo-observations, balance them with each weighting
/// scheme, and record the estimates. Bias and SE are reported times 100.
///
/// Solver failures in a replicate are counted per estimator and skipped;
/// more than 20% of them for any single estimator aborts the run.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioResult> {
    spec.validate()?;
    if spec.replicates < 2 {
        return Err(Error::InvalidSpec(
            "at least two replicates are needed for a spread estimate".into(),
        ));
    }
    let truth = draw_truth(spec, &[], &mut stream_rng(spec.seed, 0));
    let reps: Vec<CureRep> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| cure_replicate(spec, &truth, r))
        .collect();
    let censored_share =
        reps.iter().map(|r| r.censored_share).sum::<f64>() / spec.replicates as f64;
    let columns: Vec<Vec<std::result::Result<f64, String>>> =
        reps.into_iter().map(|r| r.values).collect();

    let mut estimators = Vec::with_capacity(SCENARIO_ESTIMATORS.len());
    for (k, label) in SCENARIO_ESTIMATORS.iter().enumerate() {
        let (values, failures, first) = collect_column(&columns, k);
        if failures * 5 > spec.replicates {
            return Err(Error::TooManyFailures {
                failed: failures,
                total: spec.replicates,
                first: format!("{label}: {}", first.unwrap_or_default()),
            });
        }
        let (mean, sd) = mean_sd(&values);
        estimators.push(EstimatorSummary {
            label: (*label).to_string(),
            bias_x100: 100.0 * (mean - truth.q0),
            se_x100: 100.0 * sd,
            failures,
        });
    }

    Ok(ScenarioResult { spec: spec.clone(), truth_q0: truth.q0, censored_share, estimators })
}

/// Error-distribution cell for one estimator at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalCell {
    pub estimator: String,
    pub time: f64,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalScenarioResult {
    pub spec: ScenarioSpec,
    pub times: Vec<f64>,
    pub truth_s0: Vec<f64>,
    /// Failure counts per estimator, in `SURVIVAL_ESTIMATORS` order.
    pub failures: Vec<(String, usize)>,
    /// Quantile summaries of estimate − truth, one cell per estimator and
    /// time.
    pub cells: Vec<SurvivalCell>,
    /// Raw errors per estimator: (replicate index, error at each grid time).
    /// Failed replicates are omitted.
    pub errors: Vec<(String, Vec<(usize, Vec<f64>)>)>,
}

impl SurvivalScenarioResult {
    /// One row per estimator and time, full precision.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("estimator,time,truth,mean,sd,min,q25,median,q75,max,failures\n");
        for cell in &self.cells {
            let truth = self
                .times
                .iter()
                .position(|&t| t == cell.time)
                .map(|j| self.truth_s0[j])
                .unwrap_or(f64::NAN);
            let failures = self
                .failures
                .iter()
                .find(|(label, _)| *label == cell.estimator)
                .map(|(_, f)| *f)
                .unwrap_or(0);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                cell.estimator,
                cell.time,
                truth,
                cell.mean,
                cell.sd,
                cell.min,
                cell.q25,
                cell.median,
                cell.q75,
                cell.max,
                failures
            ));
        }
        out
    }

    /// Long format, one row per estimator, replicate, and time.
    pub fn long_csv(&self) -> String {
        let mut out = String::from("estimator,replicate,time,error\n");
        for (label, rows) in &self.errors {
            for (r, errs) in rows {
                for (j, &t) in self.times.iter().enumerate() {
                    out.push_str(&format!("{label},{r},{t},{}\n", errs[j]));
                }
            }
        }
        out
    }
}

struct SurvRep {
    values: Vec<std::result::Result<Vec<f64>, String>>,
}

fn survival_replicate(spec: &ScenarioSpec, times: &[f64], r: usize) -> SurvRep {
    let mut rng = stream_rng(spec.seed, r as u64 + 1);
    let shift = vec![0.75 * spec.b; spec.p];
    let records: Vec<SubjectRecord> =
        (0..spec.n).map(|_| generate_subject(spec, &shift, &mut rng).record).collect();
    let hist = Cohort::new(records, covariate_labels(spec.p), "historical")
        .expect("generated records are always valid");
    let trial_records: Vec<SubjectRecord> = (0..spec.trial_n)
        .map(|_| SubjectRecord {
            time: 1.0,
            event: false,
            covariates: (0..spec.p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        })
        .collect();
    let trial = Cohort::new(trial_records, covariate_labels(spec.p), "trial")
        .expect("generated records are always valid");
    let target = covariate_target(&trial);

    let pos: Vec<PseudoObservations> = match times
        .iter()
        .map(|&t| pseudo_survival(&hist, t))
        .collect::<Result<_>>()
    {
        Ok(pos) => pos,
        Err(e) => {
            return SurvRep { values: vec![Err(e.to_string()); 4] };
        }
    };

    let unadj = kaplan_meier(&hist)
        .map(|curve| times.iter().map(|&t| curve.evaluate(t)).collect::<Vec<_>>())
        .map_err(|e| e.to_string());

    let maic = EntropyDualProblem::from_covariates(&hist, &target)
        .and_then(|problem| solve_entropy_weights(&problem))
        .map(|w| pos.iter().map(|po| weighted_sum(po, &w)).collect::<Vec<_>>())
        .map_err(|e| e.to_string());

    // The prediction target moves with the horizon, so the outcome model is
    // refitted at every grid time.
    let ma = pos
        .iter()
        .map(|po| {
            let fit = fit_pseudo_logistic(po, &hist, None)?;
            let problem = ma_balance_design(&fit, &hist, &trial)?;
            let w = solve_entropy_weights(&problem)?;
            Ok(weighted_sum(po, &w))
        })
        .collect::<Result<Vec<f64>>>()
        .map_err(|e| e.to_string());

    let ipw = ipw_weights(&hist, &trial)
        .map(|w| pos.iter().map(|po| weighted_sum(po, &w)).collect::<Vec<_>>())
        .map_err(|e| e.to_string());

    SurvRep { values: vec![unadj, maic, ma, ipw] }
}

/// Run one survival scenario: the historical cohort is shifted up, a fresh
/// trial covariate sample is drawn every replicate (it feeds the balance
/// targets and the weighting propensity model), and each estimator's error
/// against the true trial survival is recorded at every grid time.
pub fn run_survival_scenario(spec: &ScenarioSpec, times: &[f64]) -> Result<SurvivalScenarioResult> {
    spec.validate()?;
    if spec.replicates < 2 {
        return Err(Error::InvalidSpec(
            "at least two replicates are needed for a spread estimate".into(),
        ));
    }
    if times.is_empty() {
        return Err(Error::InvalidSpec("at least one evaluation time is required".into()));
    }
    for &t in times {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "evaluation time {t} must be positive and finite"
            )));
        }
    }

    let truth = draw_truth(spec, times, &mut stream_rng(spec.seed, 0));
    let reps: Vec<SurvRep> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| survival_replicate(spec, times, r))
        .collect();

    let mut failures = Vec::with_capacity(SURVIVAL_ESTIMATORS.len());
    let mut cells = Vec::with_capacity(SURVIVAL_ESTIMATORS.len() * times.len());
    let mut errors = Vec::with_capacity(SURVIVAL_ESTIMATORS.len());
    for (k, label) in SURVIVAL_ESTIMATORS.iter().enumerate() {
        let mut kept: Vec<(usize, Vec<f64>)> = Vec::with_capacity(reps.len());
        let mut first = None;
        for (r, rep) in reps.iter().enumerate() {
            match &rep.values[k] {
                Ok(estimates) => kept.push((
                    r,
                    estimates.iter().zip(&truth.s0).map(|(e, t)| e - t).collect(),
                )),
                Err(msg) => {
                    if first.is_none() {
                        first = Some(msg.clone());
                    }
                }
            }
        }
        let failed = spec.replicates - kept.len();
        if failed * 5 > spec.replicates {
            return Err(Error::TooManyFailures {
                failed,
                total: spec.replicates,
                first: format!("{label}: {}", first.unwrap_or_default()),
            });
        }
        for (j, &t) in times.iter().enumerate() {
            let mut col: Vec<f64> = kept.iter().map(|(_, errs)| errs[j]).collect();
            col.sort_by(f64::total_cmp);
            let (mean, sd) = mean_sd(&col);
            cells.push(SurvivalCell {
                estimator: (*label).to_string(),
                time: t,
                mean,
                sd,
                min: col[0],
                q25: quantile(&col, 0.25),
                median: quantile(&col, 0.5),
                q75: quantile(&col, 0.75),
                max: col[col.len() - 1],
            });
        }
        failures.push(((*label).to_string(), failed));
        errors.push(((*label).to_string(), kept));
    }

    Ok(SurvivalScenarioResult {
        spec: spec.clone(),
        times: times.to_vec(),
        truth_s0: truth.s0,
        failures,
        cells,
        errors,
    })
}

/// CSV and aligned-text renderings of a batch of cure-rate scenario results.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedTable {
    pub text: String,
    pub csv: String,
}

fn center(s: &str, width: usize) -> String {
    let pad = width.saturating_sub(s.len());
    let left = pad / 2;
    format!("{}{}{}", " ".repeat(left), s, " ".repeat(pad - left))
}

/// Render results in row order. The text table carries one decimal place on
/// the bias and SE columns; the CSV keeps full precision.
pub fn render_table(results: &[ScenarioResult]) -> RenderedTable {
    let mut labels: Vec<&str> = Vec::new();
    for r in results {
        for e in &r.estimators {
            if !labels.iter().any(|l| *l == e.label) {
                labels.push(&e.label);
            }
        }
    }

    let mut csv = String::from("n,p,a,g,shape,b,censored_share,truth_q0");
    for l in &labels {
        csv.push_str(&format!(",bias_{l},se_{l},failures_{l}"));
    }
    csv.push('\n');
    for r in results {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}",
            r.spec.n,
            r.spec.p,
            r.spec.a,
            r.spec.g,
            r.spec.shape,
            r.spec.b,
            r.censored_share,
            r.truth_q0
        ));
        for l in &labels {
            match r.estimators.iter().find(|e| e.label == *l) {
                Some(e) => csv.push_str(&format!(",{},{},{}", e.bias_x100, e.se_x100, e.failures)),
                None => csv.push_str(",,,"),
            }
        }
        csv.push('\n');
    }

    let widths: Vec<usize> = labels.iter().map(|l| l.len().max(6) + 2).collect();
    let param_header = format!(
        "{:>6} {:>3} {:>6} {:>6} {:>6} {:>6}",
        "n", "p", "a", "g", "shape", "b"
    );
    let block_width: usize = widths.iter().sum();
    let mut text = String::new();
    if !labels.is_empty() {
        text.push_str(&" ".repeat(param_header.len()));
        text.push_str(&center("bias x100", block_width));
        text.push_str(&center("se x100", block_width));
        text.push('\n');
    }
    text.push_str(&param_header);
    for _ in 0..2 {
        for (l, w) in labels.iter().zip(&widths) {
            text.push_str(&format!("{:>w$}", l, w = w));
        }
    }
    text.push('\n');
    for r in results {
        text.push_str(&format!(
            "{:>6} {:>3} {:>6.2} {:>6.2} {:>6.2} {:>6.2}",
            r.spec.n, r.spec.p, r.spec.a, r.spec.g, r.spec.shape, r.spec.b
        ));
        for (l, w) in labels.iter().zip(&widths) {
            match r.estimators.iter().find(|e| e.label == *l) {
                Some(e) => text.push_str(&format!("{:>w$.1}", e.bias_x100, w = w)),
                None => text.push_str(&" ".repeat(*w)),
            }
        }
        for (l, w) in labels.iter().zip(&widths) {
            match r.estimators.iter().find(|e| e.label == *l) {
                Some(e) => text.push_str(&format!("{:>w$.1}", e.se_x100, w = w)),
                None => text.push_str(&" ".repeat(*w)),
            }
        }
        text.push('\n');
    }

    RenderedTable { text, csv }
}
