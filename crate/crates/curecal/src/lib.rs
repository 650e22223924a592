//! Cure-rate and survival estimation for historical control cohorts,
//! reweighted to match a target trial population.

pub mod calibrate;
pub mod cohort;
pub mod estimate;
pub mod error;
pub mod inference;
pub mod numeric;
pub mod pseudo;
pub mod sim;
pub mod survival;
pub mod weights;

pub use calibrate::{
    fit_pseudo_logistic, ipw_weights, ma_balance_design, maic_ma_design, solve_entropy_weights,
    EntropyDualProblem, OutcomeModelFit,
};
pub use cohort::{covariate_target, load_cohort, Cohort, CovariateTarget, CsvSchema, SubjectRecord};
pub use estimate::{
    estimate_cure_direct, estimate_cure_km, estimate_cure_po, estimate_cure_pol,
    estimate_survival_km, estimate_survival_po, CureMethod, CureRateEstimate, WeightMethod,
};
pub use error::{Error, Result};
pub use inference::{
    bootstrap_estimate, bootstrap_samples, variance_naive, variance_survey, BootstrapSamples,
    BootstrapSpec, IntervalEstimate, TransformScale,
};
pub use pseudo::{pseudo_cure, pseudo_survival, PseudoObservations};
pub use sim::{
    compute_truth, generate_subject, render_table, run_scenario, run_survival_scenario,
    EstimatorSummary, GeneratedSubject, RenderedTable, ScenarioResult, ScenarioSpec,
    SurvivalCell, SurvivalScenarioResult, DEFAULT_SURVIVAL_TIMES, SCENARIO_ESTIMATORS,
    SURVIVAL_ESTIMATORS,
};
pub use survival::{
    kaplan_meier, last_observed_time, plateau_diagnostic, weighted_kaplan_meier, PlateauReport,
    SurvivalCurve,
};
pub use weights::WeightSet;
