//! Release-gating acceptance checks, one test per numbered check (c1..c9).
//! Each test prints a single verdict line with the measured values (shown
//! with `--nocapture`, or automatically when the check fails) and then
//! asserts. The 2000-replicate reference scenario is computed once and
//! shared between the checks that need it.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::ThreadPoolBuilder;

use curecal::{
    bootstrap_estimate, covariate_target, estimate_cure_po, estimate_cure_pol, generate_subject,
    kaplan_meier, last_observed_time, pseudo_survival, run_scenario, run_survival_scenario,
    solve_entropy_weights, BootstrapSpec, Cohort, CovariateTarget, EntropyDualProblem,
    EstimatorSummary, ScenarioResult, ScenarioSpec, SubjectRecord, SurvivalCell,
    SurvivalScenarioResult, TransformScale, WeightMethod, WeightSet, DEFAULT_SURVIVAL_TIMES,
};

/// Cure rate induced by the generator at a population mean of -0.375 per
/// covariate with p = 3 and a = 0.7: the mean of expit(0.7 Z) for Z normal
/// with mean -1.125 and variance 3.
const SHIFTED_CURE_RATE: f64 = 0.3515782606202206;

fn reference_spec() -> ScenarioSpec {
    ScenarioSpec {
        n: 500,
        p: 3,
        a: 0.70,
        g: -0.3,
        b: 0.5,
        shape: 1.0,
        censor_log_scale: 5.5,
        truth_n: 100_000,
        trial_n: 300,
        replicates: 2000,
        seed: 1,
    }
}

fn reference_result() -> &'static ScenarioResult {
    static RESULT: OnceLock<ScenarioResult> = OnceLock::new();
    RESULT.get_or_init(|| run_scenario(&reference_spec()).expect("reference scenario runs"))
}

fn column<'a>(result: &'a ScenarioResult, label: &str) -> &'a EstimatorSummary {
    result
        .estimators
        .iter()
        .find(|e| e.label == label)
        .unwrap_or_else(|| panic!("no estimator column {label}"))
}

fn cell<'a>(result: &'a SurvivalScenarioResult, estimator: &str, time: f64) -> &'a SurvivalCell {
    result
        .cells
        .iter()
        .find(|c| c.estimator == estimator && c.time == time)
        .unwrap_or_else(|| panic!("no cell for {estimator} at {time}"))
}

/// Accumulates named sub-checks and prints one verdict line at the end.
struct Checks {
    label: &'static str,
    parts: Vec<String>,
    ok: bool,
}

impl Checks {
    fn new(label: &'static str) -> Self {
        Checks { label, parts: Vec::new(), ok: true }
    }

    fn band(&mut self, name: &str, value: f64, lo: f64, hi: f64) {
        let pass = value >= lo && value <= hi;
        self.ok &= pass;
        let word = if pass { "in" } else { "OUTSIDE" };
        self.parts.push(format!("{name} = {value:.3} {word} [{lo}, {hi}]"));
    }

    fn below(&mut self, name: &str, value: f64, bound: f64) {
        let pass = value < bound;
        self.ok &= pass;
        let word = if pass { "<" } else { "NOT <" };
        self.parts.push(format!("{name} = {value:.3e} {word} {bound:.0e}"));
    }

    fn require(&mut self, name: &str, pass: bool) {
        self.ok &= pass;
        let word = if pass { "holds" } else { "FAILS" };
        self.parts.push(format!("{name} {word}"));
    }

    fn finish(self) {
        let verdict = if self.ok { "PASS" } else { "FAIL" };
        let detail = self.parts.join("; ");
        println!("{}: {verdict} | {detail}", self.label);
        assert!(self.ok, "{}: {detail}", self.label);
    }
}

#[test]
fn c1_reference_scenario_recovers_known_bias_and_spread() {
    let result = reference_result();
    let mut checks = Checks::new("c1 reference scenario bias and spread");
    checks.band("Unadj bias x100", column(result, "Unadj").bias_x100, -16.1, -14.1);
    checks.band("MAIC bias x100", column(result, "MAIC").bias_x100, -0.8, 1.2);
    checks.band("MA bias x100", column(result, "MA").bias_x100, -0.7, 1.3);
    checks.band("MAIC se x100", column(result, "MAIC").se_x100, 2.03, 3.77);
    checks.band("MA se x100", column(result, "MA").se_x100, 1.12, 2.08);
    checks.finish();
}

#[test]
fn c2_unadjusted_bias_holds_across_weibull_shapes() {
    let mut spec = reference_spec();
    spec.n = 200;
    spec.g = 0.3;
    spec.shape = 2.0;
    let steep = run_scenario(&spec).expect("shape 2 scenario runs");

    spec.a = 0.35;
    spec.shape = 0.5;
    let heavy = run_scenario(&spec).expect("shape 0.5 scenario runs");

    let mut checks = Checks::new("c2 unadjusted bias across shapes");
    checks.band("shape 2.0 Unadj bias x100", column(&steep, "Unadj").bias_x100, -16.1, -13.1);
    checks.band("shape 0.5 Unadj bias x100", column(&heavy, "Unadj").bias_x100, -8.3, -4.3);
    checks.finish();
}

#[test]
fn c3_adjusted_survival_curves_close_the_population_gap() {
    let mut spec = reference_spec();
    spec.g = 0.3;
    let result = run_survival_scenario(&spec, &DEFAULT_SURVIVAL_TIMES)
        .expect("survival scenario runs");

    let mut checks = Checks::new("c3 survival error medians");
    for &t in DEFAULT_SURVIVAL_TIMES.iter() {
        checks.band(
            &format!("Unadj-KM median error at t={t}"),
            cell(&result, "Unadj-KM", t).median,
            0.10,
            0.25,
        );
    }
    for estimator in ["MAIC", "MA", "IPW"] {
        for &t in DEFAULT_SURVIVAL_TIMES.iter().filter(|&&t| t >= 150.0) {
            checks.band(
                &format!("{estimator} median error at t={t}"),
                cell(&result, estimator, t).median,
                -0.05,
                0.05,
            );
        }
    }
    checks.finish();
}

fn covariate_cohort<R: Rng>(n: usize, k: usize, rng: &mut R) -> Cohort {
    let scales: Vec<f64> = (0..k).map(|_| rng.gen_range(0.5..3.0)).collect();
    let shifts: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let records = (0..n)
        .map(|_| {
            let covariates = (0..k)
                .map(|j| shifts[j] + scales[j] * normal(rng))
                .collect();
            SubjectRecord { time: 1.0, event: true, covariates }
        })
        .collect();
    let names = (1..=k).map(|j| format!("z{j}")).collect();
    Cohort::new(records, names, "balance-test").unwrap()
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample::<f64, _>(rand_distr::StandardNormal)
}

fn external_residual(cohort: &Cohort, weights: &WeightSet, target: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    for (j, &t) in target.iter().enumerate() {
        let moment: f64 = cohort
            .records
            .iter()
            .zip(&weights.weights)
            .map(|(r, w)| w * r.covariates[j])
            .sum();
        worst = worst.max((moment - t).abs());
    }
    worst
}

#[test]
fn c4_entropy_weights_balance_to_tolerance_or_refuse() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let mut worst = 0.0_f64;
    for _ in 0..60 {
        let n = rng.gen_range(30..=120);
        let k = rng.gen_range(1..=4);
        let cohort = covariate_cohort(n, k, &mut rng);
        // a convex combination of the rows is always attainable
        let lambda: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let total: f64 = lambda.iter().sum();
        let mut target = vec![0.0; k];
        for (r, l) in cohort.records.iter().zip(&lambda) {
            for (t, x) in target.iter_mut().zip(&r.covariates) {
                *t += l / total * x;
            }
        }
        let problem = EntropyDualProblem::from_covariates(
            &cohort,
            &CovariateTarget { means: target.clone(), source_n: n },
        )
        .unwrap();
        let weights = solve_entropy_weights(&problem).unwrap();
        worst = worst.max(external_residual(&cohort, &weights, &target));
    }

    // asking for the cohort's own means must hand back uniform weights
    let cohort = covariate_cohort(90, 3, &mut rng);
    let problem =
        EntropyDualProblem::from_covariates(&cohort, &covariate_target(&cohort)).unwrap();
    let weights = solve_entropy_weights(&problem).unwrap();
    let uniform_gap = weights
        .weights
        .iter()
        .map(|w| (w - 1.0 / 90.0).abs())
        .fold(0.0_f64, f64::max);

    let mut rejected = 0;
    for _ in 0..20 {
        let n = rng.gen_range(30..=80);
        let k = rng.gen_range(1..=3);
        let cohort = covariate_cohort(n, k, &mut rng);
        let unreachable: Vec<f64> = (0..k)
            .map(|j| {
                cohort
                    .records
                    .iter()
                    .map(|r| r.covariates[j])
                    .fold(f64::NEG_INFINITY, f64::max)
                    + 0.5
            })
            .collect();
        let outcome = EntropyDualProblem::from_covariates(
            &cohort,
            &CovariateTarget { means: unreachable, source_n: n },
        )
        .and_then(|p| solve_entropy_weights(&p));
        if outcome.is_err() {
            rejected += 1;
        }
    }

    let mut checks = Checks::new("c4 entropy balancing");
    checks.below("worst external residual over 60 feasible solves", worst, 1e-8);
    checks.below("self-calibration distance from uniform", uniform_gap, 1e-10);
    checks.require(
        &format!("all 20 out-of-range targets rejected ({rejected} of 20)"),
        rejected == 20,
    );
    checks.finish();
}

fn random_survival_cohort<R: Rng>(rng: &mut R, all_events: bool) -> Cohort {
    let n = rng.gen_range(5..=200);
    let records = (0..n)
        .map(|i| {
            let time = if rng.gen_bool(0.5) {
                // tied grid times
                rng.gen_range(1..=40) as f64 * 0.5
            } else {
                8.0 * -(1.0 - rng.gen::<f64>()).ln()
            };
            let event = if all_events {
                true
            } else if i == 0 {
                true
            } else if i == 1 {
                false
            } else {
                rng.gen_bool(0.55)
            };
            SubjectRecord { time, event, covariates: vec![] }
        })
        .collect();
    Cohort::new(records, vec![], "po-test").unwrap()
}

/// The obvious quadratic-cost construction: one full fit plus one fresh
/// leave-one-out fit per subject.
fn leave_one_out_oracle(cohort: &Cohort, t: f64) -> Vec<f64> {
    let n = cohort.len() as f64;
    let full = kaplan_meier(cohort).unwrap().evaluate(t);
    (0..cohort.len())
        .map(|i| {
            let mut records = cohort.records.clone();
            records.remove(i);
            let rest = Cohort::new(records, vec![], "loo").unwrap();
            let loo = kaplan_meier(&rest).unwrap().evaluate(t);
            n * full - (n - 1.0) * loo
        })
        .collect()
}

#[test]
fn c5_pseudo_observations_match_a_naive_leave_one_out_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let cohort = random_survival_cohort(&mut rng, false);
        let mut times = cohort.times();
        times.sort_by(f64::total_cmp);
        let picks = [
            times[times.len() / 4],
            times[times.len() * 3 / 5],
            last_observed_time(&cohort),
        ];
        for t in picks {
            let pos = pseudo_survival(&cohort, t).unwrap();
            let oracle = leave_one_out_oracle(&cohort, t);
            for (a, b) in pos.values.iter().zip(&oracle) {
                worst = worst.max((a - b).abs());
            }
        }
    }

    let mut indicator_exact = true;
    for _ in 0..20 {
        let cohort = random_survival_cohort(&mut rng, true);
        let mut times = cohort.times();
        times.sort_by(f64::total_cmp);
        let t = times[times.len() / 2];
        let pos = pseudo_survival(&cohort, t).unwrap();
        for (v, r) in pos.values.iter().zip(&cohort.records) {
            let indicator = if r.time > t { 1.0 } else { 0.0 };
            if *v != indicator {
                indicator_exact = false;
            }
        }
    }

    let mut checks = Checks::new("c5 pseudo-observation oracle");
    checks.below("largest deviation over 100 mixed-censoring cohorts", worst, 1e-12);
    checks.require("uncensored pseudo-observations equal the indicators exactly", indicator_exact);
    checks.finish();
}

#[test]
fn c6_pseudo_cure_mean_approaches_the_generator_cure_rate() {
    // long follow-up so the curve actually plateaus
    let mut spec = reference_spec();
    spec.censor_log_scale = 6.5;
    let shift = vec![-0.75 * spec.b; spec.p];
    let labels: Vec<String> = (1..=spec.p).map(|j| format!("x{j}")).collect();

    let mut medians = Vec::new();
    for (si, n) in [200usize, 1000, 5000].into_iter().enumerate() {
        let mut errors: Vec<f64> = (0..50)
            .map(|rep| {
                let mut rng = ChaCha8Rng::seed_from_u64(600 + rep as u64);
                rng.set_stream(si as u64);
                let records = (0..n)
                    .map(|_| generate_subject(&spec, &shift, &mut rng).record)
                    .collect();
                let cohort = Cohort::new(records, labels.clone(), "hist").unwrap();
                let pos = pseudo_survival(&cohort, last_observed_time(&cohort)).unwrap();
                (pos.mean() - SHIFTED_CURE_RATE).abs()
            })
            .collect();
        errors.sort_by(f64::total_cmp);
        medians.push((errors[24] + errors[25]) / 2.0);
    }

    let mut checks = Checks::new("c6 cure pseudo-observation consistency");
    checks.require(
        &format!(
            "median absolute error shrinks with n ({:.4} > {:.4} > {:.4})",
            medians[0], medians[1], medians[2]
        ),
        medians[0] > medians[1] && medians[1] > medians[2],
    );
    checks.below("median absolute error at n=5000", medians[2], 0.02);
    checks.finish();
}

#[test]
fn c7_uniform_weights_and_logit_link_reduce_to_the_plain_estimators() {
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let mut km_identical = true;
    let mut worst_link_gap = 0.0_f64;
    let mut interior = 0;
    for _ in 0..40 {
        let cohort = random_survival_cohort(&mut rng, false);
        let n = cohort.len();

        let plain = kaplan_meier(&cohort).unwrap();
        let weighted =
            curecal::weighted_kaplan_meier(&cohort, &WeightSet::uniform(n)).unwrap();
        if plain.times.len() != weighted.times.len()
            || plain
                .times
                .iter()
                .zip(&weighted.times)
                .any(|(a, b)| a.to_bits() != b.to_bits())
            || plain
                .probs
                .iter()
                .zip(&weighted.probs)
                .any(|(a, b)| a.to_bits() != b.to_bits())
        {
            km_identical = false;
        }

        let raw: Vec<f64> = (0..n).map(|_| 0.05 + rng.gen::<f64>()).collect();
        let weights = WeightSet::from_raw(raw, vec![], vec![]).unwrap();
        let mut times = cohort.times();
        times.sort_by(f64::total_cmp);
        let pos = pseudo_survival(&cohort, times[(times.len() * 2) / 5]).unwrap();
        let po = estimate_cure_po(&pos, &weights, WeightMethod::Uniform).unwrap();
        if po.value > 0.0 && po.value < 1.0 {
            interior += 1;
            let pol = estimate_cure_pol(&pos, &weights, WeightMethod::Uniform).unwrap();
            worst_link_gap = worst_link_gap.max((pol.value - po.value).abs());
        }
    }

    let mut checks = Checks::new("c7 reduction to the unweighted estimators");
    checks.require("uniform-weight product-limit curve is bitwise standard", km_identical);
    checks.require(&format!("interior weighted means seen ({interior} of 40)"), interior > 0);
    checks.below("largest logit-link vs plain-mean gap", worst_link_gap, 1e-12);
    checks.finish();
}

fn generator_cohort(spec: &ScenarioSpec, stream: u64, n: usize, shift: &[f64]) -> Cohort {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let records = (0..n)
        .map(|_| generate_subject(spec, shift, &mut rng).record)
        .collect();
    let labels = (1..=spec.p).map(|j| format!("x{j}")).collect();
    Cohort::new(records, labels, "hist").unwrap()
}

fn balanced_cure_pipeline(
    target: CovariateTarget,
) -> impl Fn(&Cohort) -> curecal::Result<f64> + Sync {
    move |c: &Cohort| {
        let pos = pseudo_survival(c, last_observed_time(c))?;
        let problem = EntropyDualProblem::from_covariates(c, &target)?;
        let weights = solve_entropy_weights(&problem)?;
        estimate_cure_po(&pos, &weights, WeightMethod::Maic).map(|e| e.value)
    }
}

#[test]
fn c8_bootstrap_is_reproducible_and_tracks_monte_carlo_spread() {
    let spec = reference_spec();
    let hist_shift = vec![-0.75 * spec.b; spec.p];

    // the same trial sample the scenario harness draws on stream 0
    let trial = generator_cohort(&spec, 0, spec.truth_n, &vec![0.0; spec.p]);
    let target = covariate_target(&trial);

    let cohort = generator_cohort(&spec, 1, spec.n, &hist_shift);
    let pipeline = balanced_cure_pipeline(target.clone());
    let bspec = BootstrapSpec::new(300, 99);
    let first = bootstrap_estimate(&cohort, &pipeline, &bspec).unwrap();
    let second = bootstrap_estimate(&cohort, &pipeline, &bspec).unwrap();
    let bit_identical = first == second
        && first.point.to_bits() == second.point.to_bits()
        && first.variance.to_bits() == second.variance.to_bits()
        && first.ci_low.to_bits() == second.ci_low.to_bits()
        && first.ci_high.to_bits() == second.ci_high.to_bits();

    let mc_se = column(reference_result(), "MAIC").se_x100 / 100.0;
    let mut se_sum = 0.0;
    for stream in 1..=5u64 {
        let cohort = generator_cohort(&spec, stream, spec.n, &hist_shift);
        let pipeline = balanced_cure_pipeline(target.clone());
        let bspec = BootstrapSpec::new(400, 100 + stream);
        let interval = bootstrap_estimate(&cohort, &pipeline, &bspec).unwrap();
        se_sum += interval.variance.sqrt();
    }
    let boot_se = se_sum / 5.0;

    let mut logit_bounded = true;
    for stream in 21..=28u64 {
        let mut small = spec.clone();
        small.n = 40;
        let cohort = generator_cohort(&small, stream, small.n, &hist_shift);
        let bspec = BootstrapSpec {
            replicates: 200,
            seed: 7,
            ci_level: 0.95,
            transform_scale: TransformScale::Logit,
        };
        let interval = bootstrap_estimate(
            &cohort,
            |c: &Cohort| {
                let pos = pseudo_survival(c, last_observed_time(c))?;
                Ok(pos.mean())
            },
            &bspec,
        )
        .unwrap();
        if !(0.0 <= interval.ci_low
            && interval.ci_low <= interval.ci_high
            && interval.ci_high <= 1.0)
        {
            logit_bounded = false;
        }
    }

    let mut checks = Checks::new("c8 bootstrap contract");
    checks.require("repeated runs with one seed are bit-identical", bit_identical);
    checks.band(
        "bootstrap se / monte carlo se over 5 cohorts",
        boot_se / mc_se,
        0.75,
        1.25,
    );
    checks.require("log-odds intervals stay inside [0, 1]", logit_bounded);
    checks.finish();
}

fn in_pool<T: Send>(threads: usize, work: impl FnOnce() -> T + Send) -> T {
    ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(work)
}

#[test]
fn c9_results_are_independent_of_thread_count() {
    let spec = ScenarioSpec {
        n: 120,
        p: 2,
        a: 0.5,
        g: -0.3,
        b: 0.4,
        shape: 1.0,
        censor_log_scale: 5.5,
        truth_n: 10_000,
        trial_n: 60,
        replicates: 40,
        seed: 5,
    };

    let cure: Vec<ScenarioResult> =
        [1, 2, 4].map(|k| in_pool(k, || run_scenario(&spec).unwrap())).into();
    let cure_stable = cure[0] == cure[1] && cure[1] == cure[2];

    let mut sspec = spec.clone();
    sspec.g = 0.3;
    let surv: Vec<SurvivalScenarioResult> = [1, 2, 4]
        .map(|k| in_pool(k, || run_survival_scenario(&sspec, &[20.0, 60.0]).unwrap()))
        .into();
    let surv_stable = surv[0] == surv[1] && surv[1] == surv[2];

    let cohort = generator_cohort(&spec, 3, spec.n, &vec![-0.75 * spec.b; spec.p]);
    let bspec = BootstrapSpec::new(200, 11);
    let boots: Vec<_> = [1, 4]
        .map(|k| {
            in_pool(k, || {
                bootstrap_estimate(
                    &cohort,
                    |c: &Cohort| {
                        let pos = pseudo_survival(c, last_observed_time(c))?;
                        Ok(pos.mean())
                    },
                    &bspec,
                )
                .unwrap()
            })
        })
        .into();
    let boot_stable = boots[0] == boots[1];

    let mut checks = Checks::new("c9 thread-count independence");
    checks.require("cure-rate scenario identical on 1, 2 and 4 threads", cure_stable);
    checks.require("survival scenario identical on 1, 2 and 4 threads", surv_stable);
    checks.require("bootstrap identical on 1 and 4 threads", boot_stable);
    checks.finish();
}
