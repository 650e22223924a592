//! The four subcommands. Each one loads inputs, runs the library, writes
//! write-once outputs into the chosen directory, and prints a short summary.

use std::io::Write;
use std::path::{Path, PathBuf};

use curecal::{
    bootstrap_estimate, covariate_target, estimate_cure_direct, estimate_cure_km,
    estimate_cure_po, estimate_cure_pol, estimate_survival_km, estimate_survival_po,
    fit_pseudo_logistic, ipw_weights, last_observed_time, load_cohort, ma_balance_design,
    maic_ma_design, pseudo_cure, pseudo_survival, render_table, run_scenario,
    run_survival_scenario, solve_entropy_weights, BootstrapSpec, Cohort, CsvSchema, CureMethod,
    CureRateEstimate, EntropyDualProblem, IntervalEstimate, OutcomeModelFit, PseudoObservations,
    TransformScale, WeightMethod, WeightSet,
};
use serde::Serialize;

use crate::config::{load_config, resolve_schema, ScenarioKind};
use crate::{CliError, CurvesArgs, EstimateArgs, EstimatorChoice, SimulateArgs, WeightChoice, WeightsArgs};

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Lib(curecal::Error::Io { path: path.display().to_string(), source })
}

/// Create-or-fail file write: outputs are write-once, reruns need a fresh
/// directory.
fn write_new(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let path = dir.join(name);
    let mut file = std::fs::OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(&path)
        .map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                CliError::Usage(format!(
                    "{} already exists; outputs are write-once, choose a fresh --out",
                    path.display()
                ))
            } else {
                io_error(&path, e)
            }
        })?;
    file.write_all(contents.as_bytes()).map_err(|e| io_error(&path, e))?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn load_warn(path: &Path, schema: &CsvSchema) -> Result<Cohort, CliError> {
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "cohort".to_string());
    let loaded = load_cohort(path, schema, &label).map_err(CliError::Lib)?;
    if loaded.excluded_rows > 0 {
        eprintln!(
            "warning: dropped {} row(s) with missing values from {}",
            loaded.excluded_rows,
            path.display()
        );
    }
    Ok(loaded.cohort)
}

struct Inputs {
    historical: Cohort,
    historical_path: PathBuf,
    trial: Option<Cohort>,
    trial_path: Option<PathBuf>,
}

fn load_inputs(data: &crate::DataArgs) -> Result<Inputs, CliError> {
    let config = load_config(data.config.as_deref())?;
    let historical_path = data
        .historical
        .clone()
        .or_else(|| config.historical.clone())
        .ok_or_else(|| CliError::Usage("--historical is required".to_string()))?;
    let trial_path = data.trial.clone().or_else(|| config.trial.clone());
    let schema = resolve_schema(&config, &historical_path)?;
    let historical = load_warn(&historical_path, &schema)?;
    let trial = trial_path.as_ref().map(|p| load_warn(p, &schema)).transpose()?;
    Ok(Inputs { historical, historical_path, trial, trial_path })
}

fn need_trial(t: Option<&Cohort>) -> curecal::Result<&Cohort> {
    t.ok_or_else(|| {
        curecal::Error::InvalidSpec("a trial cohort is required for this weighting".to_string())
    })
}

/// Weights for the chosen method, plus the outcome-model fit when one was
/// involved.
fn weights_for(
    choice: WeightChoice,
    historical: &Cohort,
    trial: Option<&Cohort>,
    pos: &PseudoObservations,
) -> curecal::Result<(WeightSet, WeightMethod, Option<OutcomeModelFit>)> {
    match choice {
        WeightChoice::None => {
            Ok((WeightSet::uniform(historical.len()), WeightMethod::Uniform, None))
        }
        WeightChoice::Maic => {
            let trial = need_trial(trial)?;
            let problem =
                EntropyDualProblem::from_covariates(historical, &covariate_target(trial))?;
            Ok((solve_entropy_weights(&problem)?, WeightMethod::Maic, None))
        }
        WeightChoice::Ma => {
            let trial = need_trial(trial)?;
            let fit = fit_pseudo_logistic(pos, historical, None)?;
            let problem = ma_balance_design(&fit, historical, trial)?;
            Ok((solve_entropy_weights(&problem)?, WeightMethod::Ma, Some(fit)))
        }
        WeightChoice::MaicMa => {
            let trial = need_trial(trial)?;
            let fit = fit_pseudo_logistic(pos, historical, None)?;
            let problem = maic_ma_design(&fit, historical, trial)?;
            Ok((solve_entropy_weights(&problem)?, WeightMethod::MaicMa, Some(fit)))
        }
        WeightChoice::Ipw => {
            let trial = need_trial(trial)?;
            Ok((ipw_weights(historical, trial)?, WeightMethod::Ipw, None))
        }
    }
}

fn method_name(m: CureMethod) -> &'static str {
    match m {
        CureMethod::Po => "po",
        CureMethod::Pol => "pol",
        CureMethod::Km => "km",
        CureMethod::Direct => "direct",
    }
}

fn weight_name(choice: WeightChoice) -> &'static str {
    match choice {
        WeightChoice::None => "none",
        WeightChoice::Maic => "maic",
        WeightChoice::Ma => "ma",
        WeightChoice::MaicMa => "maic-ma",
        WeightChoice::Ipw => "ipw",
    }
}

/// One estimator value on one cohort; the quiet path the bootstrap resamples
/// run through.
fn point_estimate(
    method: CureMethod,
    choice: WeightChoice,
    historical: &Cohort,
    trial: Option<&Cohort>,
) -> curecal::Result<f64> {
    let pos = pseudo_survival(historical, last_observed_time(historical))?;
    let (weights, weight_method, fit) = weights_for(choice, historical, trial, &pos)?;
    match method {
        CureMethod::Po => Ok(estimate_cure_po(&pos, &weights, weight_method)?.value),
        CureMethod::Pol => Ok(estimate_cure_pol(&pos, &weights, weight_method)?.value),
        CureMethod::Km => Ok(estimate_cure_km(historical, &weights, weight_method)?.value),
        CureMethod::Direct => {
            let trial = need_trial(trial)?;
            let fit = match fit {
                Some(fit) => fit,
                None => fit_pseudo_logistic(&pos, historical, None)?,
            };
            Ok(estimate_cure_direct(&fit, trial, WeightMethod::Uniform)?.value)
        }
    }
}

#[derive(Serialize)]
struct EstimateEntry {
    estimate: CureRateEstimate,
    interval: Option<IntervalEstimate>,
}

#[derive(Serialize)]
struct BootstrapEcho {
    replicates: usize,
    seed: u64,
    ci_level: f64,
}

#[derive(Serialize)]
struct EstimateReport {
    historical: String,
    trial: Option<String>,
    weights: &'static str,
    bootstrap: Option<BootstrapEcho>,
    estimates: Vec<EstimateEntry>,
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let methods: Vec<CureMethod> = match args.estimator {
        EstimatorChoice::Po => vec![CureMethod::Po],
        EstimatorChoice::Pol => vec![CureMethod::Pol],
        EstimatorChoice::Km => vec![CureMethod::Km],
        EstimatorChoice::Direct => vec![CureMethod::Direct],
        EstimatorChoice::All => {
            vec![CureMethod::Po, CureMethod::Pol, CureMethod::Km, CureMethod::Direct]
        }
    };
    if args.bootstrap.is_some() && args.seed.is_none() {
        return Err(CliError::Usage(
            "--seed is required when bootstrapping; all randomness is seeded".to_string(),
        ));
    }

    let inputs = load_inputs(&args.data)?;
    let needs_trial =
        args.weights != WeightChoice::None || methods.contains(&CureMethod::Direct);
    if needs_trial && inputs.trial.is_none() {
        return Err(CliError::Usage(format!(
            "--trial is required for {} weighting or the direct estimator",
            weight_name(args.weights)
        )));
    }

    let historical = &inputs.historical;
    let trial = inputs.trial.as_ref();
    let pos = pseudo_cure(historical)?;
    let (weights, weight_method, fit) = weights_for(args.weights, historical, trial, &pos)?;

    let mut entries = Vec::with_capacity(methods.len());
    for &method in &methods {
        let estimate = match method {
            CureMethod::Po => estimate_cure_po(&pos, &weights, weight_method)?,
            CureMethod::Pol => estimate_cure_pol(&pos, &weights, weight_method)?,
            CureMethod::Km => estimate_cure_km(historical, &weights, weight_method)?,
            CureMethod::Direct => {
                let trial = trial.expect("checked above");
                let fit = match &fit {
                    Some(fit) => fit.clone(),
                    None => fit_pseudo_logistic(&pos, historical, None)?,
                };
                estimate_cure_direct(&fit, trial, WeightMethod::Uniform)?
            }
        };
        let interval = match args.bootstrap {
            None => None,
            Some(replicates) => {
                let mut spec = BootstrapSpec::new(replicates, args.seed.expect("checked above"));
                spec.ci_level = args.ci;
                spec.transform_scale = if method == CureMethod::Pol {
                    TransformScale::Logit
                } else {
                    TransformScale::Identity
                };
                let choice = args.weights;
                Some(bootstrap_estimate(
                    historical,
                    |cohort| point_estimate(method, choice, cohort, trial),
                    &spec,
                )?)
            }
        };
        entries.push(EstimateEntry { estimate, interval });
    }

    for entry in &entries {
        let mut line = format!(
            "{:<7} {:<8} {:.4}",
            method_name(entry.estimate.method),
            weight_name(args.weights),
            entry.estimate.value
        );
        if let Some(interval) = &entry.interval {
            line.push_str(&format!(
                "  ({:.0}% CI {:.4} to {:.4})",
                100.0 * args.ci,
                interval.ci_low,
                interval.ci_high
            ));
        }
        if entry.estimate.out_of_range {
            line.push_str("  [outside [0,1]]");
        }
        println!("{line}");
    }

    let report = EstimateReport {
        historical: inputs.historical_path.display().to_string(),
        trial: inputs.trial_path.as_ref().map(|p| p.display().to_string()),
        weights: weight_name(args.weights),
        bootstrap: args.bootstrap.map(|replicates| BootstrapEcho {
            replicates,
            seed: args.seed.expect("checked above"),
            ci_level: args.ci,
        }),
        estimates: entries,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_new(&args.out, "estimates.json", &(json + "\n"))?;
    Ok(())
}

fn distinct_event_times(cohort: &Cohort) -> Vec<f64> {
    let mut times: Vec<f64> = cohort
        .records
        .iter()
        .filter(|r| r.event)
        .map(|r| r.time)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

pub fn cmd_curves(args: &CurvesArgs) -> Result<(), CliError> {
    let inputs = load_inputs(&args.data)?;
    if args.weights != WeightChoice::None && inputs.trial.is_none() {
        return Err(CliError::Usage(format!(
            "--trial is required for {} weighting",
            weight_name(args.weights)
        )));
    }
    let historical = &inputs.historical;

    let grid = match &args.times {
        Some(times) if !times.is_empty() => {
            let mut grid = times.clone();
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            grid
        }
        _ => {
            let grid = distinct_event_times(historical);
            if grid.is_empty() {
                vec![last_observed_time(historical)]
            } else {
                grid
            }
        }
    };
    let horizon = last_observed_time(historical);
    let beyond = grid.iter().filter(|&&t| t > horizon).count();
    if beyond > 0 {
        eprintln!(
            "warning: {beyond} grid time(s) beyond the last observed time {horizon}; the curves are flat there"
        );
    }

    let uniform = WeightSet::uniform(historical.len());
    let km = estimate_survival_km(historical, &uniform, &grid)?;
    let po = estimate_survival_po(historical, &uniform, &grid)?;
    let adjusted = if args.weights == WeightChoice::None {
        None
    } else {
        let pos = pseudo_survival(historical, horizon)?;
        let (weights, _, _) =
            weights_for(args.weights, historical, inputs.trial.as_ref(), &pos)?;
        Some((
            estimate_survival_km(historical, &weights, &grid)?,
            estimate_survival_po(historical, &weights, &grid)?,
        ))
    };

    let suffix = weight_name(args.weights);
    let mut csv = match &adjusted {
        Some(_) => format!("time,km,po,km_{suffix},po_{suffix}\n"),
        None => "time,km,po\n".to_string(),
    };
    for (j, &t) in grid.iter().enumerate() {
        match &adjusted {
            Some((km_w, po_w)) => csv.push_str(&format!(
                "{t},{},{},{},{}\n",
                km[j].1, po[j].1, km_w[j].1, po_w[j].1
            )),
            None => csv.push_str(&format!("{t},{},{}\n", km[j].1, po[j].1)),
        }
    }
    write_new(&args.out, "curves.csv", &csv)?;
    println!("{} grid times, last observed time {horizon}", grid.len());
    Ok(())
}

#[derive(Serialize)]
struct WeightDiagnostics {
    method: WeightMethod,
    n: usize,
    ess: f64,
    max_balance_residual: f64,
    balance_residuals: Vec<f64>,
    dual_coefficients: Vec<f64>,
}

pub fn cmd_weights(args: &WeightsArgs) -> Result<(), CliError> {
    if args.weights == WeightChoice::None {
        return Err(CliError::Usage(
            "choose a weighting method: --weights maic|ma|maic-ma|ipw".to_string(),
        ));
    }
    let inputs = load_inputs(&args.data)?;
    if inputs.trial.is_none() {
        return Err(CliError::Usage(format!(
            "--trial is required for {} weighting",
            weight_name(args.weights)
        )));
    }
    let historical = &inputs.historical;
    let pos = pseudo_cure(historical)?;
    let (weights, method, _) =
        weights_for(args.weights, historical, inputs.trial.as_ref(), &pos)?;

    let mut csv = String::from("row,weight\n");
    for (i, w) in weights.weights.iter().enumerate() {
        csv.push_str(&format!("{i},{w}\n"));
    }
    write_new(&args.out, "weights.csv", &csv)?;

    let diagnostics = WeightDiagnostics {
        method,
        n: weights.len(),
        ess: weights.ess,
        max_balance_residual: weights.max_residual(),
        balance_residuals: weights.balance_residuals.clone(),
        dual_coefficients: weights.dual_coefficients.clone(),
    };
    let json = serde_json::to_string_pretty(&diagnostics).expect("diagnostics serialize");
    write_new(&args.out, "diagnostics.json", &(json + "\n"))?;
    println!(
        "{} weights: ess {:.1} of n = {}, max balance residual {:.3e}",
        weight_name(args.weights),
        weights.ess,
        weights.len(),
        weights.max_residual()
    );
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let config_path = args
        .config
        .as_deref()
        .ok_or_else(|| CliError::Usage("--config with [[scenario]] blocks is required".to_string()))?;
    let config = load_config(Some(config_path))?;
    if config.scenario.is_empty() {
        return Err(CliError::Usage(format!(
            "{} has no [[scenario]] blocks",
            config_path.display()
        )));
    }
    let seed = args.seed.ok_or_else(|| {
        CliError::Usage("--seed is required for simulate; all randomness is seeded".to_string())
    })?;
    let default_replicates = if args.fast { 500 } else { 2000 };

    // Validate the whole grid before any computation.
    let mut prepared = Vec::with_capacity(config.scenario.len());
    for (i, entry) in config.scenario.iter().enumerate() {
        let spec = entry.to_spec(default_replicates, seed, i);
        spec.validate().map_err(CliError::Lib)?;
        let times = entry.times();
        if entry.kind == ScenarioKind::Survival
            && times.iter().any(|t| !(t.is_finite() && *t > 0.0))
        {
            return Err(CliError::Usage(format!(
                "scenario {i}: survival times must be positive and finite"
            )));
        }
        prepared.push((i, entry.kind, spec, times));
    }

    let mut cure_results = Vec::new();
    let mut attempted_cure = false;
    let mut succeeded = 0usize;
    let mut last_error = None;
    for (i, kind, spec, times) in &prepared {
        match kind {
            ScenarioKind::Cure => {
                attempted_cure = true;
                match run_scenario(spec) {
                    Ok(result) => {
                        succeeded += 1;
                        cure_results.push(result);
                    }
                    Err(e) => {
                        eprintln!("warning: scenario {i} failed: {e}");
                        last_error = Some(e);
                    }
                }
            }
            ScenarioKind::Survival => match run_survival_scenario(spec, times) {
                Ok(result) => {
                    succeeded += 1;
                    write_new(&args.out, &format!("survival_{i}_summary.csv"), &result.summary_csv())?;
                    write_new(&args.out, &format!("survival_{i}_errors.csv"), &result.long_csv())?;
                }
                Err(e) => {
                    eprintln!("warning: scenario {i} failed: {e}");
                    last_error = Some(e);
                }
            },
        }
    }

    if attempted_cure {
        let table = render_table(&cure_results);
        write_new(&args.out, "table.csv", &table.csv)?;
        write_new(&args.out, "table.txt", &table.text)?;
        print!("{}", table.text);
    }
    if succeeded == 0 {
        return Err(CliError::Lib(last_error.expect("at least one scenario ran")));
    }
    Ok(())
}
