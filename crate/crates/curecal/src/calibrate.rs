//! Weight construction: entropy balancing on covariate moments, calibration
//! on outcome-model predictions, the combination of the two, and propensity
//! odds weighting as a comparator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cohort::{Cohort, CovariateTarget};
use crate::error::{Error, Result};
use crate::numeric::{expit, log_sum_exp};
use crate::pseudo::PseudoObservations;
use crate::weights::WeightSet;

/// Dual formulation of the moment-matching problem: find weights of minimum
/// entropy distance from uniform subject to `Σ wᵢ·designᵢ = target`.
/// Weights take the form `wᵢ ∝ exp(−βᵀ designᵢ)`, and β minimizes the convex
/// objective `log Σᵢ exp(−βᵀ designᵢ) + βᵀ target`.
#[derive(Debug, Clone)]
pub struct EntropyDualProblem {
    /// n×k matrix of balancing functions (covariates, predictions, or both).
    pub design: DMatrix<f64>,
    pub target: DVector<f64>,
    /// Convergence threshold on the largest balance residual. Default 1e-8.
    pub tol: f64,
    /// Quasi-Newton iteration budget. Default 300.
    pub max_iter: usize,
}

pub const DEFAULT_BALANCE_TOL: f64 = 1e-8;
pub const DEFAULT_BALANCE_MAX_ITER: usize = 300;

impl EntropyDualProblem {
    pub fn new(design: DMatrix<f64>, target: DVector<f64>) -> Result<Self> {
        if design.ncols() != target.len() {
            return Err(Error::LengthMismatch { left: design.ncols(), right: target.len() });
        }
        if design.ncols() == 0 {
            return Err(Error::RankDeficient("no balancing columns".into()));
        }
        if design.nrows() == 0 {
            return Err(Error::EmptyCohort);
        }
        if design.iter().any(|v| !v.is_finite()) || target.iter().any(|v| !v.is_finite()) {
            return Err(Error::Infeasible("non-finite design or target".into()));
        }
        if design.nrows() <= design.ncols() {
            eprintln!(
                "warning: {} balancing columns for {} subjects; weights may be fragile",
                design.ncols(),
                design.nrows()
            );
        }
        Ok(EntropyDualProblem {
            design,
            target,
            tol: DEFAULT_BALANCE_TOL,
            max_iter: DEFAULT_BALANCE_MAX_ITER,
        })
    }

    /// Balance raw covariates against target means: the plain
    /// matching-adjusted problem.
    pub fn from_covariates(historical: &Cohort, target: &CovariateTarget) -> Result<Self> {
        if historical.dim() != target.means.len() {
            return Err(Error::LengthMismatch {
                left: historical.dim(),
                right: target.means.len(),
            });
        }
        let n = historical.len();
        let p = historical.dim();
        let design = DMatrix::from_fn(n, p, |i, j| historical.records[i].covariates[j]);
        let target = DVector::from_column_slice(&target.means);
        Self::new(design, target)
    }
}

struct Standardized {
    /// Indices of retained (non-constant) columns.
    keep: Vec<usize>,
    rows: DMatrix<f64>,
    target: DVector<f64>,
    scale: Vec<f64>,
}

fn standardize(problem: &EntropyDualProblem) -> Result<Standardized> {
    let n = problem.design.nrows();
    let k = problem.design.ncols();
    let mut keep = Vec::new();
    let mut means = Vec::new();
    let mut scales = Vec::new();
    for j in 0..k {
        let col = problem.design.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        if sd <= 1e-12 * (1.0 + mean.abs()) {
            // constant column: the constraint is either vacuous or impossible
            let gap = (problem.target[j] - mean).abs();
            if gap > problem.tol {
                return Err(Error::Infeasible(format!(
                    "balancing column {j} is constant at {mean:.6} but the target is {:.6}",
                    problem.target[j]
                )));
            }
            eprintln!("warning: dropping constant balancing column {j}");
        } else {
            keep.push(j);
            means.push(mean);
            scales.push(sd);
        }
    }
    let kk = keep.len();
    let rows = DMatrix::from_fn(n, kk, |i, jj| {
        (problem.design[(i, keep[jj])] - means[jj]) / scales[jj]
    });
    let target = DVector::from_fn(kk, |jj, _| {
        (problem.target[keep[jj]] - means[jj]) / scales[jj]
    });
    Ok(Standardized { keep, rows, target, scale: scales })
}

/// Objective, gradient, and current weights of the standardized dual at β.
fn dual_eval(s: &Standardized, beta: &DVector<f64>) -> (f64, DVector<f64>, Vec<f64>) {
    let n = s.rows.nrows();
    let eta: Vec<f64> = (0..n).map(|i| -s.rows.row(i).transpose().dot(beta)).collect();
    let lse = log_sum_exp(&eta);
    let w: Vec<f64> = eta.iter().map(|e| (e - lse).exp()).collect();
    let mut wz = DVector::zeros(s.rows.ncols());
    for i in 0..n {
        wz += s.rows.row(i).transpose() * w[i];
    }
    let f = lse + beta.dot(&s.target);
    let grad = &s.target - &wz;
    (f, grad, w)
}

/// Largest balance residual on the original column scale.
fn raw_residual(problem: &EntropyDualProblem, w: &[f64]) -> (Vec<f64>, f64) {
    let k = problem.design.ncols();
    let mut resid = vec![0.0; k];
    for j in 0..k {
        let mut acc = 0.0;
        for i in 0..problem.design.nrows() {
            acc += w[i] * problem.design[(i, j)];
        }
        resid[j] = acc - problem.target[j];
    }
    let max = resid.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    (resid, max)
}

fn finish_entropy(
    problem: &EntropyDualProblem,
    s: &Standardized,
    beta: &DVector<f64>,
    w: Vec<f64>,
) -> Result<WeightSet> {
    let k = problem.design.ncols();
    let mut dual = vec![0.0; k];
    for (jj, &j) in s.keep.iter().enumerate() {
        dual[j] = beta[jj] / s.scale[jj];
    }
    let (resid, _) = raw_residual(problem, &w);
    WeightSet::from_raw(w, dual, resid)
}

/// Minimize the entropy dual by BFGS with backtracking, falling back to
/// damped Newton with the exact Hessian for small column counts. Divergence
/// of β or stalled residuals is reported as an infeasible target.
pub fn solve_entropy_weights(problem: &EntropyDualProblem) -> Result<WeightSet> {
    if problem.tol <= 0.0 || problem.max_iter == 0 {
        return Err(Error::Infeasible("tolerance and iteration budget must be positive".into()));
    }
    let s = standardize(problem)?;
    let kk = s.rows.ncols();
    if kk == 0 {
        // every column constant and consistent: uniform weights satisfy all
        let n = problem.design.nrows();
        let w = vec![1.0 / n as f64; n];
        let (resid, _) = raw_residual(problem, &w);
        return WeightSet::from_raw(w, vec![0.0; problem.design.ncols()], resid);
    }

    let mut beta = DVector::zeros(kk);
    let (mut fval, mut grad, mut w) = dual_eval(&s, &beta);
    let mut hinv = DMatrix::identity(kk, kk);
    let mut best_resid = f64::INFINITY;
    let mut stalled = 0usize;

    for _ in 0..problem.max_iter {
        let (_, rmax) = raw_residual(problem, &w);
        if rmax < problem.tol {
            return finish_entropy(problem, &s, &beta, w);
        }
        if rmax < best_resid * (1.0 - 1e-12) {
            best_resid = rmax;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 25 {
                return Err(Error::Infeasible(format!(
                    "balance residuals stopped improving at {rmax:.3e}; target may lie outside the convex hull of the design rows"
                )));
            }
        }

        let mut dir = -(&hinv * &grad);
        if dir.dot(&grad) >= 0.0 {
            hinv = DMatrix::identity(kk, kk);
            dir = -grad.clone();
        }
        let slope = grad.dot(&dir);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &beta + &dir * step;
            let (fc, gc, wc) = dual_eval(&s, &cand);
            if fc.is_finite() && fc <= fval + 1e-4 * step * slope {
                accepted = Some((cand, fc, gc, wc));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            None => {
                // no acceptable step along this direction; count as a stall
                hinv = DMatrix::identity(kk, kk);
                stalled += 1;
            }
            Some((cand, fc, gc, wc)) => {
                // the dual is convex and the line search only accepts descent
                assert!(fc <= fval + 1e-10 * (1.0 + fval.abs()), "dual objective increased");
                let sk = &cand - &beta;
                let yk = &gc - &grad;
                let sy = sk.dot(&yk);
                if sy > 1e-12 {
                    // standard inverse BFGS update
                    let rho = 1.0 / sy;
                    let hy = &hinv * &yk;
                    let yhy = yk.dot(&hy);
                    hinv = &hinv - (&hy * sk.transpose() + &sk * hy.transpose()) * rho
                        + &sk * sk.transpose() * (rho * rho * yhy + rho);
                }
                beta = cand;
                fval = fc;
                grad = gc;
                w = wc;
            }
        }
        if beta.norm() > 1e6 {
            return Err(Error::Infeasible(
                "dual coefficients diverged; target may lie outside the convex hull of the design rows".into(),
            ));
        }
    }

    // Newton fallback with the exact Hessian
    if kk <= 20 {
        for _ in 0..100 {
            let (_, rmax) = raw_residual(problem, &w);
            if rmax < problem.tol {
                return finish_entropy(problem, &s, &beta, w);
            }
            let n = s.rows.nrows();
            let mut wz = DVector::zeros(kk);
            let mut h = DMatrix::zeros(kk, kk);
            for i in 0..n {
                let z = s.rows.row(i).transpose();
                wz += &z * w[i];
                h += &z * z.transpose() * w[i];
            }
            h -= &wz * wz.transpose();
            for j in 0..kk {
                h[(j, j)] += 1e-12;
            }
            let dir = match nalgebra::linalg::Cholesky::new(h) {
                Some(ch) => -ch.solve(&grad),
                None => -grad.clone(),
            };
            let slope = grad.dot(&dir);
            if slope >= 0.0 {
                break;
            }
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let cand = &beta + &dir * step;
                let (fc, gc, wc) = dual_eval(&s, &cand);
                if fc.is_finite() && fc <= fval + 1e-4 * step * slope {
                    assert!(fc <= fval + 1e-10 * (1.0 + fval.abs()), "dual objective increased");
                    beta = cand;
                    fval = fc;
                    grad = gc;
                    w = wc;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved || beta.norm() > 1e6 {
                break;
            }
        }
        let (_, rmax) = raw_residual(problem, &w);
        if rmax < problem.tol {
            return finish_entropy(problem, &s, &beta, w);
        }
    }

    let (_, rmax) = raw_residual(problem, &w);
    Err(Error::NoConvergence(format!(
        "entropy balance stopped with max residual {rmax:.3e} after {} iterations",
        problem.max_iter
    )))
}

/// Fitted outcome model on the logit scale: intercept first, then one
/// coefficient per covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModelFit {
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl OutcomeModelFit {
    /// expit(γ0 + xᵀγ) for one covariate row.
    pub fn predict(&self, covariates: &[f64]) -> f64 {
        let eta = self.coefficients[0]
            + self.coefficients[1..]
                .iter()
                .zip(covariates)
                .map(|(g, x)| g * x)
                .sum::<f64>();
        expit(eta)
    }
}

/// Damped Newton solve of the weighted logistic score equation
/// `Σ wᵢ (yᵢ − expit(ηᵢ)) xᵢ = 0`. Quasi-likelihood: y may leave [0,1].
fn solve_logistic_score(
    design: &DMatrix<f64>,
    y: &[f64],
    w: &[f64],
) -> Result<OutcomeModelFit> {
    let n = design.nrows();
    let k = design.ncols();
    let wsum: f64 = w.iter().sum();
    let ybar = y.iter().zip(w).map(|(yi, wi)| yi * wi).sum::<f64>() / wsum;
    if !(ybar > 0.0 && ybar < 1.0) {
        return Err(Error::LogitBoundary(ybar));
    }

    let score = |gamma: &DVector<f64>| -> (DVector<f64>, Vec<f64>) {
        let mut s = DVector::zeros(k);
        let mut mu = vec![0.0; n];
        for i in 0..n {
            let eta = design.row(i).transpose().dot(gamma);
            mu[i] = expit(eta);
            s += design.row(i).transpose() * (w[i] * (y[i] - mu[i]));
        }
        (s, mu)
    };

    let mut gamma = DVector::zeros(k);
    let (mut s, mut mu) = score(&gamma);
    let tol = 1e-10;
    for iter in 0..100 {
        let smax = s.amax();
        if smax < tol {
            let interior = mu
                .iter()
                .zip(w)
                .any(|(m, wi)| *wi > 0.0 && *m > 1e-8 && *m < 1.0 - 1e-8);
            if !interior {
                return Err(Error::NoConvergence(
                    "fitted probabilities all reached 0 or 1; the data appear separated".into(),
                ));
            }
            return Ok(OutcomeModelFit {
                coefficients: gamma.iter().copied().collect(),
                converged: true,
                iterations: iter,
            });
        }
        let mut info = DMatrix::zeros(k, k);
        for i in 0..n {
            let x = design.row(i).transpose();
            info += &x * x.transpose() * (w[i] * mu[i] * (1.0 - mu[i]));
        }
        let delta = match nalgebra::linalg::Cholesky::new(info.clone()) {
            Some(ch) => ch.solve(&s),
            None => {
                if iter == 0 {
                    return Err(Error::RankDeficient(
                        "model matrix is rank deficient".into(),
                    ));
                }
                let mut ridged = info;
                for j in 0..k {
                    ridged[(j, j)] += 1e-8;
                }
                match nalgebra::linalg::Cholesky::new(ridged) {
                    Some(ch) => ch.solve(&s),
                    None => {
                        return Err(Error::NoConvergence(
                            "information matrix collapsed during iteration".into(),
                        ))
                    }
                }
            }
        };
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand = &gamma + &delta * step;
            let (sc, muc) = score(&cand);
            if sc.amax() < smax {
                gamma = cand;
                s = sc;
                mu = muc;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            return Err(Error::NoConvergence(format!(
                "score stuck at {smax:.3e} with no acceptable step"
            )));
        }
        if gamma.amax() > 1e8 || !gamma.iter().all(|g| g.is_finite()) {
            return Err(Error::NoConvergence("coefficients diverged".into()));
        }
    }
    Err(Error::NoConvergence(format!(
        "score iteration exhausted with max component {:.3e}",
        s.amax()
    )))
}

/// Fit the pseudo-observation outcome model: logistic in form, but solved as
/// an estimating equation so out-of-range pseudo values are acceptable.
/// Weights default to uniform.
pub fn fit_pseudo_logistic(
    pos: &PseudoObservations,
    cohort: &Cohort,
    weights: Option<&WeightSet>,
) -> Result<OutcomeModelFit> {
    let n = cohort.len();
    if pos.len() != n {
        return Err(Error::LengthMismatch { left: pos.len(), right: n });
    }
    let w: Vec<f64> = match weights {
        Some(ws) => {
            if ws.len() != n {
                return Err(Error::LengthMismatch { left: ws.len(), right: n });
            }
            ws.weights.clone()
        }
        None => vec![1.0 / n as f64; n],
    };
    let p = cohort.dim();
    let design = DMatrix::from_fn(n, p + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            cohort.records[i].covariates[j - 1]
        }
    });
    solve_logistic_score(&design, &pos.values, &w)
}

/// Balance problem on the outcome scale only: match the historical weighted
/// mean of model predictions to the trial mean prediction.
pub fn ma_balance_design(
    fit: &OutcomeModelFit,
    historical: &Cohort,
    trial: &Cohort,
) -> Result<EntropyDualProblem> {
    check_fit_and_dims(fit, historical, trial)?;
    let preds: Vec<f64> = historical
        .records
        .iter()
        .map(|r| fit.predict(&r.covariates))
        .collect();
    let target = trial
        .records
        .iter()
        .map(|r| fit.predict(&r.covariates))
        .sum::<f64>()
        / trial.len() as f64;
    let n = historical.len();
    EntropyDualProblem::new(
        DMatrix::from_vec(n, 1, preds),
        DVector::from_element(1, target),
    )
}

/// Combined problem: raw covariates and the prediction column together.
pub fn maic_ma_design(
    fit: &OutcomeModelFit,
    historical: &Cohort,
    trial: &Cohort,
) -> Result<EntropyDualProblem> {
    check_fit_and_dims(fit, historical, trial)?;
    let n = historical.len();
    let p = historical.dim();
    let design = DMatrix::from_fn(n, p + 1, |i, j| {
        if j < p {
            historical.records[i].covariates[j]
        } else {
            fit.predict(&historical.records[i].covariates)
        }
    });
    let mut target = DVector::zeros(p + 1);
    for r in &trial.records {
        for j in 0..p {
            target[j] += r.covariates[j];
        }
        target[p] += fit.predict(&r.covariates);
    }
    target /= trial.len() as f64;
    warn_if_collinear(&design);
    EntropyDualProblem::new(design, target)
}

fn check_fit_and_dims(fit: &OutcomeModelFit, historical: &Cohort, trial: &Cohort) -> Result<()> {
    if !fit.converged {
        return Err(Error::NoConvergence("outcome model did not converge".into()));
    }
    if fit.coefficients.len() != historical.dim() + 1 {
        return Err(Error::LengthMismatch {
            left: fit.coefficients.len(),
            right: historical.dim() + 1,
        });
    }
    if historical.dim() != trial.dim() {
        return Err(Error::LengthMismatch { left: historical.dim(), right: trial.dim() });
    }
    Ok(())
}

/// Condition-number check on the standardized design cross-products; a very
/// large value means the prediction column adds nothing beyond the
/// covariates and the dual direction is poorly determined.
fn warn_if_collinear(design: &DMatrix<f64>) {
    let n = design.nrows();
    let k = design.ncols();
    let mut std = DMatrix::zeros(n, k);
    for j in 0..k {
        let col = design.column(j);
        let mean = col.sum() / n as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        if sd <= 1e-12 * (1.0 + mean.abs()) {
            return; // constant column is reported by the solver instead
        }
        for i in 0..n {
            std[(i, j)] = (design[(i, j)] - mean) / sd;
        }
    }
    let sv = std.svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > 1e8 {
        eprintln!(
            "warning: balancing columns are nearly collinear (condition number {cond:.2e}); weights may be unstable"
        );
    }
}

/// Propensity-odds weights: logistic model for trial membership on the
/// pooled cohorts; historical subject i gets weight ∝ p̂ᵢ/(1−p̂ᵢ).
pub fn ipw_weights(historical: &Cohort, trial: &Cohort) -> Result<WeightSet> {
    if historical.dim() != trial.dim() {
        return Err(Error::LengthMismatch { left: historical.dim(), right: trial.dim() });
    }
    let n0 = historical.len();
    let n1 = trial.len();
    let p = historical.dim();
    let total = n0 + n1;
    let design = DMatrix::from_fn(total, p + 1, |i, j| {
        if j == 0 {
            return 1.0;
        }
        let row = if i < n0 {
            &historical.records[i].covariates
        } else {
            &trial.records[i - n0].covariates
        };
        row[j - 1]
    });
    let y: Vec<f64> = (0..total).map(|i| if i < n0 { 0.0 } else { 1.0 }).collect();
    let w = vec![1.0; total];
    let fit = solve_logistic_score(&design, &y, &w)?;

    let mut raw = Vec::with_capacity(n0);
    for r in &historical.records {
        let phat = fit.predict(&r.covariates);
        if phat >= 1.0 - 1e-12 {
            return Err(Error::PropensityOverflow(phat));
        }
        raw.push(phat / (1.0 - phat));
    }
    // residuals vs the trial covariate means, as a balance diagnostic
    let total_raw: f64 = raw.iter().sum();
    let mut resid = vec![0.0; p];
    for j in 0..p {
        let hist_mean: f64 = historical
            .records
            .iter()
            .zip(&raw)
            .map(|(r, wi)| wi * r.covariates[j])
            .sum::<f64>()
            / total_raw;
        let trial_mean: f64 =
            trial.records.iter().map(|r| r.covariates[j]).sum::<f64>() / n1 as f64;
        resid[j] = hist_mean - trial_mean;
    }
    WeightSet::from_raw(raw, fit.coefficients, resid)
}
