//! Maximum likelihood for the piecewise-constant hazard model.
//!
//! Newton-Raphson runs on `beta = log(alpha)` so every iterate stays positive,
//! with step halving so the accepted log-likelihood never decreases. The observed
//! information is always reported in `alpha` coordinates.

use nalgebra::{DMatrix, DVector};

use crate::dataset::{IntervalDataset, IntervalRecord};
use crate::error::{Error, FitDiagnostics, Result};
use crate::pch::{check_conditions, CutGrid, PchModel, PieceCondition, RecordTerms};

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Starting rates; `None` uses the midpoint occurrence/exposure rule.
    pub init: Option<Vec<f64>>,
    /// Tolerance on the sup-norm of the total score.
    pub tol: f64,
    pub max_iter: usize,
    /// A rate moving by more than this factor away from its start is declared divergent.
    pub divergence_bound: f64,
    /// Refuse to fit when a piece fails the identifiability diagnostics.
    pub strict: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            init: None,
            tol: 1e-8,
            max_iter: 200,
            divergence_bound: 1e6,
            strict: false,
        }
    }
}

const MAX_HALVINGS: usize = 30;
/// Largest Newton step allowed in log-rate units.
const MAX_LOG_STEP: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct PchFit {
    pub model: PchModel,
    /// `-(1/n) sum_i hessian(record_i)` at the estimate, in rate coordinates.
    pub info: DMatrix<f64>,
    pub loglik: f64,
    /// Sup-norm of the total score at the estimate.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub conditions: Vec<PieceCondition>,
    pub n: usize,
    pub tol: f64,
    /// Accepted log-likelihood after each iteration, starting with the initial value.
    pub trace: Vec<f64>,
}

impl PchFit {
    pub fn alpha(&self) -> &[f64] {
        self.model.rates()
    }
}

/// Total log-likelihood, score and Hessian (rate coordinates).
struct Totals {
    loglik: f64,
    score: DVector<f64>,
    hessian: DMatrix<f64>,
}

fn totals(model: &PchModel, records: &[IntervalRecord], with_hessian: bool) -> Result<Totals> {
    let k = model.pieces();
    let mut terms = RecordTerms::new(k);
    let mut loglik = 0.0;
    let mut score = DVector::zeros(k);
    let mut hessian = DMatrix::zeros(k, k);
    for r in records {
        model.record_terms(r, &mut terms)?;
        loglik += terms.log_density;
        for j in 0..k {
            score[j] += terms.score[j];
        }
        if with_hessian {
            terms.add_hessian_to(&mut hessian, 1.0);
        }
    }
    Ok(Totals {
        loglik,
        score,
        hessian,
    })
}

/// Total log-likelihood of `records` under `model`.
pub fn loglik(model: &PchModel, records: &[IntervalRecord]) -> Result<f64> {
    records.iter().map(|r| model.log_density(r)).sum()
}

/// Starting rates from treating each record as an exact time at its interval
/// midpoint, or as censored at `L` when `R` is infinite.
pub fn initial_rates(records: &[IntervalRecord], grid: &CutGrid) -> Vec<f64> {
    let k = grid.pieces();
    let mut events = vec![0.0; k];
    let mut exposure = vec![0.0; k];
    for r in records {
        let t = if r.right.is_finite() {
            0.5 * (r.left + r.right)
        } else {
            r.left
        };
        for (e, x) in exposure.iter_mut().zip(grid.exposure(t)) {
            *e += x;
        }
        if r.right.is_finite() {
            events[grid.piece_of(t)] += 1.0;
        }
    }
    let total_events: f64 = events.iter().sum();
    let total_exposure: f64 = exposure.iter().sum();
    let overall = if total_events > 0.0 && total_exposure > 0.0 {
        total_events / total_exposure
    } else if total_exposure > 0.0 {
        records.len() as f64 / total_exposure
    } else {
        1.0
    };
    events
        .iter()
        .zip(&exposure)
        .map(|(&d, &e)| if d > 0.0 && e > 0.0 { d / e } else { overall })
        .collect()
}

fn non_identifiable(
    records: &[IntervalRecord],
    grid: &CutGrid,
    pieces: Vec<usize>,
    beta: &[f64],
    start: &[f64],
) -> Error {
    let conditions = check_conditions(records, grid);
    let mut notes = Vec::new();
    for &k in &pieces {
        let c = &conditions[k];
        let direction = if beta[k] > start[k] { "up" } else { "down" };
        let mut why = Vec::new();
        if c.lacks_information() {
            why.push("no finite interval meets the piece (first condition)");
        }
        if c.lacks_survivors() {
            why.push("no left endpoint beyond the piece start (second condition)");
        }
        if why.is_empty() {
            why.push("both conditions hold empirically but the likelihood is flat");
        }
        notes.push(format!(
            "piece {} diverged {}: {}",
            k + 1,
            direction,
            why.join("; ")
        ));
    }
    Error::NonIdentifiable {
        pieces,
        detail: notes.join(" | "),
    }
}

/// Fit the rates on `records` by safeguarded Newton-Raphson in log-rate space.
pub fn fit_records(
    records: &[IntervalRecord],
    grid: &CutGrid,
    options: &FitOptions,
) -> Result<PchFit> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let k = grid.pieces();
    let conditions = check_conditions(records, grid);
    let violated: Vec<usize> = conditions
        .iter()
        .filter(|c| c.violated())
        .map(|c| c.piece)
        .collect();
    if !violated.is_empty() {
        if options.strict {
            let beta = vec![0.0; k];
            let mut err = non_identifiable(records, grid, violated, &beta, &beta);
            if let Error::NonIdentifiable { detail, .. } = &mut err {
                *detail = detail
                    .replace(" diverged up", " fails the diagnostics")
                    .replace(" diverged down", " fails the diagnostics");
            }
            return Err(err);
        }
        log::warn!(
            "identifiability diagnostics fail on pieces {:?}",
            violated.iter().map(|k| k + 1).collect::<Vec<_>>()
        );
    }

    let start = match &options.init {
        Some(init) => {
            PchModel::new(grid.clone(), init.clone())?;
            init.clone()
        }
        None => initial_rates(records, grid),
    };
    let start_beta: Vec<f64> = start.iter().map(|a| a.ln()).collect();
    let log_bound = options.divergence_bound.ln();
    let mut beta = start_beta.clone();
    let mut model = PchModel::new(grid.clone(), start.clone())?;
    let mut current = totals(&model, records, true)?;
    let mut trace = vec![current.loglik];
    let mut iterations = 0;

    loop {
        let grad_norm = current.score.amax();
        if grad_norm <= options.tol {
            let n = records.len();
            let info = -&current.hessian / n as f64;
            return Ok(PchFit {
                model,
                info,
                loglik: current.loglik,
                grad_norm,
                iterations,
                converged: true,
                conditions,
                n,
                tol: options.tol,
                trace,
            });
        }
        let diagnostics = |beta: &[f64], current: &Totals, iterations| FitDiagnostics {
            alpha: beta.iter().map(|b| b.exp()).collect(),
            loglik: current.loglik,
            grad_norm: current.score.amax(),
            iterations,
        };
        if iterations >= options.max_iter {
            return Err(Error::DidNotConverge(diagnostics(
                &beta, &current, iterations,
            )));
        }
        iterations += 1;

        // chain rule to log-rate coordinates
        let alpha = DVector::from_iterator(k, beta.iter().map(|b| b.exp()));
        let grad_beta = current.score.component_mul(&alpha);
        let mut neg_hess =
            -DMatrix::from_fn(k, k, |i, j| alpha[i] * current.hessian[(i, j)] * alpha[j]);
        for i in 0..k {
            neg_hess[(i, i)] -= grad_beta[i];
        }
        let direction = newton_direction(neg_hess, &grad_beta);
        let largest = direction.amax();
        let direction = if largest > MAX_LOG_STEP {
            direction * (MAX_LOG_STEP / largest)
        } else {
            direction
        };

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = beta
                .iter()
                .zip(direction.iter())
                .map(|(b, d)| b + step * d)
                .collect();
            let diverged: Vec<usize> = (0..k)
                .filter(|&j| (trial[j] - start_beta[j]).abs() > log_bound)
                .collect();
            if !diverged.is_empty() {
                let trial_model =
                    PchModel::new(grid.clone(), trial.iter().map(|b| b.exp()).collect());
                let improves = trial_model
                    .ok()
                    .and_then(|m| loglik(&m, records).ok())
                    .is_some_and(|ll| ll > current.loglik);
                if improves {
                    return Err(non_identifiable(
                        records,
                        grid,
                        diverged,
                        &trial,
                        &start_beta,
                    ));
                }
                step *= 0.5;
                continue;
            }
            let trial_model =
                match PchModel::new(grid.clone(), trial.iter().map(|b| b.exp()).collect()) {
                    Ok(m) => m,
                    Err(_) => {
                        step *= 0.5;
                        continue;
                    }
                };
            if let Ok(t) = totals(&trial_model, records, true) {
                let slack = 4.0 * f64::EPSILON * current.loglik.abs();
                if t.loglik.is_finite() && t.loglik >= current.loglik - slack {
                    accepted = Some((trial, trial_model, t));
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((b, m, t)) => {
                beta = b;
                model = m;
                current = t;
                trace.push(current.loglik);
            }
            None => {
                return Err(Error::DidNotConverge(diagnostics(
                    &beta, &current, iterations,
                )));
            }
        }
    }
}

/// Solve `A d = g` for a Newton ascent direction, regularizing `A` until it is
/// positive definite.
fn newton_direction(a: DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    if let Some(chol) = a.clone().cholesky() {
        return chol.solve(g);
    }
    let k = a.nrows();
    let scale = (0..k)
        .map(|i| a[(i, i)].abs())
        .fold(0.0, f64::max)
        .max(1e-12);
    let mut mu = 1e-8 * scale;
    loop {
        let mut shifted = a.clone();
        for i in 0..k {
            shifted[(i, i)] += mu;
        }
        if let Some(chol) = shifted.cholesky() {
            return chol.solve(g);
        }
        mu *= 10.0;
        if !mu.is_finite() {
            return g.clone();
        }
    }
}

/// Fit the rates on an interval-censored dataset.
pub fn fit(data: &IntervalDataset, grid: &CutGrid, options: &FitOptions) -> Result<PchFit> {
    fit_records(&data.records, grid, options)
}

/// Relative condition threshold above which the information is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// The observed information of a converged fit, checked for numerical singularity.
pub fn observed_information(fit: &PchFit) -> Result<DMatrix<f64>> {
    let eig = fit.info.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= SINGULAR_CONDITION) {
        return Err(Error::SingularInformation { condition });
    }
    Ok(fit.info.clone())
}
