//! Jackknife-free pseudo-observations under the piecewise-constant hazard model.
//!
//! Leave-one-out estimates are replaced by their first-order expansion around the
//! full-sample MLE: the pseudo-value of `alpha` for subject `l` is
//! `alpha_hat + I^{-1} score_l`, and any smooth functional `theta(alpha)` gets
//! `theta(alpha_hat) + grad theta^T I^{-1} score_l`. For survival
//! `grad theta = -S(t) grad Lambda(t)`; for RMST it is minus `int S grad Lambda`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::dataset::IntervalDataset;
use crate::error::{Error, Result};
use crate::fit::{observed_information, PchFit};
use crate::pch::RecordTerms;
use crate::pseudo::{Method, PseudoVector, Target};

/// How `I^{-1} score_l` is obtained for each subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMode {
    /// Factorize the information once and reuse it for every subject.
    #[default]
    Factorized,
    /// Factorize and solve separately for each subject.
    PerSubject,
}

fn factorize(info: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    info.clone().cholesky().ok_or(Error::SingularInformation {
        condition: f64::INFINITY,
    })
}

fn subject_score(fit: &PchFit, record: &crate::dataset::IntervalRecord) -> Result<DVector<f64>> {
    let mut terms = RecordTerms::new(fit.model.pieces());
    fit.model.record_terms(record, &mut terms)?;
    Ok(DVector::from_vec(terms.score))
}

fn checked_factor(fit: &PchFit) -> Result<Cholesky<f64, Dyn>> {
    let info = observed_information(fit)?;
    factorize(&info)
}

/// Per-subject pseudo-values of the rate vector.
pub fn pseudo_alpha(fit: &PchFit, data: &IntervalDataset) -> Result<Vec<DVector<f64>>> {
    let chol = checked_factor(fit)?;
    let alpha = DVector::from_column_slice(fit.alpha());
    data.records
        .par_iter()
        .map(|r| Ok(&alpha + chol.solve(&subject_score(fit, r)?)))
        .collect()
}

/// Pseudo-values of `theta(alpha)` given `theta(alpha_hat)` and `d theta / d alpha`.
fn pseudo_functional(
    fit: &PchFit,
    data: &IntervalDataset,
    estimate: f64,
    gradient: &DVector<f64>,
    mode: SolveMode,
) -> Result<Vec<f64>> {
    let info = observed_information(fit)?;
    match mode {
        SolveMode::Factorized => {
            let weights = factorize(&info)?.solve(gradient);
            data.records
                .par_iter()
                .map(|r| Ok(estimate + weights.dot(&subject_score(fit, r)?)))
                .collect()
        }
        SolveMode::PerSubject => data
            .records
            .par_iter()
            .map(|r| {
                let direction = factorize(&info)?.solve(&subject_score(fit, r)?);
                Ok(estimate + gradient.dot(&direction))
            })
            .collect(),
    }
}

pub fn pseudo_survival(fit: &PchFit, data: &IntervalDataset, t: f64) -> Result<PseudoVector> {
    pseudo_survival_with(fit, data, t, SolveMode::Factorized)
}

pub fn pseudo_survival_with(
    fit: &PchFit,
    data: &IntervalDataset,
    t: f64,
    mode: SolveMode,
) -> Result<PseudoVector> {
    let eval = fit.model.evaluate(t)?;
    let gradient = -fit.model.grad_cum_hazard(t)? * eval.survival;
    let values = pseudo_functional(fit, data, eval.survival, &gradient, mode)?;
    Ok(PseudoVector {
        values,
        target: Target::Survival(t),
        method: Method::Fast,
        estimate: eval.survival,
    })
}

pub fn pseudo_rmst(fit: &PchFit, data: &IntervalDataset, tau: f64) -> Result<PseudoVector> {
    pseudo_rmst_with(fit, data, tau, SolveMode::Factorized)
}

pub fn pseudo_rmst_with(
    fit: &PchFit,
    data: &IntervalDataset,
    tau: f64,
    mode: SolveMode,
) -> Result<PseudoVector> {
    let estimate = fit.model.rmst(tau)?;
    let gradient = -fit.model.rmst_gradient(tau)?;
    let values = pseudo_functional(fit, data, estimate, &gradient, mode)?;
    Ok(PseudoVector {
        values,
        target: Target::Rmst(tau),
        method: Method::Fast,
        estimate,
    })
}

pub fn pseudo_param(fit: &PchFit, data: &IntervalDataset, target: Target) -> Result<PseudoVector> {
    match target {
        Target::Survival(t) => pseudo_survival(fit, data, t),
        Target::Rmst(tau) => pseudo_rmst(fit, data, tau),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, IntervalRecord};
    use crate::fit::{fit, FitOptions};
    use crate::pch::CutGrid;

    fn rec(l: f64, r: f64) -> IntervalRecord {
        IntervalRecord::new(l, r).unwrap()
    }

    fn mixed() -> IntervalDataset {
        Dataset::new(vec![
            rec(0.0, 1.0),
            rec(0.5, 2.0),
            rec(1.0, 3.0),
            rec(2.5, f64::INFINITY),
            rec(1.5, 1.5),
            rec(3.0, 4.0),
            rec(0.2, 0.9),
            rec(3.5, f64::INFINITY),
            rec(2.2, 2.2),
        ])
    }

    #[test]
    fn identical_records_reproduce_the_plug_in() {
        let data = Dataset::new(vec![rec(1.0, 2.0); 5]);
        let f = fit(&data, &CutGrid::single(), &FitOptions::default()).unwrap();
        let s = pseudo_survival(&f, &data, 1.3).unwrap();
        for v in &s.values {
            assert!((v - f.model.survival(1.3)).abs() < 1e-9);
        }
        let r = pseudo_rmst(&f, &data, f64::INFINITY).unwrap();
        for v in &r.values {
            assert!((v - f.model.rmst(f64::INFINITY).unwrap()).abs() < 1e-9);
        }
        for a in pseudo_alpha(&f, &data).unwrap() {
            assert!((a[0] - f.alpha()[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn means_are_preserved() {
        let data = mixed();
        let grid = CutGrid::new(vec![1.0, 2.5]).unwrap();
        let f = fit(&data, &grid, &FitOptions::default()).unwrap();
        let tol = 10.0 * f.tol;
        let s = pseudo_survival(&f, &data, 2.0).unwrap();
        assert!((s.mean() - s.estimate).abs() <= tol);
        for tau in [1.5, 3.0, f64::INFINITY] {
            let r = pseudo_rmst(&f, &data, tau).unwrap();
            assert!((r.mean() - r.estimate).abs() <= tol);
        }
        let alphas = pseudo_alpha(&f, &data).unwrap();
        for k in 0..3 {
            let m: f64 = alphas.iter().map(|a| a[k]).sum::<f64>() / alphas.len() as f64;
            assert!((m - f.alpha()[k]).abs() <= tol);
        }
    }

    #[test]
    fn shared_and_per_subject_solves_agree() {
        let data = mixed();
        let grid = CutGrid::new(vec![1.0, 2.5]).unwrap();
        let f = fit(&data, &grid, &FitOptions::default()).unwrap();
        let a = pseudo_rmst_with(&f, &data, 3.0, SolveMode::Factorized).unwrap();
        let b = pseudo_rmst_with(&f, &data, 3.0, SolveMode::PerSubject).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn invalid_targets() {
        let data = mixed();
        let f = fit(&data, &CutGrid::single(), &FitOptions::default()).unwrap();
        assert!(matches!(
            pseudo_rmst(&f, &data, 0.0),
            Err(Error::InvalidTau(_))
        ));
        assert!(matches!(
            pseudo_survival(&f, &data, -1.0),
            Err(Error::InvalidTime(_))
        ));
    }
}
