//! Exact leave-one-out pseudo-observations `n theta - (n - 1) theta^(-l)`.
//!
//! These are the slow reference values: one full re-estimation per subject.

use rayon::prelude::*;

use crate::dataset::{IntervalDataset, IntervalRecord, RightCensoredDataset};
use crate::error::{Error, Result};
use crate::fit::{fit_records, FitOptions, PchFit};
use crate::pch::{CutGrid, PchModel};
use crate::pseudo::{Method, PseudoVector, Target};

/// Subjects sorted by time, for repeated product-limit passes.
struct SortedSample {
    times: Vec<f64>,
    events: Vec<bool>,
    /// Position of each input subject in the sorted arrays.
    rank: Vec<usize>,
    total_events: usize,
}

impl SortedSample {
    fn new(data: &RightCensoredDataset) -> Self {
        let n = data.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| data.records[a].time.total_cmp(&data.records[b].time));
        let mut rank = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            rank[i] = pos;
        }
        Self {
            times: order.iter().map(|&i| data.records[i].time).collect(),
            events: order.iter().map(|&i| data.records[i].event).collect(),
            rank,
            total_events: data.records.iter().filter(|r| r.event).count(),
        }
    }

    /// Kaplan-Meier functional on the sample, optionally without one sorted position.
    fn functional(&self, skip: Option<usize>, target: Target) -> f64 {
        let n = self.times.len();
        let mut at_risk = n - usize::from(skip.is_some());
        let mut s = 1.0;
        let mut area = 0.0;
        let mut prev = 0.0;
        let mut i = 0;
        while i < n {
            let t = self.times[i];
            match target {
                Target::Survival(h) if t > h => break,
                Target::Rmst(tau) if t >= tau => break,
                _ => {}
            }
            let mut size = 0;
            let mut deaths = 0;
            while i < n && self.times[i] == t {
                if Some(i) != skip {
                    size += 1;
                    if self.events[i] {
                        deaths += 1;
                    }
                }
                i += 1;
            }
            if deaths > 0 {
                if let Target::Rmst(_) = target {
                    area += s * (t - prev);
                    prev = t;
                }
                s *= 1.0 - deaths as f64 / at_risk as f64;
            }
            at_risk -= size;
        }
        match target {
            Target::Survival(_) => s,
            Target::Rmst(tau) => area + s * (tau - prev),
        }
    }
}

/// Leave-one-out Kaplan-Meier pseudo-observations.
pub fn jackknife_km(data: &RightCensoredDataset, target: Target) -> Result<PseudoVector> {
    target.validate()?;
    if let Target::Rmst(tau) = target {
        if !tau.is_finite() {
            return Err(Error::InvalidTau(tau));
        }
    }
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sample = SortedSample::new(data);
    if sample.total_events == 0 {
        return Err(Error::NoEvents);
    }
    let n = data.len();
    let full = sample.functional(None, target);
    let nf = n as f64;
    let values = (0..n)
        .into_par_iter()
        .map(|l| {
            if sample.total_events == usize::from(data.records[l].event) {
                return Err(Error::NoEventsLeaveOut(l));
            }
            let loo = sample.functional(Some(sample.rank[l]), target);
            Ok(nf * full - (nf - 1.0) * loo)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PseudoVector {
        values,
        target,
        method: Method::Jackknife,
        estimate: full,
    })
}

/// Plug-in value of a target under a fitted model.
pub fn plug_in(model: &PchModel, target: Target) -> Result<f64> {
    match target {
        Target::Survival(t) => Ok(model.evaluate(t)?.survival),
        Target::Rmst(tau) => model.rmst(tau),
    }
}

/// Leave-one-out pch pseudo-observations with per-subject failure reporting.
#[derive(Debug, Clone)]
pub struct JackknifeOutcome {
    /// Entries whose refit failed are NaN.
    pub pseudo: PseudoVector,
    pub failures: Vec<(usize, Error)>,
    pub full_fit: PchFit,
}

impl JackknifeOutcome {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Leave-one-out pseudo-observations under the pch model, using an existing
/// full-sample fit. Each refit is warm-started at the full-sample estimate.
pub fn jackknife_pch_from_fit(
    data: &IntervalDataset,
    full_fit: &PchFit,
    target: Target,
    options: &FitOptions,
) -> Result<JackknifeOutcome> {
    target.validate()?;
    let n = data.len();
    if n < 2 {
        return Err(Error::EmptyInput);
    }
    let grid: &CutGrid = full_fit.model.grid();
    let full = plug_in(&full_fit.model, target)?;
    let warm = FitOptions {
        init: Some(full_fit.alpha().to_vec()),
        strict: false,
        ..options.clone()
    };
    let nf = n as f64;
    let results: Vec<std::result::Result<f64, Error>> = (0..n)
        .into_par_iter()
        .map(|l| {
            let subset: Vec<IntervalRecord> = data
                .records
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != l)
                .map(|(_, r)| *r)
                .collect();
            let sub = fit_records(&subset, grid, &warm)?;
            Ok(nf * full - (nf - 1.0) * plug_in(&sub.model, target)?)
        })
        .collect();
    let mut values = Vec::with_capacity(n);
    let mut failures = Vec::new();
    for (l, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => values.push(v),
            Err(e) => {
                values.push(f64::NAN);
                failures.push((l, e));
            }
        }
    }
    if !failures.is_empty() {
        log::warn!("{} of {n} leave-one-out refits failed", failures.len());
    }
    Ok(JackknifeOutcome {
        pseudo: PseudoVector {
            values,
            target,
            method: Method::Jackknife,
            estimate: full,
        },
        failures,
        full_fit: full_fit.clone(),
    })
}

/// Fit the full sample, then compute leave-one-out pch pseudo-observations.
pub fn jackknife_pch(
    data: &IntervalDataset,
    grid: &CutGrid,
    target: Target,
    options: &FitOptions,
) -> Result<JackknifeOutcome> {
    let full_fit = fit_records(&data.records, grid, options)?;
    jackknife_pch_from_fit(data, &full_fit, target, options)
}
