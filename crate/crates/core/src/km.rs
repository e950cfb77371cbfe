//! Kaplan-Meier / Nelson-Aalen estimation and jackknife-free pseudo-observations
//! for right-censored data.
//!
//! The fast pseudo-observations linearize the Kaplan-Meier functional around the
//! empirical distribution. For subject `l` and survival at `t`:
//!
//! ```text
//! S_l(t) = S(t) * (1 - sum_{u <= t} dM_l(u) / H(u))
//! dM_l(u) = dN_l(u) - I(T_l >= u) dLambda(u)
//! ```
//!
//! where `H(u)` is the at-risk fraction, `dLambda` the Nelson-Aalen increment and
//! `S` the product-limit curve. The RMST version replaces `S(t)` by
//! `G(u) = int_u^tau S(s) ds` inside the sum. Both reduce to two prefix sums over
//! event times, so all `n` values cost `O(n log n)` after the fit.

use rayon::prelude::*;

use crate::dataset::RightCensoredDataset;
use crate::error::{Error, Result};
use crate::pseudo::{Method, PseudoVector, Target};

/// Kaplan-Meier / Nelson-Aalen fit on distinct event times.
#[derive(Debug, Clone)]
pub struct KmFit {
    /// Strictly increasing distinct times with at least one event.
    pub event_times: Vec<f64>,
    /// `H(u) = #{T_i >= u} / n` at each event time.
    pub at_risk: Vec<f64>,
    /// `dLambda(u) = #events at u / (n H(u))`.
    pub na_increments: Vec<f64>,
    /// Product-limit survival just after each event time.
    pub survival: Vec<f64>,
    pub n: usize,
    /// Subject times in input order.
    pub times: Vec<f64>,
    /// Subject event indicators in input order.
    pub events: Vec<bool>,
    pub max_time: f64,
}

pub fn km_fit(data: &RightCensoredDataset) -> Result<KmFit> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = data.len();
    let times: Vec<f64> = data.records.iter().map(|r| r.time).collect();
    let events: Vec<bool> = data.records.iter().map(|r| r.event).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut event_times = Vec::new();
    let mut at_risk = Vec::new();
    let mut na_increments = Vec::new();
    let mut survival = Vec::new();
    let mut s = 1.0;
    let nf = n as f64;
    let mut i = 0;
    while i < n {
        let t = times[order[i]];
        let remaining = n - i;
        let mut deaths = 0usize;
        let mut j = i;
        while j < n && times[order[j]] == t {
            if events[order[j]] {
                deaths += 1;
            }
            j += 1;
        }
        if deaths > 0 {
            let y = remaining as f64;
            let hazard = deaths as f64 / y;
            s *= 1.0 - hazard;
            event_times.push(t);
            at_risk.push(y / nf);
            na_increments.push(hazard);
            survival.push(s);
        }
        i = j;
    }
    if event_times.is_empty() {
        return Err(Error::NoEvents);
    }
    let max_time = times[order[n - 1]];
    Ok(KmFit {
        event_times,
        at_risk,
        na_increments,
        survival,
        n,
        times,
        events,
        max_time,
    })
}

impl KmFit {
    /// Number of event times `<= t`.
    fn steps_through(&self, t: f64) -> usize {
        self.event_times.partition_point(|&u| u <= t)
    }

    /// Product-limit `S(t)`, flat beyond the last observation.
    pub fn survival_at(&self, t: f64) -> f64 {
        match self.steps_through(t) {
            0 => 1.0,
            k => self.survival[k - 1],
        }
    }

    /// Nelson-Aalen cumulative hazard at `t`.
    pub fn cum_hazard_at(&self, t: f64) -> f64 {
        self.na_increments[..self.steps_through(t)]
            .iter()
            .fold(0.0, |acc, d| acc + d)
    }

    /// `int_0^tau S(u) du` computed exactly on the step grid.
    pub fn rmst(&self, tau: f64) -> f64 {
        let mut area = 0.0;
        let mut prev = 0.0;
        let mut s = 1.0;
        for (k, &u) in self.event_times.iter().enumerate() {
            if u >= tau {
                break;
            }
            area += s * (u - prev);
            prev = u;
            s = self.survival[k];
        }
        area + s * (tau - prev)
    }

    fn warn_beyond_support(&self, horizon: f64) {
        if horizon > self.max_time {
            log::warn!(
                "horizon {horizon} exceeds the last observed time {}; survival is extended flat",
                self.max_time
            );
        }
    }

    /// Step function `(t, S(t))` starting at `(0, 1)`, suitable for plotting.
    pub fn curve(&self) -> Vec<(f64, f64)> {
        std::iter::once((0.0, 1.0))
            .chain(
                self.event_times
                    .iter()
                    .copied()
                    .zip(self.survival.iter().copied()),
            )
            .collect()
    }
}

/// Per-subject correction `sum_{u <= horizon} weight(u) dM_l(u) / H(u)` for every
/// subject, where `weight` is evaluated at the event times.
fn martingale_corrections(fit: &KmFit, horizon: f64, weights: &[f64]) -> Vec<f64> {
    let m = fit.event_times.len();
    // prefix[k] = sum_{j < k} w_j dLambda_j / H_j
    let mut prefix = Vec::with_capacity(m + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for k in 0..m {
        acc += weights[k] * fit.na_increments[k] / fit.at_risk[k];
        prefix.push(acc);
    }
    (0..fit.n)
        .into_par_iter()
        .map(|l| {
            let tl = fit.times[l];
            let through = fit.steps_through(tl.min(horizon));
            let mut c = -prefix[through];
            if fit.events[l] && tl <= horizon {
                // T_l is an event time, so it is the last step counted.
                let k = through - 1;
                c += weights[k] / fit.at_risk[k];
            }
            c
        })
        .collect()
}

/// Fast pseudo-observations of `S(t)`.
pub fn km_pseudo_survival(fit: &KmFit, t: f64) -> Result<PseudoVector> {
    let target = Target::Survival(t);
    target.validate()?;
    fit.warn_beyond_support(t);
    let s = fit.survival_at(t);
    let ones = vec![1.0; fit.event_times.len()];
    let values = martingale_corrections(fit, t, &ones)
        .into_iter()
        .map(|c| s * (1.0 - c))
        .collect();
    Ok(PseudoVector {
        values,
        target,
        method: Method::Fast,
        estimate: s,
    })
}

/// Fast pseudo-observations of `RMST(tau)`.
pub fn km_pseudo_rmst(fit: &KmFit, tau: f64) -> Result<PseudoVector> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidTau(tau));
    }
    fit.warn_beyond_support(tau);
    // G(u_k) = int_{u_k}^tau S, accumulated backwards over the steps below tau.
    let m = fit.event_times.len();
    let mut tail = vec![0.0; m];
    let mut acc = 0.0;
    for k in (0..m).rev() {
        let u = fit.event_times[k];
        if u >= tau {
            continue;
        }
        let next = fit
            .event_times
            .get(k + 1)
            .copied()
            .unwrap_or(f64::INFINITY)
            .min(tau);
        acc += fit.survival[k] * (next - u);
        tail[k] = acc;
    }
    let total = fit.rmst(tau);
    let values = martingale_corrections(fit, tau, &tail)
        .into_iter()
        .map(|c| total - c)
        .collect();
    Ok(PseudoVector {
        values,
        target: Target::Rmst(tau),
        method: Method::Fast,
        estimate: total,
    })
}

/// Fast pseudo-observations for either target.
pub fn km_pseudo(fit: &KmFit, target: Target) -> Result<PseudoVector> {
    match target {
        Target::Survival(t) => km_pseudo_survival(fit, t),
        Target::Rmst(tau) => km_pseudo_rmst(fit, tau),
    }
}
