//! Independent numerical oracles shared by the integration tests.

#![allow(dead_code)]

use proptest::prelude::*;
use pseudo_core::{CutGrid, IntervalRecord, PchModel};

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `int_0^upper f` split at the cuts (where `f` may kink); `upper` may be infinite,
/// in which case the tail past the last cut is mapped onto `[0, 1)`.
pub fn integrate_piecewise<F: Fn(f64) -> f64>(f: &F, cuts: &[f64], upper: f64, tol: f64) -> f64 {
    let mut knots = vec![0.0];
    knots.extend(cuts.iter().copied().filter(|&c| c < upper));
    let mut total = 0.0;
    for w in knots.windows(2) {
        total += simpson(f, w[0], w[1], tol);
    }
    let last = *knots.last().unwrap();
    if upper.is_finite() {
        total += simpson(f, last, upper, tol);
    } else {
        let g = |u: f64| {
            if u >= 1.0 {
                0.0
            } else {
                let d = 1.0 - u;
                f(last + u / d) / (d * d)
            }
        };
        total += simpson(&g, 0.0, 1.0, tol);
    }
    total
}

/// Central difference of `f` at `x` along coordinate `k` with relative step `rel`.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], k: usize, rel: f64) -> f64 {
    let h = rel * x[k].abs().max(1e-3);
    let mut up = x.to_vec();
    let mut down = x.to_vec();
    up[k] += h;
    down[k] -= h;
    (f(&up) - f(&down)) / (2.0 * h)
}

pub fn model(cuts: &[f64], rates: &[f64]) -> PchModel {
    PchModel::new(CutGrid::new(cuts.to_vec()).unwrap(), rates.to_vec()).unwrap()
}

/// Random pch model: 1 to 6 pieces, cuts in (0, 10), rates log-uniform in [0.05, 2].
pub fn arb_model() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (0usize..6).prop_flat_map(|k| {
        (
            prop::collection::vec(0.2f64..10.0, k),
            prop::collection::vec((0.05f64).ln()..(2.0f64).ln(), k + 1),
        )
            .prop_map(|(mut cuts, log_rates)| {
                cuts.sort_by(f64::total_cmp);
                cuts.dedup_by(|a, b| (*a - *b).abs() < 0.05);
                let rates: Vec<f64> = log_rates
                    .iter()
                    .take(cuts.len() + 1)
                    .map(|r| r.exp())
                    .collect();
                (cuts, rates)
            })
    })
}

/// Random record of any censoring class with endpoints in [0, 14].
pub fn arb_record() -> impl Strategy<Value = IntervalRecord> {
    (0u8..4, 0.0f64..12.0, 0.05f64..6.0).prop_map(|(kind, a, w)| match kind {
        0 => IntervalRecord::new(0.0, a + w).unwrap(),
        1 => IntervalRecord::new(a, a + w).unwrap(),
        2 => IntervalRecord::new(a, f64::INFINITY).unwrap(),
        _ => IntervalRecord::new(a + 0.01, a + 0.01).unwrap(),
    })
}

/// Kahan-compensated sum.
pub fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}
