mod common;

use nalgebra::DMatrix;
use pseudo_core::fit::fit_records;
use pseudo_core::{fit, CutGrid, Dataset, FitOptions, IntervalRecord, PchModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Draw from a pch model by inversion of the cumulative hazard and inspect the
/// event time at uniform visits.
fn pch_sample(model: &PchModel, n: usize, seed: u64) -> Vec<IntervalRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = model.grid();
    (0..n)
        .map(|_| {
            let mut target = -rng.random::<f64>().ln();
            let mut t = 0.0;
            for k in 0..grid.pieces() {
                let width = grid.upper(k) - grid.lower(k);
                let mass = model.rates()[k] * width;
                if target <= mass || width.is_infinite() {
                    t = grid.lower(k) + target / model.rates()[k];
                    break;
                }
                target -= mass;
            }
            let mut v = rng.random_range(0.0..2.0);
            let mut prev = 0.0;
            for _ in 0..6 {
                if t <= v {
                    return IntervalRecord::new(prev, v).unwrap();
                }
                prev = v;
                v += rng.random_range(0.0..2.0);
            }
            IntervalRecord::new(prev, f64::INFINITY).unwrap()
        })
        .collect()
}

#[test]
fn recovers_the_generating_rates() {
    let truth = PchModel::new(CutGrid::new(vec![1.0, 2.5]).unwrap(), vec![0.3, 0.6, 0.4]).unwrap();
    let recs = pch_sample(&truth, 5000, 17);
    let f = fit_records(&recs, truth.grid(), &FitOptions::default()).unwrap();
    assert!(f.converged);
    let cov = f.info.clone().try_inverse().unwrap() / 5000.0;
    for k in 0..3 {
        let se = cov[(k, k)].sqrt();
        let z = (f.alpha()[k] - truth.rates()[k]) / se;
        assert!(
            z.abs() <= 3.0,
            "piece {k}: estimate {} se {se}",
            f.alpha()[k]
        );
    }
}

#[test]
fn warm_and_cold_starts_agree() {
    let truth = PchModel::new(CutGrid::new(vec![1.5]).unwrap(), vec![0.5, 0.2]).unwrap();
    let recs = pch_sample(&truth, 800, 3);
    let grid = truth.grid();
    let cold = fit_records(&recs, grid, &FitOptions::default()).unwrap();
    for init in [vec![5.0, 5.0], vec![0.01, 0.02], vec![1.0, 0.1]] {
        let warm = fit_records(
            &recs,
            grid,
            &FitOptions {
                init: Some(init),
                ..FitOptions::default()
            },
        )
        .unwrap();
        for k in 0..2 {
            assert!((warm.alpha()[k] - cold.alpha()[k]).abs() <= 1e-8);
        }
    }
}

#[test]
fn information_matches_finite_difference_hessian() {
    let truth = PchModel::new(CutGrid::new(vec![1.0, 3.0]).unwrap(), vec![0.4, 0.3, 0.5]).unwrap();
    let recs = pch_sample(&truth, 600, 8);
    let f = fit_records(&recs, truth.grid(), &FitOptions::default()).unwrap();
    let total_score = |a: &[f64]| {
        let m = PchModel::new(truth.grid().clone(), a.to_vec()).unwrap();
        recs.iter()
            .map(|r| m.score(r).unwrap())
            .fold(nalgebra::DVector::zeros(3), |s, x| s + x)
    };
    let n = recs.len() as f64;
    let mut fd = DMatrix::zeros(3, 3);
    for j in 0..3 {
        for k in 0..3 {
            fd[(j, k)] = -common::central_difference(|a| total_score(a)[j], f.alpha(), k, 1e-5) / n;
        }
    }
    assert!(
        (&fd - &f.info).amax() <= 1e-4 * f.info.amax(),
        "{fd} vs {}",
        f.info
    );
}

#[test]
fn rescaling_time_rescales_the_rates() {
    let truth = PchModel::new(CutGrid::new(vec![1.0, 2.0]).unwrap(), vec![0.3, 0.5, 0.7]).unwrap();
    let recs = pch_sample(&truth, 400, 5);
    let c = 3.0;
    let scaled: Vec<IntervalRecord> = recs
        .iter()
        .map(|r| IntervalRecord::new(r.left * c, r.right * c).unwrap())
        .collect();
    let a = fit(&Dataset::new(recs), truth.grid(), &FitOptions::default()).unwrap();
    let b = fit(
        &Dataset::new(scaled),
        &CutGrid::new(vec![c, 2.0 * c]).unwrap(),
        &FitOptions::default(),
    )
    .unwrap();
    for k in 0..3 {
        assert!((a.alpha()[k] / c - b.alpha()[k]).abs() <= 1e-8);
    }
    assert!(
        (a.model.rmst(f64::INFINITY).unwrap() * c - b.model.rmst(f64::INFINITY).unwrap()).abs()
            <= 1e-7
    );
}

#[test]
fn loglik_trace_never_decreases() {
    let truth = PchModel::new(
        CutGrid::new(vec![0.5, 1.0, 4.0]).unwrap(),
        vec![0.2, 0.9, 0.3, 0.6],
    )
    .unwrap();
    let recs = pch_sample(&truth, 300, 12);
    let f = fit_records(
        &recs,
        truth.grid(),
        &FitOptions {
            init: Some(vec![20.0, 0.001, 3.0, 0.01]),
            ..FitOptions::default()
        },
    )
    .unwrap();
    for w in f.trace.windows(2) {
        assert!(w[1] >= w[0] - 4.0 * f64::EPSILON * w[0].abs());
    }
}
