use pseudo_core::dataset::censoring_summary;
use pseudo_core::km::{km_fit, km_pseudo_rmst};
use pseudo_core::sim::{
    benchmark, gen_ic1, gen_ic2, gen_rc, monte_carlo, true_rmst_beta, MethodChoice, Scenario,
    ScenarioConfig,
};
use pseudo_core::{jackknife_km, Target};

fn mean_width(
    sim: &pseudo_core::sim::Simulated<pseudo_core::IntervalRecord>,
    include_left: bool,
) -> f64 {
    let widths: Vec<f64> = sim
        .data
        .records
        .iter()
        .filter(|r| (include_left || r.left > 0.0) && r.right.is_finite() && r.left < r.right)
        .map(|r| r.right - r.left)
        .collect();
    widths.iter().sum::<f64>() / widths.len() as f64
}

#[test]
fn rc_censoring_fraction() {
    let sim = gen_rc(100_000, 11);
    let censored = sim.data.records.iter().filter(|r| !r.event).count() as f64 / 1e5;
    assert!((censored - 0.33).abs() <= 0.01, "censored {censored}");
}

#[test]
fn ic1_class_mix_and_width() {
    let sim = gen_ic1(100_000, 12);
    let s = censoring_summary(&sim.data).unwrap();
    assert!((s.left - 0.146).abs() <= 0.01, "{s:?}");
    assert!((s.interval - 0.5207).abs() <= 0.01, "{s:?}");
    assert!((s.right - 0.3333).abs() <= 0.01, "{s:?}");
    assert_eq!(s.exact, 0.0);
    let w = mean_width(&sim, false);
    assert!((w - 1.34).abs() <= 0.05, "width {w}");
}

#[test]
fn ic2_class_mix_and_width() {
    let sim = gen_ic2(100_000, 13);
    let s = censoring_summary(&sim.data).unwrap();
    assert!((s.left - 0.10).abs() <= 0.01, "{s:?}");
    assert!((s.interval - 0.64).abs() <= 0.01, "{s:?}");
    assert!((s.right - 0.26).abs() <= 0.01, "{s:?}");
    // strict intervals alone average 8/3 here; 3.5 is the mean over all finite intervals
    let w = mean_width(&sim, true);
    assert!((w - 3.5).abs() <= 0.1, "width {w}");
    let strict = mean_width(&sim, false);
    assert!((strict - 8.0 / 3.0).abs() <= 0.05, "strict width {strict}");
}

#[test]
fn monte_carlo_truth_matches_closed_form() {
    let config = ScenarioConfig::new(Scenario::Rc, 2, 0);
    let a = true_rmst_beta(&config, 10_000_000, 1);
    let b = true_rmst_beta(&config, 10_000_000, 2);
    let exact = config.true_beta();
    for j in 0..4 {
        assert!((a[j] - b[j]).abs() <= 0.005);
        assert!((a[j] - exact[j]).abs() <= 0.01);
    }
    for (got, paper) in a.iter().zip([4.98, 0.14, 0.14, 0.27]) {
        assert!((got - paper).abs() <= 0.01, "{got} vs {paper}");
    }
}

#[test]
fn reports_are_deterministic() {
    let config = ScenarioConfig::new(Scenario::Ic1, 80, 21);
    let a = monte_carlo(&config, MethodChoice::Fast, 6).unwrap();
    let b = monte_carlo(&config, MethodChoice::Fast, 6).unwrap();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    a.write_csv(&mut x, false).unwrap();
    b.write_csv(&mut y, false).unwrap();
    assert_eq!(x, y);
    assert_eq!(a.to_text(false), b.to_text(false));
    let mut timed = Vec::new();
    a.write_csv(&mut timed, true).unwrap();
    assert!(String::from_utf8(timed).unwrap().contains(",Time_s,"));
}

#[test]
fn both_methods_see_the_same_datasets() {
    let config = ScenarioConfig::new(Scenario::Rc, 60, 3);
    let both = monte_carlo(&config, MethodChoice::Both, 4).unwrap();
    let fast = monte_carlo(&config, MethodChoice::Fast, 4).unwrap();
    let jack = monte_carlo(&config, MethodChoice::Jackknife, 4).unwrap();
    assert_eq!(both.methods[0].bias, fast.methods[0].bias);
    assert_eq!(both.methods[1].bias, jack.methods[0].bias);
    assert!(both.max_method_difference().is_some());
}

#[test]
fn benchmark_reports_positive_times() {
    let r = benchmark(&ScenarioConfig::new(Scenario::Rc, 200, 1)).unwrap();
    assert!(r.fast_seconds > 0.0 && r.jackknife_seconds > 0.0);
    let mut out = Vec::new();
    r.write_csv(&mut out).unwrap();
    assert!(String::from_utf8(out)
        .unwrap()
        .starts_with("scenario,n,seed,fast_s,jackknife_s,ratio\nrc,200,1,"));
}

fn max_gap(n: usize, seed: u64) -> f64 {
    let sim = gen_rc(n, seed);
    let fit = km_fit(&sim.data).unwrap();
    let fast = km_pseudo_rmst(&fit, 6.0).unwrap();
    let jack = jackknife_km(&sim.data, Target::Rmst(6.0)).unwrap();
    fast.values
        .iter()
        .zip(&jack.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[test]
fn fast_and_jackknife_pseudo_values_converge() {
    let seeds = 40;
    let shrinking = (0..seeds)
        .filter(|&s| max_gap(400, s) < max_gap(100, s))
        .count();
    assert!(
        shrinking * 100 >= 95 * seeds as usize,
        "{shrinking}/{seeds}"
    );
}
