mod common;

use common::compensated_sum;
use proptest::prelude::*;
use pseudo_core::{km_fit, km_pseudo_rmst, km_pseudo_survival, Dataset, RightCensoredRecord};

/// Data on a quarter-unit lattice, so every jump of the pseudo survival curve lies
/// on the Riemann grid and the left sum is exact up to rounding.
fn lattice_data() -> impl Strategy<Value = Vec<(f64, bool)>> {
    prop::collection::vec((1u32..24, prop::bool::weighted(0.7)), 5..25).prop_map(|v| {
        let mut v: Vec<(f64, bool)> = v.into_iter().map(|(k, e)| (k as f64 * 0.25, e)).collect();
        v[0].1 = true;
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn rmst_pseudo_equals_riemann_sum_of_survival_pseudo(pairs in lattice_data()) {
        let data = Dataset::new(
            pairs.iter().map(|&(t, e)| RightCensoredRecord::new(t, e).unwrap()).collect(),
        );
        let fit = km_fit(&data).unwrap();
        let tau = 4.0;
        let steps: usize = 4 << 18;
        let h = tau / steps as f64;
        let rmst = km_pseudo_rmst(&fit, tau).unwrap();

        // survival pseudo-values only change at data times: evaluate once per lattice cell
        let mut cells: Vec<Vec<f64>> = Vec::new();
        for c in 0..16 {
            cells.push(km_pseudo_survival(&fit, c as f64 * 0.25).unwrap().values);
        }
        let per_cell = steps / 16;
        for l in 0..data.len() {
            let riemann = compensated_sum((0..steps).map(|i| h * cells[i / per_cell][l]));
            prop_assert!((riemann - rmst.values[l]).abs() <= 1e-12, "subject {l}: {riemann} vs {}", rmst.values[l]);
        }
    }
}
