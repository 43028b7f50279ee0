use ebk_core::{count_below, eigenvalues_in, TridiagonalOperator};
use proptest::prelude::*;

fn operator() -> impl Strategy<Value = TridiagonalOperator> {
    (2usize..24).prop_flat_map(|n| {
        (
            proptest::collection::vec(-5.0f64..5.0, n),
            proptest::collection::vec(-2.0f64..2.0, n - 1),
        )
            .prop_map(|(d, e)| TridiagonalOperator::from_entries(d, e).unwrap())
    })
}

proptest! {
    #[test]
    fn sturm_count_is_monotone_and_bounded(op in operator(), a in -12.0f64..12.0, b in -12.0f64..12.0) {
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(count_below(&op, lo) <= count_below(&op, hi));
        let (g_lo, g_hi) = op.gershgorin();
        prop_assert_eq!(count_below(&op, g_lo - 1.0), 0);
        prop_assert_eq!(count_below(&op, g_hi + 1.0), op.len());
    }

    #[test]
    fn bisection_finds_every_eigenvalue(op in operator()) {
        let (g_lo, g_hi) = op.gershgorin();
        let all = eigenvalues_in(&op, g_lo - 1.0, g_hi + 1.0, 1e-12).unwrap();
        prop_assert_eq!(all.eigenvalues.len(), op.len());
        let trace: f64 = (0..op.len()).map(|i| op.diag[i]).sum();
        let sum: f64 = all.eigenvalues.iter().sum();
        prop_assert!((trace - sum).abs() <= 1e-9 * op.len() as f64);
        for (j, w) in all.eigenvalues.windows(2).enumerate() {
            prop_assert!(w[0] <= w[1], "eigenvalue {} out of order", j);
        }
        for (j, &lambda) in all.eigenvalues.iter().enumerate() {
            prop_assert!(count_below(&op, lambda - 1e-9) <= j);
            prop_assert!(count_below(&op, lambda + 1e-9) > j);
        }
    }
}
