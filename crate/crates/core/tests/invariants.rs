//! Property-based invariants across the library.

use proptest::prelude::*;

use wavecal::metrics::{mae, quantile_by_rank, rmse};
use wavecal::noise::pearson;
use wavecal::params::{clamp, lhs_sample, ParameterBounds, ParameterVector};
use wavecal::spea2::dominates;

fn objective_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..100.0f64, len)
}

proptest! {
    // Dominance is a strict partial order: irreflexive, asymmetric,
    // transitive.
    #[test]
    fn dominance_is_strict_partial_order(
        a in objective_vec(3),
        b in objective_vec(3),
        c in objective_vec(3),
    ) {
        prop_assert!(!dominates(&a, &a).unwrap());
        if dominates(&a, &b).unwrap() {
            prop_assert!(!dominates(&b, &a).unwrap());
        }
        if dominates(&a, &b).unwrap() && dominates(&b, &c).unwrap() {
            prop_assert!(dominates(&a, &c).unwrap());
        }
    }

    // MAE never exceeds RMSE (Jensen), both are nonnegative, and both
    // vanish exactly on identical series.
    #[test]
    fn mae_bounded_by_rmse(pairs in prop::collection::vec((0.0..10.0f64, 0.0..10.0f64), 1..50)) {
        let (pred, obs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let r = rmse(&pred, &obs).unwrap();
        let m = mae(&pred, &obs).unwrap();
        prop_assert!(m <= r + 1e-12);
        prop_assert!(r >= 0.0 && m >= 0.0);
        prop_assert!((rmse(&pred, &pred).unwrap()).abs() < 1e-12);
    }

    // Clamping projects into bounds and is idempotent.
    #[test]
    fn clamp_projects_and_is_idempotent(
        drg in -5.0..5.0f64,
        cfw in -1.0..1.0f64,
        stpm in -0.1..0.1f64,
    ) {
        let bounds = ParameterBounds::default();
        let p = ParameterVector::new(drg, cfw, stpm);
        let q = clamp(&p, &bounds);
        prop_assert!(bounds.contains(&q));
        prop_assert_eq!(clamp(&q, &bounds), q);
        if bounds.contains(&p) {
            prop_assert_eq!(q, p);
        }
    }

    // LHS places exactly one sample in each of the n equal-width strata
    // per dimension.
    #[test]
    fn lhs_covers_every_stratum(n in 1usize..40, seed in any::<u64>()) {
        let bounds = ParameterBounds::default();
        let sample = lhs_sample(n, &bounds, seed).unwrap();
        prop_assert_eq!(sample.len(), n);
        for (dim, iv) in bounds.as_array().iter().enumerate() {
            let mut strata: Vec<usize> = sample
                .iter()
                .map(|p| {
                    let v = p.as_array()[dim];
                    (((v - iv.lo) / iv.width() * n as f64) as usize).min(n - 1)
                })
                .collect();
            strata.sort_unstable();
            let expect: Vec<usize> = (0..n).collect();
            prop_assert_eq!(strata, expect);
        }
    }

    // Pearson correlation stays in [-1, 1], is 1 against itself for
    // non-constant series, and is defined as 0 on zero variance.
    #[test]
    fn pearson_range_and_self(xs in prop::collection::vec(-10.0..10.0f64, 3..30)) {
        let ys: Vec<f64> = xs.iter().map(|x| -x + 1.0).collect();
        let r = pearson(&xs, &ys);
        prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&r));
        let var: f64 = {
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - mean) * (x - mean)).sum()
        };
        if var > 1e-9 {
            prop_assert!((pearson(&xs, &xs) - 1.0).abs() < 1e-9);
            prop_assert!((r + 1.0).abs() < 1e-6);
        }
        let constant = vec![2.5; xs.len()];
        prop_assert_eq!(pearson(&constant, &xs), 0.0);
    }

    // The rank-based quantile returns an element of the input and the
    // restriction `x >= quantile` is never empty for q in (0, 1).
    #[test]
    fn quantile_is_attained(values in prop::collection::vec(0.0..50.0f64, 1..60), q in 0.01..0.99f64) {
        let t = quantile_by_rank(&values, q).unwrap();
        prop_assert!(values.iter().any(|v| *v == t));
        prop_assert!(values.iter().any(|v| *v >= t));
    }
}
