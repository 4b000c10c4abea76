use atse::baselines::{
    cv_scores, cv_select, fit_enet, run_baseline, run_baseline_with, BaselineKind, BaselineOptions, EnetHyper,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use atse::featurization::FeatureSchema;
use atse::{Dataset, MonthIndex, QueryPanel, UptakeSeries};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uptake_only(values: Vec<f64>) -> Dataset {
    let start = MonthIndex::new(2011, 1).unwrap();
    let n = values.len();
    Dataset::new(
        UptakeSeries::new(start, values).unwrap(),
        QueryPanel::without_terms(start, n),
    )
    .unwrap()
}

/// Mean validation MSE per hyper, folds recomputed from scratch: `k`
/// contiguous blocks, the first `m % k` one row longer.
fn fold_mse_oracle(x: &[Vec<f64>], y: &[f64], grid: &[EnetHyper], k: usize) -> Vec<f64> {
    let m = y.len();
    let mut bounds = Vec::new();
    let mut start = 0;
    for f in 0..k {
        let size = m / k + usize::from(f < m % k);
        bounds.push((start, start + size));
        start += size;
    }
    grid.iter()
        .map(|h| {
            let mut total = 0.0;
            for &(lo, hi) in &bounds {
                let train_x: Vec<Vec<f64>> = x[..lo].iter().chain(&x[hi..]).cloned().collect();
                let train_y: Vec<f64> = y[..lo].iter().chain(&y[hi..]).copied().collect();
                let model = fit_enet(&train_x, &train_y, h, DEFAULT_TOL, DEFAULT_MAX_ITER)
                    .unwrap()
                    .model;
                let mse = (lo..hi)
                    .map(|i| (model.predict(&x[i]).unwrap() - y[i]).powi(2))
                    .sum::<f64>()
                    / (hi - lo) as f64;
                total += mse;
            }
            total / k as f64
        })
        .collect()
}

#[test]
fn cv_agrees_with_brute_force_fold_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let m = 31;
    let x: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| 3.0 * r[0] - r[2] + rng.random_range(-0.3..0.3))
        .collect();
    // A near-zero penalty fits the signal; a heavy one shrinks it away.
    let grid = [EnetHyper::lasso(50.0), EnetHyper::lasso(1e-3)];
    let scores = cv_scores(&x, &y, &grid, 3).unwrap();
    let oracle = fold_mse_oracle(&x, &y, &grid, 3);
    for (a, b) in scores.iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-9 * b.max(1.0), "{scores:?} vs {oracle:?}");
    }
    assert!(oracle[1] < oracle[0]);
    assert_eq!(cv_select(&x, &y, &grid, 3).unwrap(), grid[1]);
}

#[test]
fn constant_series_is_estimated_exactly() {
    let ds = uptake_only(vec![42.0; 40]);
    let schema = FeatureSchema::new(3, vec![], ds.panel()).unwrap();
    for kind in [BaselineKind::Lasso, BaselineKind::Enet] {
        let trace = run_baseline(&ds, kind, &schema, 24).unwrap();
        assert!(trace.steps.iter().all(|s| s.prediction == 42.0));
        assert_eq!(trace.rmse, 0.0);
    }
}

#[test]
fn huge_penalty_predicts_the_training_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let values: Vec<f64> = (0..45).map(|_| rng.random_range(20.0..80.0)).collect();
    let ds = uptake_only(values.clone());
    let schema = FeatureSchema::new(2, vec![], ds.panel()).unwrap();
    let opts = BaselineOptions {
        until: None,
        grid: Some(vec![EnetHyper::lasso(1e6)]),
    };
    let run = run_baseline_with(&ds, BaselineKind::Lasso, &schema, 24, &opts).unwrap();
    for s in &run.trace.steps {
        let train = &values[2..s.t];
        let mean = train.iter().sum::<f64>() / train.len() as f64;
        assert!(
            (s.prediction - mean).abs() < 1e-9,
            "step {}: {} vs {mean}",
            s.t,
            s.prediction
        );
    }
}

#[test]
fn lag_coefficient_recovers_the_generator() {
    // y_t = 2 y_{t-1} + noise, started small so the series stays in [0, 100].
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut values = vec![0.05];
    for _ in 1..11 {
        let prev = *values.last().unwrap();
        values.push(2.0 * prev + rng.random_range(-0.01..0.01));
    }
    assert!(values.iter().all(|v| (0.0..=100.0).contains(v)));
    let ds = uptake_only(values);
    let schema = FeatureSchema::new(1, vec![], ds.panel()).unwrap();
    let run = run_baseline_with(&ds, BaselineKind::Lasso, &schema, 4, &BaselineOptions::default()).unwrap();
    let coef = run.final_model.expect("enough rows for a fitted model").coefficients[0];
    assert!((coef - 2.0).abs() <= 0.2, "lag-1 coefficient {coef}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enet_with_alpha_one_is_the_lasso(
        seed in any::<u64>(),
        m in 4usize..30,
        p in 1usize..8,
        lambda in 1e-4f64..10.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..m).map(|_| (0..p).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..100.0)).collect();
        let a = fit_enet(&x, &y, &EnetHyper::lasso(lambda), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let b = fit_enet(&x, &y, &EnetHyper { lambda, alpha: 1.0 }, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn objective_never_increases(
        seed in any::<u64>(),
        m in 4usize..30,
        p in 1usize..12,
        lambda in 1e-4f64..10.0,
        alpha in 0.0f64..=1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..m).map(|_| (0..p).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..100.0)).collect();
        let fit = fit_enet(&x, &y, &EnetHyper { lambda, alpha }, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        for w in fit.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()), "{} -> {}", w[0], w[1]);
        }
    }
}
