mod common;

use proptest::prelude::*;
use reliopt::data::Dataset;
use reliopt::logistic::{fit, FitOptions};
use reliopt::pipeline::{run_pipeline, PipelineConfig};
use reliopt::pso::SwarmConfig;

fn dataset_strategy() -> impl Strategy<Value = Dataset<f64>> {
    (1usize..4, 10usize..60)
        .prop_flat_map(|(n, m)| {
            (
                prop::collection::vec(prop::collection::vec(-3.0..3.0f64, n), m),
                prop::collection::vec(0u8..2, m),
            )
        })
        .prop_filter("both classes", |(_, y)| y.contains(&0) && y.contains(&1))
        .prop_map(|(x, y)| {
            let names = (0..x[0].len()).map(|i| format!("x{i}")).collect();
            Dataset::new(x, y, names).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Pure Newton steps on a concave objective climb whenever the data are
    // not separable, so the trace must not fall beyond rounding noise.
    #[test]
    fn newton_without_halving_ascends(d in dataset_strategy()) {
        let opts = FitOptions { step_halving: false, ..FitOptions::default() };
        if let Ok((_, report)) = fit(&d, &opts) {
            for w in report.log_likelihood_trace.windows(2) {
                prop_assume!(w[1].is_finite());
                prop_assert!(w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
            }
        }
    }
}

#[test]
fn larger_budget_pipeline_dominates_smaller() {
    for seed in 0..3u64 {
        let (d, _) = common::synthetic_ratio_dataset(70 + seed, 9, 150);
        let small = PipelineConfig {
            swarm: SwarmConfig {
                population_size: 25,
                max_iterations: 3,
                ..SwarmConfig::default()
            },
            n_runs: 5,
            base_seed: seed,
            ..PipelineConfig::default()
        };
        let mut large = small.clone();
        large.swarm.max_iterations = 500;
        let a = run_pipeline(&d, &small).unwrap();
        let b = run_pipeline(&d, &large).unwrap();
        // same seeds and population, so each run's 500-sweep trajectory extends its 3-sweep one
        for (ra, rb) in a.ensemble.iter().zip(&b.ensemble) {
            assert_eq!(ra.seed, rb.seed);
            assert!(rb.result.best_value >= ra.result.best_value);
        }
        assert!(b.max_ensemble_reliability() >= a.max_ensemble_reliability());
    }
}
