mod common;

use boruta_core::{fit_forest, impurity_importance, ForestParams, Prediction, TaskKind};

#[test]
fn matches_exact_oracle_on_random_fixture_forests() {
    let mut rng = common::rng(11);
    for case in 0..50 {
        let p = 1 + case % 7;
        let features: Vec<usize> = (0..p).collect();
        let classes = if case % 3 == 0 { Some(3) } else { None };
        let record = common::random_forest_record(&mut rng, p, &features, classes);
        let forest = boruta_core::Forest::from_record(&record).unwrap();
        let got = impurity_importance(&forest);
        let want = common::oracle::impurity(&record.trees, p);
        for (j, (g, w)) in got.scores.iter().zip(&want).enumerate() {
            assert!((g - w).abs() <= 1e-9, "case {case} feature {j}: {g} vs {w}");
        }
    }
}

#[test]
fn sums_to_one_whenever_a_split_has_gain() {
    let mut rng = common::rng(12);
    for case in 0..40 {
        let data = if case % 2 == 0 {
            common::linear_regression(&mut rng, 60, &[1.0, 0.5, 0.0, 2.0])
        } else {
            common::threshold_classes(&mut rng, 60, 4, 2, 3)
        };
        let params = ForestParams {
            num_trees: 7,
            max_depth: Some(1 + case % 5),
            seed: case as u64,
            ..ForestParams::for_task(data.task())
        };
        let forest = fit_forest(&data, &params).unwrap();
        let imp = impurity_importance(&forest);
        assert!(imp.normalized);
        let total: f64 = imp.scores.iter().sum();
        assert!((total - 1.0).abs() <= 1e-9, "case {case}: {total}");
        assert!(imp.scores.iter().all(|&s| s >= 0.0));

        if let Prediction::Classification {
            num_classes,
            probabilities,
        } = forest.predict(data.values()).unwrap()
        {
            for row in probabilities.chunks(num_classes) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn forest_without_gain_is_all_zero() {
    let data = boruta_core::DataMatrix::new(
        boruta_core::Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap(),
        vec![4.0; 3],
        common::names(1),
        TaskKind::Regression,
    )
    .unwrap();
    let forest = fit_forest(&data, &ForestParams::for_task(TaskKind::Regression)).unwrap();
    let imp = impurity_importance(&forest);
    assert_eq!(imp.scores, vec![0.0]);
    assert!(!imp.normalized);
}
