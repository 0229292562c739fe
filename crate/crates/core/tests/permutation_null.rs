mod common;

use boruta_core::forest::Node;
use boruta_core::importance::permutation_importance_with_order;
use boruta_core::{fit_forest, permutation_importance, DataMatrix, ForestParams, KlDirection, TaskKind};
use rand::seq::SliceRandom;
use rand::Rng;

#[test]
fn unused_feature_scores_exactly_zero_on_fixture_forests() {
    let mut rng = common::rng(21);
    for case in 0..60 {
        let p = 2 + case % 5;
        let absent = rng.random_range(0..p);
        let used: Vec<usize> = (0..p).filter(|&j| j != absent).collect();
        let classes = if case % 2 == 0 { None } else { Some(2 + case % 3) };
        let forest = common::random_forest(&mut rng, p, &used, classes);
        let x = common::uniform_matrix(&mut rng, 80, p);
        let imp = permutation_importance(&forest, &x, case as u64).unwrap();
        assert_eq!(imp.scores[absent], 0.0, "case {case}");
        assert!(!imp.normalized);
    }
}

#[test]
fn unused_feature_scores_exactly_zero_on_fitted_forests() {
    let mut rng = common::rng(22);
    for case in 0..40 {
        let p = 4;
        let constant = case % p;
        let mut data = if case % 2 == 0 {
            common::linear_regression(&mut rng, 70, &[1.0, -2.0, 0.5, 3.0])
        } else {
            common::threshold_classes(&mut rng, 70, p, 3, 2)
        };
        // a constant column can never be split on
        let mut x = data.values().clone();
        for r in 0..x.rows() {
            x.set(r, constant, 0.25);
        }
        data = DataMatrix::new(x, data.target().to_vec(), common::names(p), data.task()).unwrap();
        let params = ForestParams {
            num_trees: 10,
            seed: case as u64,
            ..ForestParams::for_task(data.task())
        };
        let forest = fit_forest(&data, &params).unwrap();
        for tree in forest.trees() {
            assert!(tree
                .nodes()
                .iter()
                .all(|n| !matches!(n, Node::Split { feature, .. } if *feature == constant)));
        }
        let mut x = common::uniform_matrix(&mut rng, 50, p);
        for r in 0..x.rows() {
            x.set(r, constant, rng.random_range(-1.0..2.0));
        }
        let mut order: Vec<usize> = (0..50).collect();
        order.shuffle(&mut rng);
        for direction in [KlDirection::BaselineToPermuted, KlDirection::PermutedToBaseline] {
            let imp = permutation_importance_with_order(&forest, &x, &order, direction).unwrap();
            assert_eq!(imp.scores[constant], 0.0, "case {case}");
        }
    }
}

#[test]
fn input_matrix_is_left_untouched() {
    let mut rng = common::rng(23);
    let data = common::linear_regression(&mut rng, 40, &[1.0, 1.0]);
    let params = ForestParams {
        num_trees: 5,
        ..ForestParams::for_task(TaskKind::Regression)
    };
    let forest = fit_forest(&data, &params).unwrap();
    let before = data.values().clone();
    let imp = permutation_importance(&forest, data.values(), 3).unwrap();
    assert_eq!(&before, data.values());
    assert!(imp.scores.iter().all(|&s| s > 0.0));
}
