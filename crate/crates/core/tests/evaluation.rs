mod common;

use std::collections::BTreeSet;

use boruta_core::eval::{cross_validate, Metrics};
use boruta_core::synth::INFORMATIVE;
use boruta_core::{generate_synthetic, kfold_split, ForestParams, SyntheticSpec, TaskKind, Variant};

#[test]
fn folds_partition_rows_without_leakage() {
    for (n, k) in [(10, 3), (101, 5), (7, 7), (50, 2)] {
        let folds = kfold_split(n, k, 3).unwrap();
        assert_eq!(folds.len(), k);
        let mut seen = BTreeSet::new();
        for fold in &folds {
            let train: BTreeSet<_> = fold.train.iter().copied().collect();
            let test: BTreeSet<_> = fold.test.iter().copied().collect();
            assert!(train.is_disjoint(&test));
            assert_eq!(train.len() + test.len(), n);
            assert!(test.len() == n / k || test.len() == n / k + 1);
            for &r in &test {
                assert!(seen.insert(r), "row {r} tested twice");
            }
        }
        assert_eq!(seen.len(), n);
    }
    assert!(kfold_split(5, 1, 0).is_err());
    assert!(kfold_split(5, 6, 0).is_err());
}

#[test]
fn cross_validation_is_deterministic() {
    let mut rng = common::rng(51);
    let data = common::threshold_classes(&mut rng, 120, 4, 2, 2);
    let params = ForestParams {
        num_trees: 15,
        ..ForestParams::for_task(data.task())
    };
    let a = cross_validate(&data, &[0, 1, 2], &params, 4, 9).unwrap();
    let b = cross_validate(&data, &[0, 1, 2], &params, 4, 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.folds.len(), 4);
    assert_eq!(a.features, vec!["x0", "x1", "x2"]);
    let Metrics::Classification(mean) = a.mean else {
        panic!("expected classification metrics")
    };
    assert!(mean.accuracy > 0.8);
    assert!(cross_validate(&data, &[], &params, 4, 9).is_err());
}

#[test]
fn informative_subset_beats_all_features() {
    let data = generate_synthetic(&SyntheticSpec::new(800, 5, Variant::Direct)).unwrap();
    let params = ForestParams {
        num_trees: 40,
        ..ForestParams::for_task(TaskKind::Regression)
    };
    let informative: Vec<usize> = INFORMATIVE.iter().map(|i| i - 1).collect();
    let all: Vec<usize> = (0..data.n_features()).collect();
    let r2 = |features: &[usize]| match cross_validate(&data, features, &params, 5, 1).unwrap().mean {
        Metrics::Regression(m) => m.r2.unwrap(),
        Metrics::Classification(_) => unreachable!(),
    };
    let (selected, everything) = (r2(&informative), r2(&all));
    assert!(selected > everything, "{selected} vs {everything}");
    assert!(selected > 0.7);
}
