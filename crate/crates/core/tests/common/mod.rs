#![allow(dead_code)]

pub mod oracle;

use boruta_core::forest::{ForestRecord, NodeRecord};
use boruta_core::{DataMatrix, Forest, Matrix, TaskKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random tree record of depth at most `max_depth` whose splits only use
/// features in `features`.
pub fn random_tree(
    rng: &mut ChaCha8Rng,
    count: usize,
    depth: usize,
    max_depth: usize,
    features: &[usize],
    num_classes: Option<usize>,
) -> NodeRecord {
    let stop = depth == max_depth || count < 2 || (depth > 0 && rng.random_bool(0.25));
    if stop {
        return match num_classes {
            None => NodeRecord::leaf(count, rng.random_range(-5.0..5.0)),
            Some(k) => {
                let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
                let total: f64 = w.iter().sum();
                let mut p: Vec<f64> = w.iter().map(|v| v / total).collect();
                let rest: f64 = p[1..].iter().sum();
                p[0] = 1.0 - rest;
                if p[0] < 0.0 {
                    p = vec![1.0 / k as f64; k];
                    let rest: f64 = p[1..].iter().sum();
                    p[0] = 1.0 - rest;
                }
                NodeRecord::class_leaf(count, p)
            }
        };
    }
    let left_count = rng.random_range(1..count);
    let feature = features[rng.random_range(0..features.len())];
    let gain = if rng.random_bool(0.1) {
        0.0
    } else {
        rng.random_range(0.0..2.0)
    };
    let threshold = rng.random_range(0.0..1.0);
    let left = random_tree(rng, left_count, depth + 1, max_depth, features, num_classes);
    let right = random_tree(rng, count - left_count, depth + 1, max_depth, features, num_classes);
    NodeRecord::split(feature, threshold, gain, count, left, right)
}

pub fn random_forest_record(
    rng: &mut ChaCha8Rng,
    num_features: usize,
    features: &[usize],
    num_classes: Option<usize>,
) -> ForestRecord {
    let num_trees = rng.random_range(1..=5);
    let trees = (0..num_trees)
        .map(|_| {
            let count = rng.random_range(2..200);
            random_tree(rng, count, 0, 4, features, num_classes)
        })
        .collect();
    ForestRecord {
        num_features,
        task: match num_classes {
            None => TaskKind::Regression,
            Some(k) => TaskKind::Classification { num_classes: k },
        },
        params: None,
        trees,
    }
}

pub fn random_forest(
    rng: &mut ChaCha8Rng,
    num_features: usize,
    features: &[usize],
    num_classes: Option<usize>,
) -> Forest {
    Forest::from_record(&random_forest_record(rng, num_features, features, num_classes)).expect("valid fixture")
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(0.0..1.0)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

pub fn names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("x{i}")).collect()
}

/// Regression data with `y = sum_j w_j x_j` plus a little noise.
pub fn linear_regression(rng: &mut ChaCha8Rng, n: usize, weights: &[f64]) -> DataMatrix {
    let x = uniform_matrix(rng, n, weights.len());
    let y = (0..n)
        .map(|r| weights.iter().enumerate().map(|(j, w)| w * x.get(r, j)).sum::<f64>() + rng.random_range(-0.01..0.01))
        .collect();
    DataMatrix::new(x, y, names(weights.len()), TaskKind::Regression).unwrap()
}

/// Classification data whose label is determined by thresholding the sum of
/// the first `informative` columns.
pub fn threshold_classes(rng: &mut ChaCha8Rng, n: usize, p: usize, informative: usize, k: usize) -> DataMatrix {
    let x = uniform_matrix(rng, n, p);
    let y = (0..n)
        .map(|r| {
            let s: f64 = (0..informative).map(|j| x.get(r, j)).sum::<f64>() / informative as f64;
            ((s * k as f64).floor() as usize).min(k - 1) as f64
        })
        .collect();
    DataMatrix::new(x, y, names(p), TaskKind::Classification { num_classes: k }).unwrap()
}
