//! Random forests of CART trees for regression (variance impurity) and
//! classification (Gini impurity).
//!
//! Every split node records the feature it tests, its unweighted impurity
//! decrease and the number of training samples reaching it, which is all the
//! impurity-based importance needs.
//!
//! Trees are grown in parallel. Tree `i` draws its bootstrap sample and its
//! feature subsets from streams derived from `(seed, i)`, so the forest is
//! the same for any number of worker threads.

mod json;
mod tree;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Matrix, TaskKind};
use crate::error::{Error, Result};
use crate::rng::{self, stream};

pub use json::{ForestRecord, NodeRecord};
pub use tree::{LeafValue, Node, Tree};

use tree::{TargetRef, TrainContext};

/// Number of candidate features examined at each split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    Fraction(f64),
    All,
}

impl MaxFeatures {
    pub fn resolve(&self, p: usize) -> usize {
        let k = match *self {
            MaxFeatures::Sqrt => (p as f64).sqrt().floor() as usize,
            MaxFeatures::Fraction(f) => (f * p as f64).floor() as usize,
            MaxFeatures::All => p,
        };
        k.clamp(1, p.max(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub num_trees: usize,
    /// `None` grows trees until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
}

impl ForestParams {
    /// Common random-forest defaults: 100 trees, unlimited depth, bootstrap,
    /// `sqrt(p)` candidates for classification and `p/3` for regression.
    pub fn for_task(task: TaskKind) -> Self {
        Self {
            num_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            max_features: match task {
                TaskKind::Regression => MaxFeatures::Fraction(1.0 / 3.0),
                TaskKind::Classification { .. } => MaxFeatures::Sqrt,
            },
            bootstrap: true,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_trees == 0 {
            return Err(Error::InvalidParameter("num_trees must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidParameter("min_samples_split must be at least 2".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::InvalidParameter("max_depth must be positive".into()));
        }
        if let MaxFeatures::Fraction(f) = self.max_features {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "max_features fraction must lie in (0, 1], got {f}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
    params: ForestParams,
    num_features: usize,
    task: TaskKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Prediction {
    Regression(Vec<f64>),
    /// Row-major `n x num_classes` probabilities.
    Classification {
        num_classes: usize,
        probabilities: Vec<f64>,
    },
}

impl Prediction {
    pub fn len(&self) -> usize {
        match self {
            Prediction::Regression(v) => v.len(),
            Prediction::Classification {
                num_classes,
                probabilities,
            } => probabilities.len() / num_classes,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Predicted class per row (lowest index on ties); `None` for regression.
    pub fn labels(&self) -> Option<Vec<usize>> {
        match self {
            Prediction::Regression(_) => None,
            Prediction::Classification {
                num_classes,
                probabilities,
            } => Some(
                probabilities
                    .chunks(*num_classes)
                    .map(|row| {
                        let mut best = 0;
                        for c in 1..row.len() {
                            if row[c] > row[best] {
                                best = c;
                            }
                        }
                        best
                    })
                    .collect(),
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestStats {
    pub avg_depth: f64,
    pub avg_leaves: f64,
    pub total_nodes: usize,
}

pub fn fit_forest(data: &DataMatrix, params: &ForestParams) -> Result<Forest> {
    params.validate()?;
    let n = data.n_samples();
    let p = data.n_features();
    if p == 0 {
        return Err(Error::InvalidParameter("cannot fit a forest on zero features".into()));
    }
    if n < params.min_samples_split {
        return Err(Error::InvalidParameter(format!(
            "{n} samples is fewer than min_samples_split = {}",
            params.min_samples_split
        )));
    }
    if n > u32::MAX as usize {
        return Err(Error::InvalidParameter("too many samples".into()));
    }

    let labels: Vec<u32>;
    let target = match data.task() {
        TaskKind::Regression => TargetRef::Regression(data.target()),
        TaskKind::Classification { num_classes } => {
            labels = data.target().iter().map(|&v| v as u32).collect();
            TargetRef::Classification {
                labels: &labels,
                num_classes,
            }
        }
    };
    let ctx = TrainContext::new(
        &data.values().to_columns(),
        target,
        params.max_depth,
        params.min_samples_split,
        params.max_features.resolve(p),
    );

    let trees = (0..params.num_trees)
        .into_par_iter()
        .map(|t| {
            let t = t as u64;
            let counts: Vec<u32> = if params.bootstrap {
                let mut rng = rng::rng_from(params.seed, &[stream::TREE, t, stream::BOOTSTRAP]);
                let mut c = vec![0u32; n];
                for _ in 0..n {
                    c[rng.random_range(0..n)] += 1;
                }
                c
            } else {
                vec![1; n]
            };
            let rng = rng::rng_from(params.seed, &[stream::TREE, t, stream::FEATURES]);
            tree::grow(&ctx, &counts, rng)
        })
        .collect();

    Ok(Forest {
        trees,
        params: params.clone(),
        num_features: p,
        task: data.task(),
    })
}

/// Rows per parallel prediction task.
const PREDICT_CHUNK: usize = 256;

impl Forest {
    /// Assembles a forest from already-validated trees.
    pub fn from_trees(trees: Vec<Tree>, params: ForestParams, num_features: usize, task: TaskKind) -> Result<Forest> {
        if trees.is_empty() {
            return Err(Error::MalformedForest("forest has no trees".into()));
        }
        Ok(Forest {
            trees,
            params,
            num_features,
            task,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    fn check_width(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.num_features {
            return Err(Error::DimensionMismatch {
                expected: self.num_features,
                got: x.cols(),
            });
        }
        Ok(())
    }

    /// Mean of the per-tree leaf values (soft voting for classification).
    pub fn predict(&self, x: &Matrix) -> Result<Prediction> {
        self.check_width(x)?;
        Ok(self.predict_rows(x.rows(), |r, f| x.get(r, f)))
    }

    /// Predicts `rows` rows whose feature values are read through
    /// `value(row, feature)`. Trees are accumulated in index order, so the
    /// result does not depend on the thread count.
    pub(crate) fn predict_rows<F>(&self, rows: usize, value: F) -> Prediction
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let m = self.trees.len() as f64;
        match self.task {
            TaskKind::Regression => {
                let mut out = vec![0.0; rows];
                out.par_chunks_mut(PREDICT_CHUNK).enumerate().for_each(|(chunk, out)| {
                    for (i, slot) in out.iter_mut().enumerate() {
                        let r = chunk * PREDICT_CHUNK + i;
                        *slot = self.tree_sum(|f| value(r, f)) / m;
                    }
                });
                Prediction::Regression(out)
            }
            TaskKind::Classification { num_classes } => {
                let mut out = vec![0.0; rows * num_classes];
                out.par_chunks_mut(PREDICT_CHUNK * num_classes)
                    .enumerate()
                    .for_each(|(chunk, out)| {
                        for (i, row_out) in out.chunks_mut(num_classes).enumerate() {
                            let r = chunk * PREDICT_CHUNK + i;
                            self.tree_probs(|f| value(r, f), row_out);
                            row_out.iter_mut().for_each(|v| *v /= m);
                        }
                    });
                Prediction::Classification {
                    num_classes,
                    probabilities: out,
                }
            }
        }
    }

    fn tree_sum(&self, value: impl Fn(usize) -> f64 + Copy) -> f64 {
        let mut sum = 0.0;
        for tree in &self.trees {
            sum += tree.slot_mean(tree.leaf_slot_with(value));
        }
        sum
    }

    fn tree_probs(&self, value: impl Fn(usize) -> f64 + Copy, acc: &mut [f64]) {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for tree in &self.trees {
            let p = tree.slot_probabilities(tree.leaf_slot_with(value));
            for (a, q) in acc.iter_mut().zip(p) {
                *a += q;
            }
        }
    }

    pub fn stats(&self) -> ForestStats {
        forest_stats(self)
    }
}

pub fn forest_stats(forest: &Forest) -> ForestStats {
    let m = forest.trees.len() as f64;
    ForestStats {
        avg_depth: forest.trees.iter().map(|t| t.depth() as f64).sum::<f64>() / m,
        avg_leaves: forest.trees.iter().map(|t| t.n_leaves() as f64).sum::<f64>() / m,
        total_nodes: forest.trees.iter().map(|t| t.nodes().len()).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regression_data(xs: &[f64], ys: &[f64]) -> DataMatrix {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        DataMatrix::new(
            Matrix::from_rows(&rows).unwrap(),
            ys.to_vec(),
            vec!["x".into()],
            TaskKind::Regression,
        )
        .unwrap()
    }

    #[test]
    fn constant_target_gives_single_leaves() {
        let d = regression_data(&[1.0, 2.0, 3.0, 4.0], &[7.0; 4]);
        let forest = fit_forest(&d, &ForestParams::for_task(TaskKind::Regression)).unwrap();
        assert!(forest.trees().iter().all(|t| t.nodes().len() == 1));
        let Prediction::Regression(pred) = forest.predict(d.values()).unwrap() else {
            unreachable!()
        };
        assert!(pred.iter().all(|&v| v == 7.0));
        let stats = forest.stats();
        assert_eq!((stats.avg_depth, stats.avg_leaves), (0.0, 1.0));
    }

    #[test]
    fn sign_split_threshold_lies_between_classes() {
        let xs = [-3.0, -2.0, -0.5, 0.25, 1.0, 4.0];
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let d = DataMatrix::new(
            Matrix::from_rows(&rows).unwrap(),
            vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
            vec!["x".into()],
            TaskKind::Classification { num_classes: 2 },
        )
        .unwrap();
        let params = ForestParams {
            num_trees: 5,
            bootstrap: false,
            ..ForestParams::for_task(d.task())
        };
        let forest = fit_forest(&d, &params).unwrap();
        for tree in forest.trees() {
            match tree.root() {
                Node::Split { feature, threshold, .. } => {
                    assert_eq!(*feature, 0);
                    assert!(*threshold > -0.5 && *threshold < 0.25);
                }
                leaf => panic!("expected split, got {leaf:?}"),
            }
        }
    }

    #[test]
    fn memorizes_distinct_training_points() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.37).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x * 1.3).sin() * 10.0).collect();
        let d = regression_data(&xs, &ys);
        let params = ForestParams {
            num_trees: 1,
            bootstrap: false,
            max_features: MaxFeatures::All,
            ..ForestParams::for_task(TaskKind::Regression)
        };
        let forest = fit_forest(&d, &params).unwrap();
        let Prediction::Regression(pred) = forest.predict(d.values()).unwrap() else {
            unreachable!()
        };
        let mse: f64 = pred.iter().zip(&ys).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 40.0;
        assert_eq!(mse, 0.0);
        for node in forest.trees()[0].nodes() {
            if let Node::Leaf { instance_count, .. } = node {
                assert_eq!(*instance_count, 1);
            }
        }
    }

    #[test]
    fn perfect_tree_stats() {
        // depth-3 perfect tree in preorder: 7 splits, 8 leaves
        let mut nodes = Vec::new();
        fn build(nodes: &mut Vec<Node>, depth: usize) -> usize {
            let idx = nodes.len();
            if depth == 3 {
                nodes.push(Node::Leaf {
                    instance_count: 1,
                    value: LeafValue::Mean(0.0),
                });
                return idx;
            }
            nodes.push(Node::Leaf {
                instance_count: 0,
                value: LeafValue::Mean(0.0),
            });
            let l = build(nodes, depth + 1);
            let r = build(nodes, depth + 1);
            let count = nodes[l].instance_count() + nodes[r].instance_count();
            nodes[idx] = Node::Split {
                feature: 0,
                threshold: 0.0,
                gain: 0.0,
                instance_count: count,
                left: l,
                right: r,
            };
            idx
        }
        build(&mut nodes, 0);
        let tree = Tree::from_nodes(nodes, 1, None).unwrap();
        assert_eq!((tree.depth(), tree.n_leaves(), tree.nodes().len()), (3, 8, 15));
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = regression_data(&[1.0], &[1.0]);
        assert!(fit_forest(&d, &ForestParams::for_task(TaskKind::Regression)).is_err());
        let d = regression_data(&[1.0, 2.0], &[1.0, 2.0]);
        let forest = fit_forest(&d, &ForestParams::for_task(TaskKind::Regression)).unwrap();
        assert!(matches!(
            forest.predict(&Matrix::zeros(2, 2)),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
        let bad = ForestParams {
            min_samples_split: 1,
            ..ForestParams::for_task(TaskKind::Regression)
        };
        assert!(fit_forest(&d, &bad).is_err());
    }

    #[test]
    fn max_features_resolution() {
        assert_eq!(MaxFeatures::Sqrt.resolve(100), 10);
        assert_eq!(MaxFeatures::Fraction(1.0 / 3.0).resolve(100), 33);
        assert_eq!(MaxFeatures::Fraction(0.01).resolve(5), 1);
        assert_eq!(MaxFeatures::All.resolve(7), 7);
    }
}
