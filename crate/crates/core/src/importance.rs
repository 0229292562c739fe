//! Feature-importance backends.
//!
//! * [`impurity_importance`] accumulates `gain * instance_count` per split
//!   feature over each tree, normalizes per tree, averages over trees and
//!   renormalizes.
//! * [`permutation_importance`] predicts once on the unmodified matrix, draws
//!   one row permutation, and for every feature scores the divergence between
//!   those baseline predictions and the predictions obtained with only that
//!   feature's column permuted. The reference is the model's own output, not
//!   the ground-truth target.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Matrix, TaskKind};
use crate::error::{Error, Result};
use crate::forest::{Forest, Node, Prediction, Tree};
use crate::rng::{self, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImportanceMethod {
    TreeImp,
    Permut,
}

impl std::str::FromStr for ImportanceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "treeimp" => Ok(ImportanceMethod::TreeImp),
            "permut" => Ok(ImportanceMethod::Permut),
            other => Err(Error::InvalidParameter(format!(
                "unknown importance method '{other}' (expected treeimp or permut)"
            ))),
        }
    }
}

impl std::fmt::Display for ImportanceMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ImportanceMethod::TreeImp => "treeimp",
            ImportanceMethod::Permut => "permut",
        })
    }
}

/// Which distribution is the reference in the classification loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlDirection {
    /// `KL(baseline || permuted)`.
    #[default]
    BaselineToPermuted,
    /// `KL(permuted || baseline)`.
    PermutedToBaseline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub scores: Vec<f64>,
    pub method: ImportanceMethod,
    pub normalized: bool,
}

impl ImportanceVector {
    /// `{name: score}` in column order.
    pub fn to_named_json(&self, names: &[String]) -> Result<serde_json::Value> {
        if names.len() != self.scores.len() {
            return Err(Error::DimensionMismatch {
                expected: self.scores.len(),
                got: names.len(),
            });
        }
        let map: serde_json::Map<String, serde_json::Value> = names
            .iter()
            .zip(&self.scores)
            .map(|(n, &s)| (n.clone(), serde_json::Value::from(s)))
            .collect();
        Ok(serde_json::Value::Object(map))
    }
}

/// Raw `sum(gain * instance_count)` per feature for one tree, accumulated by a
/// depth-first walk from the root.
pub fn tree_gains(tree: &Tree, num_features: usize) -> Vec<f64> {
    let mut gains = vec![0.0; num_features];
    let nodes = tree.nodes();
    let mut stack = vec![0usize];
    while let Some(idx) = stack.pop() {
        if let Node::Split {
            feature,
            gain,
            instance_count,
            left,
            right,
            ..
        } = nodes[idx]
        {
            gains[feature] += gain * instance_count as f64;
            stack.push(right);
            stack.push(left);
        }
    }
    gains
}

pub fn impurity_importance(forest: &Forest) -> ImportanceVector {
    let p = forest.num_features();
    let per_tree: Vec<Vec<f64>> = forest
        .trees()
        .par_iter()
        .map(|tree| {
            let mut gains = tree_gains(tree, p);
            let total: f64 = gains.iter().sum();
            // a tree without splits contributes zeros instead of 0/0
            if total > 0.0 {
                gains.iter_mut().for_each(|g| *g /= total);
            }
            gains
        })
        .collect();

    let m = per_tree.len() as f64;
    let mut avg = vec![0.0; p];
    for gains in &per_tree {
        for (a, g) in avg.iter_mut().zip(gains) {
            *a += g;
        }
    }
    avg.iter_mut().for_each(|a| *a /= m);

    let total: f64 = avg.iter().sum();
    let normalized = total > 0.0;
    if normalized {
        avg.iter_mut().for_each(|a| *a /= total);
    }
    ImportanceVector {
        scores: avg,
        method: ImportanceMethod::TreeImp,
        normalized,
    }
}

pub fn permutation_importance(forest: &Forest, x: &Matrix, seed: u64) -> Result<ImportanceVector> {
    permutation_importance_directed(forest, x, seed, KlDirection::default())
}

pub fn permutation_importance_directed(
    forest: &Forest,
    x: &Matrix,
    seed: u64,
    direction: KlDirection,
) -> Result<ImportanceVector> {
    let mut order: Vec<usize> = (0..x.rows()).collect();
    order.shuffle(&mut rng::rng_from(seed, &[stream::PERMUTE]));
    permutation_importance_with_order(forest, x, &order, direction)
}

/// Permutation importance with an explicit row permutation shared by all
/// features.
///
/// The input matrix is never written. The permuted column is read through an
/// accessor, and trees that never split on the permuted feature reuse their
/// cached baseline leaves. The per-row tree sum runs in the same order as
/// [`Forest::predict`], so a feature absent from every tree scores exactly 0.
pub fn permutation_importance_with_order(
    forest: &Forest,
    x: &Matrix,
    order: &[usize],
    direction: KlDirection,
) -> Result<ImportanceVector> {
    let p = forest.num_features();
    let n = x.rows();
    if x.cols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: x.cols(),
        });
    }
    if order.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: order.len(),
        });
    }
    let mut seen = vec![false; n];
    for &r in order {
        if r >= n || std::mem::replace(&mut seen[r], true) {
            return Err(Error::InvalidParameter("row order is not a permutation".into()));
        }
    }

    let trees = forest.trees();
    // cache[t * n + r]: leaf slot reached by row r in tree t
    let mut cache = vec![0u32; trees.len() * n];
    cache
        .par_chunks_mut(n.max(1))
        .zip(trees.par_iter())
        .for_each(|(out, tree)| {
            tree.leaf_slots_with(0, |r, f| x.get(r, f), out);
        });
    let baseline = mean_prediction(forest, n, |t, out| out.copy_from_slice(&cache[t * n..(t + 1) * n]));

    let scores = (0..p)
        .into_par_iter()
        .map(|feature| {
            if !trees.iter().any(|t| t.uses_feature(feature)) {
                return Ok(0.0);
            }
            let permuted = mean_prediction(forest, n, |t, out| {
                if trees[t].uses_feature(feature) {
                    trees[t].leaf_slots_with(
                        0,
                        |r, f| if f == feature { x.get(order[r], f) } else { x.get(r, f) },
                        out,
                    );
                } else {
                    out.copy_from_slice(&cache[t * n..(t + 1) * n]);
                }
            });
            prediction_loss(&baseline, &permuted, direction)
        })
        .collect::<Result<Vec<f64>>>()?;

    Ok(ImportanceVector {
        scores,
        method: ImportanceMethod::Permut,
        normalized: false,
    })
}

/// Forest mean over trees in index order, matching `Forest::predict`.
/// Trees form the outer loop so each one stays in cache across rows; every
/// row still accumulates its trees in the same order.
fn mean_prediction(forest: &Forest, n: usize, fill: impl Fn(usize, &mut [u32])) -> Prediction {
    let trees = forest.trees();
    let mut slots = vec![0u32; n];
    let mf = trees.len() as f64;
    match forest.task() {
        TaskKind::Regression => {
            let mut sum = vec![0.0; n];
            for (t, tree) in trees.iter().enumerate() {
                fill(t, &mut slots);
                for (acc, &slot) in sum.iter_mut().zip(&slots) {
                    *acc += tree.slot_mean(slot);
                }
            }
            sum.iter_mut().for_each(|v| *v /= mf);
            Prediction::Regression(sum)
        }
        TaskKind::Classification { num_classes } => {
            let mut probabilities = vec![0.0; n * num_classes];
            for (t, tree) in trees.iter().enumerate() {
                fill(t, &mut slots);
                for (row, &slot) in probabilities.chunks_mut(num_classes).zip(&slots) {
                    let p = tree.slot_probabilities(slot);
                    for (a, q) in row.iter_mut().zip(p) {
                        *a += q;
                    }
                }
            }
            probabilities.iter_mut().for_each(|v| *v /= mf);
            Prediction::Classification {
                num_classes,
                probabilities,
            }
        }
    }
}

fn prediction_loss(baseline: &Prediction, permuted: &Prediction, direction: KlDirection) -> Result<f64> {
    match (baseline, permuted) {
        (Prediction::Regression(a), Prediction::Regression(b)) => loss_mse(a, b),
        (
            Prediction::Classification {
                num_classes,
                probabilities: a,
            },
            Prediction::Classification { probabilities: b, .. },
        ) => match direction {
            KlDirection::BaselineToPermuted => loss_kl(a, b, *num_classes),
            KlDirection::PermutedToBaseline => loss_kl(b, a, *num_classes),
        },
        _ => Err(Error::InvalidParameter("prediction kinds differ".into())),
    }
}

pub fn loss_mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::InvalidParameter("loss of empty vectors".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// Lower clamp applied to `Q` before taking logarithms.
pub const KL_EPSILON: f64 = 1e-12;

/// Mean over rows of `sum_c P ln(P / max(Q, eps))` for row-major matrices
/// with `num_classes` columns. Entries with `P = 0` contribute nothing.
pub fn loss_kl(p: &[f64], q: &[f64], num_classes: usize) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    if num_classes == 0 || p.is_empty() || p.len() % num_classes != 0 {
        return Err(Error::InvalidParameter(format!(
            "{} entries do not form rows of {num_classes} classes",
            p.len()
        )));
    }
    let rows = p.len() / num_classes;
    let total: f64 = p
        .iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi.max(KL_EPSILON)).ln())
        .sum();
    // rounding can leave a tiny negative sum for near-identical rows
    Ok((total / rows as f64).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{ForestParams, ForestRecord, NodeRecord};

    fn regression_forest(trees: Vec<NodeRecord>, num_features: usize) -> Forest {
        Forest::from_record(&ForestRecord {
            num_features,
            task: TaskKind::Regression,
            params: None,
            trees,
        })
        .unwrap()
    }

    #[test]
    fn mse_examples() {
        assert_eq!(loss_mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(loss_mse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!((loss_mse(&[1.0, 2.0, 3.0], &[2.0, 2.0, 5.0]).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert!(loss_mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn kl_examples() {
        let p = [0.2, 0.8, 0.6, 0.4];
        assert_eq!(loss_kl(&p, &p, 2).unwrap(), 0.0);
        let v = loss_kl(&[1.0, 0.0, 1.0, 0.0], &[0.5, 0.5, 0.5, 0.5], 2).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        let clamped = loss_kl(&[0.5, 0.5], &[1.0, 0.0], 2).unwrap();
        assert!(clamped.is_finite() && clamped > 0.0);
        assert!(loss_kl(&[1.0, 0.0], &[1.0, 0.0, 0.0], 2).is_err());
    }

    #[test]
    fn single_split_tree_is_all_importance() {
        let forest = regression_forest(
            vec![NodeRecord::split(
                2,
                0.5,
                0.3,
                10,
                NodeRecord::leaf(4, 0.0),
                NodeRecord::leaf(6, 1.0),
            )],
            4,
        );
        let imp = impurity_importance(&forest);
        assert_eq!(imp.scores, [0.0, 0.0, 1.0, 0.0]);
        assert!(imp.normalized);
    }

    #[test]
    fn fixture_tree_hand_values() {
        let tree = NodeRecord::split(
            0,
            0.5,
            0.5,
            100,
            NodeRecord::split(1, 0.3, 0.2, 60, NodeRecord::leaf(30, 0.0), NodeRecord::leaf(30, 1.0)),
            NodeRecord::leaf(40, 2.0),
        );
        let forest = regression_forest(vec![tree], 2);
        assert_eq!(tree_gains(&forest.trees()[0], 2), [50.0, 12.0]);
        let imp = impurity_importance(&forest);
        assert!((imp.scores[0] - 50.0 / 62.0).abs() < 1e-15);
        assert!((imp.scores[1] - 12.0 / 62.0).abs() < 1e-15);
    }

    #[test]
    fn two_pure_trees_average() {
        let forest = regression_forest(
            vec![
                NodeRecord::split(0, 0.5, 1.0, 2, NodeRecord::leaf(1, 0.0), NodeRecord::leaf(1, 1.0)),
                NodeRecord::split(1, 0.5, 7.0, 4, NodeRecord::leaf(2, 0.0), NodeRecord::leaf(2, 1.0)),
            ],
            3,
        );
        assert_eq!(impurity_importance(&forest).scores, [0.5, 0.5, 0.0]);
    }

    #[test]
    fn leaf_only_forest_is_zero_and_unnormalized() {
        let forest = regression_forest(vec![NodeRecord::leaf(5, 1.0)], 2);
        let imp = impurity_importance(&forest);
        assert_eq!(imp.scores, [0.0, 0.0]);
        assert!(!imp.normalized);
    }

    #[test]
    fn two_row_swap_trace() {
        let forest = regression_forest(
            vec![NodeRecord::split(
                0,
                0.5,
                0.25,
                2,
                NodeRecord::leaf(1, 0.0),
                NodeRecord::leaf(1, 1.0),
            )],
            2,
        );
        let x = Matrix::from_rows(&[vec![0.1, 3.0], vec![0.9, 4.0]]).unwrap();
        let imp = permutation_importance_with_order(&forest, &x, &[1, 0], KlDirection::default()).unwrap();
        assert_eq!(imp.scores, [1.0, 0.0]);
        let identity = permutation_importance_with_order(&forest, &x, &[0, 1], KlDirection::default()).unwrap();
        assert_eq!(identity.scores, [0.0, 0.0]);
        assert!(!identity.normalized);
    }

    #[test]
    fn permutation_rejects_bad_shapes() {
        let forest = regression_forest(vec![NodeRecord::leaf(1, 0.0)], 2);
        let x = Matrix::zeros(3, 3);
        assert!(permutation_importance(&forest, &x, 0).is_err());
        let x = Matrix::zeros(3, 2);
        assert!(permutation_importance_with_order(&forest, &x, &[0, 0, 1], KlDirection::default()).is_err());
    }

    #[test]
    fn classification_permutation_uses_kl() {
        let data = crate::data::DataMatrix::new(
            Matrix::from_rows(&[vec![0.0, 5.0], vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]]).unwrap(),
            vec![0.0, 0.0, 1.0, 1.0],
            vec!["a".into(), "b".into()],
            TaskKind::Classification { num_classes: 2 },
        )
        .unwrap();
        let params = ForestParams {
            num_trees: 4,
            bootstrap: false,
            ..ForestParams::for_task(data.task())
        };
        let forest = crate::forest::fit_forest(&data, &params).unwrap();
        let imp =
            permutation_importance_with_order(&forest, data.values(), &[3, 2, 1, 0], KlDirection::default()).unwrap();
        // every row flips to the opposite pure leaf: KL against a clamped zero
        let expected = -(KL_EPSILON).ln();
        assert!((imp.scores[0] - expected).abs() < 1e-9);
        assert_eq!(imp.scores[1], 0.0);
    }
}
