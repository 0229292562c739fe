//! Downstream evaluation of feature subsets and the scaling benchmark.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{kfold_split, DataMatrix, TaskKind};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, forest_stats, ForestParams, Prediction};
use crate::importance::{impurity_importance, permutation_importance, ImportanceMethod};
use crate::rng::{self, stream};
use crate::synth::generate_scaling;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mse: f64,
    pub mae: f64,
    /// `None` when the targets have zero variance.
    pub r2: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    /// Set when a ratio had a zero denominator and was reported as 0.
    pub zero_division: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metrics {
    Regression(RegressionMetrics),
    Classification(ClassificationMetrics),
}

pub fn regression_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<RegressionMetrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.len() < 2 {
        return Err(Error::InvalidParameter(
            "regression metrics need at least 2 samples".into(),
        ));
    }
    let n = y_true.len() as f64;
    let sse: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p) * (t - p)).sum();
    let sae: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).sum();
    let mean = y_true.iter().sum::<f64>() / n;
    let sst: f64 = y_true.iter().map(|t| (t - mean) * (t - mean)).sum();
    Ok(RegressionMetrics {
        mse: sse / n,
        mae: sae / n,
        r2: (sst > 0.0).then(|| 1.0 - sse / sst),
    })
}

/// Binary metrics with `positive_class` as the positive label; every other
/// label counts as negative.
pub fn classification_metrics(
    y_true: &[usize],
    y_pred: &[usize],
    positive_class: usize,
) -> Result<ClassificationMetrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::InvalidParameter("classification metrics of empty input".into()));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t == positive_class, p == positive_class) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let mut zero_division = false;
    let mut ratio = |num: usize, den: usize| {
        if den == 0 {
            zero_division = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(ClassificationMetrics {
        accuracy: (tp + tn) as f64 / y_true.len() as f64,
        recall,
        precision,
        f1,
        zero_division,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub k: usize,
    pub features: Vec<String>,
    pub folds: Vec<Metrics>,
    pub mean: Metrics,
}

/// Fits on `k - 1` folds and scores the held-out fold, for each fold, using
/// only the listed feature columns. Folds run concurrently.
pub fn cross_validate(
    data: &DataMatrix,
    features: &[usize],
    params: &ForestParams,
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    let subset = data.select_columns(features)?;
    let folds = kfold_split(subset.n_samples(), k, seed)?;
    let per_fold = folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let train = subset.select_rows(&fold.train);
            let test = subset.select_rows(&fold.test);
            let fold_params = ForestParams {
                seed: rng::derive(seed, &[stream::FOLD_FOREST, f as u64]),
                ..params.clone()
            };
            let forest = fit_forest(&train, &fold_params)?;
            let pred = forest.predict(test.values())?;
            fold_metrics(&test, &pred)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = mean_metrics(&per_fold);
    Ok(CvResult {
        k,
        features: subset.feature_names().to_vec(),
        folds: per_fold,
        mean,
    })
}

fn fold_metrics(test: &DataMatrix, pred: &Prediction) -> Result<Metrics> {
    match (test.task(), pred) {
        (TaskKind::Regression, Prediction::Regression(p)) => {
            Ok(Metrics::Regression(regression_metrics(test.target(), p)?))
        }
        (TaskKind::Classification { .. }, pred) => {
            let truth: Vec<usize> = test.target().iter().map(|&v| v as usize).collect();
            let labels = pred.labels().expect("classification forest");
            Ok(Metrics::Classification(classification_metrics(&truth, &labels, 1)?))
        }
        _ => Err(Error::InvalidParameter("prediction does not match the task".into())),
    }
}

fn mean_metrics(folds: &[Metrics]) -> Metrics {
    let k = folds.len() as f64;
    match folds[0] {
        Metrics::Regression(_) => {
            let all: Vec<RegressionMetrics> = folds
                .iter()
                .filter_map(|m| match m {
                    Metrics::Regression(r) => Some(*r),
                    Metrics::Classification(_) => None,
                })
                .collect();
            let r2 = all
                .iter()
                .map(|m| m.r2)
                .collect::<Option<Vec<f64>>>()
                .map(|v| v.iter().sum::<f64>() / k);
            Metrics::Regression(RegressionMetrics {
                mse: all.iter().map(|m| m.mse).sum::<f64>() / k,
                mae: all.iter().map(|m| m.mae).sum::<f64>() / k,
                r2,
            })
        }
        Metrics::Classification(_) => {
            let all: Vec<ClassificationMetrics> = folds
                .iter()
                .filter_map(|m| match m {
                    Metrics::Classification(c) => Some(*c),
                    Metrics::Regression(_) => None,
                })
                .collect();
            let avg = |f: fn(&ClassificationMetrics) -> f64| all.iter().map(f).sum::<f64>() / k;
            Metrics::Classification(ClassificationMetrics {
                accuracy: avg(|m| m.accuracy),
                recall: avg(|m| m.recall),
                precision: avg(|m| m.precision),
                f1: avg(|m| m.f1),
                zero_division: all.iter().any(|m| m.zero_division),
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub n: usize,
    pub p: usize,
    pub num_trees: usize,
    pub avg_depth: f64,
    pub fit_time: f64,
    pub importance_time: f64,
    pub total_time: f64,
}

pub const BENCHMARK_CSV_HEADER: &str = "n,p,trees,avg_depth,fit_s,importance_s,total_s";

impl BenchmarkRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.n, self.p, self.num_trees, self.avg_depth, self.fit_time, self.importance_time, self.total_time
        )
    }
}

pub fn benchmark_csv(records: &[BenchmarkRecord]) -> String {
    let mut out = String::from(BENCHMARK_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Repetitions timed per measurement (after one discarded warm-up run).
pub const BENCH_REPEATS: usize = 3;

fn timed<T>(mut f: impl FnMut() -> Result<T>) -> Result<(f64, T)> {
    let started = Instant::now();
    let out = f()?;
    Ok((started.elapsed().as_secs_f64(), out))
}

fn median_of(mut times: Vec<f64>) -> f64 {
    times.sort_unstable_by(f64::total_cmp);
    times[times.len() / 2]
}

/// For each `(n, p)`, synthesizes a dataset and times forest fitting and the
/// chosen importance computation separately. Each timing is the median of
/// [`BENCH_REPEATS`] runs after a discarded warm-up. Sizes run one after
/// another.
pub fn benchmark(
    sizes: &[(usize, usize)],
    params: &ForestParams,
    method: ImportanceMethod,
    seed: u64,
) -> Result<Vec<BenchmarkRecord>> {
    sizes
        .iter()
        .map(|&(n, p)| {
            let data = generate_scaling(n, p, seed)?;
            let fit = || fit_forest(&data, params);
            let (_, forest) = timed(fit)?;
            let fit_time = median_of(
                (0..BENCH_REPEATS)
                    .map(|_| timed(fit).map(|(s, _)| s))
                    .collect::<Result<_>>()?,
            );
            let importance = || match method {
                ImportanceMethod::TreeImp => Ok(impurity_importance(&forest)),
                ImportanceMethod::Permut => permutation_importance(&forest, data.values(), seed),
            };
            timed(importance)?;
            let importance_time = median_of(
                (0..BENCH_REPEATS)
                    .map(|_| timed(importance).map(|(s, _)| s))
                    .collect::<Result<_>>()?,
            );
            Ok(BenchmarkRecord {
                n,
                p,
                num_trees: params.num_trees,
                avg_depth: forest_stats(&forest).avg_depth,
                fit_time,
                importance_time,
                total_time: fit_time + importance_time,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regression_examples() {
        let m = regression_metrics(&[1.0, 2.0, 4.0], &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!((m.mse, m.mae, m.r2), (0.0, 0.0, Some(1.0)));
        let m = regression_metrics(&[1.0, 2.0, 6.0], &[3.0, 3.0, 3.0]).unwrap();
        assert_eq!(m.r2, Some(0.0));
        let m = regression_metrics(&[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert_eq!((m.mse, m.mae, m.r2), (1.0, 1.0, Some(-3.0)));
        assert_eq!(regression_metrics(&[2.0, 2.0], &[1.0, 2.0]).unwrap().r2, None);
        assert!(regression_metrics(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn classification_examples() {
        let m = classification_metrics(&[0, 1, 1, 0], &[0, 1, 1, 0], 1).unwrap();
        assert_eq!((m.accuracy, m.recall, m.precision, m.f1), (1.0, 1.0, 1.0, 1.0));
        let m = classification_metrics(&[1, 1, 0, 0], &[0, 0, 0, 0], 1).unwrap();
        assert_eq!((m.recall, m.precision, m.f1), (0.0, 0.0, 0.0));
        assert!(m.zero_division);
        let mut truth = vec![1; 11];
        truth.extend(vec![0; 9]);
        let mut pred = vec![1; 9];
        pred.extend([0, 0]);
        pred.push(1);
        pred.extend(vec![0; 8]);
        let m = classification_metrics(&truth, &pred, 1).unwrap();
        let (p, r) = (0.9, 9.0 / 11.0);
        assert!((m.precision - p).abs() < 1e-15);
        assert!((m.recall - r).abs() < 1e-15);
        assert!((m.f1 - 2.0 * p * r / (p + r)).abs() < 1e-15);
        assert!((m.accuracy - 17.0 / 20.0).abs() < 1e-15);
        assert!(classification_metrics(&[], &[], 1).is_err());
    }

    #[test]
    fn csv_header_is_fixed() {
        let rec = BenchmarkRecord {
            n: 10,
            p: 2,
            num_trees: 3,
            avg_depth: 1.5,
            fit_time: 0.25,
            importance_time: 0.5,
            total_time: 0.75,
        };
        assert_eq!(
            benchmark_csv(&[rec]),
            "n,p,trees,avg_depth,fit_s,importance_s,total_s\n10,2,3,1.5,0.25,0.5,0.75\n"
        );
    }
}
