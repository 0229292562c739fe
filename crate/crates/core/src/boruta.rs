//! The Boruta selection loop.
//!
//! Each iteration keeps the features that are not rejected, appends shuffled
//! shadow copies, fits a forest on the concatenation and scores every column.
//! A feature scores a hit when its importance strictly exceeds the best
//! shadow. Undecided features are then tested with a two-sided exact binomial
//! test (`p = 0.5`) on their hit count, Bonferroni-corrected over the features
//! still undecided by default.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Matrix, TaskKind};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestParams};
use crate::importance::{impurity_importance, permutation_importance_directed, ImportanceMethod, KlDirection};
use crate::rng::{self, stream};
use crate::stats::{binomial_lower_tail, binomial_upper_tail, median};

/// Shadow columns are widened by self-concatenation until there are at least
/// this many.
pub const MIN_SHADOWS: usize = 5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShadowMode {
    /// Every shadow column gets its own row permutation.
    #[default]
    PerColumn,
    /// One row permutation shared by all shadow columns.
    JointRows,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    #[default]
    Bonferroni,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BorutaConfig {
    pub max_iterations: u32,
    pub alpha: f64,
    pub correction: Correction,
    pub importance_method: ImportanceMethod,
    pub shadow_mode: ShadowMode,
    pub kl_direction: KlDirection,
    /// `seed` inside these params is ignored; each iteration derives its own
    /// forest seed from `seed` below.
    pub forest_params: ForestParams,
    pub seed: u64,
}

impl BorutaConfig {
    pub fn new(task: TaskKind, method: ImportanceMethod, seed: u64) -> Self {
        Self {
            max_iterations: 100,
            alpha: 0.05,
            correction: Correction::Bonferroni,
            importance_method: method,
            shadow_mode: ShadowMode::PerColumn,
            kl_direction: KlDirection::BaselineToPermuted,
            forest_params: ForestParams::for_task(task),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        self.forest_params.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureState {
    Rejected,
    Undecided,
    Accepted,
}

impl FeatureState {
    pub fn code(self) -> i8 {
        match self {
            FeatureState::Rejected => -1,
            FeatureState::Undecided => 0,
            FeatureState::Accepted => 1,
        }
    }

    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            -1 => Some(FeatureState::Rejected),
            0 => Some(FeatureState::Undecided),
            1 => Some(FeatureState::Accepted),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FeatureState::Rejected => "rejected",
            FeatureState::Undecided => "tentative",
            FeatureState::Accepted => "accepted",
        }
    }

    pub fn color(self) -> &'static str {
        match self {
            FeatureState::Rejected => "red",
            FeatureState::Undecided => "blue",
            FeatureState::Accepted => "green",
        }
    }
}

impl Serialize for FeatureState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.code())
    }
}

impl<'de> Deserialize<'de> for FeatureState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let code = i64::deserialize(d)?;
        FeatureState::from_code(code).ok_or_else(|| serde::de::Error::custom(format!("invalid feature state {code}")))
    }
}

/// Copies `x`, doubles the copy column-wise until it has at least
/// [`MIN_SHADOWS`] columns, then shuffles rows.
pub fn build_shadow(x: &Matrix, mode: ShadowMode, seed: u64) -> Result<Matrix> {
    if x.cols() == 0 {
        return Err(Error::EmptySelection);
    }
    let mut shadow = x.clone();
    while shadow.cols() < MIN_SHADOWS {
        shadow = shadow.hstack(&shadow)?;
    }
    let n = shadow.rows();
    let mut out = Matrix::zeros(n, shadow.cols());
    let mut order: Vec<usize> = (0..n).collect();
    match mode {
        ShadowMode::JointRows => {
            order.shuffle(&mut rng::rng_from(seed, &[stream::SHADOW]));
            for (r, &src) in order.iter().enumerate() {
                for c in 0..shadow.cols() {
                    out.set(r, c, shadow.get(src, c));
                }
            }
        }
        ShadowMode::PerColumn => {
            for c in 0..shadow.cols() {
                order.shuffle(&mut rng::rng_from(seed, &[stream::SHADOW, c as u64]));
                for (r, &src) in order.iter().enumerate() {
                    out.set(r, c, shadow.get(src, c));
                }
            }
        }
    }
    Ok(out)
}

/// Adds one hit to every feature whose importance strictly exceeds the
/// largest shadow importance.
pub fn update_hits(imp_cur: &[f64], imp_sha: &[f64], hits: &[u32]) -> Result<Vec<u32>> {
    if imp_cur.len() != hits.len() {
        return Err(Error::DimensionMismatch {
            expected: hits.len(),
            got: imp_cur.len(),
        });
    }
    let best_shadow = imp_sha.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(imp_cur
        .iter()
        .zip(hits)
        .map(|(&imp, &h)| h + u32::from(imp > best_shadow))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Reject,
    KeepUndecided,
}

pub fn adjusted_alpha(alpha: f64, correction: Correction, num_undecided: usize) -> f64 {
    match correction {
        Correction::Bonferroni => alpha / num_undecided.max(1) as f64,
        Correction::None => alpha,
    }
}

/// Accept when `P[Bin(t, 1/2) >= hits] < alpha`, reject when
/// `P[Bin(t, 1/2) <= hits] < alpha`.
pub fn decide(hits: u32, t: u32, alpha: f64) -> Decision {
    if binomial_upper_tail(hits, t, 0.5) < alpha {
        Decision::Accept
    } else if binomial_lower_tail(hits, t, 0.5) < alpha {
        Decision::Reject
    } else {
        Decision::KeepUndecided
    }
}

/// Tests the hit counts of the currently undecided features after `t`
/// iterations.
pub fn significance_test(
    hits: &[u32],
    t: u32,
    alpha: f64,
    correction: Correction,
    num_undecided: usize,
) -> Vec<Decision> {
    let level = adjusted_alpha(alpha, correction, num_undecided);
    hits.iter().map(|&h| decide(h, t, level)).collect()
}

/// What one iteration did.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: u32,
    /// Original feature indices that were fitted, in column order.
    pub in_model: Vec<usize>,
    pub importance: Vec<f64>,
    pub shadow_importance: Vec<f64>,
    pub seconds: f64,
}

/// Loop state: per-feature decision, hit counts and importance history.
#[derive(Clone, Debug, PartialEq)]
pub struct BorutaState {
    pub state: Vec<FeatureState>,
    pub hits: Vec<u32>,
    /// One row per iteration; `None` where the feature was already rejected.
    pub history: Vec<Vec<Option<f64>>>,
    pub iteration: u32,
    pub iteration_seconds: Vec<f64>,
}

impl BorutaState {
    pub fn new(p: usize) -> Self {
        Self {
            state: vec![FeatureState::Undecided; p],
            hits: vec![0; p],
            history: Vec::new(),
            iteration: 0,
            iteration_seconds: Vec::new(),
        }
    }

    pub fn num_undecided(&self) -> usize {
        self.state.iter().filter(|&&s| s == FeatureState::Undecided).count()
    }

    pub fn is_finished(&self, config: &BorutaConfig) -> bool {
        self.iteration >= config.max_iterations || self.num_undecided() == 0
    }

    /// Runs one iteration.
    pub fn step(&mut self, data: &DataMatrix, config: &BorutaConfig) -> Result<IterationRecord> {
        let started = Instant::now();
        let t = self.iteration + 1;
        let in_model: Vec<usize> = (0..self.state.len())
            .filter(|&i| self.state[i] != FeatureState::Rejected)
            .collect();
        let k = in_model.len();

        let current = data.values().select_columns(&in_model)?;
        let shadow = build_shadow(
            &current,
            config.shadow_mode,
            rng::derive(config.seed, &[stream::SHADOW, u64::from(t)]),
        )?;
        let combined = current.hstack(&shadow)?;
        let names = (0..combined.cols()).map(|c| format!("c{c}")).collect();
        let fit_data = DataMatrix::new(combined, data.target().to_vec(), names, data.task())?;

        let params = ForestParams {
            seed: rng::derive(config.seed, &[stream::FOREST, u64::from(t)]),
            ..config.forest_params.clone()
        };
        let forest = fit_forest(&fit_data, &params)?;
        let importance = match config.importance_method {
            ImportanceMethod::TreeImp => impurity_importance(&forest),
            ImportanceMethod::Permut => permutation_importance_directed(
                &forest,
                fit_data.values(),
                rng::derive(config.seed, &[stream::PERMUTE, u64::from(t)]),
                config.kl_direction,
            )?,
        };
        let (imp_cur, imp_sha) = importance.scores.split_at(k);

        let mut row = vec![None; self.state.len()];
        for (&i, &v) in in_model.iter().zip(imp_cur) {
            row[i] = Some(v);
        }
        self.history.push(row);

        let current_hits: Vec<u32> = in_model.iter().map(|&i| self.hits[i]).collect();
        for (&i, h) in in_model.iter().zip(update_hits(imp_cur, imp_sha, &current_hits)?) {
            self.hits[i] = h;
        }

        let undecided: Vec<usize> = (0..self.state.len())
            .filter(|&i| self.state[i] == FeatureState::Undecided)
            .collect();
        let undecided_hits: Vec<u32> = undecided.iter().map(|&i| self.hits[i]).collect();
        let decisions = significance_test(&undecided_hits, t, config.alpha, config.correction, undecided.len());
        for (&i, decision) in undecided.iter().zip(decisions) {
            match decision {
                Decision::Accept => self.state[i] = FeatureState::Accepted,
                Decision::Reject => self.state[i] = FeatureState::Rejected,
                Decision::KeepUndecided => {}
            }
        }

        self.iteration = t;
        let seconds = started.elapsed().as_secs_f64();
        self.iteration_seconds.push(seconds);
        Ok(IterationRecord {
            iteration: t,
            in_model,
            importance: imp_cur.to_vec(),
            shadow_importance: imp_sha.to_vec(),
            seconds,
        })
    }

    /// Median importance over the iterations in which each feature was
    /// fitted (0 when it never was).
    pub fn median_importance(&self) -> Vec<f64> {
        (0..self.state.len())
            .map(|i| {
                let values: Vec<f64> = self.history.iter().filter_map(|row| row[i]).collect();
                median(&values).unwrap_or(0.0)
            })
            .collect()
    }

    /// Accepted features rank 1, undecided 2, rejected 3, 4, ... by
    /// descending median importance, ties to the lower index.
    pub fn ranks(&self) -> Vec<u32> {
        let medians = self.median_importance();
        let mut rank: Vec<u32> = self
            .state
            .iter()
            .map(|s| match s {
                FeatureState::Accepted => 1,
                _ => 2,
            })
            .collect();
        let mut rejected: Vec<usize> = (0..self.state.len())
            .filter(|&i| self.state[i] == FeatureState::Rejected)
            .collect();
        rejected.sort_by(|&a, &b| medians[b].total_cmp(&medians[a]).then(a.cmp(&b)));
        for (pos, &i) in rejected.iter().enumerate() {
            rank[i] = 3 + pos as u32;
        }
        rank
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionReport {
    pub feature_names: Vec<String>,
    pub method: ImportanceMethod,
    pub seed: u64,
    pub rank: Vec<u32>,
    pub state: Vec<FeatureState>,
    pub hits: Vec<u32>,
    pub median_importance: Vec<f64>,
    pub history: Vec<Vec<Option<f64>>>,
    pub iterations_run: u32,
    pub iteration_seconds: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub state: FeatureState,
    pub rank: u32,
    pub hits: u32,
    pub median_importance: f64,
}

/// Serialized form of a report. Timings are left out so that the JSON is a
/// pure function of data and configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub seed: u64,
    pub method: ImportanceMethod,
    pub iterations_run: u32,
    pub features: serde_json::Map<String, serde_json::Value>,
}

impl SelectionReport {
    pub fn accepted(&self) -> Vec<usize> {
        self.indices_with(FeatureState::Accepted)
    }

    pub fn indices_with(&self, state: FeatureState) -> Vec<usize> {
        (0..self.state.len()).filter(|&i| self.state[i] == state).collect()
    }

    pub fn to_document(&self) -> ReportDocument {
        let features = self
            .feature_names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let summary = FeatureSummary {
                    state: self.state[i],
                    rank: self.rank[i],
                    hits: self.hits[i],
                    median_importance: self.median_importance[i],
                };
                (name.clone(), serde_json::to_value(summary).expect("summary serializes"))
            })
            .collect();
        ReportDocument {
            seed: self.seed,
            method: self.method,
            iterations_run: self.iterations_run,
            features,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("report serializes")
    }

    /// `iteration,feature,importance`, one line per fitted feature per
    /// iteration.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iteration,feature,importance\n");
        for (t, row) in self.history.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    out.push_str(&format!("{},{},{}\n", t + 1, self.feature_names[i], v));
                }
            }
        }
        out
    }
}

impl ReportDocument {
    pub fn summaries(&self) -> Result<Vec<(String, FeatureSummary)>> {
        self.features
            .iter()
            .map(|(name, v)| {
                serde_json::from_value(v.clone())
                    .map(|s| (name.clone(), s))
                    .map_err(|e| Error::InvalidParameter(format!("feature '{name}': {e}")))
            })
            .collect()
    }
}

pub fn run_boruta(data: &DataMatrix, config: &BorutaConfig) -> Result<SelectionReport> {
    run_boruta_with(data, config, |_, _| {})
}

/// [`run_boruta`] with a callback after every iteration.
pub fn run_boruta_with(
    data: &DataMatrix,
    config: &BorutaConfig,
    mut on_iteration: impl FnMut(&IterationRecord, &BorutaState),
) -> Result<SelectionReport> {
    config.validate()?;
    if data.n_features() == 0 {
        return Err(Error::EmptySelection);
    }
    let mut state = BorutaState::new(data.n_features());
    while !state.is_finished(config) {
        let record = state.step(data, config)?;
        on_iteration(&record, &state);
    }
    Ok(SelectionReport {
        feature_names: data.feature_names().to_vec(),
        method: config.importance_method,
        seed: config.seed,
        rank: state.ranks(),
        median_importance: state.median_importance(),
        state: state.state,
        hits: state.hits,
        history: state.history,
        iterations_run: state.iteration,
        iteration_seconds: state.iteration_seconds,
    })
}

/// Cross-run summary.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub feature_names: Vec<String>,
    pub seeds: Vec<u64>,
    /// Median over runs of each run's median importance.
    pub median_importance: Vec<f64>,
    pub consensus_state: Vec<FeatureState>,
}

/// Most frequent state; any tie for the top count resolves to undecided.
pub fn consensus(states: &[FeatureState]) -> FeatureState {
    let count = |s| states.iter().filter(|&&x| x == s).count();
    let mut tallies = [
        (count(FeatureState::Accepted), FeatureState::Accepted),
        (count(FeatureState::Undecided), FeatureState::Undecided),
        (count(FeatureState::Rejected), FeatureState::Rejected),
    ];
    tallies.sort_by(|a, b| b.0.cmp(&a.0));
    if tallies[0].0 == tallies[1].0 {
        FeatureState::Undecided
    } else {
        tallies[0].1
    }
}

pub fn aggregate_runs(reports: &[SelectionReport]) -> Result<Aggregate> {
    let first = reports.first().ok_or(Error::MismatchedRuns)?;
    if reports.iter().any(|r| r.feature_names != first.feature_names) {
        return Err(Error::MismatchedRuns);
    }
    let p = first.feature_names.len();
    let median_importance = (0..p)
        .map(|i| {
            let per_run: Vec<f64> = reports.iter().map(|r| r.median_importance[i]).collect();
            median(&per_run).unwrap_or(0.0)
        })
        .collect();
    let consensus_state = (0..p)
        .map(|i| consensus(&reports.iter().map(|r| r.state[i]).collect::<Vec<_>>()))
        .collect();
    Ok(Aggregate {
        feature_names: first.feature_names.clone(),
        seeds: reports.iter().map(|r| r.seed).collect(),
        median_importance,
        consensus_state,
    })
}

impl Aggregate {
    pub fn accepted(&self) -> Vec<usize> {
        (0..self.consensus_state.len())
            .filter(|&i| self.consensus_state[i] == FeatureState::Accepted)
            .collect()
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let features: serde_json::Map<String, serde_json::Value> = self
            .feature_names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                (
                    name.clone(),
                    serde_json::json!({
                        "median_importance": self.median_importance[i],
                        "state": self.consensus_state[i],
                    }),
                )
            })
            .collect();
        serde_json::json!({
            "runs": self.seeds.len(),
            "seeds": self.seeds,
            "features": features,
        })
    }
}
