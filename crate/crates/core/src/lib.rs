//! Boruta feature selection on random forests.
//!
//! Two importance backends plug into the selection loop: impurity-decrease
//! accumulation over the trees ([`importance::impurity_importance`]) and
//! shared-permutation prediction divergence
//! ([`importance::permutation_importance`]). The crate also carries the
//! forest learner, synthetic benchmark datasets and cross-validated
//! evaluation used to check selections.

pub mod boruta;
pub mod data;
pub mod error;
pub mod eval;
pub mod forest;
pub mod importance;
pub mod rng;
pub mod stats;
pub mod synth;

pub use boruta::{
    aggregate_runs, build_shadow, run_boruta, run_boruta_with, significance_test, update_hits, Aggregate, BorutaConfig,
    BorutaState, Correction, Decision, FeatureState, SelectionReport, ShadowMode,
};
pub use data::{kfold_split, load_csv, DataMatrix, Matrix, TargetColumn, TaskKind};
pub use error::{Error, Result};
pub use forest::{fit_forest, forest_stats, Forest, ForestParams, MaxFeatures, Prediction};
pub use importance::{
    impurity_importance, loss_kl, loss_mse, permutation_importance, ImportanceMethod, ImportanceVector, KlDirection,
};
pub use synth::{generate_synthetic, SyntheticSpec, Variant};
