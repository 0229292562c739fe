mod bench;
mod eval;
mod importance;
mod report;
mod select;
mod synth;

use std::path::{Path, PathBuf};

use boruta_core::{load_csv, DataMatrix, ForestParams, MaxFeatures, TargetColumn, TaskKind};
use clap::{Args, Subcommand};

use crate::config::Resolver;
use crate::error::{CliError, CliResult};
use crate::manifest::{digest_file, InputDigest};

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic regression dataset as CSV.
    Synth(synth::SynthArgs),
    /// Run Boruta selection for one or more seeds.
    Select(select::SelectArgs),
    /// Cross-validate a forest on a feature subset.
    Eval(eval::EvalArgs),
    /// Summarize importance histories as box-plot statistics.
    Report(report::ReportArgs),
    /// Time forest fitting and importance computation over a size grid.
    Bench(bench::BenchArgs),
    /// Compute feature importances of a forest stored as JSON.
    Importance(importance::ImportanceArgs),
}

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Synth(a) => synth::run(a),
        Command::Select(a) => select::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Report(a) => report::run(a),
        Command::Bench(a) => bench::run(a),
        Command::Importance(a) => importance::run(a),
    }
}

/// Random-forest hyperparameters shared by several commands.
#[derive(Args, Debug, Default)]
pub struct ForestArgs {
    /// Trees per forest [default: 100]
    #[arg(long)]
    trees: Option<usize>,
    /// Maximum tree depth [default: unlimited]
    #[arg(long)]
    max_depth: Option<usize>,
    /// Smallest node that may be split [default: 2]
    #[arg(long)]
    min_samples_split: Option<usize>,
    /// Candidate features per split: sqrt, all, or a fraction in (0, 1]
    /// [default: sqrt for classification, 1/3 for regression]
    #[arg(long)]
    max_features: Option<String>,
    /// Draw a bootstrap sample per tree [default: true]
    #[arg(long)]
    bootstrap: Option<bool>,
}

fn parse_max_features(s: &str) -> CliResult<MaxFeatures> {
    match s.trim().to_ascii_lowercase().as_str() {
        "sqrt" => Ok(MaxFeatures::Sqrt),
        "all" => Ok(MaxFeatures::All),
        other => other
            .parse::<f64>()
            .ok()
            .filter(|f| *f > 0.0 && *f <= 1.0)
            .map(MaxFeatures::Fraction)
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "max-features must be sqrt, all or a fraction in (0, 1], got '{s}'"
                ))
            }),
    }
}

fn max_features_name(m: MaxFeatures) -> String {
    match m {
        MaxFeatures::Sqrt => "sqrt".into(),
        MaxFeatures::All => "all".into(),
        MaxFeatures::Fraction(f) => f.to_string(),
    }
}

impl ForestArgs {
    pub fn resolve(self, r: &mut Resolver, task: TaskKind) -> CliResult<ForestParams> {
        let defaults = ForestParams::for_task(task);
        let num_trees = r.value("trees", self.trees, defaults.num_trees)?;
        let max_depth = r.optional("max-depth", self.max_depth)?;
        let min_samples_split = r.value("min-samples-split", self.min_samples_split, defaults.min_samples_split)?;
        let max_features = r.parse(
            "max-features",
            self.max_features,
            max_features_name(defaults.max_features),
        )?;
        let bootstrap = r.value("bootstrap", self.bootstrap, defaults.bootstrap)?;
        let params = ForestParams {
            num_trees,
            max_depth,
            min_samples_split,
            max_features: parse_max_features(&max_features)?,
            bootstrap,
            seed: defaults.seed,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Dataset location and interpretation shared by several commands.
#[derive(Args, Debug)]
pub struct DataArgs {
    /// CSV file with a header row
    #[arg(long)]
    data: Option<PathBuf>,
    /// Name of the target column [default: y]
    #[arg(long)]
    target: Option<String>,
    /// regression or classification [default: regression]
    #[arg(long)]
    task: Option<String>,
}

pub struct LoadedData {
    pub data: DataMatrix,
    pub digest: InputDigest,
}

impl DataArgs {
    pub fn load(self, r: &mut Resolver) -> CliResult<LoadedData> {
        let path = r.optional::<PathBuf>("data", self.data)?;
        let Some(path) = path else {
            return Err(CliError::Usage("--data is required".into()));
        };
        let target = r.parse("target", self.target, "y".to_string())?;
        let task = r.parse("task", self.task, "regression".to_string())?;
        let data = load_dataset(&path, &target, &task)?;
        Ok(LoadedData {
            data,
            digest: digest_file(&path)?,
        })
    }
}

pub fn load_dataset(path: &Path, target: &str, task: &str) -> CliResult<DataMatrix> {
    let data = load_csv(path, &TargetColumn::from(target), TaskKind::Regression)?;
    match task.to_ascii_lowercase().as_str() {
        "regression" => Ok(data),
        "classification" => Ok(data.into_classification()?),
        other => Err(CliError::Usage(format!(
            "unknown task '{other}' (expected regression or classification)"
        ))),
    }
}

/// Output path from a flag or the config file.
pub fn output_path(r: &mut Resolver, flag: Option<PathBuf>) -> CliResult<PathBuf> {
    r.optional::<PathBuf>("out", flag)?
        .ok_or_else(|| CliError::Usage("--out is required".into()))
}
