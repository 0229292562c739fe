use std::path::{Path, PathBuf};

use boruta_core::eval::{cross_validate, Metrics};
use boruta_core::DataMatrix;
use clap::Args;
use serde_json::{json, Value};

use super::{output_path, DataArgs, ForestArgs};
use crate::config::Resolver;
use crate::error::{CliError, CliResult};
use crate::manifest::{digest_file, manifest_ref, now, sibling_manifest, Outputs, RunManifest};

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    /// "all", a text file with one feature name per line, or a report /
    /// aggregate JSON from `select` (its accepted features) [default: all]
    #[arg(long)]
    features: Option<String>,
    /// Number of folds [default: 5]
    #[arg(long)]
    k: Option<usize>,
    /// Seed for the fold split and the forests [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    forest: ForestArgs,
    /// Output metrics JSON; the manifest goes next to it
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat TOML file of flag values, or a manifest JSON to repeat a run
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Feature names listed in a features file.
fn read_feature_names(path: &Path) -> CliResult<Vec<String>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    if let Ok(doc) = serde_json::from_str::<Value>(&text) {
        if let Some(list) = doc.get("accepted").and_then(Value::as_array) {
            return Ok(list.iter().filter_map(|v| v.as_str().map(String::from)).collect());
        }
        if let Some(features) = doc.get("features").and_then(Value::as_object) {
            return Ok(features
                .iter()
                .filter(|(_, v)| v.get("state").and_then(Value::as_i64) == Some(1))
                .map(|(k, _)| k.clone())
                .collect());
        }
        return Err(CliError::Data(format!(
            "{} is JSON but has neither \"accepted\" nor \"features\"",
            path.display()
        )));
    }
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

fn feature_indices(data: &DataMatrix, names: &[String]) -> CliResult<Vec<usize>> {
    let missing: Vec<&str> = names
        .iter()
        .filter(|n| data.feature_index(n).is_none())
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Data(format!("unknown feature(s): {}", missing.join(", "))));
    }
    if names.is_empty() {
        return Err(CliError::Data("the feature list is empty".into()));
    }
    Ok(names.iter().filter_map(|n| data.feature_index(n)).collect())
}

pub fn run(args: EvalArgs) -> CliResult<()> {
    let started_at = now();
    let mut r = Resolver::load(args.config.as_deref())?;
    let loaded = args.data.load(&mut r)?;
    let data = loaded.data;
    let features = r.parse("features", args.features, "all".to_string())?;
    let k = r.value("k", args.k, 5usize)?;
    let seed = r.value("seed", args.seed, 0u64)?;
    let params = args.forest.resolve(&mut r, data.task())?;
    let out = output_path(&mut r, args.out)?;
    if k < 2 {
        return Err(CliError::Usage(format!("--k must be at least 2, got {k}")));
    }
    if k > data.n_samples() {
        return Err(CliError::Usage(format!(
            "--k {k} exceeds the {} samples",
            data.n_samples()
        )));
    }

    let mut inputs = vec![loaded.digest];
    let indices = if features == "all" {
        (0..data.n_features()).collect()
    } else {
        let path = Path::new(&features);
        inputs.push(digest_file(path)?);
        feature_indices(&data, &read_feature_names(path)?)?
    };
    let result = cross_validate(&data, &indices, &params, k, seed)?;

    let manifest_path = sibling_manifest(&out);
    let body = json!({
        "manifest": manifest_ref(&manifest_path),
        "k": result.k,
        "seed": seed,
        "features": result.features,
        "folds": result.folds,
        "mean": result.mean,
    });
    let mut outputs = Outputs::new();
    let written = (|| {
        outputs.write_json(&out, &body)?;
        let manifest = RunManifest {
            command: "eval".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            started_at,
            finished_at: now(),
            config: r.resolved().clone(),
            seeds: vec![seed],
            inputs,
            outputs: outputs.names(),
        };
        outputs.write_json(&manifest_path, &manifest)
    })();
    if let Err(e) = written {
        outputs.discard();
        return Err(e);
    }
    match result.mean {
        Metrics::Regression(m) => println!(
            "mse {:.6} mae {:.6} r2 {}",
            m.mse,
            m.mae,
            m.r2.map_or("undefined".to_string(), |v| format!("{v:.6}"))
        ),
        Metrics::Classification(m) => println!(
            "accuracy {:.4} recall {:.4} precision {:.4} f1 {:.4}",
            m.accuracy, m.recall, m.precision, m.f1
        ),
    }
    Ok(())
}
