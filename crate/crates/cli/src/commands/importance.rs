use std::path::PathBuf;

use boruta_core::{impurity_importance, permutation_importance, Forest, ImportanceMethod, TaskKind};
use clap::Args;
use serde_json::json;

use super::{load_dataset, output_path};
use crate::config::Resolver;
use crate::error::{CliError, CliResult};
use crate::manifest::{digest_file, manifest_ref, now, sibling_manifest, Outputs, RunManifest};

#[derive(Args, Debug)]
pub struct ImportanceArgs {
    /// Forest JSON (split_feature / threshold / gain / instance_count /
    /// children records)
    #[arg(long)]
    forest: Option<PathBuf>,
    /// Importance backend: treeimp or permut [default: treeimp]
    #[arg(long)]
    method: Option<ImportanceMethod>,
    /// CSV to permute (permut only); its feature columns must match the forest
    #[arg(long)]
    data: Option<PathBuf>,
    /// Target column of --data, which is ignored [default: y]
    #[arg(long)]
    target: Option<String>,
    /// Seed of the shared row permutation [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Output JSON mapping feature names to scores
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat TOML file of flag values, or a manifest JSON to repeat a run
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn run(args: ImportanceArgs) -> CliResult<()> {
    let started_at = now();
    let mut r = Resolver::load(args.config.as_deref())?;
    let forest_path = r
        .optional::<PathBuf>("forest", args.forest)?
        .ok_or_else(|| CliError::Usage("--forest is required".into()))?;
    let method = r.parse("method", args.method, ImportanceMethod::TreeImp)?;
    let data_path = r.optional::<PathBuf>("data", args.data)?;
    let target = r.parse("target", args.target, "y".to_string())?;
    let seed = r.value("seed", args.seed, 0u64)?;
    let out = output_path(&mut r, args.out)?;

    let text = std::fs::read_to_string(&forest_path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", forest_path.display())))?;
    let forest = Forest::from_json(&text)?;
    let mut inputs = vec![digest_file(&forest_path)?];
    let (scores, names) = match method {
        ImportanceMethod::TreeImp => {
            let names: Vec<String> = (0..forest.num_features()).map(|i| format!("x{i}")).collect();
            (impurity_importance(&forest), names)
        }
        ImportanceMethod::Permut => {
            let path = data_path.ok_or_else(|| CliError::Usage("--data is required for permut".into()))?;
            inputs.push(digest_file(&path)?);
            let task = match forest.task() {
                TaskKind::Regression => "regression",
                TaskKind::Classification { .. } => "classification",
            };
            let data = load_dataset(&path, &target, task)?;
            (
                permutation_importance(&forest, data.values(), seed)?,
                data.feature_names().to_vec(),
            )
        }
    };

    let manifest_path = sibling_manifest(&out);
    let body = json!({
        "manifest": manifest_ref(&manifest_path),
        "method": method,
        "normalized": scores.normalized,
        "importance": scores.to_named_json(&names)?,
    });
    let mut outputs = Outputs::new();
    let written = (|| {
        outputs.write_json(&out, &body)?;
        let manifest = RunManifest {
            command: "importance".into(),
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
    Ok(())
}
