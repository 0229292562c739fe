use std::path::PathBuf;

use boruta_core::{
    aggregate_runs, run_boruta_with, BorutaConfig, Correction, FeatureState, ImportanceMethod, KlDirection,
    SelectionReport, ShadowMode,
};
use clap::Args;
use rayon::prelude::*;
use serde_json::{Map, Value};

use super::{output_path, DataArgs, ForestArgs};
use crate::config::{parse_choice, Resolver};
use crate::error::{CliError, CliResult};
use crate::manifest::{manifest_ref, now, Outputs, RunManifest};

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Importance backend: treeimp or permut [default: permut]
    #[arg(long)]
    method: Option<ImportanceMethod>,
    /// Number of runs, with seeds 0, 1, ..., N-1 [default: 1]
    #[arg(long, conflicts_with = "seed_list")]
    seeds: Option<u64>,
    /// Explicit comma-separated seeds
    #[arg(long, value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,
    /// Runs executed concurrently [default: 1]
    #[arg(long)]
    jobs: Option<usize>,
    /// Iteration budget per run [default: 100]
    #[arg(long)]
    max_iter: Option<u32>,
    /// Significance level before correction [default: 0.05]
    #[arg(long)]
    alpha: Option<f64>,
    /// bonferroni or none [default: bonferroni]
    #[arg(long, value_parser = parse_choice::<Correction>)]
    correction: Option<Correction>,
    /// per-column or joint-rows [default: per-column]
    #[arg(long, value_parser = parse_choice::<ShadowMode>)]
    shadow_mode: Option<ShadowMode>,
    /// Classification loss reference: baseline-to-permuted or
    /// permuted-to-baseline [default: baseline-to-permuted]
    #[arg(long, value_parser = parse_choice::<KlDirection>)]
    kl_direction: Option<KlDirection>,
    #[command(flatten)]
    forest: ForestArgs,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat TOML file of flag values, or a manifest JSON to repeat a run
    #[arg(long)]
    config: Option<PathBuf>,
    /// Suppress the per-iteration log
    #[arg(long)]
    quiet: bool,
}

/// `--seeds N` means seeds `0..N`; a config file may give either a count or
/// a list under `seeds`.
fn resolve_seeds(r: &mut Resolver, count: Option<u64>, list: Option<Vec<u64>>) -> CliResult<Vec<u64>> {
    let seeds = match (count, list) {
        (_, Some(list)) => list,
        (Some(n), None) => (0..n).collect(),
        (None, None) => match r.file_value("seeds").or_else(|| r.file_value("seed-list")) {
            Some(Value::Number(n)) => (0..n
                .as_u64()
                .ok_or_else(|| CliError::Usage("seeds must be a count".into()))?)
                .collect(),
            Some(v @ Value::Array(_)) => {
                serde_json::from_value(v.clone()).map_err(|e| CliError::Usage(format!("config key 'seeds': {e}")))?
            }
            Some(other) => return Err(CliError::Usage(format!("config key 'seeds': unexpected {other}"))),
            None => vec![0],
        },
    };
    if seeds.is_empty() {
        return Err(CliError::Usage("at least one seed is required".into()));
    }
    let mut unique = seeds.clone();
    unique.sort_unstable();
    unique.dedup();
    if unique.len() != seeds.len() {
        return Err(CliError::Usage("seeds must be distinct".into()));
    }
    r.record("seeds", serde_json::to_value(&seeds).expect("seeds serialize"));
    Ok(seeds)
}

fn with_manifest(manifest: &Value, body: Value) -> Value {
    let mut out = Map::new();
    out.insert("manifest".into(), manifest.clone());
    if let Value::Object(m) = body {
        out.extend(m);
    }
    Value::Object(out)
}

pub fn run(args: SelectArgs) -> CliResult<()> {
    let started_at = now();
    let mut r = Resolver::load(args.config.as_deref())?;
    let loaded = args.data.load(&mut r)?;
    let data = loaded.data;
    let method = r.parse("method", args.method, ImportanceMethod::Permut)?;
    let seeds = resolve_seeds(&mut r, args.seeds, args.seed_list)?;
    let jobs = r.value("jobs", args.jobs, 1usize)?;
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let base = BorutaConfig::new(data.task(), method, 0);
    let max_iterations = r.value("max-iter", args.max_iter, base.max_iterations)?;
    let alpha = r.value("alpha", args.alpha, base.alpha)?;
    let correction = r.choice("correction", args.correction, base.correction)?;
    let shadow_mode = r.choice("shadow-mode", args.shadow_mode, base.shadow_mode)?;
    let kl_direction = r.choice("kl-direction", args.kl_direction, base.kl_direction)?;
    let forest_params = args.forest.resolve(&mut r, data.task())?;
    let out = output_path(&mut r, args.out)?;
    let config = BorutaConfig {
        max_iterations,
        alpha,
        correction,
        importance_method: method,
        shadow_mode,
        kl_direction,
        forest_params,
        seed: 0,
    };
    config.validate()?;

    let quiet = args.quiet;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let reports: Vec<SelectionReport> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let config = BorutaConfig { seed, ..config.clone() };
                run_boruta_with(&data, &config, |record, state| {
                    if !quiet {
                        let count = |s| state.state.iter().filter(|&&x| x == s).count();
                        eprintln!(
                            "seed {seed} iteration {}: {} accepted, {} tentative, {} rejected ({:.2}s)",
                            record.iteration,
                            count(FeatureState::Accepted),
                            count(FeatureState::Undecided),
                            count(FeatureState::Rejected),
                            record.seconds
                        );
                    }
                })
            })
            .collect::<boruta_core::Result<Vec<_>>>()
    })?;
    let aggregate = aggregate_runs(&reports)?;

    let mut outputs = Outputs::new();
    let manifest_path = out.join("manifest.json");
    let reference = manifest_ref(&manifest_path);
    let result = (|| {
        outputs.ensure_dir(&out)?;
        for report in &reports {
            let body = serde_json::to_value(report.to_document()).expect("report serializes");
            outputs.write_json(
                &out.join(format!("report-seed-{}.json", report.seed)),
                &with_manifest(&reference, body),
            )?;
            outputs.write(
                &out.join(format!("history-seed-{}.csv", report.seed)),
                report.history_csv().as_bytes(),
            )?;
        }
        let mut body = aggregate.to_json_value();
        let accepted: Vec<&str> = aggregate
            .accepted()
            .iter()
            .map(|&i| aggregate.feature_names[i].as_str())
            .collect();
        body["accepted"] = serde_json::to_value(accepted).expect("names serialize");
        outputs.write_json(&out.join("aggregate.json"), &with_manifest(&reference, body))?;
        let manifest = RunManifest {
            command: "select".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            started_at,
            finished_at: now(),
            config: r.resolved().clone(),
            seeds: seeds.clone(),
            inputs: vec![loaded.digest],
            outputs: outputs.names(),
        };
        outputs.write_json(&manifest_path, &manifest)
    })();
    if let Err(e) = result {
        outputs.discard();
        return Err(e);
    }

    let accepted: Vec<&str> = aggregate
        .accepted()
        .iter()
        .map(|&i| data.feature_names()[i].as_str())
        .collect();
    println!(
        "accepted ({} of {}): {}",
        accepted.len(),
        data.n_features(),
        accepted.join(", ")
    );
    Ok(())
}
