use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use boruta_core::boruta::consensus;
use boruta_core::stats::quantile;
use boruta_core::FeatureState;
use clap::Args;
use serde_json::Value;

use super::output_path;
use crate::config::Resolver;
use crate::error::{CliError, CliResult};
use crate::manifest::{digest_file, now, sibling_manifest, Outputs, RunManifest};

pub const BOXPLOT_CSV_HEADER: &str = "feature,min,q1,median,q3,max,state";

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// History CSVs written by `select` (iteration,feature,importance)
    #[arg(long, num_args = 1..)]
    history: Vec<PathBuf>,
    /// Report or aggregate JSON supplying the final states; by default the
    /// report-seed-S.json next to each history-seed-S.csv is used
    #[arg(long)]
    states: Option<PathBuf>,
    /// Output box-plot CSV; the manifest goes next to it
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat TOML file of flag values, or a manifest JSON to repeat a run
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Importance values per feature, features in order of first appearance.
fn read_histories(paths: &[PathBuf]) -> CliResult<Vec<(String, Vec<f64>)>> {
    let mut order: Vec<(String, Vec<f64>)> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for path in paths {
        let bad = |msg: String| CliError::Data(format!("{}: {msg}", path.display()));
        let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
        let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["iteration", "feature", "importance"] {
            return Err(bad("expected header iteration,feature,importance".into()));
        }
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| bad(e.to_string()))?;
            let row = line + 2;
            record[0]
                .parse::<u32>()
                .map_err(|_| bad(format!("line {row}: bad iteration '{}'", &record[0])))?;
            let value: f64 = record[2]
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| bad(format!("line {row}: bad importance '{}'", &record[2])))?;
            let name = record[1].to_string();
            let slot = *index.entry(name.clone()).or_insert_with(|| {
                order.push((name, Vec::new()));
                order.len() - 1
            });
            order[slot].1.push(value);
        }
    }
    Ok(order)
}

fn states_from_json(path: &Path) -> CliResult<BTreeMap<String, FeatureState>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let features = doc
        .get("features")
        .and_then(Value::as_object)
        .ok_or_else(|| CliError::Data(format!("{} has no \"features\" object", path.display())))?;
    features
        .iter()
        .map(|(name, v)| {
            v.get("state")
                .and_then(Value::as_i64)
                .and_then(FeatureState::from_code)
                .map(|s| (name.clone(), s))
                .ok_or_else(|| CliError::Data(format!("{}: feature '{name}' has no valid state", path.display())))
        })
        .collect()
}

/// Consensus of the reports sitting next to `history-seed-S.csv` files, or
/// `None` when any of them is missing.
fn sibling_states(paths: &[PathBuf]) -> CliResult<Option<(BTreeMap<String, FeatureState>, Vec<PathBuf>)>> {
    let mut reports = Vec::new();
    for path in paths {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let Some(seed) = name.strip_prefix("history-seed-").and_then(|s| s.strip_suffix(".csv")) else {
            return Ok(None);
        };
        let report = path.with_file_name(format!("report-seed-{seed}.json"));
        if !report.exists() {
            return Ok(None);
        }
        reports.push(report);
    }
    let per_run: Vec<_> = reports.iter().map(|p| states_from_json(p)).collect::<CliResult<_>>()?;
    let mut states = BTreeMap::new();
    for name in per_run[0].keys() {
        let runs: Vec<FeatureState> = per_run.iter().filter_map(|m| m.get(name).copied()).collect();
        states.insert(name.clone(), consensus(&runs));
    }
    Ok(Some((states, reports)))
}

pub fn run(args: ReportArgs) -> CliResult<()> {
    let started_at = now();
    let mut r = Resolver::load(args.config.as_deref())?;
    let history = if args.history.is_empty() {
        None
    } else {
        Some(args.history)
    };
    let history: Vec<PathBuf> = r.value("history", history, Vec::new())?;
    let states_path = r.optional::<PathBuf>("states", args.states)?;
    let out = output_path(&mut r, args.out)?;
    if history.is_empty() {
        return Err(CliError::Usage("at least one --history file is required".into()));
    }

    let series = read_histories(&history)?;
    let mut inputs = history.iter().map(|p| digest_file(p)).collect::<CliResult<Vec<_>>>()?;
    let states = match &states_path {
        Some(p) => {
            inputs.push(digest_file(p)?);
            Some(states_from_json(p)?)
        }
        None => match sibling_states(&history)? {
            Some((states, reports)) => {
                for p in &reports {
                    inputs.push(digest_file(p)?);
                }
                Some(states)
            }
            None => None,
        },
    };

    let mut rows: Vec<(String, [f64; 5], &str)> = series
        .iter()
        .map(|(name, values)| {
            let q = |p| quantile(values, p).expect("non-empty series");
            let color = states.as_ref().and_then(|s| s.get(name)).map_or("", |s| s.color());
            (name.clone(), [q(0.0), q(0.25), q(0.5), q(0.75), q(1.0)], color)
        })
        .collect();
    rows.sort_by(|a, b| b.1[2].total_cmp(&a.1[2]));

    let mut csv = String::from(BOXPLOT_CSV_HEADER);
    csv.push('\n');
    for (name, s, color) in &rows {
        csv.push_str(&format!(
            "{name},{},{},{},{},{},{color}\n",
            s[0], s[1], s[2], s[3], s[4]
        ));
    }

    let manifest_path = sibling_manifest(&out);
    let mut outputs = Outputs::new();
    let written = (|| {
        outputs.write(&out, csv.as_bytes())?;
        let manifest = RunManifest {
            command: "report".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            started_at,
            finished_at: now(),
            config: r.resolved().clone(),
            seeds: Vec::new(),
            inputs,
            outputs: outputs.names(),
        };
        outputs.write_json(&manifest_path, &manifest)
    })();
    if let Err(e) = written {
        outputs.discard();
        return Err(e);
    }
    eprintln!("wrote {} ({} features)", out.display(), rows.len());
    Ok(())
}
