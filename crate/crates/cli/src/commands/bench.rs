use std::path::PathBuf;

use boruta_core::eval::{benchmark, benchmark_csv};
use boruta_core::{ImportanceMethod, TaskKind};
use clap::Args;

use super::{output_path, ForestArgs};
use crate::config::Resolver;
use crate::error::{CliError, CliResult};
use crate::manifest::{now, sibling_manifest, Outputs, RunManifest};

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Comma-separated sizes as NxP, e.g. 1000x50,1000x100
    #[arg(long)]
    sizes: Option<String>,
    /// Importance backend: treeimp or permut [default: permut]
    #[arg(long)]
    method: Option<ImportanceMethod>,
    /// Seed for data and forests [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    forest: ForestArgs,
    /// Output CSV; the manifest goes next to it
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat TOML file of flag values, or a manifest JSON to repeat a run
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_sizes(s: &str) -> CliResult<Vec<(usize, usize)>> {
    let sizes = s
        .split(',')
        .map(|item| {
            let (n, p) = item
                .trim()
                .split_once(['x', 'X'])
                .ok_or_else(|| CliError::Usage(format!("size '{item}' is not of the form NxP")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&v| v > 0)
                    .ok_or_else(|| CliError::Usage(format!("size '{item}' needs positive integers")))
            };
            Ok((parse(n)?, parse(p)?))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if sizes.is_empty() {
        return Err(CliError::Usage("no sizes given".into()));
    }
    Ok(sizes)
}

pub fn run(args: BenchArgs) -> CliResult<()> {
    let started_at = now();
    let mut r = Resolver::load(args.config.as_deref())?;
    let sizes = r.parse("sizes", args.sizes, "1000x25,1000x50".to_string())?;
    let sizes = parse_sizes(&sizes)?;
    let method = r.parse("method", args.method, ImportanceMethod::Permut)?;
    let seed = r.value("seed", args.seed, 0u64)?;
    let params = args.forest.resolve(&mut r, TaskKind::Regression)?;
    let out = output_path(&mut r, args.out)?;
    let params = boruta_core::ForestParams { seed, ..params };

    let records = benchmark(&sizes, &params, method, seed)?;
    for rec in &records {
        eprintln!(
            "n {} p {}: fit {:.4}s, {method} {:.4}s, avg depth {:.1}",
            rec.n, rec.p, rec.fit_time, rec.importance_time, rec.avg_depth
        );
    }

    let manifest_path = sibling_manifest(&out);
    let mut outputs = Outputs::new();
    let written = (|| {
        outputs.write(&out, benchmark_csv(&records).as_bytes())?;
        let manifest = RunManifest {
            command: "bench".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            started_at,
            finished_at: now(),
            config: r.resolved().clone(),
            seeds: vec![seed],
            inputs: Vec::new(),
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
