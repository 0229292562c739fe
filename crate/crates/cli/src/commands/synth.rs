use std::path::PathBuf;

use boruta_core::synth::Variant;
use boruta_core::{generate_synthetic, SyntheticSpec};
use clap::Args;

use super::output_path;
use crate::config::Resolver;
use crate::error::{CliError, CliResult};
use crate::manifest::{now, sibling_manifest, Outputs, RunManifest};

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// direct, biased or multicollinear [default: direct]
    #[arg(long)]
    variant: Option<String>,
    /// Number of samples [default: 10000]
    #[arg(long)]
    n: Option<usize>,
    /// Random seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; the manifest goes next to it
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat TOML file of flag values, or a manifest JSON to repeat a run
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn run(args: SynthArgs) -> CliResult<()> {
    let started_at = now();
    let mut r = Resolver::load(args.config.as_deref())?;
    let variant = args.variant.map(|s| s.parse::<Variant>()).transpose()?;
    let variant = r.choice("variant", variant, Variant::Direct)?;
    let n = r.value("n", args.n, 10_000usize)?;
    let seed = r.value("seed", args.seed, 0u64)?;
    let out = output_path(&mut r, args.out)?;
    if n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }

    let data = generate_synthetic(&SyntheticSpec::new(n, seed, variant))?;
    let mut csv = Vec::new();
    data.write_csv(&mut csv, "y")?;

    let mut outputs = Outputs::new();
    let manifest_path = sibling_manifest(&out);
    let result = (|| {
        outputs.write(&out, &csv)?;
        let manifest = RunManifest {
            command: "synth".into(),
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
    if let Err(e) = result {
        outputs.discard();
        return Err(e);
    }
    eprintln!(
        "wrote {} ({} rows, {} features; manifest {})",
        out.display(),
        n,
        data.n_features(),
        manifest_path.display()
    );
    Ok(())
}
