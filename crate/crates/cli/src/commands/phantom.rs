use std::path::PathBuf;

use anyhow::Result;
use spinekit::labels::label_map_json;
use spinekit::phantom::{generate_phantom, PhantomSpec};

use super::{read_config, resolve_seed, triple};
use crate::output::{display, ensure_dir, write_bytes, write_json, write_volume, RunRecord};
use crate::usage;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Phantom spec JSON; flags override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    vertebrae: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Adjacent pair to fuse, as `k-l`; repeatable.
    #[arg(long = "fuse", value_parser = parse_pair)]
    fuse_pairs: Vec<(u32, u32)>,
    #[arg(long)]
    no_sacrum: bool,
    /// Volume size in voxels, `x,y,z`.
    #[arg(long, value_parser = triple::<usize>)]
    dims: Option<[usize; 3]>,
    /// Voxel spacing in mm, `x,y,z`.
    #[arg(long, value_parser = triple::<f64>)]
    spacing: Option<[f64; 3]>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_pair(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once('-').ok_or_else(|| format!("expected `k-l`, got `{s}`"))?;
    Ok((
        a.trim().parse().map_err(|_| format!("bad vertebra `{a}`"))?,
        b.trim().parse().map_err(|_| format!("bad vertebra `{b}`"))?,
    ))
}

pub fn run(args: &Args, threads: Option<usize>) -> Result<()> {
    let (mut spec, spec_seed) = match &args.spec {
        Some(p) => {
            let value = read_config(p)?;
            let has_seed = value.get("seed").is_some();
            let spec: PhantomSpec =
                serde_json::from_value(value).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            let seed = has_seed.then_some(spec.seed);
            (spec, seed)
        }
        None => (PhantomSpec::default(), None),
    };
    if let Some(n) = args.vertebrae {
        spec.n_vertebrae = n;
    }
    if !args.fuse_pairs.is_empty() {
        spec.fuse_pairs = args.fuse_pairs.clone();
    }
    if args.no_sacrum {
        spec.include_sacrum = false;
    }
    if let Some(d) = args.dims {
        spec.dims = d;
    }
    if let Some(s) = args.spacing {
        spec.spacing = s;
    }
    spec.seed = resolve_seed(args.seed.or(spec_seed));
    spec.validate()?;

    let p = generate_phantom(&spec)?;
    ensure_dir(&args.out_dir)?;
    let files = [
        ("image.nii.gz", None),
        ("semantic.nii.gz", Some(&p.semantic)),
        ("instance.nii.gz", Some(&p.instance)),
    ];
    let mut record = RunRecord::new("phantom", &spec);
    record.seed = Some(spec.seed);
    record.threads = threads;
    for (name, labels) in files {
        let path = args.out_dir.join(name);
        match labels {
            Some(v) => write_volume(&path, v)?,
            None => write_volume(&path, &p.intensity)?,
        }
        record.outputs.push(display(&path));
    }
    let labels = args.out_dir.join("labels.json");
    write_bytes(&labels, label_map_json().as_bytes())?;
    record.outputs.push(display(&labels));
    write_json(&args.out_dir.join("run.json"), &record)?;
    log::info!(
        "wrote phantom with {} vertebrae to {}",
        spec.n_vertebrae,
        args.out_dir.display()
    );
    Ok(())
}
