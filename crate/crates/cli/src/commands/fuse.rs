use std::path::PathBuf;

use anyhow::Result;
use serde::Serialize;
use spinekit::annofuse::{fuse, AnnotationSources};
use spinekit::volume::nifti::read_nifti;
use spinekit::Volume;

use crate::output::{display, run_record_beside, write_json, write_volume, RunRecord};

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Corpus, disc, canal and sacrum labels.
    #[arg(long)]
    base: PathBuf,
    /// Remaining vertebra substructure labels.
    #[arg(long)]
    substructures: PathBuf,
    /// Binary cord mask; any nonzero voxel is cord.
    #[arg(long)]
    cord: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Fusion summary JSON.
    #[arg(long)]
    summary: Option<PathBuf>,
}

pub fn run(args: &Args, threads: Option<usize>) -> Result<()> {
    let base: Volume<u16> = read_nifti(&args.base)?;
    let substructures: Volume<u16> = read_nifti(&args.substructures)?;
    let cord: Volume<f32> = read_nifti(&args.cord)?;
    let (out, summary) = fuse(&AnnotationSources {
        base,
        substructures,
        cord: cord.map(|v| v != 0.0),
    })?;
    write_volume(&args.out, &out)?;
    let mut record = RunRecord::new("fuse", args);
    record.threads = threads;
    record.inputs = [&args.base, &args.substructures, &args.cord]
        .map(|p| display(p))
        .to_vec();
    record.outputs.push(display(&args.out));
    if let Some(s) = &args.summary {
        write_json(s, &summary)?;
        record.outputs.push(display(s));
    }
    write_json(&run_record_beside(&args.out), &record)?;
    if summary.endplate_cord_contacts > 0 {
        log::warn!(
            "{} synthesized endplate voxels touch the cord",
            summary.endplate_cord_contacts
        );
    }
    Ok(())
}
