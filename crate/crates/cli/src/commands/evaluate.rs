use std::path::PathBuf;

use anyhow::Result;
use serde::Serialize;
use spinekit::metrics::evaluate;
use spinekit::volume::nifti::read_nifti;
use spinekit::Volume;

use crate::output::{display, run_record_beside, write_bytes, write_json, RunRecord};

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Predicted semantic mask.
    #[arg(long)]
    pred: PathBuf,
    /// Reference semantic mask.
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long, requires = "ref_instance")]
    pred_instance: Option<PathBuf>,
    #[arg(long, requires = "pred_instance")]
    ref_instance: Option<PathBuf>,
    #[arg(long)]
    json: PathBuf,
    /// Flattened `section,structure,metric,value` table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

pub fn run(args: &Args, threads: Option<usize>) -> Result<()> {
    let pred: Volume<u16> = read_nifti(&args.pred)?;
    let reference: Volume<u16> = read_nifti(&args.reference)?;
    let instances = match (&args.pred_instance, &args.ref_instance) {
        (Some(p), Some(r)) => Some((read_nifti::<u16>(p)?, read_nifti::<u16>(r)?)),
        _ => None,
    };
    let report = evaluate(&pred, &reference, instances.as_ref().map(|(p, r)| (p, r)))?;

    let mut record = RunRecord::new("evaluate", args);
    record.threads = threads;
    record.inputs = [
        Some(&args.pred),
        Some(&args.reference),
        args.pred_instance.as_ref(),
        args.ref_instance.as_ref(),
    ]
    .into_iter()
    .flatten()
    .map(|p| display(p))
    .collect();
    write_json(&args.json, &report)?;
    record.outputs.push(display(&args.json));
    if let Some(csv) = &args.csv {
        write_bytes(csv, report.to_csv().as_bytes())?;
        record.outputs.push(display(csv));
    }
    write_json(&run_record_beside(&args.json), &record)?;
    Ok(())
}
