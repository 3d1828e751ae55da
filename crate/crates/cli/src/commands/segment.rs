use std::path::PathBuf;
use std::time::Duration;

use anyhow::Result;
use serde::Serialize;
use spinekit::assembly::GroupingRule;
use spinekit::pipeline::{run_pipeline, to_working, Blend, PipelineConfig, SemanticPredictor};
use spinekit::volume::nifti::read_nifti;
use spinekit::Volume;

use super::{read_config, resolve_seed, triple};
use crate::output::{display, ensure_dir, write_json, write_volume, RunRecord};
use crate::predictors::{self, BuildContext, PredictorSpec};
use crate::usage;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long)]
    input: PathBuf,
    /// Semantic predictor, `oracle:<gt>[,<noise.json>]` or `exec:<cmd>`;
    /// repeat to ensemble.
    #[arg(long, required = true)]
    semantic: Vec<PredictorSpec>,
    /// Instance predictor, same grammar.
    #[arg(long)]
    instance: PredictorSpec,
    #[arg(long)]
    out_dir: PathBuf,
    /// Pipeline config JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Patch size in voxels, `x,y,z`.
    #[arg(long, value_parser = triple::<usize>)]
    patch: Option<[usize; 3]>,
    #[arg(long)]
    overlap: Option<f64>,
    #[arg(long, value_enum)]
    blend: Option<BlendArg>,
    /// Working spacing in mm, `x,y,z`, or `native` to keep the input's.
    #[arg(long)]
    target_spacing: Option<String>,
    /// Cutout size in voxels, `x,y,z`.
    #[arg(long, value_parser = triple::<usize>)]
    cutout: Option<[usize; 3]>,
    #[arg(long, value_enum)]
    grouping: Option<GroupingArg>,
    #[arg(long)]
    no_postprocess: bool,
    /// Seed for oracle noise files that carry none.
    #[arg(long)]
    seed: Option<u64>,
    /// Seconds allowed per external predictor call.
    #[arg(long, default_value_t = 600.0)]
    timeout: f64,
    /// Directory for external predictor file exchange.
    #[arg(long)]
    exchange_dir: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum BlendArg {
    Gaussian,
    Uniform,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum GroupingArg {
    Spatial,
    Index,
}

#[derive(Serialize)]
struct Resolved<'a> {
    input: String,
    semantic: &'a [PredictorSpec],
    instance: &'a PredictorSpec,
    pipeline: &'a PipelineConfig,
    timeout_s: f64,
}

fn resolve_config(args: &Args, threads: Option<usize>) -> Result<PipelineConfig> {
    let mut cfg: PipelineConfig = match &args.config {
        Some(p) => serde_json::from_value(read_config(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => PipelineConfig::default(),
    };
    if let Some(p) = args.patch {
        cfg.tiling.patch_size = p;
    }
    if let Some(o) = args.overlap {
        cfg.tiling.overlap = o;
    }
    if let Some(b) = args.blend {
        cfg.tiling.blend = match b {
            BlendArg::Gaussian => Blend::Gaussian,
            BlendArg::Uniform => Blend::Uniform,
        };
    }
    match args.target_spacing.as_deref() {
        Some("native") => cfg.target_spacing = None,
        Some(s) => cfg.target_spacing = Some(triple::<f64>(s).map_err(usage)?),
        None => {}
    }
    if let Some(c) = args.cutout {
        cfg.assembly.cutout_size = c;
    }
    if let Some(g) = args.grouping {
        cfg.assembly.grouping = match g {
            GroupingArg::Spatial => GroupingRule::Spatial,
            GroupingArg::Index => GroupingRule::Index,
        };
    }
    if args.no_postprocess {
        cfg.postprocess = false;
    }
    if threads.is_some() {
        cfg.threads = threads;
    }
    cfg.tiling.validate().map_err(|e| usage(e.to_string()))?;
    if !(args.timeout > 0.0 && args.timeout.is_finite()) {
        return Err(usage("--timeout must be positive"));
    }
    Ok(cfg)
}

pub fn run(args: &Args, threads: Option<usize>) -> Result<()> {
    let cfg = resolve_config(args, threads)?;
    let seed = resolve_seed(args.seed);
    let image: Volume<f32> = read_nifti(&args.input)?;
    let working_dims = to_working(&image, cfg.target_spacing)?.dims();
    ensure_dir(&args.out_dir)?;
    let ctx = BuildContext {
        target_spacing: cfg.target_spacing,
        working_dims,
        seed,
        exchange_dir: args
            .exchange_dir
            .clone()
            .unwrap_or_else(|| args.out_dir.join("exchange")),
        timeout: Duration::from_secs_f64(args.timeout),
    };
    let semantic = args
        .semantic
        .iter()
        .map(|s| predictors::semantic(s, &ctx))
        .collect::<Result<Vec<_>>>()?;
    let semantic_refs: Vec<&dyn SemanticPredictor> = semantic.iter().map(|b| b.as_ref()).collect();
    let instance = predictors::instance(&args.instance, &ctx)?;

    let out = run_pipeline(&image, &semantic_refs, instance.as_ref(), &cfg)?;
    let _ = std::fs::remove_dir(&ctx.exchange_dir);

    let resolved = Resolved {
        input: display(&args.input),
        semantic: &args.semantic,
        instance: &args.instance,
        pipeline: &cfg,
        timeout_s: args.timeout,
    };
    let mut record = RunRecord::new("segment", &resolved);
    record.seed = Some(seed);
    record.threads = threads;
    record.inputs.push(display(&args.input));
    for (name, vol) in [("semantic.nii.gz", &out.semantic), ("instance.nii.gz", &out.instance)] {
        let path = args.out_dir.join(name);
        write_volume(&path, vol)?;
        record.outputs.push(display(&path));
    }
    let report = args.out_dir.join("report.json");
    write_json(&report, &out.report)?;
    record.outputs.push(display(&report));
    write_json(&args.out_dir.join("run.json"), &record)?;
    Ok(())
}
