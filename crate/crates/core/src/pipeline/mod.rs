//! The two-phase pipeline: tiled semantic prediction, instance assembly
//! from the semantic mask, then consistency post-processing.

mod external;
mod predictor;
mod tiling;

pub use external::ExternalPredictor;
pub use predictor::{CutoutPredictor, PatchPrediction, SemanticPredictor, NUM_CLASSES};
pub use tiling::{predict_semantic, tile_axis, tile_volume, window_weights, Blend, SemanticOutput, TilingSpec};

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, AssemblyConfig, AssemblyReport};
use crate::error::{Error, Result};
use crate::postproc::{enforce_consistency, ConsistencyReport};
use crate::volume::{reorient, resample, resample_to_dims, Grid, Interpolation, Orientation, Volume, Voxel};

pub const DEFAULT_SPACING: [f64; 3] = [0.75, 0.75, 1.65];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Working spacing after reorientation; `None` keeps the input spacing.
    pub target_spacing: Option<[f64; 3]>,
    pub tiling: TilingSpec,
    pub assembly: AssemblyConfig,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub postprocess: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            target_spacing: Some(DEFAULT_SPACING),
            tiling: TilingSpec::default(),
            assembly: AssemblyConfig::default(),
            threads: None,
            postprocess: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub input_dims: [usize; 3],
    pub input_spacing: [f64; 3],
    pub input_orientation: String,
    pub working_dims: [usize; 3],
    pub working_spacing: [f64; 3],
    pub semantic_predictors: Vec<String>,
    pub instance_predictor: String,
    pub patches: usize,
    pub assembly: AssemblyReport,
    pub consistency: Option<ConsistencyReport>,
    pub timings_ms: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    /// Both masks on the input grid.
    pub semantic: Volume<u16>,
    pub instance: Volume<u16>,
    pub report: RunReport,
}

/// Reorient to the canonical orientation and resample to the working
/// spacing: nearest neighbour for labels, trilinear otherwise.
pub fn to_working<T: Voxel>(vol: &Volume<T>, target_spacing: Option<[f64; 3]>) -> Result<Volume<T>> {
    let canonical = reorient(vol, Orientation::CANONICAL);
    match target_spacing {
        Some(sp) => {
            let mode = if T::IS_LABEL {
                Interpolation::Nearest
            } else {
                Interpolation::Trilinear
            };
            resample(&canonical, sp, mode)
        }
        None => Ok(canonical),
    }
}

// Inverse of `to_working` for label volumes.
fn to_input<T: Voxel>(vol: &Volume<T>, input: &Grid) -> Result<Volume<T>> {
    let codes = input.orientation.codes();
    let mut dims = [0usize; 3];
    let mut spacing = [0f64; 3];
    for (t, want) in Orientation::CANONICAL.codes().iter().enumerate() {
        let s = codes
            .iter()
            .position(|c| c.world_axis() == want.world_axis())
            .expect("orientation covers every anatomical axis");
        dims[t] = input.dims[s];
        spacing[t] = input.spacing[s];
    }
    let back = resample_to_dims(vol, spacing, dims, Interpolation::Nearest)?;
    Volume::with_grid(*input, reorient(&back, input.orientation).into_data())
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Run both phases on an intensity volume. Predictors see the working
/// grid; the returned masks are mapped back onto the input grid.
pub fn run_pipeline(
    vol: &Volume<f32>,
    semantic: &[&dyn SemanticPredictor],
    instance: &dyn CutoutPredictor,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    match config.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidSpec(format!("cannot build thread pool: {e}")))?;
            pool.install(|| run_inner(vol, semantic, instance, config))
        }
        None => run_inner(vol, semantic, instance, config),
    }
}

fn run_inner(
    vol: &Volume<f32>,
    semantic: &[&dyn SemanticPredictor],
    instance: &dyn CutoutPredictor,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    let total = Instant::now();
    let mut report = RunReport {
        input_dims: vol.dims(),
        input_spacing: vol.spacing(),
        input_orientation: vol.orientation().to_string(),
        semantic_predictors: semantic.iter().map(|p| p.name()).collect(),
        instance_predictor: instance.name(),
        ..Default::default()
    };

    let t = Instant::now();
    let working = to_working(vol, config.target_spacing)?;
    report.working_dims = working.dims();
    report.working_spacing = working.spacing();
    report.timings_ms.insert("preprocess".into(), ms(t));

    let t = Instant::now();
    let sem_out = predict_semantic(&working, semantic, &config.tiling, false)?;
    report.patches = sem_out.patches;
    let mut sem = sem_out.labels;
    report.timings_ms.insert("semantic".into(), ms(t));

    let t = Instant::now();
    let (mut inst, asm) = assemble(&sem, instance, &config.assembly)?;
    report.warnings.extend(asm.warnings.iter().cloned());
    report.assembly = asm;
    report.timings_ms.insert("assembly".into(), ms(t));

    if config.postprocess {
        let t = Instant::now();
        report.consistency = Some(enforce_consistency(&mut sem, &mut inst)?);
        report.timings_ms.insert("postprocess".into(), ms(t));
    }

    let t = Instant::now();
    let (sem, inst) = if working.grid().same_as(vol.grid()) {
        (
            Volume::with_grid(*vol.grid(), sem.into_data())?,
            Volume::with_grid(*vol.grid(), inst.into_data())?,
        )
    } else {
        (to_input(&sem, vol.grid())?, to_input(&inst, vol.grid())?)
    };
    report.timings_ms.insert("restore".into(), ms(t));
    report.timings_ms.insert("total".into(), ms(total));
    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok(PipelineOutput {
        semantic: sem,
        instance: inst,
        report,
    })
}
