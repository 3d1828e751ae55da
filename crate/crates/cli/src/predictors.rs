use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use anyhow::{Context, Result};
use serde::Serialize;
use spinekit::phantom::{NoiseSpec, OracleInstancePredictor, OracleSemanticPredictor};
use spinekit::pipeline::{to_working, CutoutPredictor, ExternalPredictor, SemanticPredictor};
use spinekit::volume::nifti::read_nifti;
use spinekit::Volume;

use crate::usage;

/// `oracle:<gt>[,<noise.json>]` or `exec:<command template>`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorSpec {
    Oracle { gt: PathBuf, noise: Option<PathBuf> },
    Exec { command: String },
}

impl FromStr for PredictorSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if let Some(rest) = s.strip_prefix("oracle:") {
            let (gt, noise) = match rest.split_once(',') {
                Some((g, n)) => (g, Some(PathBuf::from(n))),
                None => (rest, None),
            };
            if gt.is_empty() {
                return Err("oracle predictor needs a ground-truth path".into());
            }
            Ok(PredictorSpec::Oracle { gt: gt.into(), noise })
        } else if let Some(cmd) = s.strip_prefix("exec:") {
            if cmd.trim().is_empty() {
                return Err("exec predictor needs a command".into());
            }
            Ok(PredictorSpec::Exec {
                command: cmd.to_string(),
            })
        } else {
            Err(format!("predictor `{s}` must start with `oracle:` or `exec:`"))
        }
    }
}

/// Shared settings for building predictors.
pub struct BuildContext {
    pub target_spacing: Option<[f64; 3]>,
    pub working_dims: [usize; 3],
    pub seed: u64,
    pub exchange_dir: PathBuf,
    pub timeout: Duration,
}

/// A noise file without a `seed` key takes the run seed.
pub fn load_noise(path: Option<&Path>, run_seed: u64) -> Result<NoiseSpec> {
    let Some(path) = path else {
        return Ok(NoiseSpec::none());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read noise spec {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let has_seed = value.get("seed").is_some();
    let mut noise: NoiseSpec = serde_json::from_value(value).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if !has_seed {
        noise.seed = run_seed;
    }
    noise
        .validate()
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(noise)
}

fn load_gt(path: &Path, ctx: &BuildContext) -> Result<Volume<u16>> {
    let gt: Volume<u16> = read_nifti(path)?;
    let gt = to_working(&gt, ctx.target_spacing)?;
    if gt.dims() != ctx.working_dims {
        anyhow::bail!(
            "oracle ground truth {} maps to dims {:?}, the input maps to {:?}",
            path.display(),
            gt.dims(),
            ctx.working_dims
        );
    }
    Ok(gt)
}

pub fn semantic(spec: &PredictorSpec, ctx: &BuildContext) -> Result<Box<dyn SemanticPredictor>> {
    Ok(match spec {
        PredictorSpec::Oracle { gt, noise } => Box::new(OracleSemanticPredictor {
            gt: load_gt(gt, ctx)?,
            noise: load_noise(noise.as_deref(), ctx.seed)?,
        }),
        PredictorSpec::Exec { command } => Box::new(ExternalPredictor::new(
            command.clone(),
            ctx.exchange_dir.clone(),
            ctx.timeout,
        )),
    })
}

pub fn instance(spec: &PredictorSpec, ctx: &BuildContext) -> Result<Box<dyn CutoutPredictor>> {
    Ok(match spec {
        PredictorSpec::Oracle { gt, noise } => Box::new(OracleInstancePredictor::new(
            load_gt(gt, ctx)?,
            load_noise(noise.as_deref(), ctx.seed)?,
        )),
        PredictorSpec::Exec { command } => Box::new(ExternalPredictor::new(
            command.clone(),
            ctx.exchange_dir.clone(),
            ctx.timeout,
        )),
    })
}
