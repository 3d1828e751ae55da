use crate::assembly::Cutout;
use crate::error::Result;
use crate::volume::Volume;

/// Number of semantic classes a score prediction must carry, background
/// included.
pub const NUM_CLASSES: usize = 15;

#[derive(Clone, Debug, PartialEq)]
pub enum PatchPrediction {
    /// One label code per voxel.
    Labels(Volume<u16>),
    /// One score volume per class, indexed by code.
    Scores(Vec<Volume<f32>>),
}

/// Semantic model applied patch by patch. `origin` is the patch corner in
/// the working volume.
pub trait SemanticPredictor: Send + Sync {
    fn name(&self) -> String;

    fn predict_patch(&self, patch: &Volume<f32>, origin: [usize; 3]) -> Result<PatchPrediction>;
}

/// Instance model: given the semantic window of a cutout, returns labels
/// 1 (vertebra above), 2 (centre vertebra) and 3 (vertebra below) over the
/// same window.
pub trait CutoutPredictor: Send + Sync {
    fn name(&self) -> String;

    fn predict_cutout(&self, semantic: &Volume<u16>, cutout: &Cutout) -> Result<Volume<u8>>;
}
