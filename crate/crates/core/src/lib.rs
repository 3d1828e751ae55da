//! Two-phase spine segmentation toolkit: volumes and NIfTI I/O, the label
//! scheme, cutout-based instance assembly, consistency post-processing,
//! annotation fusion, synthetic phantoms with oracle predictors, and
//! panoptic evaluation.

pub mod annofuse;
pub mod assembly;
pub mod error;
pub mod labels;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod postproc;
pub mod scalar;
pub mod volume;

pub use error::{Error, Result};
pub use scalar::{OverlapScalar, Real};
pub use volume::{Grid, Volume, Voxel};

/// Semantic codes or instance ids.
pub type LabelVolume = Volume<u16>;
pub type Mask = Volume<bool>;
pub type IntensityVolume = Volume<f32>;
/// Surface distances and statistics in double precision.
pub type WilcoxonResult = metrics::WilcoxonResult<f64>;
pub type PanopticScores = metrics::PanopticScores<f64>;
