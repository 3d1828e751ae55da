//! Overlap, surface distance, instance matching, panoptic quality and the
//! signed-rank test.

mod matching;
mod overlap;
mod panoptic;
mod report;
mod surface;
mod wilcoxon;

pub use matching::{match_instances, InstanceMatching, MatchedPair, IOU_THRESHOLD};
pub use overlap::{dice, iou, OverlapCounts};
pub use panoptic::{panoptic, panoptic_scores, PanopticEntry, PanopticScores};
pub use report::{
    evaluate, rows_to_csv, EvaluationReport, GlobalMetrics, InstanceMetrics, MetricRow, SubstructureMetrics,
    GLOBAL_STRUCTURES, INSTANCE_STRUCTURES, SUBSTRUCTURES,
};
pub use surface::{assd, surface_voxels};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonResult, EXACT_MAX_N};
