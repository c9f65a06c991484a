//! Document layout evaluation with Structural Semantic Units (SSUs) and the
//! Coverage, Overlap, Trespass and Excess (COTe) metrics.
//!
//! Ground-truth regions are grouped into SSUs, rasterized to run-length
//! masks, and predictions are scored against them. Classic detection
//! baselines (IoU, F1, COCO-style mAP) are computed on the same masks.

pub mod baseline;
pub mod corpus;
pub mod cote;
pub mod error;
pub mod geometry;
pub mod io;
pub mod mask;
pub mod multiclass;
pub mod ssu;
pub mod synth;
pub mod viz;

pub use baseline::{
    average_precision, greedy_f1, iou, mean_iou, spearman_correlation, ApResult, IouMatrix, MatchResult,
};
pub use corpus::{
    compare_ssu_modes, evaluate_corpus, evaluate_dataset, CorpusResult, PageResult, RunConfig, SsuComparison, SsuMode,
};
pub use cote::{assign_predictions, cote_score, AssignmentMap, CoteResult, CoteWeights, PixelCounts, Prediction};
pub use error::{CoteError, Result};
pub use geometry::RegionGeometry;
pub use io::{DatasetManifest, GtFormat, GtPage, PredictionRecord, PredictionSet};
pub use mask::{CountMask, PageCanvas, PixelMask, Span};
pub use multiclass::{class_shares, confusion_matrices, ClassShares, ConfusionMatrices};
pub use ssu::{
    autolabel_ssu_from_structure, group_regions_into_ssus, AutoLabelConfig, ClassId, ClassMap, GroundTruthRegion,
    LabelledPage, OverlapPolicy, Ssu,
};
pub use synth::{generate_layout, Granularity, SyntheticLayout, SyntheticLayoutSpec};
pub use viz::{classify_pixels, render_overlay, visualize_cote_states, CoteState, CoteStateImage};
