//! Action precision/recall, detection average precision and keypoint PCK
//! against ground-truth streams.

pub mod actions;
pub mod detection;
pub mod keypoints;
pub mod report;

pub use actions::{action_precision_recall, ActionReport, ClassScore, Confusion};
pub use detection::{
    average_precision, average_precision_from_matches, match_detections, mean_ap, MatchResult,
    DEFAULT_IOU_THRESHOLD,
};
pub use keypoints::{pck, PckAccumulator, PckHits, DEFAULT_ALPHA};
pub use report::{
    evaluate, BoxReport, EvalConfig, EvalTask, KeypointReference, KeypointReport, MetricReport, Metrics,
};
