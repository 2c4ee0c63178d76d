//! Analytics over per-frame surgical scene detections.
//!
//! Input is a stream of per-frame hand/tool boxes, 21-point hand skeletons and
//! action labels. On top of it this crate provides:
//!
//! - [`tracker`]: SORT-style multi-hand tracking (Kalman filter + optimal IoU assignment)
//! - [`kinematics`]: zoom-normalized hand motion and pose-change metrics for tie clips
//! - [`signatures`]: procedure timelines, quartile signatures, 30-feature vectors and LDA
//! - [`evaluation`]: action precision/recall, detection AP/mAP and keypoint PCK
//! - [`harness`]: synthetic ground-truth generator, end-to-end pipeline and latency bench
//!
//! All stage outputs are plain values; nothing shared between stages is mutated
//! after it is produced, so videos can be processed on independent threads.

pub mod error;
pub mod evaluation;
pub mod harness;
pub mod kinematics;
pub mod signatures;
pub mod stream;
pub mod tracker;

pub use error::{Error, Result};
