//! Simple Online and Realtime Tracking of hand detections.

pub mod assignment;
pub mod io;
pub mod kalman;
pub mod sort;

pub use assignment::{associate, associate_weights, iou_matrix, solve_max_weight, solve_min_cost, Association};
pub use io::{load_tracks, read_tracks, save_tracks, track_stream, write_tracks, TrackEntry, TrackFrame, TrackedStream};
pub use kalman::{KalmanModel, KalmanState};
pub use sort::{Track, TrackOutput, Tracker, TrackerConfig};
