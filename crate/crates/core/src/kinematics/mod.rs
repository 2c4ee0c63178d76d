//! Hand kinematics over instrument-tie clips: zoom-normalized path length,
//! speed, acceleration and jerk from box centroids, pose change from the nine
//! thumb/index keypoints, and group centroids by operator experience.

pub mod clips;
pub mod cohort;
pub mod metrics;

pub use clips::{
    extract_clip, load_clip_specs, summarize_clip, write_summary_csv, ClipSpec, ClipSummary,
    Experience, Hand, KinematicOptions, KinematicSummary, TieClip,
};
pub use cohort::{group_centroids, leave_one_out, relative_shifts, Centroid, GroupCentroids, LeaveOneOut, SkillMetric};
pub use metrics::{
    acceleration_series, clip_mean_hand_size, integrated_pose_distance, jerk_series,
    path_distance, pose_change, pose_vectors, split_pose_gaps, velocity_series,
    velocity_series_per_frame, PoseFrame, Series, SizeNormalization, Trajectory, TrajectorySample,
};
