//! Hand-motion and hand-pose metrics, normalized for camera zoom.
//!
//! Distances are expressed in hand-lengths (pixels divided by the mean hand
//! box size `(w + h) / 2` over the clip) and rates in `s^-1` and its powers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{kp, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub frame_index: u64,
    pub centroid: Point,
    pub hand_size: f64,
}

/// Box-centroid path of one tracked hand.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub track_id: u64,
    samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn new(track_id: u64, samples: Vec<TrajectorySample>) -> Result<Self> {
        if samples.windows(2).any(|w| w[1].frame_index <= w[0].frame_index) {
            return Err(Error::invariant(
                "Trajectory.samples",
                "frame indices must strictly increase",
            ));
        }
        if samples
            .iter()
            .any(|s| !(s.hand_size.is_finite() && s.hand_size > 0.0))
        {
            return Err(Error::invariant("Trajectory.hand_size", "must be > 0"));
        }
        if samples
            .iter()
            .any(|s| !s.centroid.x.is_finite() || !s.centroid.y.is_finite())
        {
            return Err(Error::invariant("Trajectory.centroid", "must be finite"));
        }
        Ok(Self { track_id, samples })
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// The nine skill keypoints of one hand in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseFrame {
    pub frame_index: u64,
    /// Palm, thumb base..tip, index base..tip.
    pub points: [Point; kp::SKILL_POINTS],
    pub hand_size: f64,
}

impl PoseFrame {
    pub fn new(frame_index: u64, points: [Point; kp::SKILL_POINTS], hand_size: f64) -> Result<Self> {
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::invariant("PoseFrame.points", "must be finite"));
        }
        if !(hand_size.is_finite() && hand_size > 0.0) {
            return Err(Error::invariant("PoseFrame.hand_size", "must be > 0"));
        }
        Ok(Self {
            frame_index,
            points,
            hand_size,
        })
    }
}

/// Which hand size divides a between-frame displacement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeNormalization {
    /// Mean hand size over the whole clip.
    #[default]
    ClipMean,
    /// Hand size at the earlier frame of each step.
    PerFrame,
}

/// Arithmetic mean of per-sample hand sizes.
pub fn clip_mean_hand_size(traj: &Trajectory) -> Result<f64> {
    if traj.is_empty() {
        return Err(Error::InsufficientData(format!(
            "trajectory {} is empty",
            traj.track_id
        )));
    }
    let sum: f64 = traj.samples.iter().map(|s| s.hand_size).sum();
    Ok(sum / traj.len() as f64)
}

/// Total Euclidean centroid path length in hand-lengths.
///
/// Returns 0 (with a warning) for fewer than two samples.
pub fn path_distance(traj: &Trajectory, mean_size: f64) -> f64 {
    if traj.len() < 2 {
        tracing::warn!(track = traj.track_id, "path distance needs two samples");
        return 0.0;
    }
    let pixels: f64 = traj
        .samples
        .windows(2)
        .map(|w| w[1].centroid.distance(w[0].centroid))
        .sum();
    pixels / mean_size
}

/// A sampled time series; `times` are in frames.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Series {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Finite-difference derivative, converted from per-frame to per-second.
    pub fn derivative(&self, fps: f64) -> Series {
        let mut out = Series::default();
        for i in 1..self.values.len() {
            let dt = (self.times[i] - self.times[i - 1]) / fps;
            out.times.push((self.times[i] + self.times[i - 1]) / 2.0);
            out.values.push((self.values[i] - self.values[i - 1]) / dt);
        }
        out
    }

    pub fn mean_abs(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().map(|v| v.abs()).sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Per-step hand speed in `s^-1`: `|d centroid| / size / d frames * fps`.
///
/// Each value is stamped at the midpoint of its step. For contiguous frames
/// this is `|d centroid| / mean_size * fps`.
pub fn velocity_series(traj: &Trajectory, mean_size: f64, fps: f64) -> Series {
    speed_series(traj, fps, |_| mean_size)
}

/// [`velocity_series`] normalized by the earlier sample's own hand size.
pub fn velocity_series_per_frame(traj: &Trajectory, fps: f64) -> Series {
    speed_series(traj, fps, |s| s.hand_size)
}

fn speed_series(traj: &Trajectory, fps: f64, size: impl Fn(&TrajectorySample) -> f64) -> Series {
    let mut out = Series::default();
    for w in traj.samples.windows(2) {
        let frames = (w[1].frame_index - w[0].frame_index) as f64;
        let d = w[1].centroid.distance(w[0].centroid) / size(&w[0]);
        out.times
            .push((w[0].frame_index + w[1].frame_index) as f64 / 2.0);
        out.values.push(d / frames * fps);
    }
    out
}

/// Acceleration (`s^-2`) from a velocity series.
pub fn acceleration_series(velocity: &Series, fps: f64) -> Series {
    velocity.derivative(fps)
}

/// Jerk (`s^-3`) from a velocity series.
pub fn jerk_series(velocity: &Series, fps: f64) -> Series {
    velocity.derivative(fps).derivative(fps)
}

/// The eight difference vectors along the thumb and index chains, each
/// starting at the palm: `p[k+1] - p[k]`.
pub fn pose_vectors(p: &PoseFrame) -> [Point; 8] {
    let chain = |idx: [usize; 4]| {
        let mut prev = p.points[kp::PALM];
        idx.map(|i| {
            let v = p.points[i].sub(prev);
            prev = p.points[i];
            v
        })
    };
    let thumb = chain(kp::THUMB);
    let index = chain(kp::INDEX);
    [
        thumb[0], thumb[1], thumb[2], thumb[3], index[0], index[1], index[2], index[3],
    ]
}

/// Summed L1 distance between corresponding pose vectors of two frames,
/// divided by the earlier frame's hand size.
pub fn pose_change(earlier: &PoseFrame, later: &PoseFrame) -> f64 {
    let a = pose_vectors(earlier);
    let b = pose_vectors(later);
    let l1: f64 = a.iter().zip(&b).map(|(va, vb)| vb.sub(*va).l1()).sum();
    l1 / earlier.hand_size
}

/// Sum of [`pose_change`] over consecutive frames. 0 (with a warning) for
/// fewer than two frames.
pub fn integrated_pose_distance(seq: &[PoseFrame]) -> f64 {
    if seq.len() < 2 {
        tracing::warn!("integrated pose distance needs two frames");
        return 0.0;
    }
    seq.windows(2).map(|w| pose_change(&w[0], &w[1])).sum()
}

/// Split a pose sequence wherever consecutive frames are more than
/// `max_gap_s` seconds apart.
pub fn split_pose_gaps(seq: &[PoseFrame], fps: f64, max_gap_s: f64) -> Vec<&[PoseFrame]> {
    let max_gap_frames = max_gap_s * fps;
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..seq.len() {
        if (seq[i].frame_index - seq[i - 1].frame_index) as f64 > max_gap_frames {
            out.push(&seq[start..i]);
            start = i;
        }
    }
    if start < seq.len() {
        out.push(&seq[start..]);
    }
    out
}
