//! Streaming latency of the per-frame analytics and the windowed action
//! aggregation, measured against fixed real-time budgets.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kinematics::{pose_change, PoseFrame};
use crate::signatures::{excise_background_aligned, featurize, ActionSequence, ToolSequence};
use crate::stream::{Action, FrameRecord, HandKeypoints, Point, VideoStream};
use crate::tracker::{Tracker, TrackerConfig};

/// Per-frame budget for tracking and kinematics, seconds.
pub const FRAME_BUDGET_S: f64 = 0.08;
/// Per-window budget for action aggregation, seconds.
pub const WINDOW_BUDGET_S: f64 = 0.33;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub window_s: f64,
    pub tracker: TrackerConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            window_s: 5.0,
            tracker: TrackerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: usize,
    pub p50_s: Option<f64>,
    pub p95_s: Option<f64>,
    pub max_s: Option<f64>,
    pub mean_s: Option<f64>,
}

impl LatencyStats {
    /// Nearest-rank percentiles of the samples.
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let rank = |p: f64| s[((p * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1];
        Self {
            count: s.len(),
            p50_s: Some(rank(0.5)),
            p95_s: Some(rank(0.95)),
            max_s: s.last().copied(),
            mean_s: Some(s.iter().sum::<f64>() / s.len() as f64),
        }
    }

    /// True when there are no samples or p95 is within `budget`.
    pub fn within(&self, budget: f64) -> bool {
        self.p95_s.map_or(true, |p| p < budget)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub video_id: String,
    pub frames: usize,
    pub windows: usize,
    pub per_frame: LatencyStats,
    pub per_window: LatencyStats,
    pub frame_budget_s: f64,
    pub window_budget_s: f64,
    pub frame_within_budget: bool,
    pub window_within_budget: bool,
    /// Emitted track boxes, as a check that work was done.
    pub track_outputs: usize,
}

/// Running per-track motion totals.
#[derive(Default)]
struct HandState {
    last_centroid: Option<(u64, Point)>,
    size_sum: f64,
    samples: usize,
    path_px: f64,
    last_pose: Option<PoseFrame>,
    pose_total: f64,
    peak_speed: f64,
}

fn owned_keypoints<'a>(frame: &'a FrameRecord, det: &crate::stream::BBox) -> Option<&'a HandKeypoints> {
    frame
        .keypoints
        .iter()
        .map(|k| (k.owner_box.iou(det), k))
        .filter(|(v, _)| *v >= 0.5)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, k)| k)
}

fn mode(votes: &[usize; 4]) -> Action {
    let mut best = Action::Background;
    let mut best_n = 0;
    for a in Action::ALL {
        if votes[a.index()] > best_n {
            best = a;
            best_n = votes[a.index()];
        }
    }
    best
}

/// Replay a stream frame by frame, timing each frame's tracking and
/// kinematics update and each window's aggregation and re-featurization.
pub fn bench(stream: &VideoStream, cfg: &BenchConfig) -> Result<BenchReport> {
    let mut tracker = Tracker::new(cfg.tracker.clone())?;
    let frames_per_window = (stream.fps * cfg.window_s).round().max(1.0) as usize;
    let mut hands: HashMap<u64, HandState> = HashMap::new();
    let mut frame_times = Vec::with_capacity(stream.frames.len());
    let mut window_times = Vec::new();
    let mut labels = Vec::new();
    let mut tools = Vec::new();
    let mut votes = [0usize; 4];
    let mut tool_sum = [0.0; 3];
    let mut in_window = 0usize;
    let mut outputs = 0usize;

    for (i, frame) in stream.frames.iter().enumerate() {
        let start = Instant::now();
        for out in tracker.step(frame) {
            outputs += 1;
            let h = hands.entry(out.track_id).or_default();
            let size = out.detection.hand_size();
            let c = out.detection.centroid();
            h.size_sum += size;
            h.samples += 1;
            if let Some((f0, p0)) = h.last_centroid {
                let step = c.distance(p0);
                h.path_px += step;
                let dt = (frame.frame_index - f0) as f64 / stream.fps;
                let mean_size = h.size_sum / h.samples as f64;
                h.peak_speed = h.peak_speed.max(step / mean_size / dt);
            }
            h.last_centroid = Some((frame.frame_index, c));
            if let Some(points) = owned_keypoints(frame, &out.detection).and_then(HandKeypoints::skill_points) {
                let pose = PoseFrame::new(frame.frame_index, points, size)?;
                if let Some(prev) = &h.last_pose {
                    h.pose_total += pose_change(prev, &pose);
                }
                h.last_pose = Some(pose);
            }
        }
        frame_times.push(start.elapsed().as_secs_f64());

        if let Some(a) = frame.action {
            votes[a.index()] += 1;
        }
        for (s, c) in tool_sum.iter_mut().zip(frame.tool_counts()) {
            *s += c as f64;
        }
        in_window += 1;
        let last = i + 1 == stream.frames.len();
        if in_window == frames_per_window || (last && in_window > 0) {
            let start = Instant::now();
            labels.push(mode(&votes));
            tools.push(tool_sum.map(|s| s / in_window as f64));
            let a = ActionSequence::new(&stream.video_id, cfg.window_s, labels.clone())?;
            let t = ToolSequence::new(&stream.video_id, cfg.window_s, tools.clone())?;
            let (a, t) = excise_background_aligned(&a, &t)?;
            if !a.is_empty() {
                std::hint::black_box(featurize(&a, &t)?);
            }
            window_times.push(start.elapsed().as_secs_f64());
            votes = [0; 4];
            tool_sum = [0.0; 3];
            in_window = 0;
        }
    }
    std::hint::black_box(&hands);
    let per_frame = LatencyStats::from_samples(&frame_times);
    let per_window = LatencyStats::from_samples(&window_times);
    Ok(BenchReport {
        video_id: stream.video_id.clone(),
        frames: stream.frames.len(),
        windows: window_times.len(),
        per_frame,
        per_window,
        frame_budget_s: FRAME_BUDGET_S,
        window_budget_s: WINDOW_BUDGET_S,
        frame_within_budget: per_frame.within(FRAME_BUDGET_S),
        window_within_budget: per_window.within(WINDOW_BUDGET_S),
        track_outputs: outputs,
    })
}
