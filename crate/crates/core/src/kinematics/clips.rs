//! Instrument-tie clips: extraction from tracked streams and per-hand summaries.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{
    acceleration_series, clip_mean_hand_size, integrated_pose_distance, jerk_series,
    path_distance, split_pose_gaps, velocity_series, velocity_series_per_frame, PoseFrame,
    SizeNormalization, Trajectory, TrajectorySample,
};
use crate::error::{Error, Result};
use crate::stream::{kp, BBox, Point};
use crate::tracker::TrackedStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experience {
    Experienced,
    Trainee,
}

impl Experience {
    pub fn as_str(self) -> &'static str {
        match self {
            Experience::Experienced => "experienced",
            Experience::Trainee => "trainee",
        }
    }
}

impl fmt::Display for Experience {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub fn as_str(self) -> &'static str {
        match self {
            Hand::Left => "left",
            Hand::Right => "right",
        }
    }
}

/// One annotated tie segment, as listed in `clips.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipSpec {
    pub clip_id: String,
    pub video_id: String,
    /// First frame, inclusive.
    pub start: u64,
    /// Last frame, inclusive.
    pub end: u64,
    pub operator_id: String,
    pub experience: Experience,
    pub knot_count: u32,
    /// Track ids of the two hands; picked automatically when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_track: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_track: Option<u64>,
}

impl ClipSpec {
    pub fn validate(&self) -> Result<()> {
        if self.start >= self.end {
            return Err(Error::invariant(
                "TieClip.frames",
                format!("start {} must be < end {}", self.start, self.end),
            ));
        }
        if self.knot_count == 0 {
            return Err(Error::invariant("TieClip.knot_count", "must be >= 1"));
        }
        Ok(())
    }
}

pub fn load_clip_specs(path: impl AsRef<Path>) -> Result<Vec<ClipSpec>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let specs: Vec<ClipSpec> = serde_json::from_str(&text)?;
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}

/// Both hands of one tie clip with their centroid paths and pose sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct TieClip {
    pub spec: ClipSpec,
    pub left: Option<Trajectory>,
    pub right: Option<Trajectory>,
    pub left_pose: Vec<PoseFrame>,
    pub right_pose: Vec<PoseFrame>,
}

impl TieClip {
    pub fn hand(&self, hand: Hand) -> (Option<&Trajectory>, &[PoseFrame]) {
        match hand {
            Hand::Left => (self.left.as_ref(), &self.left_pose),
            Hand::Right => (self.right.as_ref(), &self.right_pose),
        }
    }
}

fn bbox4(a: [f64; 4]) -> Result<BBox> {
    BBox::new(a[0], a[1], a[2], a[3])
}

/// Cut a clip out of a tracked stream.
///
/// Centroids and hand sizes come from the detection matched to each track.
/// Pose frames need all nine skill keypoints visible; others are dropped.
pub fn extract_clip(tracks: &TrackedStream, spec: &ClipSpec) -> Result<TieClip> {
    spec.validate()?;
    if tracks.video_id != spec.video_id {
        return Err(Error::Config(format!(
            "clip {} refers to video {}, tracks are for {}",
            spec.clip_id, spec.video_id, tracks.video_id
        )));
    }
    let in_range = || {
        tracks
            .frames
            .iter()
            .filter(|f| f.frame >= spec.start && f.frame <= spec.end)
    };

    let (left_id, right_id) = match (spec.left_track, spec.right_track) {
        (Some(l), Some(r)) => (Some(l), Some(r)),
        _ => {
            // two most frequent tracks, left = smaller mean x
            let mut stats: BTreeMap<u64, (usize, f64)> = BTreeMap::new();
            for f in in_range() {
                for (id, e) in &f.tracks {
                    let s = stats.entry(*id).or_default();
                    s.0 += 1;
                    s.1 += (e.det[0] + e.det[2]) / 2.0;
                }
            }
            let mut ranked: Vec<(u64, usize, f64)> = stats
                .into_iter()
                .map(|(id, (n, sx))| (id, n, sx / n as f64))
                .collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            ranked.truncate(2);
            let mid = tracks.width as f64 / 2.0;
            match ranked.as_slice() {
                [] => (None, None),
                [(id, _, x)] => {
                    if *x < mid {
                        (Some(*id), None)
                    } else {
                        (None, Some(*id))
                    }
                }
                [a, b, ..] => {
                    if a.2 <= b.2 {
                        (Some(a.0), Some(b.0))
                    } else {
                        (Some(b.0), Some(a.0))
                    }
                }
            }
        }
    };

    let collect = |id: Option<u64>| -> Result<(Option<Trajectory>, Vec<PoseFrame>)> {
        let Some(id) = id else {
            return Ok((None, Vec::new()));
        };
        let mut samples = Vec::new();
        let mut poses = Vec::new();
        for f in in_range() {
            let Some(e) = f.tracks.get(&id) else { continue };
            let det = bbox4(e.det)?;
            let size = det.hand_size();
            samples.push(TrajectorySample {
                frame_index: f.frame,
                centroid: det.centroid(),
                hand_size: size,
            });
            if let Some(kps) = &e.kps {
                if kps.len() >= kp::SKILL_POINTS
                    && kps[..kp::SKILL_POINTS].iter().all(|p| p[2] != 0.0)
                {
                    let mut pts = [Point::default(); kp::SKILL_POINTS];
                    for (o, p) in pts.iter_mut().zip(kps) {
                        *o = Point::new(p[0], p[1]);
                    }
                    poses.push(PoseFrame::new(f.frame, pts, size)?);
                }
            }
        }
        if samples.is_empty() {
            return Ok((None, Vec::new()));
        }
        Ok((Some(Trajectory::new(id, samples)?), poses))
    };

    let (left, left_pose) = collect(left_id)?;
    let (right, right_pose) = collect(right_id)?;
    Ok(TieClip {
        spec: spec.clone(),
        left,
        right,
        left_pose,
        right_pose,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KinematicOptions {
    pub normalization: SizeNormalization,
    /// Pose sequences are split at gaps longer than this.
    pub max_pose_gap_s: f64,
}

impl Default for KinematicOptions {
    fn default() -> Self {
        Self {
            normalization: SizeNormalization::ClipMean,
            max_pose_gap_s: 1.0,
        }
    }
}

/// Skill metrics of one hand over one clip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicSummary {
    pub samples: usize,
    pub pose_frames: usize,
    pub mean_hand_size: f64,
    pub distance_hand_lengths: f64,
    pub distance_per_knot: f64,
    pub mean_velocity: f64,
    pub max_velocity: f64,
    /// Mean absolute acceleration, `s^-2`.
    pub mean_acceleration: f64,
    /// Mean absolute jerk, `s^-3`.
    pub mean_jerk: f64,
    pub integrated_pose_distance: f64,
    pub pose_distance_per_knot: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipSummary {
    pub clip_id: String,
    pub video_id: String,
    pub operator_id: String,
    pub experience: Experience,
    pub knot_count: u32,
    /// `None` when the hand never appears in the clip.
    pub left: Option<KinematicSummary>,
    pub right: Option<KinematicSummary>,
}

impl ClipSummary {
    pub fn hand(&self, hand: Hand) -> Option<&KinematicSummary> {
        match hand {
            Hand::Left => self.left.as_ref(),
            Hand::Right => self.right.as_ref(),
        }
    }
}

fn summarize_hand(
    traj: &Trajectory,
    poses: &[PoseFrame],
    knots: u32,
    fps: f64,
    opts: &KinematicOptions,
) -> Result<KinematicSummary> {
    let mean_size = clip_mean_hand_size(traj)?;
    let distance = path_distance(traj, mean_size);
    let velocity = match opts.normalization {
        SizeNormalization::ClipMean => velocity_series(traj, mean_size, fps),
        SizeNormalization::PerFrame => velocity_series_per_frame(traj, fps),
    };
    let mean_velocity = if velocity.is_empty() {
        0.0
    } else {
        velocity.values.iter().sum::<f64>() / velocity.len() as f64
    };
    let pose_total: f64 = split_pose_gaps(poses, fps, opts.max_pose_gap_s)
        .into_iter()
        .filter(|seg| seg.len() >= 2)
        .map(integrated_pose_distance)
        .sum();
    let knots = f64::from(knots);
    Ok(KinematicSummary {
        samples: traj.len(),
        pose_frames: poses.len(),
        mean_hand_size: mean_size,
        distance_hand_lengths: distance,
        distance_per_knot: distance / knots,
        mean_velocity,
        max_velocity: velocity.max_abs(),
        mean_acceleration: acceleration_series(&velocity, fps).mean_abs(),
        mean_jerk: jerk_series(&velocity, fps).mean_abs(),
        integrated_pose_distance: pose_total,
        pose_distance_per_knot: pose_total / knots,
    })
}

/// Per-hand skill summary of a clip. A hand absent from the clip is reported
/// as missing rather than zero.
pub fn summarize_clip(clip: &TieClip, fps: f64, opts: &KinematicOptions) -> Result<ClipSummary> {
    if !(fps > 0.0) {
        return Err(Error::Config(format!("fps must be > 0, got {fps}")));
    }
    let s = &clip.spec;
    let hand = |h: Hand| -> Result<Option<KinematicSummary>> {
        let (traj, poses) = clip.hand(h);
        traj.map(|t| summarize_hand(t, poses, s.knot_count, fps, opts))
            .transpose()
    };
    Ok(ClipSummary {
        clip_id: s.clip_id.clone(),
        video_id: s.video_id.clone(),
        operator_id: s.operator_id.clone(),
        experience: s.experience,
        knot_count: s.knot_count,
        left: hand(Hand::Left)?,
        right: hand(Hand::Right)?,
    })
}

pub const SUMMARY_CSV_HEADER: [&str; 17] = [
    "clip_id",
    "video_id",
    "operator_id",
    "experience",
    "knot_count",
    "hand",
    "present",
    "samples",
    "mean_hand_size",
    "distance_hand_lengths",
    "distance_per_knot",
    "mean_velocity",
    "max_velocity",
    "mean_acceleration",
    "mean_jerk",
    "integrated_pose_distance",
    "pose_distance_per_knot",
];

/// One row per `(clip, hand)`; absent hands have empty metric cells.
pub fn write_summary_csv<W: Write>(summaries: &[ClipSummary], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_CSV_HEADER)?;
    for s in summaries {
        for hand in [Hand::Left, Hand::Right] {
            let mut row = vec![
                s.clip_id.clone(),
                s.video_id.clone(),
                s.operator_id.clone(),
                s.experience.to_string(),
                s.knot_count.to_string(),
                hand.as_str().to_string(),
            ];
            match s.hand(hand) {
                Some(k) => {
                    row.push("true".into());
                    row.push(k.samples.to_string());
                    for v in [
                        k.mean_hand_size,
                        k.distance_hand_lengths,
                        k.distance_per_knot,
                        k.mean_velocity,
                        k.max_velocity,
                        k.mean_acceleration,
                        k.mean_jerk,
                        k.integrated_pose_distance,
                        k.pose_distance_per_knot,
                    ] {
                        row.push(v.to_string());
                    }
                }
                None => {
                    row.push("false".into());
                    row.extend(std::iter::repeat(String::new()).take(10));
                }
            }
            out.write_record(&row)?;
        }
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracker::{TrackEntry, TrackFrame};

    fn hand_entry(cx: f64, cy: f64, size: f64, kps: bool) -> TrackEntry {
        let b = [cx - size / 2.0, cy - size / 2.0, cx + size / 2.0, cy + size / 2.0];
        TrackEntry {
            bbox: b,
            det: b,
            kps: kps.then(|| (0..21).map(|k| [cx + k as f64, cy, 1.0]).collect()),
        }
    }

    fn stream() -> TrackedStream {
        let frames = (0..60u64)
            .map(|i| {
                let mut tracks = BTreeMap::new();
                // track 7 on the right moving, track 3 on the left static
                tracks.insert(7, hand_entry(900.0 + i as f64, 300.0, 100.0, true));
                if i % 2 == 0 {
                    tracks.insert(3, hand_entry(300.0, 300.0, 80.0, false));
                }
                TrackFrame {
                    frame: i,
                    t: i as f64 / 30.0,
                    tracks,
                }
            })
            .collect();
        TrackedStream {
            video_id: "v".into(),
            fps: 30.0,
            width: 1280,
            height: 720,
            frames,
        }
    }

    fn spec() -> ClipSpec {
        ClipSpec {
            clip_id: "c1".into(),
            video_id: "v".into(),
            start: 10,
            end: 49,
            operator_id: "op".into(),
            experience: Experience::Trainee,
            knot_count: 4,
            left_track: None,
            right_track: None,
        }
    }

    #[test]
    fn picks_hands_by_position() {
        let clip = extract_clip(&stream(), &spec()).unwrap();
        assert_eq!(clip.left.as_ref().unwrap().track_id, 3);
        assert_eq!(clip.right.as_ref().unwrap().track_id, 7);
        assert_eq!(clip.right.as_ref().unwrap().len(), 40);
        assert_eq!(clip.right_pose.len(), 40);
        assert!(clip.left_pose.is_empty());
    }

    #[test]
    fn summary_fields() {
        let clip = extract_clip(&stream(), &spec()).unwrap();
        let s = summarize_clip(&clip, 30.0, &KinematicOptions::default()).unwrap();
        let r = s.right.unwrap();
        // 39 px of motion with hand size 100
        assert!((r.distance_hand_lengths - 0.39).abs() < 1e-12);
        assert_eq!(r.distance_per_knot, r.distance_hand_lengths / 4.0);
        assert!((r.mean_velocity - 0.3).abs() < 1e-12);
        assert_eq!(r.integrated_pose_distance, 0.0);
        let l = s.left.unwrap();
        assert_eq!(l.distance_hand_lengths, 0.0);
        assert_eq!(l.pose_frames, 0);
    }

    #[test]
    fn absent_hand_is_missing() {
        let mut sp = spec();
        sp.left_track = Some(99);
        sp.right_track = Some(7);
        let clip = extract_clip(&stream(), &sp).unwrap();
        let s = summarize_clip(&clip, 30.0, &KinematicOptions::default()).unwrap();
        assert!(s.left.is_none());
        assert!(s.right.is_some());
        let mut buf = Vec::new();
        write_summary_csv(&[s], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().contains(",left,false,"));
    }

    #[test]
    fn invalid_clip_rejected() {
        let mut sp = spec();
        sp.end = sp.start;
        assert!(extract_clip(&stream(), &sp).is_err());
        let mut sp = spec();
        sp.knot_count = 0;
        assert!(sp.validate().is_err());
    }
}
