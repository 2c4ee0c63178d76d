use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::geometry::{BBox, Point};
use crate::error::{Error, Result};

/// Detected object class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Hand,
    Electrocautery,
    NeedleDriver,
    Forceps,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Hand,
        Category::Electrocautery,
        Category::NeedleDriver,
        Category::Forceps,
    ];

    /// The three instrument classes, in feature order.
    pub const TOOLS: [Category; 3] = [
        Category::Electrocautery,
        Category::NeedleDriver,
        Category::Forceps,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Hand => "hand",
            Category::Electrocautery => "electrocautery",
            Category::NeedleDriver => "needle_driver",
            Category::Forceps => "forceps",
        }
    }

    /// Position within [`Category::TOOLS`], `None` for hands.
    pub fn tool_index(self) -> Option<usize> {
        match self {
            Category::Hand => None,
            Category::Electrocautery => Some(0),
            Category::NeedleDriver => Some(1),
            Category::Forceps => Some(2),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::invariant("Detection.category", format!("unknown class {s:?}")))
    }
}

/// Surgical action label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Cutting,
    Tying,
    Suturing,
    Background,
}

impl Action {
    pub const ALL: [Action; 4] = [
        Action::Cutting,
        Action::Tying,
        Action::Suturing,
        Action::Background,
    ];

    /// The three surgical actions, in feature order.
    pub const SURGICAL: [Action; 3] = [Action::Cutting, Action::Tying, Action::Suturing];

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Cutting => "cutting",
            Action::Tying => "tying",
            Action::Suturing => "suturing",
            Action::Background => "background",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_background(self) -> bool {
        self == Action::Background
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Action::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::invariant("FrameRecord.action", format!("unknown action {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub category: Category,
    /// Probability in `[0, 1]`; hand-annotated ground truth carries 1.0.
    pub confidence: f64,
}

impl Detection {
    pub fn new(bbox: BBox, category: Category, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::invariant(
                "Detection.confidence",
                format!("{confidence} is outside [0, 1]"),
            ));
        }
        Ok(Self {
            bbox,
            category,
            confidence,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub visible: bool,
}

impl Keypoint {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Number of keypoints in a hand skeleton.
pub const NUM_KEYPOINTS: usize = 21;

/// Keypoint layout: wrist first, then four joints per finger from base to tip.
///
/// The first nine indices are the points used for skill analysis.
pub mod kp {
    pub const PALM: usize = 0;
    pub const THUMB: [usize; 4] = [1, 2, 3, 4];
    pub const INDEX: [usize; 4] = [5, 6, 7, 8];
    pub const MIDDLE: [usize; 4] = [9, 10, 11, 12];
    pub const RING: [usize; 4] = [13, 14, 15, 16];
    pub const PINKY: [usize; 4] = [17, 18, 19, 20];
    /// Palm, thumb chain and index chain.
    pub const SKILL_POINTS: usize = 9;
}

/// The 21-point hand skeleton attached to one hand box.
#[derive(Debug, Clone, PartialEq)]
pub struct HandKeypoints {
    points: Vec<Keypoint>,
    pub owner_box: BBox,
}

impl HandKeypoints {
    pub fn new(points: Vec<Keypoint>, owner_box: BBox) -> Result<Self> {
        if points.len() != NUM_KEYPOINTS {
            return Err(Error::invariant(
                "HandKeypoints.points",
                format!("expected {NUM_KEYPOINTS} keypoints, got {}", points.len()),
            ));
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::invariant(
                "HandKeypoints.points",
                "keypoint coordinates must be finite",
            ));
        }
        Ok(Self { points, owner_box })
    }

    pub fn points(&self) -> &[Keypoint] {
        &self.points
    }

    /// The nine skill points if every one of them is visible.
    pub fn skill_points(&self) -> Option<[Point; kp::SKILL_POINTS]> {
        let head = &self.points[..kp::SKILL_POINTS];
        if head.iter().any(|p| !p.visible) {
            return None;
        }
        let mut out = [Point::default(); kp::SKILL_POINTS];
        for (o, p) in out.iter_mut().zip(head) {
            *o = p.point();
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub detections: Vec<Detection>,
    pub keypoints: Vec<HandKeypoints>,
    pub action: Option<Action>,
    /// Optional per-class action probabilities, keyed by action name.
    pub action_probs: Option<BTreeMap<Action, f64>>,
}

impl FrameRecord {
    pub fn new(frame_index: u64, fps: f64) -> Self {
        Self {
            frame_index,
            timestamp_s: frame_index as f64 / fps,
            detections: Vec::new(),
            keypoints: Vec::new(),
            action: None,
            action_probs: None,
        }
    }

    pub fn hands(&self) -> impl Iterator<Item = &Detection> {
        self.detections
            .iter()
            .filter(|d| d.category == Category::Hand)
    }

    /// Detection count per tool class, in [`Category::TOOLS`] order.
    pub fn tool_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for d in &self.detections {
            if let Some(i) = d.category.tool_index() {
                counts[i] += 1;
            }
        }
        counts
    }
}

/// Video-level metadata used for cohort selection and stratified evaluation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_terms: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub umls_tags: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    /// Free-form strata such as `quality` or `zoom`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tags: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoStream {
    pub video_id: String,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub frames: Vec<FrameRecord>,
    pub metadata: Option<Metadata>,
}

/// Maximum allowed deviation between a frame timestamp and `frame_index / fps`.
pub const TIMESTAMP_TOLERANCE_S: f64 = 1e-6;

impl VideoStream {
    /// Check every stream-level invariant. Frames must already be sorted.
    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::invariant("VideoStream.fps", "fps must be > 0"));
        }
        if self.frames.is_empty() {
            return Err(Error::Empty(format!("stream {} has no frames", self.video_id)));
        }
        for pair in self.frames.windows(2) {
            if pair[1].frame_index <= pair[0].frame_index {
                return Err(Error::invariant(
                    "FrameRecord.frame_index",
                    format!(
                        "frame {} follows frame {}; indices must strictly increase",
                        pair[1].frame_index, pair[0].frame_index
                    ),
                ));
            }
        }
        for f in &self.frames {
            let expected = f.frame_index as f64 / self.fps;
            if (f.timestamp_s - expected).abs() > TIMESTAMP_TOLERANCE_S {
                return Err(Error::invariant(
                    "FrameRecord.timestamp_s",
                    format!(
                        "frame {} has t={} but frame/fps={}",
                        f.frame_index, f.timestamp_s, expected
                    ),
                ));
            }
        }
        if let Some(duration) = self.metadata.as_ref().and_then(|m| m.duration_s) {
            let covered = self.covered_duration_s();
            if (duration - covered).abs() > 1.0 / self.fps + TIMESTAMP_TOLERANCE_S {
                return Err(Error::invariant(
                    "Metadata.duration_s",
                    format!(
                        "duration {duration}s inconsistent with {covered}s of frames"
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Seconds spanned by the frames, `(last_index + 1) / fps`.
    pub fn covered_duration_s(&self) -> f64 {
        self.frames
            .last()
            .map(|f| (f.frame_index + 1) as f64 / self.fps)
            .unwrap_or(0.0)
    }

    pub fn frame(&self, frame_index: u64) -> Option<&FrameRecord> {
        self.frames
            .binary_search_by_key(&frame_index, |f| f.frame_index)
            .ok()
            .map(|i| &self.frames[i])
    }
}
