//! Stream-level evaluation of predicted against ground-truth streams, with
//! optional grouping by metadata tags.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::actions::{ActionReport, Confusion};
use super::detection::{average_precision_from_matches, match_detections, mean_ap, MatchResult};
use super::keypoints::{pck, PckAccumulator};
use crate::error::{Error, Result};
use crate::signatures::resample_stream;
use crate::stream::{BBox, Category, FrameRecord, HandKeypoints, VideoStream, NUM_KEYPOINTS};

/// What to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalTask {
    Actions,
    Boxes,
    Keypoints,
}

/// Which hand box sets the PCK distance threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeypointReference {
    /// The ground-truth hand box.
    #[default]
    Gt,
    /// The predicted hand box the keypoints were regressed from.
    Dt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub alpha: f64,
    pub iou_threshold: f64,
    pub reference: KeypointReference,
    /// Step length for action comparison.
    pub action_resolution_s: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            alpha: super::keypoints::DEFAULT_ALPHA,
            iou_threshold: super::detection::DEFAULT_IOU_THRESHOLD,
            reference: KeypointReference::Gt,
            action_resolution_s: 1.0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Config("alpha must be > 0".into()));
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(Error::Config("iou threshold must be in (0, 1]".into()));
        }
        if !(self.action_resolution_s.is_finite() && self.action_resolution_s > 0.0) {
            return Err(Error::Config("action resolution must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxReport {
    /// `None` for a class with no ground truth.
    pub ap: BTreeMap<Category, Option<f64>>,
    pub hand_ap: Option<f64>,
    /// Mean over the tool classes with ground truth.
    pub tool_map: Option<f64>,
    pub ground_truth: BTreeMap<Category, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointReport {
    pub per_keypoint: Vec<Option<f64>>,
    pub mean: Option<f64>,
    pub thumb: Option<f64>,
    pub index: Option<f64>,
    pub evaluated_points: u64,
}

/// Results for one set of videos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub videos: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actions: Option<ActionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boxes: Option<BoxReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<KeypointReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub alpha: f64,
    pub iou_threshold: f64,
    pub reference: KeypointReference,
    pub overall: Metrics,
    /// Keyed `tag=value` from the truth metadata.
    pub strata: BTreeMap<String, Metrics>,
    /// Truth videos with no prediction stream.
    pub unmatched_videos: Vec<String>,
}

/// Raw per-video counts, merged in video order.
#[derive(Debug, Clone, Default)]
struct VideoCounts {
    confusion: Confusion,
    boxes: BTreeMap<Category, MatchResult>,
    pck: PckAccumulator,
}

impl VideoCounts {
    fn merge(&mut self, o: &VideoCounts) {
        self.confusion.merge(&o.confusion);
        for (c, m) in &o.boxes {
            self.boxes.entry(*c).or_default().extend(m);
        }
        self.pck.merge(&o.pck);
    }
}

fn boxes_of(f: Option<&FrameRecord>, c: Category) -> Vec<crate::stream::Detection> {
    f.map(|f| f.detections.iter().filter(|d| d.category == c).cloned().collect())
        .unwrap_or_default()
}

/// Prediction keypoints for a truth hand: the set whose owner box overlaps the
/// truth owner box most, at IoU of at least `iou`.
fn match_hand<'a>(truth: &HandKeypoints, preds: &'a [HandKeypoints], iou: f64) -> Option<&'a HandKeypoints> {
    let mut best: Option<(&HandKeypoints, f64)> = None;
    for p in preds {
        let v = p.owner_box.iou(&truth.owner_box);
        if v >= iou && best.map_or(true, |(_, b)| v > b) {
            best = Some((p, v));
        }
    }
    best.map(|(p, _)| p)
}

fn video_counts(pred: &VideoStream, truth: &VideoStream, tasks: &[EvalTask], cfg: &EvalConfig) -> Result<VideoCounts> {
    let mut out = VideoCounts::default();
    if tasks.contains(&EvalTask::Actions) {
        let (p, _) = resample_stream(pred, cfg.action_resolution_s)?;
        let (t, _) = resample_stream(truth, cfg.action_resolution_s)?;
        if p.len() != t.len() {
            tracing::warn!(video = %truth.video_id, pred = p.len(), truth = t.len(), "action steps truncated");
        }
        out.confusion = Confusion::from_pairs(&p.labels, &t.labels);
    }
    let pred_frames: BTreeMap<u64, &FrameRecord> = pred.frames.iter().map(|f| (f.frame_index, f)).collect();
    for tf in &truth.frames {
        let pf = pred_frames.get(&tf.frame_index).copied();
        if tasks.contains(&EvalTask::Boxes) {
            for c in Category::ALL {
                let gt: Vec<BBox> = boxes_of(Some(tf), c).iter().map(|d| d.bbox).collect();
                let m = match_detections(&boxes_of(pf, c), &gt, cfg.iou_threshold);
                out.boxes.entry(c).or_default().extend(&m);
            }
        }
        if tasks.contains(&EvalTask::Keypoints) {
            let preds = pf.map(|f| f.keypoints.as_slice()).unwrap_or(&[]);
            for th in &tf.keypoints {
                match match_hand(th, preds, cfg.iou_threshold) {
                    Some(ph) => {
                        let reference = match cfg.reference {
                            KeypointReference::Gt => &th.owner_box,
                            KeypointReference::Dt => &ph.owner_box,
                        };
                        out.pck.add(&pck(ph, th, reference, cfg.alpha));
                    }
                    None => out.pck.add_missed(th),
                }
            }
        }
    }
    Ok(out)
}

fn metrics(counts: &VideoCounts, videos: usize, tasks: &[EvalTask]) -> Metrics {
    let actions = tasks
        .contains(&EvalTask::Actions)
        .then(|| ActionReport::from_confusion(counts.confusion));
    let boxes = tasks.contains(&EvalTask::Boxes).then(|| {
        let ap: BTreeMap<Category, Option<f64>> = Category::ALL
            .into_iter()
            .map(|c| (c, counts.boxes.get(&c).and_then(average_precision_from_matches)))
            .collect();
        let undefined: Vec<&str> = ap.iter().filter(|(_, v)| v.is_none()).map(|(c, _)| c.as_str()).collect();
        if !undefined.is_empty() {
            tracing::warn!(?undefined, "classes without ground truth excluded from mAP");
        }
        BoxReport {
            hand_ap: ap[&Category::Hand],
            tool_map: mean_ap(Category::TOOLS.iter().map(|c| ap[c])),
            ground_truth: Category::ALL
                .into_iter()
                .map(|c| (c, counts.boxes.get(&c).map_or(0, |m| m.ground_truth)))
                .collect(),
            ap,
        }
    });
    let keypoints = tasks.contains(&EvalTask::Keypoints).then(|| KeypointReport {
        per_keypoint: counts.pck.per_keypoint().to_vec(),
        mean: counts.pck.mean(),
        thumb: counts.pck.thumb(),
        index: counts.pck.index_finger(),
        evaluated_points: counts.pck.total.iter().sum(),
    });
    debug_assert_eq!(counts.pck.total.len(), NUM_KEYPOINTS);
    Metrics {
        videos,
        actions,
        boxes,
        keypoints,
    }
}

/// Evaluate prediction streams against truth streams paired by video id.
///
/// Frames are paired by index; a truth frame with no prediction frame counts
/// as an empty prediction. Videos are processed in parallel and merged in
/// truth order.
pub fn evaluate(pred: &[VideoStream], truth: &[VideoStream], tasks: &[EvalTask], cfg: &EvalConfig) -> Result<MetricReport> {
    cfg.validate()?;
    if truth.is_empty() {
        return Err(Error::Empty("no ground-truth streams".into()));
    }
    let by_id: BTreeMap<&str, &VideoStream> = pred.iter().map(|s| (s.video_id.as_str(), s)).collect();
    let mut unmatched = Vec::new();
    let pairs: Vec<(&VideoStream, &VideoStream)> = truth
        .iter()
        .filter_map(|t| match by_id.get(t.video_id.as_str()) {
            Some(p) => Some((*p, t)),
            None => {
                tracing::warn!(video = %t.video_id, "no prediction stream");
                unmatched.push(t.video_id.clone());
                None
            }
        })
        .collect();
    let counts: Vec<VideoCounts> = pairs
        .par_iter()
        .map(|(p, t)| video_counts(p, t, tasks, cfg))
        .collect::<Result<_>>()?;

    let mut overall = VideoCounts::default();
    let mut strata: BTreeMap<String, (VideoCounts, usize)> = BTreeMap::new();
    for ((_, t), c) in pairs.iter().zip(&counts) {
        overall.merge(c);
        if let Some(m) = &t.metadata {
            for (k, v) in &m.tags {
                let e = strata.entry(format!("{k}={v}")).or_default();
                e.0.merge(c);
                e.1 += 1;
            }
        }
    }
    Ok(MetricReport {
        alpha: cfg.alpha,
        iou_threshold: cfg.iou_threshold,
        reference: cfg.reference,
        overall: metrics(&overall, pairs.len(), tasks),
        strata: strata
            .iter()
            .map(|(k, (c, n))| (k.clone(), metrics(c, *n, tasks)))
            .collect(),
        unmatched_videos: unmatched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{Action, Detection, Keypoint, Metadata};

    fn stream(id: &str, quality: &str, shift: f64, action: Action) -> VideoStream {
        let frames = (0..60)
            .map(|i| {
                let mut f = FrameRecord::new(i, 30.0);
                f.action = Some(action);
                let hb = BBox::new(100.0 + shift, 100.0, 200.0 + shift, 200.0).unwrap();
                f.detections.push(Detection::new(hb, Category::Hand, 0.9).unwrap());
                let tb = BBox::new(300.0, 300.0, 340.0, 320.0).unwrap();
                f.detections.push(Detection::new(tb, Category::Forceps, 0.8).unwrap());
                let pts = (0..21)
                    .map(|k| Keypoint {
                        x: 120.0 + shift + k as f64,
                        y: 150.0,
                        visible: true,
                    })
                    .collect();
                f.keypoints.push(HandKeypoints::new(pts, hb).unwrap());
                f
            })
            .collect();
        VideoStream {
            video_id: id.into(),
            fps: 30.0,
            width: 640,
            height: 480,
            frames,
            metadata: Some(Metadata {
                tags: [("quality".to_string(), quality.to_string())].into(),
                ..Default::default()
            }),
        }
    }

    const ALL: [EvalTask; 3] = [EvalTask::Actions, EvalTask::Boxes, EvalTask::Keypoints];

    #[test]
    fn identical_streams_score_one() {
        let s = vec![stream("a", "high", 0.0, Action::Cutting), stream("b", "low", 0.0, Action::Tying)];
        let r = evaluate(&s, &s, &ALL, &EvalConfig::default()).unwrap();
        let a = r.overall.actions.as_ref().unwrap();
        assert_eq!(a.macro_precision, Some(1.0));
        assert_eq!(a.macro_recall, Some(1.0));
        let b = r.overall.boxes.as_ref().unwrap();
        assert_eq!(b.hand_ap, Some(1.0));
        assert_eq!(b.tool_map, Some(1.0));
        assert_eq!(b.ap[&Category::NeedleDriver], None);
        assert_eq!(r.overall.keypoints.as_ref().unwrap().mean, Some(1.0));
        assert_eq!(r.strata.len(), 2);
        assert_eq!(r.strata["quality=high"].videos, 1);
    }

    #[test]
    fn shifted_keypoints_fail_threshold_but_boxes_still_match() {
        let truth = vec![stream("a", "high", 0.0, Action::Cutting)];
        // 25 px shift: box IoU 75/125 = 0.6 passes, keypoint error 25 > 0.2 * 100
        let pred = vec![stream("a", "high", 25.0, Action::Cutting)];
        let r = evaluate(&pred, &truth, &ALL, &EvalConfig::default()).unwrap();
        assert_eq!(r.overall.boxes.as_ref().unwrap().hand_ap, Some(1.0));
        assert_eq!(r.overall.keypoints.as_ref().unwrap().mean, Some(0.0));
        let loose = EvalConfig { alpha: 0.3, ..Default::default() };
        let r = evaluate(&pred, &truth, &ALL, &loose).unwrap();
        assert_eq!(r.overall.keypoints.as_ref().unwrap().mean, Some(1.0));
        assert_eq!(r.alpha, 0.3);
    }

    #[test]
    fn empty_prediction_scores_zero() {
        let truth = vec![stream("a", "high", 0.0, Action::Cutting)];
        let mut pred = truth.clone();
        for f in &mut pred[0].frames {
            f.detections.clear();
            f.keypoints.clear();
            f.action = Some(Action::Background);
        }
        let r = evaluate(&pred, &truth, &ALL, &EvalConfig::default()).unwrap();
        assert_eq!(r.overall.boxes.as_ref().unwrap().hand_ap, Some(0.0));
        assert_eq!(r.overall.keypoints.as_ref().unwrap().mean, Some(0.0));
        assert_eq!(r.overall.actions.as_ref().unwrap().macro_recall, Some(0.0));
    }

    #[test]
    fn missing_prediction_video_is_reported() {
        let truth = vec![stream("a", "high", 0.0, Action::Cutting), stream("b", "high", 0.0, Action::Cutting)];
        let r = evaluate(&truth[..1], &truth, &[EvalTask::Boxes], &EvalConfig::default()).unwrap();
        assert_eq!(r.unmatched_videos, vec!["b".to_string()]);
        assert!(r.overall.actions.is_none());
    }
}
