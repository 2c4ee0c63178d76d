//! Average precision of box detections at an IoU threshold.

use serde::{Deserialize, Serialize};

use crate::stream::{BBox, Detection};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Ranked detection outcomes for one class, possibly over many images.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// `(confidence, is_true_positive)` in the order detections were ranked.
    pub scored: Vec<(f64, bool)>,
    pub ground_truth: usize,
}

impl MatchResult {
    pub fn true_positives(&self) -> usize {
        self.scored.iter().filter(|(_, tp)| *tp).count()
    }

    /// Append another image's outcomes.
    pub fn extend(&mut self, other: &MatchResult) {
        self.scored.extend_from_slice(&other.scored);
        self.ground_truth += other.ground_truth;
    }
}

/// Indices of `confidences` by descending value; equal values keep input order.
fn rank(confidences: impl Iterator<Item = f64>) -> Vec<usize> {
    let conf: Vec<f64> = confidences.collect();
    let mut order: Vec<usize> = (0..conf.len()).collect();
    order.sort_by(|&a, &b| conf[b].total_cmp(&conf[a]));
    order
}

/// Match one image's detections of a single class to its ground-truth boxes.
///
/// Detections are visited by descending confidence and each takes the
/// unmatched ground-truth box of highest IoU, if that IoU reaches `iou_thresh`.
pub fn match_detections(preds: &[Detection], truth: &[BBox], iou_thresh: f64) -> MatchResult {
    let mut taken = vec![false; truth.len()];
    let scored = rank(preds.iter().map(|d| d.confidence))
        .into_iter()
        .map(|i| {
            let d = &preds[i];
            let mut best: Option<(usize, f64)> = None;
            for (g, gt) in truth.iter().enumerate() {
                if taken[g] {
                    continue;
                }
                let v = d.bbox.iou(gt);
                if v >= iou_thresh && best.map_or(true, |(_, b)| v > b) {
                    best = Some((g, v));
                }
            }
            if let Some((g, _)) = best {
                taken[g] = true;
            }
            (d.confidence, best.is_some())
        })
        .collect();
    MatchResult {
        scored,
        ground_truth: truth.len(),
    }
}

/// All-point interpolated AP. `None` when there is no ground truth; 0 when
/// there are no detections.
///
/// Outcomes are re-ranked by descending confidence; ties keep their order.
pub fn average_precision_from_matches(m: &MatchResult) -> Option<f64> {
    if m.ground_truth == 0 {
        return None;
    }
    let ranked: Vec<bool> = rank(m.scored.iter().map(|s| s.0))
        .into_iter()
        .map(|i| m.scored[i].1)
        .collect();
    let mut precision = Vec::with_capacity(ranked.len());
    let mut tp = 0usize;
    for (k, &hit) in ranked.iter().enumerate() {
        tp += usize::from(hit);
        precision.push(tp as f64 / (k + 1) as f64);
    }
    // precision envelope from the right
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let sum: f64 = ranked
        .iter()
        .zip(&precision)
        .filter(|(hit, _)| **hit)
        .map(|(_, p)| p)
        .sum();
    Some(sum / m.ground_truth as f64)
}

/// AP of one image's detections against its ground truth.
pub fn average_precision(preds: &[Detection], truth: &[BBox], iou_thresh: f64) -> Option<f64> {
    average_precision_from_matches(&match_detections(preds, truth, iou_thresh))
}

/// Arithmetic mean of the defined values.
pub fn mean_ap(aps: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = aps.into_iter().flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}
