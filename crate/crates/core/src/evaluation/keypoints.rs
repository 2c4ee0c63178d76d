//! Percentage of correct keypoints, normalized by hand box size.

use serde::{Deserialize, Serialize};

use crate::stream::{kp, BBox, HandKeypoints, NUM_KEYPOINTS};

pub const DEFAULT_ALPHA: f64 = 0.2;

/// Per-keypoint outcome; `None` where the ground-truth point is not visible.
pub type PckHits = [Option<bool>; NUM_KEYPOINTS];

/// A point is correct when its distance to the truth is at most
/// `alpha * hand_size(ref_box)`.
pub fn pck(pred: &HandKeypoints, truth: &HandKeypoints, ref_box: &BBox, alpha: f64) -> PckHits {
    let threshold = alpha * ref_box.hand_size();
    std::array::from_fn(|i| {
        let t = truth.points()[i];
        t.visible
            .then(|| pred.points()[i].point().distance(t.point()) <= threshold)
    })
}

/// Counts of correct and evaluated points per keypoint over a test set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PckAccumulator {
    pub correct: [u64; NUM_KEYPOINTS],
    pub total: [u64; NUM_KEYPOINTS],
}

impl Default for PckAccumulator {
    fn default() -> Self {
        Self {
            correct: [0; NUM_KEYPOINTS],
            total: [0; NUM_KEYPOINTS],
        }
    }
}

impl PckAccumulator {
    pub fn add(&mut self, hits: &PckHits) {
        for (i, h) in hits.iter().enumerate() {
            if let Some(ok) = h {
                self.total[i] += 1;
                self.correct[i] += u64::from(*ok);
            }
        }
    }

    /// Count every visible truth point as a miss, for a hand with no prediction.
    pub fn add_missed(&mut self, truth: &HandKeypoints) {
        for (i, p) in truth.points().iter().enumerate() {
            self.total[i] += u64::from(p.visible);
        }
    }

    pub fn merge(&mut self, other: &PckAccumulator) {
        for i in 0..NUM_KEYPOINTS {
            self.correct[i] += other.correct[i];
            self.total[i] += other.total[i];
        }
    }

    pub fn per_keypoint(&self) -> [Option<f64>; NUM_KEYPOINTS] {
        std::array::from_fn(|i| self.group(&[i]))
    }

    /// Pooled PCK over a set of keypoints.
    pub fn group(&self, idx: &[usize]) -> Option<f64> {
        let total: u64 = idx.iter().map(|&i| self.total[i]).sum();
        let correct: u64 = idx.iter().map(|&i| self.correct[i]).sum();
        (total > 0).then(|| correct as f64 / total as f64)
    }

    pub fn mean(&self) -> Option<f64> {
        self.group(&(0..NUM_KEYPOINTS).collect::<Vec<_>>())
    }

    pub fn thumb(&self) -> Option<f64> {
        self.group(&kp::THUMB)
    }

    pub fn index_finger(&self) -> Option<f64> {
        self.group(&kp::INDEX)
    }
}
