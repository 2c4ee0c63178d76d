//! Identity preservation of tracker output against generator ground truth.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::synth::HandTruth;
use crate::error::{Error, Result};
use crate::stream::BBox;
use crate::tracker::{solve_min_cost, TrackedStream};

/// IoU at which a tracker box counts as covering a true hand.
pub const MATCH_IOU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingScore {
    pub frames: usize,
    /// True hand instances over all frames.
    pub truth_instances: usize,
    pub matched: usize,
    /// True instances with no tracker box at the match IoU.
    pub misses: usize,
    /// Tracker boxes matched to no true hand.
    pub false_positives: usize,
    /// Changes of the tracker id covering a true hand.
    pub id_switches: usize,
    /// Tracker ids seen for each true id.
    pub mapping: BTreeMap<u64, BTreeSet<u64>>,
    /// Every true id maps to exactly one tracker id and no tracker id is shared.
    pub bijection: bool,
    pub track_count: usize,
}

impl TrackingScore {
    /// ID switches scaled to a 1000-frame window.
    pub fn switches_per_1000_frames(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.id_switches as f64 * 1000.0 / self.frames as f64
        }
    }
}

/// Match tracker boxes to true boxes frame by frame (optimal assignment on
/// IoU, accepted at [`MATCH_IOU`]) and count identity changes.
pub fn score_tracking(tracks: &TrackedStream, truth: &[HandTruth]) -> Result<TrackingScore> {
    let mut by_frame: BTreeMap<u64, Vec<(u64, BBox)>> = BTreeMap::new();
    for h in truth {
        for b in &h.boxes {
            by_frame
                .entry(b[0] as u64)
                .or_default()
                .push((h.true_id, BBox::new(b[1], b[2], b[3], b[4])?));
        }
    }
    let mut score = TrackingScore {
        frames: tracks.frames.len(),
        truth_instances: 0,
        matched: 0,
        misses: 0,
        false_positives: 0,
        id_switches: 0,
        mapping: BTreeMap::new(),
        bijection: false,
        track_count: 0,
    };
    let mut last: BTreeMap<u64, u64> = BTreeMap::new();
    let mut seen_tracks = BTreeSet::new();
    for f in &tracks.frames {
        let gts = by_frame.get(&f.frame).map(Vec::as_slice).unwrap_or(&[]);
        let outs: Vec<(u64, BBox)> = f
            .tracks
            .iter()
            .map(|(id, e)| {
                let [x0, y0, x1, y1] = e.bbox;
                BBox::new(x0, y0, x1, y1).map(|b| (*id, b))
            })
            .collect::<Result<_>>()?;
        seen_tracks.extend(outs.iter().map(|o| o.0));
        score.truth_instances += gts.len();
        let cost: Vec<Vec<f64>> = gts
            .iter()
            .map(|(_, g)| outs.iter().map(|(_, o)| 1.0 - g.iou(o)).collect())
            .collect();
        let mut matched_outs = 0;
        for (gi, oi) in solve_min_cost(&cost) {
            if 1.0 - cost[gi][oi] < MATCH_IOU {
                continue;
            }
            let (true_id, track_id) = (gts[gi].0, outs[oi].0);
            matched_outs += 1;
            score.mapping.entry(true_id).or_default().insert(track_id);
            if let Some(prev) = last.insert(true_id, track_id) {
                score.id_switches += usize::from(prev != track_id);
            }
        }
        score.matched += matched_outs;
        score.false_positives += outs.len() - matched_outs;
    }
    score.misses = score.truth_instances - score.matched;
    score.track_count = seen_tracks.len();
    let mut owners: BTreeMap<u64, usize> = BTreeMap::new();
    for ids in score.mapping.values() {
        for id in ids {
            *owners.entry(*id).or_default() += 1;
        }
    }
    score.bijection = score.mapping.len() == truth.len()
        && score.mapping.values().all(|ids| ids.len() == 1)
        && owners.values().all(|&n| n == 1);
    if score.frames > 0 && score.truth_instances == 0 {
        return Err(Error::Empty("ground truth has no boxes in the tracked frames".into()));
    }
    Ok(score)
}
