//! Group centroids of per-hand skill metrics and their leave-one-operator-out
//! stability.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::clips::{ClipSummary, Experience, KinematicSummary};
use crate::stream::Point;

/// The metric plotted as `(left hand, right hand)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillMetric {
    #[default]
    Distance,
    DistancePerKnot,
    Pose,
    PosePerKnot,
}

impl SkillMetric {
    pub const ALL: [SkillMetric; 4] = [
        SkillMetric::Distance,
        SkillMetric::DistancePerKnot,
        SkillMetric::Pose,
        SkillMetric::PosePerKnot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SkillMetric::Distance => "distance",
            SkillMetric::DistancePerKnot => "distance_per_knot",
            SkillMetric::Pose => "pose",
            SkillMetric::PosePerKnot => "pose_per_knot",
        }
    }

    pub fn of(self, k: &KinematicSummary) -> f64 {
        match self {
            SkillMetric::Distance => k.distance_hand_lengths,
            SkillMetric::DistancePerKnot => k.distance_per_knot,
            SkillMetric::Pose => k.integrated_pose_distance,
            SkillMetric::PosePerKnot => k.pose_distance_per_knot,
        }
    }

    /// `(left, right)` value, or `None` unless both hands were summarized.
    pub fn pair(self, s: &ClipSummary) -> Option<Point> {
        Some(Point::new(self.of(s.left.as_ref()?), self.of(s.right.as_ref()?)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub point: Point,
    pub members: usize,
}

/// Centroid per experience group; a group with no usable clip has no entry.
pub type GroupCentroids = BTreeMap<Experience, Centroid>;

/// Mean `(left, right)` metric per experience group. Clips missing a hand are skipped.
pub fn group_centroids<'a>(
    summaries: impl IntoIterator<Item = &'a ClipSummary>,
    metric: SkillMetric,
) -> GroupCentroids {
    let mut acc: BTreeMap<Experience, (f64, f64, usize)> = BTreeMap::new();
    for s in summaries {
        if let Some(p) = metric.pair(s) {
            let e = acc.entry(s.experience).or_default();
            e.0 += p.x;
            e.1 += p.y;
            e.2 += 1;
        }
    }
    acc.into_iter()
        .map(|(g, (sx, sy, n))| {
            let nf = n as f64;
            (
                g,
                Centroid {
                    point: Point::new(sx / nf, sy / nf),
                    members: n,
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaveOneOut {
    pub held_out_operator: String,
    pub centroids: GroupCentroids,
    /// Groups that had members before exclusion and none after.
    pub emptied: Vec<Experience>,
}

/// Recompute group centroids once per operator with that operator's clips removed.
///
/// Results are ordered by operator id.
pub fn leave_one_out(summaries: &[ClipSummary], metric: SkillMetric) -> Vec<LeaveOneOut> {
    let full = group_centroids(summaries, metric);
    let operators: BTreeSet<&str> = summaries.iter().map(|s| s.operator_id.as_str()).collect();
    operators
        .into_iter()
        .map(|op| {
            let centroids =
                group_centroids(summaries.iter().filter(|s| s.operator_id != op), metric);
            let emptied: Vec<Experience> = full
                .keys()
                .filter(|g| !centroids.contains_key(g))
                .copied()
                .collect();
            if !emptied.is_empty() {
                tracing::warn!(operator = op, ?emptied, "group emptied by exclusion");
            }
            LeaveOneOut {
                held_out_operator: op.to_string(),
                centroids,
                emptied,
            }
        })
        .collect()
}

/// `|held-out - full| / |full|` per group present in both.
pub fn relative_shifts(full: &GroupCentroids, loo: &LeaveOneOut) -> BTreeMap<Experience, f64> {
    full.iter()
        .filter_map(|(g, c)| {
            let h = loo.centroids.get(g)?;
            let norm = c.point.l2();
            Some((*g, h.point.distance(c.point) / norm))
        })
        .collect()
}
