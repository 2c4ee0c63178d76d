//! Optimal one-to-one assignment (Hungarian / Kuhn-Munkres with potentials).

use crate::stream::BBox;

/// Minimum-cost assignment on a dense `rows x cols` matrix.
///
/// Returns `min(rows, cols)` pairs `(row, col)` sorted by row. Runs in
/// `O(n^2 m)`. Scans proceed in ascending index with strict comparisons, so
/// equal-cost alternatives resolve toward lower indices and the result is
/// deterministic for a given input.
pub fn solve_min_cost(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    debug_assert!(cost.iter().all(|r| r.len() == cols));
    if cols == 0 {
        return Vec::new();
    }
    if rows > cols {
        let transposed: Vec<Vec<f64>> = (0..cols)
            .map(|j| (0..rows).map(|i| cost[i][j]).collect())
            .collect();
        let mut pairs: Vec<(usize, usize)> = solve_min_cost(&transposed)
            .into_iter()
            .map(|(j, i)| (i, j))
            .collect();
        pairs.sort_unstable();
        return pairs;
    }

    // 1-based potentials; column 0 is the virtual root.
    let (n, m) = (rows, cols);
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| owner[j] != 0)
        .map(|j| (owner[j] - 1, j - 1))
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Maximum-total-weight assignment.
pub fn solve_max_weight(weight: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let negated: Vec<Vec<f64>> = weight
        .iter()
        .map(|row| row.iter().map(|w| -w).collect())
        .collect();
    solve_min_cost(&negated)
}

/// Outcome of matching predicted track boxes to detections.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Association {
    /// `(track_idx, det_idx)`, sorted by track index.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_dets: Vec<usize>,
}

/// IoU matrix, rows are tracks and columns detections.
pub fn iou_matrix(tracks: &[BBox], detections: &[BBox]) -> Vec<Vec<f64>> {
    tracks
        .iter()
        .map(|t| detections.iter().map(|d| t.iou(d)).collect())
        .collect()
}

/// Match tracks to detections maximizing total IoU, then dissolve any pair
/// whose IoU falls below `iou_threshold`.
pub fn associate(tracks: &[BBox], detections: &[BBox], iou_threshold: f64) -> Association {
    associate_weights(&iou_matrix(tracks, detections), tracks.len(), detections.len(), iou_threshold)
}

/// [`associate`] on a precomputed IoU matrix.
pub fn associate_weights(
    ious: &[Vec<f64>],
    n_tracks: usize,
    n_dets: usize,
    iou_threshold: f64,
) -> Association {
    let mut track_used = vec![false; n_tracks];
    let mut det_used = vec![false; n_dets];
    let mut matches = Vec::new();
    if n_tracks > 0 && n_dets > 0 {
        for (t, d) in solve_max_weight(ious) {
            if ious[t][d] >= iou_threshold {
                track_used[t] = true;
                det_used[d] = true;
                matches.push((t, d));
            }
        }
    }
    Association {
        matches,
        unmatched_tracks: (0..n_tracks).filter(|&t| !track_used[t]).collect(),
        unmatched_dets: (0..n_dets).filter(|&d| !det_used[d]).collect(),
    }
}
