//! SORT lifecycle: predict every track, associate by IoU, update matches,
//! spawn tracks for leftover detections and retire stale ones.

use serde::{Deserialize, Serialize};

use super::assignment::associate_weights;
use super::kalman::{state_to_bbox, KalmanModel, KalmanState};
use crate::error::{Error, Result};
use crate::stream::{BBox, Category, FrameRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// Minimum IoU for a track/detection match, in `(0, 1)`.
    pub iou_threshold: f64,
    /// Consecutive missed frames after which a track is retired.
    pub max_age: u32,
    /// Consecutive hits before a track is reported.
    pub min_hits: u32,
    pub process_noise: f64,
    pub measurement_noise: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.3,
            max_age: 30,
            min_hits: 3,
            process_noise: 1.0,
            measurement_noise: 1.0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return Err(Error::Config(format!(
                "iou_threshold must be in (0, 1), got {}",
                self.iou_threshold
            )));
        }
        if self.max_age == 0 || self.min_hits == 0 {
            return Err(Error::Config("max_age and min_hits must be positive".into()));
        }
        for (name, v) in [
            ("process_noise", self.process_noise),
            ("measurement_noise", self.measurement_noise),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Track {
    pub track_id: u64,
    pub state: KalmanState,
    /// Matched updates since birth.
    pub hits: u32,
    /// Matched updates since the last miss.
    pub hit_streak: u32,
    /// Frames since creation.
    pub age: u32,
    pub time_since_update: u32,
    /// Matched detection boxes, by frame index.
    pub history: Vec<(u64, BBox)>,
    /// Set once the filter had to clamp area or aspect ratio.
    pub degenerate: bool,
}

impl Track {
    pub fn bbox(&self) -> Option<BBox> {
        state_to_bbox(&self.state.mean)
    }

    pub fn predict(&mut self, model: &KalmanModel) {
        if model.predict(&mut self.state) {
            self.degenerate = true;
        }
        self.age += 1;
        if self.time_since_update > 0 {
            self.hit_streak = 0;
        }
        self.time_since_update += 1;
    }

    pub fn update(&mut self, model: &KalmanModel, frame_index: u64, det: &BBox) -> Result<()> {
        if model.update(&mut self.state, det)? {
            self.degenerate = true;
        }
        self.hits += 1;
        self.hit_streak += 1;
        self.time_since_update = 0;
        self.history.push((frame_index, *det));
        Ok(())
    }
}

/// One reported track in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOutput {
    pub track_id: u64,
    /// Filtered state estimate.
    pub bbox: BBox,
    /// The detection this track was matched to (or born from) in this frame.
    pub detection: BBox,
    /// Index of that detection in `FrameRecord::detections`.
    pub det_index: usize,
}

#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    model: KalmanModel,
    tracks: Vec<Track>,
    next_id: u64,
    frame_count: u64,
    dropped: u64,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        let model = KalmanModel::new(config.process_noise, config.measurement_noise);
        Ok(Self {
            config,
            model,
            tracks: Vec::new(),
            next_id: 1,
            frame_count: 0,
            dropped: 0,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Live tracks, including unreported ones.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Tracks removed because their measurement update failed numerically.
    pub fn dropped_tracks(&self) -> u64 {
        self.dropped
    }

    /// Advance by one frame. Only hand detections are tracked.
    pub fn step(&mut self, frame: &FrameRecord) -> Vec<TrackOutput> {
        let hands: Vec<(usize, BBox)> = frame
            .detections
            .iter()
            .enumerate()
            .filter(|(_, d)| d.category == Category::Hand)
            .map(|(i, d)| (i, d.bbox))
            .collect();
        self.step_boxes(frame.frame_index, &hands)
    }

    /// Advance by one frame given `(detection index, box)` pairs.
    pub fn step_boxes(&mut self, frame_index: u64, dets: &[(usize, BBox)]) -> Vec<TrackOutput> {
        self.frame_count += 1;
        for t in &mut self.tracks {
            t.predict(&self.model);
        }

        let predicted: Vec<Option<BBox>> = self.tracks.iter().map(Track::bbox).collect();
        let ious: Vec<Vec<f64>> = predicted
            .iter()
            .map(|p| match p {
                Some(pb) => dets.iter().map(|(_, d)| pb.iou(d)).collect(),
                None => vec![0.0; dets.len()],
            })
            .collect();
        let assoc = associate_weights(&ious, self.tracks.len(), dets.len(), self.config.iou_threshold);

        let mut matched_det = vec![None; self.tracks.len()];
        let mut failed = Vec::new();
        for &(ti, di) in &assoc.matches {
            let (orig, det) = dets[di];
            match self.tracks[ti].update(&self.model, frame_index, &det) {
                Ok(()) => matched_det[ti] = Some((orig, det)),
                Err(e) => {
                    tracing::warn!(track = self.tracks[ti].track_id, "dropping track: {e}");
                    failed.push(ti);
                }
            }
        }

        for &di in &assoc.unmatched_dets {
            let (orig, det) = dets[di];
            let track = Track {
                track_id: self.next_id,
                state: self.model.initiate(&det),
                hits: 0,
                hit_streak: 0,
                age: 0,
                time_since_update: 0,
                history: vec![(frame_index, det)],
                degenerate: false,
            };
            self.next_id += 1;
            self.tracks.push(track);
            matched_det.push(Some((orig, det)));
        }

        let warmup = self.frame_count <= u64::from(self.config.min_hits);
        let mut out = Vec::new();
        for (ti, t) in self.tracks.iter().enumerate() {
            if failed.contains(&ti) {
                continue;
            }
            let Some((det_index, detection)) = matched_det[ti] else {
                continue;
            };
            if t.time_since_update == 0 && (t.hit_streak >= self.config.min_hits || warmup) {
                if let Some(bbox) = t.bbox() {
                    out.push(TrackOutput {
                        track_id: t.track_id,
                        bbox,
                        detection,
                        det_index,
                    });
                }
            }
        }

        let max_age = self.config.max_age;
        let mut idx = 0;
        self.dropped += failed.len() as u64;
        self.tracks.retain(|t| {
            let keep = !failed.contains(&idx) && t.time_since_update <= max_age;
            idx += 1;
            keep
        });

        out.sort_by_key(|o| o.track_id);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::Detection;

    fn frame(i: u64, boxes: &[BBox]) -> FrameRecord {
        let mut f = FrameRecord::new(i, 30.0);
        f.detections = boxes
            .iter()
            .map(|b| Detection::new(*b, Category::Hand, 0.9).unwrap())
            .collect();
        f
    }

    fn bx(cx: f64, cy: f64, w: f64, h: f64) -> BBox {
        BBox::from_center(cx, cy, w, h).unwrap()
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = TrackerConfig::default();
        c.iou_threshold = 1.0;
        assert!(Tracker::new(c).is_err());
        let mut c = TrackerConfig::default();
        c.process_noise = 0.0;
        assert!(Tracker::new(c).is_err());
    }

    #[test]
    fn stationary_detection_keeps_one_id() {
        let mut tr = Tracker::new(TrackerConfig::default()).unwrap();
        let b = bx(200.0, 200.0, 80.0, 90.0);
        let mut ids = std::collections::BTreeSet::new();
        for i in 0..20 {
            for o in tr.step(&frame(i, &[b])) {
                ids.insert(o.track_id);
            }
        }
        assert_eq!(ids.into_iter().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn tools_are_not_tracked() {
        let mut tr = Tracker::new(TrackerConfig::default()).unwrap();
        let mut f = frame(0, &[]);
        f.detections
            .push(Detection::new(bx(50.0, 50.0, 20.0, 20.0), Category::Forceps, 0.8).unwrap());
        assert!(tr.step(&f).is_empty());
        assert!(tr.tracks().is_empty());
    }

    #[test]
    fn gap_longer_than_max_age_spawns_new_id() {
        let cfg = TrackerConfig {
            max_age: 5,
            ..TrackerConfig::default()
        };
        let b = bx(200.0, 200.0, 80.0, 90.0);

        // gap of exactly max_age frames: identity survives
        let mut tr = Tracker::new(cfg.clone()).unwrap();
        let mut i = 0;
        for _ in 0..10 {
            tr.step(&frame(i, &[b]));
            i += 1;
        }
        for _ in 0..5 {
            tr.step(&frame(i, &[]));
            i += 1;
        }
        let mut last = Vec::new();
        for _ in 0..5 {
            last = tr.step(&frame(i, &[b]));
            i += 1;
        }
        assert_eq!(last[0].track_id, 1);

        // gap of max_age + 1 frames: new identity
        let mut tr = Tracker::new(cfg).unwrap();
        let mut i = 0;
        for _ in 0..10 {
            tr.step(&frame(i, &[b]));
            i += 1;
        }
        for _ in 0..6 {
            tr.step(&frame(i, &[]));
            i += 1;
        }
        let mut last = Vec::new();
        for _ in 0..5 {
            last = tr.step(&frame(i, &[b]));
            i += 1;
        }
        assert_eq!(last.len(), 1);
        assert_eq!(last[0].track_id, 2);
    }

    #[test]
    fn ids_are_never_reused() {
        let cfg = TrackerConfig {
            max_age: 1,
            min_hits: 1,
            ..TrackerConfig::default()
        };
        let mut tr = Tracker::new(cfg).unwrap();
        let mut seen = Vec::new();
        for i in 0..60u64 {
            // a box that appears for 3 frames, vanishes for 3, at a new spot each time
            let phase = i / 6;
            let boxes = if i % 6 < 3 {
                vec![bx(100.0 + 150.0 * (phase % 4) as f64, 200.0, 60.0, 60.0)]
            } else {
                vec![]
            };
            for o in tr.step(&frame(i, &boxes)) {
                if seen.last() != Some(&o.track_id) {
                    assert!(!seen.contains(&o.track_id), "id {} reused", o.track_id);
                    seen.push(o.track_id);
                }
            }
        }
        assert_eq!(seen.len(), 10);
    }

    #[test]
    fn min_hits_gates_late_tracks() {
        let mut tr = Tracker::new(TrackerConfig::default()).unwrap();
        let a = bx(200.0, 200.0, 80.0, 80.0);
        let b = bx(600.0, 200.0, 80.0, 80.0);
        for i in 0..10 {
            tr.step(&frame(i, &[a]));
        }
        // b appears after warm-up: reported from its third consecutive hit on
        // (the birth frame itself is not a hit)
        let mut reported = Vec::new();
        for i in 10..16 {
            let out = tr.step(&frame(i, &[a, b]));
            reported.push(out.iter().any(|o| o.track_id == 2));
        }
        assert_eq!(reported, vec![false, false, false, true, true, true]);
    }

    #[test]
    fn crossing_boxes_keep_identity() {
        // two hands crossing horizontally with a vertical offset
        let mut tr = Tracker::new(TrackerConfig::default()).unwrap();
        let mut id_of = [None, None];
        for i in 0..120u64 {
            let t = i as f64;
            let a = bx(100.0 + 4.0 * t, 300.0, 80.0, 80.0);
            let b = bx(580.0 - 4.0 * t, 340.0, 80.0, 80.0);
            let out = tr.step(&frame(i, &[a, b]));
            for o in out {
                let truth = o.det_index;
                match id_of[truth] {
                    None => id_of[truth] = Some(o.track_id),
                    Some(id) => assert_eq!(id, o.track_id, "identity switch at frame {i}"),
                }
            }
        }
        assert!(id_of[0].is_some() && id_of[1].is_some());
        assert_ne!(id_of[0], id_of[1]);
    }

    #[test]
    fn near_zero_noise_reproduces_detections() {
        // with measurement noise -> 0 the posterior collapses onto the measurement
        let cfg = TrackerConfig {
            measurement_noise: 1e-12,
            ..TrackerConfig::default()
        };
        let mut tr = Tracker::new(cfg).unwrap();
        for i in 0..50u64 {
            let t = i as f64;
            let b = bx(150.0 + 3.0 * t + (t * 0.3).sin() * 5.0, 200.0 + t, 60.0 + t * 0.2, 70.0);
            for o in tr.step(&frame(i, &[b])) {
                for (got, want) in o.bbox.as_array().iter().zip(b.as_array()) {
                    assert!((got - want).abs() < 1e-6 * want.max(1.0), "{got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn converges_to_least_squares_line() {
        // noiseless constant velocity: filter estimate must meet the exact
        // straight-line fit of the measurements once the transient has decayed
        let mut tr = Tracker::new(TrackerConfig::default()).unwrap();
        let (x0, y0, vx, vy) = (100.0, 120.0, 2.5, 1.25);
        let n = 400u64;
        let mut centers = Vec::new();
        for i in 0..n {
            let t = i as f64;
            let b = bx(x0 + vx * t, y0 + vy * t, 60.0, 80.0);
            let out = tr.step(&frame(i, &[b]));
            centers.push((t, out[0].bbox.centroid()));
        }
        // least-squares fit of x(t), y(t) over all measurements
        let fit = |vals: &[(f64, f64)]| {
            let n = vals.len() as f64;
            let mt = vals.iter().map(|v| v.0).sum::<f64>() / n;
            let my = vals.iter().map(|v| v.1).sum::<f64>() / n;
            let sxy: f64 = vals.iter().map(|v| (v.0 - mt) * (v.1 - my)).sum();
            let sxx: f64 = vals.iter().map(|v| (v.0 - mt) * (v.0 - mt)).sum();
            let slope = sxy / sxx;
            (my - slope * mt, slope)
        };
        let meas_x: Vec<(f64, f64)> = (0..n).map(|i| (i as f64, x0 + vx * i as f64)).collect();
        let meas_y: Vec<(f64, f64)> = (0..n).map(|i| (i as f64, y0 + vy * i as f64)).collect();
        let (ax, bx_) = fit(&meas_x);
        let (ay, by) = fit(&meas_y);
        for &(t, c) in centers.iter().skip(200) {
            assert!((c.x - (ax + bx_ * t)).abs() < 1e-6, "x at {t}: {}", c.x - (ax + bx_ * t));
            assert!((c.y - (ay + by * t)).abs() < 1e-6);
        }
    }
}
