//! Seeded synthetic cohorts with known ground truth.
//!
//! Two kinds of video are produced. Procedure videos carry action labels and
//! tool detections drawn from per-class phase templates. Skill videos carry
//! two hands following waypoint paths of a chosen length in hand-lengths,
//! with 21 keypoints each. Every video is written twice: a clean truth stream
//! and a corrupted detector-like stream.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson, WeightedIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{ClipSpec, Experience};
use crate::signatures::CatalogEntry;
use crate::stream::{
    kp, save_stream, Action, BBox, Category, Detection, FrameRecord, HandKeypoints, Keypoint, Metadata, Point,
    VideoStream, NUM_KEYPOINTS,
};

/// Detector-like perturbation of a clean stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Corruption {
    /// Probability that a detection (and its keypoints) is dropped.
    pub dropout: f64,
    /// Standard deviation in pixels of noise added to box corners and keypoints.
    pub jitter_px: f64,
    pub confidence_mean: f64,
    pub confidence_sd: f64,
    /// Probability that a frame's action label is replaced by another.
    pub action_flip: f64,
}

impl Default for Corruption {
    fn default() -> Self {
        Self {
            dropout: 0.0,
            jitter_px: 0.0,
            confidence_mean: 1.0,
            confidence_sd: 0.0,
            action_flip: 0.0,
        }
    }
}

impl Corruption {
    pub fn is_identity(&self) -> bool {
        self.dropout == 0.0
            && self.jitter_px == 0.0
            && self.confidence_mean == 1.0
            && self.confidence_sd == 0.0
            && self.action_flip == 0.0
    }

    fn validate(&self) -> Result<()> {
        for (name, p) in [("dropout", self.dropout), ("action_flip", self.action_flip), ("confidence_mean", self.confidence_mean)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("corruption.{name} must be in [0, 1]")));
            }
        }
        for (name, s) in [("jitter_px", self.jitter_px), ("confidence_sd", self.confidence_sd)] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::Config(format!("corruption.{name} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// A stretch of a procedure with its own action and tool statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    /// Relative duration.
    pub weight: f64,
    /// Action probabilities in cutting, tying, suturing, background order.
    pub actions: [f64; 4],
    /// Mean per-frame count of each tool class.
    pub tools: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcedureClass {
    pub name: String,
    pub phases: Vec<Phase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProcedureCohort {
    pub videos_per_class: usize,
    /// Frame rate of procedure videos, which only carry labels and tools.
    pub fps: f64,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    /// Leading fraction of every procedure labelled cutting.
    pub opening_cut_fraction: f64,
    /// Mean length of a constant-label segment.
    pub mean_segment_s: f64,
    pub classes: Vec<ProcedureClass>,
}

fn phase(weight: f64, actions: [f64; 4], tools: [f64; 3]) -> Phase {
    Phase { weight, actions, tools }
}

impl Default for ProcedureCohort {
    fn default() -> Self {
        Self {
            videos_per_class: 30,
            fps: 1.0,
            min_duration_s: 240.0,
            max_duration_s: 720.0,
            opening_cut_fraction: 0.08,
            mean_segment_s: 20.0,
            classes: vec![
                ProcedureClass {
                    name: "appendectomy".into(),
                    phases: vec![
                        phase(0.25, [0.85, 0.0, 0.05, 0.1], [1.0, 0.1, 0.8]),
                        phase(0.3, [0.15, 0.7, 0.05, 0.1], [0.2, 0.9, 0.6]),
                        phase(0.45, [0.1, 0.15, 0.65, 0.1], [0.1, 1.0, 0.5]),
                    ],
                },
                ProcedureClass {
                    name: "pilonidal".into(),
                    phases: vec![
                        phase(0.5, [0.85, 0.0, 0.05, 0.1], [1.5, 0.1, 0.4]),
                        phase(0.5, [0.3, 0.1, 0.5, 0.1], [0.8, 0.6, 1.4]),
                    ],
                },
                ProcedureClass {
                    name: "thyroidectomy".into(),
                    phases: vec![
                        phase(0.6, [0.8, 0.05, 0.05, 0.1], [1.2, 0.1, 1.0]),
                        phase(0.4, [0.1, 0.4, 0.4, 0.1], [0.2, 1.0, 0.3]),
                    ],
                },
            ],
        }
    }
}

/// Motion statistics of one experience group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperienceProfile {
    /// Mean path length per hand per clip, in hand-lengths.
    pub hand_lengths: f64,
    /// Relative standard deviation of an operator's mean around the group mean.
    pub operator_spread: f64,
    /// Relative half-width of the uniform clip-to-clip variation.
    pub clip_spread: f64,
    /// Amplitude in radians of thumb and index articulation.
    pub pose_amplitude: f64,
    pub pose_frequency_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkillCohort {
    pub operators_per_group: usize,
    pub clips_per_operator: usize,
    pub min_clip_s: f64,
    pub max_clip_s: f64,
    pub min_hand_size_px: f64,
    pub max_hand_size_px: f64,
    pub waypoints: usize,
    pub min_knots: u32,
    pub max_knots: u32,
    pub experienced: ExperienceProfile,
    pub trainee: ExperienceProfile,
}

impl Default for SkillCohort {
    fn default() -> Self {
        Self {
            operators_per_group: 7,
            clips_per_operator: 8,
            min_clip_s: 10.0,
            max_clip_s: 20.0,
            min_hand_size_px: 80.0,
            max_hand_size_px: 120.0,
            waypoints: 8,
            min_knots: 3,
            max_knots: 7,
            experienced: ExperienceProfile {
                hand_lengths: 2.0,
                operator_spread: 0.05,
                clip_spread: 0.15,
                pose_amplitude: 0.08,
                pose_frequency_hz: 0.5,
            },
            trainee: ExperienceProfile {
                hand_lengths: 4.0,
                operator_spread: 0.08,
                clip_spread: 0.3,
                pose_amplitude: 0.2,
                pose_frequency_hz: 0.8,
            },
        }
    }
}

/// Full generator configuration. The seed fixes every output byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    /// Frame rate of skill videos.
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub corruption: Corruption,
    pub procedures: ProcedureCohort,
    pub skill: SkillCohort,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            fps: 30.0,
            width: 1280,
            height: 720,
            corruption: Corruption::default(),
            procedures: ProcedureCohort::default(),
            skill: SkillCohort::default(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        self.corruption.validate()?;
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("fps", self.fps)?;
        if self.width < 400 || self.height < 300 {
            return Err(Error::Config("frame must be at least 400x300".into()));
        }
        let p = &self.procedures;
        positive("procedures.fps", p.fps)?;
        positive("procedures.min_duration_s", p.min_duration_s)?;
        positive("procedures.mean_segment_s", p.mean_segment_s)?;
        if p.max_duration_s < p.min_duration_s {
            return Err(Error::Config("procedures.max_duration_s < min_duration_s".into()));
        }
        if !(0.0..1.0).contains(&p.opening_cut_fraction) {
            return Err(Error::Config("procedures.opening_cut_fraction must be in [0, 1)".into()));
        }
        for c in &p.classes {
            if c.phases.is_empty() {
                return Err(Error::Config(format!("class {} has no phases", c.name)));
            }
            for ph in &c.phases {
                positive("phase.weight", ph.weight)?;
                let bad = |xs: &[f64]| xs.iter().any(|v| !(v.is_finite() && *v >= 0.0));
                if bad(&ph.actions) || ph.actions.iter().sum::<f64>() <= 0.0 || bad(&ph.tools) {
                    return Err(Error::Config(format!("class {}: invalid phase rates", c.name)));
                }
            }
        }
        let s = &self.skill;
        positive("skill.min_clip_s", s.min_clip_s)?;
        positive("skill.min_hand_size_px", s.min_hand_size_px)?;
        if s.max_clip_s < s.min_clip_s || s.max_hand_size_px < s.min_hand_size_px {
            return Err(Error::Config("skill ranges must have max >= min".into()));
        }
        if s.waypoints == 0 || (s.min_clip_s * self.fps) < (s.waypoints + 1) as f64 {
            return Err(Error::Config("skill clips need more frames than waypoints".into()));
        }
        if s.min_knots == 0 || s.max_knots < s.min_knots {
            return Err(Error::Config("skill knot range is invalid".into()));
        }
        for prof in [&s.experienced, &s.trainee] {
            positive("hand_lengths", prof.hand_lengths)?;
            for v in [prof.operator_spread, prof.clip_spread, prof.pose_amplitude, prof.pose_frequency_hz] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::Config("profile spreads and rates must be >= 0".into()));
                }
            }
            if prof.clip_spread >= 1.0 {
                return Err(Error::Config("clip_spread must be < 1".into()));
            }
        }
        // the longest path must fit in a hand's half of the frame
        let half = self.width as f64 / 2.0 - 2.0 * s.max_hand_size_px;
        let seg = s.trainee.hand_lengths.max(s.experienced.hand_lengths) * 2.0 * s.max_hand_size_px
            / s.waypoints as f64;
        if half <= 0.0 || seg > half.min(self.height as f64 - 2.0 * s.max_hand_size_px) / 2.0 {
            return Err(Error::Config("paths do not fit in the frame; add waypoints or enlarge it".into()));
        }
        Ok(())
    }
}

/// Ground truth of one generated hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandTruth {
    /// 1 for the left hand, 2 for the right.
    pub true_id: u64,
    pub side: String,
    /// Sum of straight waypoint-to-waypoint distances in pixels.
    pub path_px: f64,
    pub hand_size_px: f64,
    pub path_hand_lengths: f64,
    /// Clean box `[frame, x0, y0, x1, y1]` per frame.
    pub boxes: Vec<[f64; 5]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sidecar {
    Procedure {
        video_id: String,
        class: String,
        frames: u64,
        /// `(first frame, label)` of every constant-label segment.
        segments: Vec<(u64, Action)>,
    },
    Skill {
        video_id: String,
        operator_id: String,
        experience: Experience,
        knot_count: u32,
        hands: Vec<HandTruth>,
    },
}

/// One generated video.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthVideo {
    pub truth: VideoStream,
    pub observed: VideoStream,
    pub sidecar: Sidecar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub procedures: Vec<SynthVideo>,
    pub skill: Vec<SynthVideo>,
    pub clips: Vec<ClipSpec>,
    pub class_map: BTreeMap<String, String>,
    pub catalog: Vec<CatalogEntry>,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Generate every video of the spec. Each video draws from its own RNG
/// stream, so output does not depend on scheduling.
pub fn synth_generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let pc = &spec.procedures;
    let proc_jobs: Vec<(usize, usize)> = (0..pc.classes.len())
        .flat_map(|c| (0..pc.videos_per_class).map(move |k| (c, k)))
        .collect();
    let procedures: Vec<SynthVideo> = proc_jobs
        .par_iter()
        .enumerate()
        .map(|(job, &(c, k))| {
            let mut rng = rng_for(spec.seed, job as u64);
            procedure_video(spec, &pc.classes[c], k, &mut rng)
        })
        .collect::<Result<_>>()?;

    let sc = &spec.skill;
    let mut skill_jobs = Vec::new();
    for (g, exp) in [Experience::Experienced, Experience::Trainee].into_iter().enumerate() {
        for op in 0..sc.operators_per_group {
            for clip in 0..sc.clips_per_operator {
                skill_jobs.push((g, exp, op, clip));
            }
        }
    }
    // operator means come from a separate stream so they do not depend on clip count
    let mut op_rng = rng_for(spec.seed, 1 << 40);
    let mut op_factor: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (g, exp) in [Experience::Experienced, Experience::Trainee].into_iter().enumerate() {
        let prof = profile(sc, exp);
        for op in 0..sc.operators_per_group {
            let f = if prof.operator_spread > 0.0 {
                Normal::new(1.0, prof.operator_spread).expect("sd >= 0").sample(&mut op_rng)
            } else {
                1.0
            };
            op_factor.insert((g, op), f.clamp(0.5, 1.5));
        }
    }
    let skill: Vec<SynthVideo> = skill_jobs
        .par_iter()
        .enumerate()
        .map(|(job, &(g, exp, op, clip))| {
            let mut rng = rng_for(spec.seed, (1 << 32) + job as u64);
            skill_video(spec, exp, op, clip, op_factor[&(g, op)], &mut rng)
        })
        .collect::<Result<_>>()?;

    let clips = skill
        .iter()
        .map(|v| match &v.sidecar {
            Sidecar::Skill {
                video_id,
                operator_id,
                experience,
                knot_count,
                ..
            } => ClipSpec {
                clip_id: video_id.clone(),
                video_id: video_id.clone(),
                start: 0,
                end: v.truth.frames.last().map_or(0, |f| f.frame_index),
                operator_id: operator_id.clone(),
                experience: *experience,
                knot_count: *knot_count,
                left_track: None,
                right_track: None,
            },
            Sidecar::Procedure { .. } => unreachable!("skill list holds skill videos"),
        })
        .collect();
    let mut class_map = BTreeMap::new();
    let mut catalog = Vec::new();
    for v in &procedures {
        if let Sidecar::Procedure { video_id, class, .. } = &v.sidecar {
            class_map.insert(video_id.clone(), class.clone());
            catalog.push(CatalogEntry {
                video_id: video_id.clone(),
                metadata: v.truth.metadata.clone().unwrap_or_default(),
            });
        }
    }
    Ok(SynthOutput {
        procedures,
        skill,
        clips,
        class_map,
        catalog,
    })
}

fn profile(sc: &SkillCohort, exp: Experience) -> &ExperienceProfile {
    match exp {
        Experience::Experienced => &sc.experienced,
        Experience::Trainee => &sc.trainee,
    }
}

/// Catalog text for a procedure class; unknown classes get neutral text.
fn describe(class: &str, rng: &mut ChaCha8Rng) -> (String, Vec<String>, Vec<String>) {
    let pick = |rng: &mut ChaCha8Rng, xs: &[&str]| xs[rng.gen_range(0..xs.len())].to_string();
    match class {
        "appendectomy" => (
            pick(rng, &["Open appendectomy", "Appendectomy in a child", "Classic open appendectomy technique"]),
            vec!["appendectomy".into()],
            vec!["Appendectomy".into(), "Appendix".into()],
        ),
        "pilonidal" => (
            pick(rng, &["Karydakis flap for pilonidal sinus", "Pilonidal sinus rhomboid flap", "Limberg flap pilonidal"]),
            vec!["pilonidal cystectomy".into()],
            vec!["Surgical Flaps".into(), "Pilonidal Sinus".into()],
        ),
        "thyroidectomy" => (
            pick(rng, &["Total thyroidectomy", "Open hemithyroidectomy", "Thyroid lobectomy"]),
            vec!["thyroidectomy".into()],
            vec!["Thyroid Gland".into(), "Thyroidectomy".into()],
        ),
        other => (format!("{other} procedure"), vec![other.into()], vec![other.into()]),
    }
}

fn procedure_video(spec: &SynthSpec, class: &ProcedureClass, k: usize, rng: &mut ChaCha8Rng) -> Result<SynthVideo> {
    let pc = &spec.procedures;
    let video_id = format!("{}-{:03}", class.name, k);
    let duration = rng.gen_range(pc.min_duration_s..=pc.max_duration_s);
    let n = ((duration * pc.fps).round() as u64).max(4);

    // phase boundaries in frames
    let raw: Vec<f64> = class.phases.iter().map(|p| p.weight * rng.gen_range(0.8..1.2)).collect();
    let total: f64 = raw.iter().sum();
    let mut ends = Vec::with_capacity(raw.len());
    let mut acc = 0.0;
    for w in &raw {
        acc += w / total;
        ends.push(((acc * n as f64).round() as u64).min(n));
    }
    *ends.last_mut().expect("phases non-empty") = n;
    let phase_at = |f: u64| ends.iter().position(|&e| f < e).unwrap_or(ends.len() - 1);

    let mut labels = vec![Action::Cutting; n as usize];
    let mut segments = vec![(0u64, Action::Cutting)];
    let opening = ((pc.opening_cut_fraction * n as f64).ceil() as u64).max(1);
    let seg_len = Exp::new(1.0 / (pc.mean_segment_s * pc.fps)).expect("rate > 0");
    let mut f = opening;
    while f < n {
        let ph = &class.phases[phase_at(f)];
        let a = Action::ALL[WeightedIndex::new(ph.actions).expect("validated").sample(rng)];
        let len = (seg_len.sample(rng).ceil() as u64).max(1);
        let end = (f + len).min(ends[phase_at(f)]).max(f + 1);
        for l in &mut labels[f as usize..end as usize] {
            *l = a;
        }
        if segments.last().map(|s| s.1) != Some(a) {
            segments.push((f, a));
        }
        f = end;
    }

    let (w, h) = (spec.width as f64, spec.height as f64);
    let mut frames = Vec::with_capacity(n as usize);
    for (i, &a) in labels.iter().enumerate() {
        let mut fr = FrameRecord::new(i as u64, pc.fps);
        fr.action = Some(a);
        let ph = &class.phases[phase_at(i as u64)];
        for (c, &mean) in Category::TOOLS.iter().zip(&ph.tools) {
            let count = if mean > 0.0 {
                Poisson::new(mean).expect("mean > 0").sample(rng) as usize
            } else {
                0
            };
            for _ in 0..count.min(4) {
                let (bw, bh) = (rng.gen_range(30.0..90.0), rng.gen_range(30.0..90.0));
                let (x0, y0) = (rng.gen_range(0.0..w - bw), rng.gen_range(0.0..h - bh));
                let b = BBox::new(x0, y0, x0 + bw, y0 + bh)?;
                fr.detections.push(Detection::new(b, *c, 1.0)?);
            }
        }
        frames.push(fr);
    }
    let (title, search, umls) = describe(&class.name, rng);
    let tags = [
        ("quality".to_string(), if rng.gen_bool(0.5) { "high" } else { "low" }.to_string()),
        ("zoom".to_string(), if rng.gen_bool(0.5) { "near" } else { "far" }.to_string()),
    ]
    .into();
    let truth = VideoStream {
        video_id: video_id.clone(),
        fps: pc.fps,
        width: spec.width,
        height: spec.height,
        frames,
        metadata: Some(Metadata {
            title: Some(title),
            search_terms: Some(search),
            umls_tags: Some(umls),
            duration_s: Some(n as f64 / pc.fps),
            tags,
        }),
    };
    let observed = corrupt(&truth, &spec.corruption, rng)?;
    Ok(SynthVideo {
        truth,
        observed,
        sidecar: Sidecar::Procedure {
            video_id,
            class: class.name.clone(),
            frames: n,
            segments,
        },
    })
}

/// Keypoint offsets of a neutral hand in hand-size units, relative to the
/// box center, for the wrist and five 4-point fingers.
fn neutral_offsets() -> [Point; NUM_KEYPOINTS] {
    let mut out = [Point::new(0.0, 0.0); NUM_KEYPOINTS];
    out[kp::PALM] = Point::new(0.0, 0.3);
    let fingers = [kp::THUMB, kp::INDEX, kp::MIDDLE, kp::RING, kp::PINKY];
    for (f, idx) in fingers.iter().enumerate() {
        let angle = -PI / 2.0 + (f as f64 - 2.0) * 0.35;
        for (j, &i) in idx.iter().enumerate() {
            let r = 0.12 * (j + 1) as f64;
            out[i] = Point::new(out[kp::PALM].x + r * angle.cos(), out[kp::PALM].y + r * angle.sin());
        }
    }
    out
}

/// Keypoints of a hand with thumb and index chains rotated by `bend` around the palm.
fn hand_keypoints(center: Point, size: f64, bend: f64, owner: BBox) -> Result<HandKeypoints> {
    let base = neutral_offsets();
    let palm = base[kp::PALM];
    let mut pts = base;
    for (chain, sign) in [(kp::THUMB, 1.0), (kp::INDEX, -1.0)] {
        let (s, c) = (sign * bend).sin_cos();
        for i in chain {
            let d = base[i].sub(palm);
            pts[i] = Point::new(palm.x + d.x * c - d.y * s, palm.y + d.x * s + d.y * c);
        }
    }
    let kps = pts
        .iter()
        .map(|p| Keypoint {
            x: center.x + p.x * size,
            y: center.y + p.y * size,
            visible: true,
        })
        .collect();
    HandKeypoints::new(kps, owner)
}

struct HandPath {
    centers: Vec<Point>,
    path_px: f64,
}

/// Piecewise-linear path of `n` frames through `waypoints + 1` points with
/// total length `length`, confined to `[x0, x1] x [y0, y1]`.
fn waypoint_path(
    n: usize,
    waypoints: usize,
    length: f64,
    region: (f64, f64, f64, f64),
    rng: &mut ChaCha8Rng,
) -> HandPath {
    let (x0, x1, y0, y1) = region;
    let center = Point::new((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    let weights: Vec<f64> = (0..waypoints).map(|_| rng.gen_range(0.5..1.5)).collect();
    let wsum: f64 = weights.iter().sum();
    let lens: Vec<f64> = weights.iter().map(|w| length * w / wsum).collect();

    // integer frame count per segment, at least one each
    let steps = n - 1;
    let mut frames: Vec<usize> = weights.iter().map(|w| ((w / wsum) * steps as f64).floor().max(1.0) as usize).collect();
    let mut assigned: usize = frames.iter().sum();
    let mut i = 0;
    while assigned < steps {
        frames[i % waypoints] += 1;
        assigned += 1;
        i += 1;
    }
    while assigned > steps {
        let j = frames.iter().enumerate().max_by_key(|(_, f)| **f).map(|(j, _)| j).expect("non-empty");
        frames[j] -= 1;
        assigned -= 1;
    }

    let inside = |p: Point| p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
    let mut points = vec![Point::new(
        rng.gen_range(center.x - (x1 - x0) / 6.0..center.x + (x1 - x0) / 6.0),
        rng.gen_range(center.y - (y1 - y0) / 6.0..center.y + (y1 - y0) / 6.0),
    )];
    for &l in &lens {
        let from = *points.last().expect("start point");
        let mut next = None;
        for _ in 0..16 {
            let a: f64 = rng.gen_range(0.0..2.0 * PI);
            let p = Point::new(from.x + l * a.cos(), from.y + l * a.sin());
            if inside(p) {
                next = Some(p);
                break;
            }
        }
        let p = next.unwrap_or_else(|| {
            let d = center.sub(from);
            let norm = d.l2().max(1e-12);
            Point::new(from.x + l * d.x / norm, from.y + l * d.y / norm)
        });
        points.push(p);
    }
    let path_px = points.windows(2).map(|w| w[1].distance(w[0])).sum();

    let mut centers = Vec::with_capacity(n);
    for (s, &m) in frames.iter().enumerate() {
        let (a, b) = (points[s], points[s + 1]);
        for j in 0..m {
            let t = j as f64 / m as f64;
            centers.push(Point::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t));
        }
    }
    centers.push(*points.last().expect("end point"));
    HandPath { centers, path_px }
}

fn skill_video(
    spec: &SynthSpec,
    exp: Experience,
    op: usize,
    clip: usize,
    op_factor: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SynthVideo> {
    let sc = &spec.skill;
    let prof = profile(sc, exp);
    let tag = match exp {
        Experience::Experienced => "exp",
        Experience::Trainee => "trn",
    };
    let operator_id = format!("{tag}{:02}", op + 1);
    let video_id = format!("{operator_id}-clip{:02}", clip + 1);
    let duration = rng.gen_range(sc.min_clip_s..=sc.max_clip_s);
    let n = (duration * spec.fps).round() as usize;
    let knot_count = rng.gen_range(sc.min_knots..=sc.max_knots);
    let targets = [0, 1].map(|_| prof.hand_lengths * op_factor * rng.gen_range(1.0 - prof.clip_spread..=1.0 + prof.clip_spread));
    let hands = generate_hands(spec, n, targets, prof, rng)?;
    let truth = hands_stream(&video_id, spec.fps, spec.width, spec.height, &hands, Action::Tying)?;
    let observed = corrupt(&truth, &spec.corruption, rng)?;
    Ok(SynthVideo {
        truth,
        observed,
        sidecar: Sidecar::Skill {
            video_id,
            operator_id,
            experience: exp,
            knot_count,
            hands: hands.into_iter().map(|h| h.truth).collect(),
        },
    })
}

struct GeneratedHand {
    truth: HandTruth,
    keypoints: Vec<HandKeypoints>,
}

/// Two hands over `n` frames, the left in the left half of the frame and the
/// right in the right half, each travelling `targets[i]` hand-lengths.
fn generate_hands(
    spec: &SynthSpec,
    n: usize,
    targets: [f64; 2],
    prof: &ExperienceProfile,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<GeneratedHand>> {
    let sc = &spec.skill;
    let (w, h) = (spec.width as f64, spec.height as f64);
    let margin = sc.max_hand_size_px;
    let mut out = Vec::with_capacity(2);
    for (i, side) in ["left", "right"].iter().enumerate() {
        let size = rng.gen_range(sc.min_hand_size_px..=sc.max_hand_size_px);
        let aspect = rng.gen_range(-0.1..0.1);
        let (bw, bh) = (size * (1.0 + aspect), size * (1.0 - aspect));
        let region = if i == 0 {
            (margin, w / 2.0 - margin, margin, h - margin)
        } else {
            (w / 2.0 + margin, w - margin, margin, h - margin)
        };
        let path = waypoint_path(n, sc.waypoints, targets[i] * size, region, rng);
        let phase0 = rng.gen_range(0.0..2.0 * PI);
        let mut boxes = Vec::with_capacity(n);
        let mut keypoints = Vec::with_capacity(n);
        for (f, c) in path.centers.iter().enumerate() {
            let b = BBox::new(c.x - bw / 2.0, c.y - bh / 2.0, c.x + bw / 2.0, c.y + bh / 2.0)?;
            let t = f as f64 / spec.fps;
            let bend = prof.pose_amplitude * (2.0 * PI * prof.pose_frequency_hz * t + phase0).sin();
            keypoints.push(hand_keypoints(*c, size, bend, b)?);
            let [x0, y0, x1, y1] = b.as_array();
            boxes.push([f as f64, x0, y0, x1, y1]);
        }
        out.push(GeneratedHand {
            truth: HandTruth {
                true_id: i as u64 + 1,
                side: side.to_string(),
                path_px: path.path_px,
                hand_size_px: size,
                path_hand_lengths: path.path_px / size,
                boxes,
            },
            keypoints,
        });
    }
    Ok(out)
}

fn hands_stream(
    video_id: &str,
    fps: f64,
    width: u32,
    height: u32,
    hands: &[GeneratedHand],
    action: Action,
) -> Result<VideoStream> {
    let n = hands[0].truth.boxes.len();
    let mut frames = Vec::with_capacity(n);
    for f in 0..n {
        let mut fr = FrameRecord::new(f as u64, fps);
        fr.action = Some(action);
        for hnd in hands {
            let [_, x0, y0, x1, y1] = hnd.truth.boxes[f];
            fr.detections.push(Detection::new(BBox::new(x0, y0, x1, y1)?, Category::Hand, 1.0)?);
            fr.keypoints.push(hnd.keypoints[f].clone());
        }
        frames.push(fr);
    }
    Ok(VideoStream {
        video_id: video_id.into(),
        fps,
        width,
        height,
        frames,
        metadata: Some(Metadata {
            duration_s: Some(n as f64 / fps),
            ..Default::default()
        }),
    })
}

/// Apply detector-like noise. The identity corruption returns an exact copy.
pub fn corrupt(truth: &VideoStream, c: &Corruption, rng: &mut ChaCha8Rng) -> Result<VideoStream> {
    if c.is_identity() {
        return Ok(truth.clone());
    }
    let jitter = Normal::new(0.0, c.jitter_px).map_err(|e| Error::Config(e.to_string()))?;
    let conf = Normal::new(c.confidence_mean, c.confidence_sd).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = truth.clone();
    for f in &mut out.frames {
        let mut dets = Vec::with_capacity(f.detections.len());
        let mut kps = Vec::with_capacity(f.keypoints.len());
        for d in &f.detections {
            if rng.gen_bool(c.dropout) {
                continue;
            }
            let owned = f.keypoints.iter().find(|k| k.owner_box == d.bbox);
            let [x0, y0, x1, y1] = d.bbox.as_array();
            let mut j = || if c.jitter_px > 0.0 { jitter.sample(rng) } else { 0.0 };
            let (nx0, ny0) = ((x0 + j()).max(0.0), (y0 + j()).max(0.0));
            let (nx1, ny1) = ((x1 + j()).max(nx0 + 1.0), (y1 + j()).max(ny0 + 1.0));
            let b = BBox::new(nx0, ny0, nx1, ny1)?;
            let confidence = conf.sample(rng).clamp(0.0, 1.0);
            dets.push(Detection::new(b, d.category, confidence)?);
            if let Some(k) = owned {
                let pts = k
                    .points()
                    .iter()
                    .map(|p| {
                        let (dx, dy) = if c.jitter_px > 0.0 { (jitter.sample(rng), jitter.sample(rng)) } else { (0.0, 0.0) };
                        Keypoint {
                            x: p.x + dx,
                            y: p.y + dy,
                            visible: p.visible,
                        }
                    })
                    .collect();
                kps.push(HandKeypoints::new(pts, b)?);
            }
        }
        f.detections = dets;
        f.keypoints = kps;
        if let Some(a) = f.action {
            if rng.gen_bool(c.action_flip) {
                let others: Vec<Action> = Action::ALL.into_iter().filter(|x| *x != a).collect();
                f.action = Some(others[rng.gen_range(0..others.len())]);
            }
        }
    }
    Ok(out)
}

/// A long two-hand stream with procedure-like actions and tools, for
/// throughput measurement.
pub fn bench_stream(seed: u64, duration_s: f64, fps: f64) -> Result<VideoStream> {
    if !(duration_s > 0.0 && fps > 0.0) {
        return Err(Error::Config("duration and fps must be > 0".into()));
    }
    let mut spec = SynthSpec {
        seed,
        fps,
        ..Default::default()
    };
    let n = (duration_s * fps).round().max(2.0) as usize;
    // keep segment lengths at the default cohort's scale
    let waypoints = (n / (10.0 * fps).ceil() as usize).clamp(1, n - 1);
    spec.skill.waypoints = waypoints;
    let mut rng = rng_for(seed, 1 << 48);
    let prof = spec.skill.trainee.clone();
    let length = prof.hand_lengths * waypoints as f64 / SkillCohort::default().waypoints as f64;
    let hands = generate_hands(&spec, n, [length, length], &prof, &mut rng)?;
    let mut stream = hands_stream("bench", fps, spec.width, spec.height, &hands, Action::Background)?;
    let class = spec.procedures.classes[0].clone();
    let mut proc_spec = spec.procedures.clone();
    proc_spec.fps = fps;
    proc_spec.min_duration_s = duration_s;
    proc_spec.max_duration_s = duration_s;
    spec.procedures = proc_spec;
    let labelled = procedure_video(&spec, &class, 0, &mut rng)?;
    for (f, p) in stream.frames.iter_mut().zip(&labelled.truth.frames) {
        f.action = p.action;
        f.detections.extend(p.detections.iter().cloned());
    }
    Ok(stream)
}

/// Two hands, one per image half, moving for `frames` frames with the
/// trainee motion profile. Used to score identity preservation.
pub fn two_hand_scenario(seed: u64, frames: usize, fps: f64, corruption: &Corruption) -> Result<SynthVideo> {
    let spec = SynthSpec {
        seed,
        fps,
        corruption: corruption.clone(),
        ..Default::default()
    };
    spec.validate()?;
    if frames < 2 {
        return Err(Error::Config("scenario needs at least 2 frames".into()));
    }
    let mut rng = rng_for(seed, 1 << 44);
    let defaults = SkillCohort::default();
    let mut spec = spec;
    spec.skill.waypoints = (frames / (10.0 * fps).ceil() as usize).clamp(1, frames - 1);
    let prof = spec.skill.trainee.clone();
    let length = prof.hand_lengths * spec.skill.waypoints as f64 / defaults.waypoints as f64;
    let hands = generate_hands(&spec, frames, [length, length], &prof, &mut rng)?;
    let truth = hands_stream("scenario", fps, spec.width, spec.height, &hands, Action::Tying)?;
    let observed = corrupt(&truth, corruption, &mut rng)?;
    Ok(SynthVideo {
        truth,
        observed,
        sidecar: Sidecar::Skill {
            video_id: "scenario".into(),
            operator_id: "scenario".into(),
            experience: Experience::Trainee,
            knot_count: 1,
            hands: hands.into_iter().map(|h| h.truth).collect(),
        },
    })
}

/// Write a generated cohort:
///
/// ```text
/// streams/{procedures,skill}/<id>.jsonl   observed streams
/// truth/{procedures,skill}/<id>.jsonl     clean streams
/// sidecar/<id>.json                       generator ground truth
/// clips.json  class_map.json  catalog.jsonl  spec.json
/// ```
pub fn write_synth(out: &SynthOutput, spec: &SynthSpec, dir: &Path) -> Result<()> {
    for sub in ["streams/procedures", "streams/skill", "truth/procedures", "truth/skill", "sidecar"] {
        fs::create_dir_all(dir.join(sub)).map_err(|e| Error::io(dir.join(sub), e))?;
    }
    let write_json = |path: &Path, v: &dyn erased::Json| -> Result<()> {
        fs::write(path, v.to_pretty()?).map_err(|e| Error::io(path, e))
    };
    for (kind, videos) in [("procedures", &out.procedures), ("skill", &out.skill)] {
        videos.par_iter().try_for_each(|v| -> Result<()> {
            let id = &v.truth.video_id;
            save_stream(&v.observed, dir.join(format!("streams/{kind}/{id}.jsonl")))?;
            save_stream(&v.truth, dir.join(format!("truth/{kind}/{id}.jsonl")))?;
            write_json(&dir.join(format!("sidecar/{id}.json")), &v.sidecar)
        })?;
    }
    write_json(&dir.join("clips.json"), &out.clips)?;
    write_json(&dir.join("class_map.json"), &out.class_map)?;
    write_json(&dir.join("spec.json"), spec)?;
    let mut catalog = String::new();
    for e in &out.catalog {
        catalog.push_str(&serde_json::to_string(e)?);
        catalog.push('\n');
    }
    let path = dir.join("catalog.jsonl");
    fs::write(&path, catalog).map_err(|e| Error::io(path, e))
}

mod erased {
    use serde::Serialize;

    pub trait Json: Sync {
        fn to_pretty(&self) -> crate::error::Result<String>;
    }

    impl<T: Serialize + Sync> Json for T {
        fn to_pretty(&self) -> crate::error::Result<String> {
            let mut s = serde_json::to_string_pretty(self)?;
            s.push('\n');
            Ok(s)
        }
    }
}

pub fn load_sidecar(path: &Path) -> Result<Sidecar> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
