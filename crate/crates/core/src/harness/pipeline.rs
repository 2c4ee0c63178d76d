//! End-to-end run: generate a cohort, then track, score skill, build
//! signatures and features, project, filter and evaluate, writing one report
//! bundle with a content manifest.
//!
//! Stages exchange immutable values. Per-video work inside a stage runs on
//! the rayon pool and is collected in input order, so the bundle does not
//! depend on thread count.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::synth::{synth_generate, write_synth, HandTruth, Sidecar, SynthSpec, SynthVideo};
use super::tracking_eval::{score_tracking, TrackingScore};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, EvalConfig, EvalTask};
use crate::kinematics::{
    extract_clip, group_centroids, leave_one_out, relative_shifts, summarize_clip, write_summary_csv,
    ClipSummary, Experience, GroupCentroids, KinematicOptions, LeaveOneOut, SkillMetric,
};
use crate::signatures::{
    build_signature, feature_matrix, featurize_cohort, filter_videos, lda_fit, lda_project, procedure_sequences,
    separation, write_features_csv, write_projection_csv, write_signature_csv, write_weights_csv, zscore,
    FeatureVector, FilterRule, Separation, SignatureOptions, FEATURE_NAMES, DEFAULT_RESOLUTION_S,
};
use crate::tracker::{save_tracks, track_stream, TrackedStream, TrackerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub synth: SynthSpec,
    pub tracker: TrackerConfig,
    pub kinematics: KinematicOptions,
    pub signature: SignatureOptions,
    /// Step length of procedure timelines, seconds.
    pub resolution_s: f64,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            synth: SynthSpec::default(),
            tracker: TrackerConfig::default(),
            kinematics: KinematicOptions::default(),
            signature: SignatureOptions::default(),
            resolution_s: DEFAULT_RESOLUTION_S,
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.tracker.validate()?;
        self.signature.validate()?;
        self.eval.validate()?;
        if !(self.resolution_s.is_finite() && self.resolution_s > 0.0) {
            return Err(Error::Config("resolution_s must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupResult {
    pub target_hand_lengths: f64,
    pub clips: usize,
    /// Mean of left and right centroid coordinates.
    pub centroid: f64,
    pub left: f64,
    pub right: f64,
    pub relative_error: f64,
    /// Largest leave-one-operator-out relative centroid shift.
    pub max_loo_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingSummary {
    pub videos: usize,
    pub frames: usize,
    pub id_switches: usize,
    pub misses: usize,
    pub false_positives: usize,
    pub bijections: usize,
    pub per_video: BTreeMap<String, TrackingScore>,
}

/// How closely pipeline outputs recover generator truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecovery {
    /// Skill videos whose tracker produced exactly the true number of tracks.
    pub track_count_matches: usize,
    pub skill_videos: usize,
    /// Largest relative error of per-hand path length against the generator total.
    pub max_path_relative_error: f64,
    /// Largest absolute difference of quartile features between observed and truth streams.
    pub max_quartile_feature_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaSummary {
    pub classes: Vec<String>,
    pub samples: usize,
    pub eigenvalues: Vec<f64>,
    pub separation: Separation,
    pub constant_features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub selected: Vec<String>,
    /// Selected videos whose generating class is the rule's procedure.
    pub correct: usize,
    pub class_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub skill: BTreeMap<Experience, GroupResult>,
    pub tracking: TrackingSummary,
    pub truth_recovery: TruthRecovery,
    /// Cutting probability at normalized time 0 of each class signature.
    pub opening_cutting: BTreeMap<String, f64>,
    pub lda: LdaSummary,
    pub filter: BTreeMap<String, FilterSummary>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn skill_hands(v: &SynthVideo) -> &[HandTruth] {
    match &v.sidecar {
        Sidecar::Skill { hands, .. } => hands,
        Sidecar::Procedure { .. } => &[],
    }
}

/// Run every stage and write the bundle under `out_dir`. Returns the
/// summary that is also written to `report.json`.
pub fn run_pipeline(cfg: &RunConfig, out_dir: &Path) -> Result<RunReport> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let synth = synth_generate(&cfg.synth)?;
    write_synth(&synth, &cfg.synth, &out_dir.join("data"))?;
    write_json(&out_dir.join("config.json"), cfg)?;

    // tracking
    let tracks_dir = out_dir.join("tracks");
    fs::create_dir_all(&tracks_dir).map_err(|e| Error::io(&tracks_dir, e))?;
    let tracked: Vec<TrackedStream> = synth
        .skill
        .par_iter()
        .map(|v| {
            let t = track_stream(&v.observed, &cfg.tracker)?;
            save_tracks(&t, tracks_dir.join(format!("{}.jsonl", t.video_id)))?;
            Ok(t)
        })
        .collect::<Result<_>>()?;
    let scores: Vec<TrackingScore> = synth
        .skill
        .par_iter()
        .zip(&tracked)
        .map(|(v, t)| score_tracking(t, skill_hands(v)))
        .collect::<Result<_>>()?;
    let tracking = TrackingSummary {
        videos: scores.len(),
        frames: scores.iter().map(|s| s.frames).sum(),
        id_switches: scores.iter().map(|s| s.id_switches).sum(),
        misses: scores.iter().map(|s| s.misses).sum(),
        false_positives: scores.iter().map(|s| s.false_positives).sum(),
        bijections: scores.iter().filter(|s| s.bijection).count(),
        per_video: synth
            .skill
            .iter()
            .zip(&scores)
            .map(|(v, s)| (v.truth.video_id.clone(), s.clone()))
            .collect(),
    };
    write_json(&out_dir.join("tracking.json"), &tracking)?;

    // skill
    let summaries: Vec<ClipSummary> = synth
        .clips
        .par_iter()
        .zip(&tracked)
        .map(|(spec, t)| summarize_clip(&extract_clip(t, spec)?, t.fps, &cfg.kinematics))
        .collect::<Result<_>>()?;
    write_summary_csv(&summaries, create(&out_dir.join("skill_summary.csv"))?)?;
    let skill = skill_report(cfg, &summaries, out_dir)?;

    let mut max_path_err: f64 = 0.0;
    for (v, s) in synth.skill.iter().zip(&summaries) {
        for h in skill_hands(v) {
            let got = if h.true_id == 1 { s.left } else { s.right };
            let err = got.map_or(f64::INFINITY, |k| {
                (k.distance_hand_lengths - h.path_hand_lengths).abs() / h.path_hand_lengths
            });
            max_path_err = max_path_err.max(err);
        }
    }
    let track_count_matches = scores
        .iter()
        .zip(&synth.skill)
        .filter(|(s, v)| s.track_count == skill_hands(v).len())
        .count();

    // signatures and features
    let sequences = |observed: bool| -> Result<Vec<_>> {
        synth
            .procedures
            .par_iter()
            .map(|v| procedure_sequences(if observed { &v.observed } else { &v.truth }, cfg.resolution_s))
            .collect()
    };
    let observed_seq = sequences(true)?;
    let truth_seq = sequences(false)?;
    let mut by_class: BTreeMap<&str, (Vec<_>, Vec<_>)> = BTreeMap::new();
    for (a, t) in &observed_seq {
        let class = synth.class_map[&a.video_id].as_str();
        let e = by_class.entry(class).or_default();
        e.0.push(a.clone());
        e.1.push(t.clone());
    }
    let signatures: Vec<(String, _)> = by_class
        .iter()
        .map(|(class, (a, t))| Ok((class.to_string(), build_signature(a, t, &cfg.signature)?)))
        .collect::<Result<_>>()?;
    write_signature_csv(create(&out_dir.join("signature.csv"))?, &signatures)?;
    let opening_cutting = signatures
        .iter()
        .map(|(c, s)| (c.clone(), s.raw.actions[0][0]))
        .collect();

    let label = |mut f: FeatureVector| {
        f.label = Some(synth.class_map[&f.video_id].clone());
        f
    };
    let features: Vec<FeatureVector> = featurize_cohort(&observed_seq)?.into_iter().map(label).collect();
    let truth_features = featurize_cohort(&truth_seq)?;
    write_features_csv(create(&out_dir.join("features.csv"))?, &features)?;
    let truth_by_id: BTreeMap<&str, &FeatureVector> =
        truth_features.iter().map(|f| (f.video_id.as_str(), f)).collect();
    let max_quartile_feature_error = features
        .iter()
        .map(|f| match truth_by_id.get(f.video_id.as_str()) {
            Some(t) => (0..12).map(|j| (f.values[j] - t.values[j]).abs()).fold(0.0, f64::max),
            None => f64::INFINITY,
        })
        .fold(0.0, f64::max);

    // discriminant projection
    let z = zscore(&feature_matrix(&features))?;
    let labels: Vec<String> = features.iter().map(|f| f.label.clone().unwrap_or_default()).collect();
    let ids: Vec<String> = features.iter().map(|f| f.video_id.clone()).collect();
    let model = lda_fit(&z.values, &labels)?;
    let points = lda_project(&model, &z.values)?;
    write_projection_csv(create(&out_dir.join("projection.csv"))?, &ids, &labels, &points)?;
    write_weights_csv(create(&out_dir.join("lda_weights.csv"))?, &FEATURE_NAMES, &model)?;
    let lda = LdaSummary {
        classes: model.classes.clone(),
        samples: features.len(),
        eigenvalues: model.eigenvalues.clone(),
        separation: separation(&points, &labels)?,
        constant_features: z.constant.iter().map(|&j| FEATURE_NAMES[j].to_string()).collect(),
    };

    // catalog filtering
    let mut filter = BTreeMap::new();
    for class in by_class.keys() {
        let Ok(rule) = FilterRule::builtin(class) else {
            continue;
        };
        let selected = filter_videos(&synth.catalog, &rule);
        let correct = selected.iter().filter(|id| synth.class_map.get(*id).map(String::as_str) == Some(class)).count();
        let class_size = synth.class_map.values().filter(|c| c.as_str() == *class).count();
        filter.insert(
            class.to_string(),
            FilterSummary {
                selected,
                correct,
                class_size,
            },
        );
    }
    write_json(&out_dir.join("filter.json"), &filter)?;

    // detector-style evaluation of observed against clean streams
    let (pred, truth): (Vec<_>, Vec<_>) = synth
        .procedures
        .iter()
        .chain(&synth.skill)
        .map(|v| (v.observed.clone(), v.truth.clone()))
        .unzip();
    let metrics = evaluate(&pred, &truth, &[EvalTask::Actions, EvalTask::Boxes, EvalTask::Keypoints], &cfg.eval)?;
    write_json(&out_dir.join("eval.json"), &metrics)?;

    let report = RunReport {
        seed: cfg.synth.seed,
        skill,
        tracking,
        truth_recovery: TruthRecovery {
            track_count_matches,
            skill_videos: synth.skill.len(),
            max_path_relative_error: max_path_err,
            max_quartile_feature_error,
        },
        opening_cutting,
        lda,
        filter,
    };
    write_json(&out_dir.join("report.json"), &report)?;
    write_manifest(out_dir)?;
    Ok(report)
}

/// Group centroids, leave-one-operator-out centroids and their relative
/// shifts for one skill metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCohort {
    pub centroids: GroupCentroids,
    pub leave_one_out: Vec<LeaveOneOut>,
    /// Held-out operator to per-group relative shift.
    pub shifts: BTreeMap<String, BTreeMap<Experience, f64>>,
}

/// Cohort statistics for every skill metric, keyed by metric name.
pub fn skill_cohort(summaries: &[ClipSummary]) -> BTreeMap<String, MetricCohort> {
    SkillMetric::ALL
        .into_iter()
        .map(|metric| {
            let centroids = group_centroids(summaries, metric);
            let leave_one_out = leave_one_out(summaries, metric);
            let shifts = leave_one_out
                .iter()
                .map(|l| (l.held_out_operator.clone(), relative_shifts(&centroids, l)))
                .collect();
            (
                metric.name().to_string(),
                MetricCohort {
                    centroids,
                    leave_one_out,
                    shifts,
                },
            )
        })
        .collect()
}

fn skill_report(
    cfg: &RunConfig,
    summaries: &[ClipSummary],
    out_dir: &Path,
) -> Result<BTreeMap<Experience, GroupResult>> {
    let cohort = skill_cohort(summaries);
    write_json(&out_dir.join("skill.json"), &cohort)?;
    let distance = &cohort[SkillMetric::Distance.name()];
    let mut out = BTreeMap::new();
    for (g, c) in &distance.centroids {
        let target = match g {
            Experience::Experienced => cfg.synth.skill.experienced.hand_lengths,
            Experience::Trainee => cfg.synth.skill.trainee.hand_lengths,
        };
        let centroid = (c.point.x + c.point.y) / 2.0;
        let max_loo_shift = distance
            .shifts
            .values()
            .filter_map(|m| m.get(g))
            .fold(0.0, |a: f64, b| a.max(*b));
        out.insert(
            *g,
            GroupResult {
                target_hand_lengths: target,
                clips: c.members,
                centroid,
                left: c.point.x,
                right: c.point.y,
                relative_error: (centroid - target).abs() / target,
                max_loo_shift,
            },
        );
    }
    Ok(out)
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            out.push(path.strip_prefix(root).expect("path under root").to_path_buf());
        }
    }
    Ok(())
}

/// Write `manifest.json` mapping every other file's relative path to its SHA-256.
pub fn write_manifest(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    let manifest: BTreeMap<String, String> = files
        .par_iter()
        .filter(|p| p.as_path() != Path::new("manifest.json"))
        .map(|p| {
            let bytes = fs::read(dir.join(p)).map_err(|e| Error::io(dir.join(p), e))?;
            let key = p.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            Ok((key, hex::encode(Sha256::digest(&bytes))))
        })
        .collect::<Result<_>>()?;
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}
