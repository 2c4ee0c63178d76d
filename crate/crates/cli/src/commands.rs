use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use surgscope::evaluation::{evaluate, EvalConfig, EvalTask};
use surgscope::harness::{
    bench as run_bench, bench_stream, run_pipeline, skill_cohort, synth_generate, write_synth, BenchConfig,
    LdaSummary, RunConfig, SynthSpec,
};
use surgscope::kinematics::{extract_clip, load_clip_specs, summarize_clip, write_summary_csv, KinematicOptions};
use surgscope::signatures::{
    build_signature, feature_matrix, featurize_cohort, filter_videos, lda_fit, lda_project, load_catalog,
    procedure_sequences, read_features_csv, separation, write_features_csv, write_projection_csv,
    write_signature_csv, write_weights_csv, zscore, ActionSequence, FilterRule, SignatureOptions, ToolSequence,
    DEFAULT_RESOLUTION_S, FEATURE_NAMES,
};
use surgscope::stream::{load_streams, parse_stream};
use surgscope::tracker::{load_tracks, save_tracks, track_stream, TrackerConfig};
use surgscope::{Error, Result};

use crate::args::*;

fn require<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::Config(format!("--{flag} is required")))
}

/// Parse a flag value through its serde name, e.g. `per_frame`.
fn enum_value<T: DeserializeOwned>(s: &str, flag: &str) -> Result<T> {
    serde_json::from_value(Value::String(s.to_string()))
        .map_err(|_| Error::Config(format!("--{flag}: unrecognized value {s:?}")))
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn create(p: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?))
}

/// Pretty JSON to `out`, or stdout.
fn emit<T: Serialize>(v: &T, out: Option<&PathBuf>) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    match out {
        Some(p) => fs::write(p, s).map_err(|e| Error::io(p, e)),
        None => std::io::stdout()
            .write_all(s.as_bytes())
            .map_err(|e| Error::io("stdout", e)),
    }
}

fn read_json<T: DeserializeOwned>(p: &Path) -> Result<T> {
    let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn from_spec<T: DeserializeOwned + Default>(spec: &Option<Value>) -> Result<T> {
    match spec {
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("spec: {e}"))),
        None => Ok(T::default()),
    }
}

fn tracker_config(a: &TrackerArgs, mut c: TrackerConfig) -> TrackerConfig {
    if let Some(v) = a.iou_threshold {
        c.iou_threshold = v;
    }
    if let Some(v) = a.max_age {
        c.max_age = v;
    }
    if let Some(v) = a.min_hits {
        c.min_hits = v;
    }
    if let Some(v) = a.process_noise {
        c.process_noise = v;
    }
    if let Some(v) = a.measurement_noise {
        c.measurement_noise = v;
    }
    c
}

fn apply_corruption(a: &CorruptionArgs, spec: &mut SynthSpec) {
    let c = &mut spec.corruption;
    if let Some(v) = a.dropout {
        c.dropout = v;
    }
    if let Some(v) = a.jitter_px {
        c.jitter_px = v;
    }
    if let Some(v) = a.confidence_mean {
        c.confidence_mean = v;
    }
    if let Some(v) = a.confidence_sd {
        c.confidence_sd = v;
    }
    if let Some(v) = a.action_flip {
        c.action_flip = v;
    }
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let out = require(&a.out, "out")?;
    let mut spec: SynthSpec = from_spec(&a.spec)?;
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    if let Some(v) = a.fps {
        spec.fps = v;
    }
    if let Some(v) = a.videos_per_class {
        spec.procedures.videos_per_class = v;
    }
    if let Some(v) = a.operators_per_group {
        spec.skill.operators_per_group = v;
    }
    if let Some(v) = a.clips_per_operator {
        spec.skill.clips_per_operator = v;
    }
    apply_corruption(&a.corruption, &mut spec);
    let generated = synth_generate(&spec)?;
    write_synth(&generated, &spec, out)?;
    emit(
        &json!({
            "out": out,
            "procedure_videos": generated.procedures.len(),
            "skill_videos": generated.skill.len(),
        }),
        None,
    )
}

pub fn track(a: &TrackArgs) -> Result<()> {
    let input = require(&a.input, "input")?;
    let out = require(&a.out, "out")?;
    let cfg = tracker_config(&a.tracker, TrackerConfig::default());
    cfg.validate()?;
    create_dir(out)?;
    let streams = load_streams(input)?;
    let mut written = Vec::new();
    for s in &streams {
        let t = track_stream(s, &cfg)?;
        let path = out.join(format!("{}.jsonl", s.video_id));
        save_tracks(&t, &path)?;
        written.push(path);
    }
    emit(&json!({ "tracked": written }), None)
}

fn jsonl_files(p: &Path) -> Result<Vec<PathBuf>> {
    if !p.is_dir() {
        return Ok(vec![p.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(p)
        .map_err(|e| Error::io(p, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|f| f.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn skill(a: &SkillArgs) -> Result<()> {
    let tracks_path = require(&a.tracks, "tracks")?;
    let clips_path = require(&a.clips, "clips")?;
    let out = require(&a.out, "out")?;
    let mut opts = KinematicOptions::default();
    if let Some(n) = &a.normalization {
        opts.normalization = enum_value(n, "normalization")?;
    }
    if let Some(v) = a.max_pose_gap_s {
        opts.max_pose_gap_s = v;
    }
    let mut tracks = BTreeMap::new();
    for f in jsonl_files(tracks_path)? {
        let t = load_tracks(&f)?;
        tracks.insert(t.video_id.clone(), t);
    }
    let clips = load_clip_specs(clips_path)?;
    let summaries = clips
        .iter()
        .map(|c| {
            let t = tracks
                .get(&c.video_id)
                .ok_or_else(|| Error::Config(format!("clip {}: no tracks for video {}", c.clip_id, c.video_id)))?;
            summarize_clip(&extract_clip(t, c)?, t.fps, &opts)
        })
        .collect::<Result<Vec<_>>>()?;
    create_dir(out)?;
    write_summary_csv(&summaries, create(&out.join("skill_summary.csv"))?)?;
    emit(&skill_cohort(&summaries), Some(&out.join("skill.json")))
}

type Cohort = BTreeMap<String, Vec<(ActionSequence, ToolSequence)>>;

/// Background-excised sequences grouped by class. Without a class map every
/// video falls in class `all`.
fn cohort(a: &CohortArgs) -> Result<Cohort> {
    let input = require(&a.input, "input")?;
    let resolution = a.resolution_s.unwrap_or(DEFAULT_RESOLUTION_S);
    let class_map: Option<BTreeMap<String, String>> = a.class_map.as_deref().map(read_json).transpose()?;
    let mut out = Cohort::new();
    for s in load_streams(input)? {
        let class = match &class_map {
            None => "all".to_string(),
            Some(m) => match m.get(&s.video_id) {
                Some(c) => c.clone(),
                None => {
                    tracing::warn!(video = %s.video_id, "not in class map; skipped");
                    continue;
                }
            },
        };
        out.entry(class).or_default().push(procedure_sequences(&s, resolution)?);
    }
    if out.is_empty() {
        return Err(Error::Empty("no procedure streams".into()));
    }
    Ok(out)
}

pub fn signature(a: &SignatureArgs) -> Result<()> {
    let out = require(&a.out, "out")?;
    let mut opts = SignatureOptions::default();
    if let Some(g) = a.grid {
        opts.grid = g;
    }
    if let Some(w) = a.window {
        opts.window = w;
    }
    opts.validate()?;
    let sigs = cohort(&a.cohort)?
        .into_iter()
        .map(|(class, seqs)| {
            let (acts, tools): (Vec<_>, Vec<_>) = seqs.into_iter().unzip();
            Ok((class, build_signature(&acts, &tools, &opts)?))
        })
        .collect::<Result<Vec<_>>>()?;
    write_signature_csv(create(out)?, &sigs)
}

pub fn featurize(a: &FeaturizeArgs) -> Result<()> {
    let out = require(&a.out, "out")?;
    let labelled = a.cohort.class_map.is_some();
    let mut class_of = BTreeMap::new();
    let mut seqs = Vec::new();
    for (class, v) in cohort(&a.cohort)? {
        for pair in v {
            class_of.insert(pair.0.video_id.clone(), class.clone());
            seqs.push(pair);
        }
    }
    // tool min-max normalization spans the whole cohort
    let mut features = featurize_cohort(&seqs)?;
    if labelled {
        for f in &mut features {
            f.label = class_of.get(&f.video_id).cloned();
        }
    }
    write_features_csv(create(out)?, &features)
}

pub fn lda(a: &LdaArgs) -> Result<()> {
    let path = require(&a.features, "features")?;
    let out = require(&a.out, "out")?;
    let features = read_features_csv(File::open(path).map_err(|e| Error::io(path, e))?)?;
    let labels = features
        .iter()
        .map(|f| {
            f.label
                .clone()
                .ok_or_else(|| Error::Config(format!("{}: feature row has no label", f.video_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let ids: Vec<String> = features.iter().map(|f| f.video_id.clone()).collect();
    let z = zscore(&feature_matrix(&features))?;
    let model = lda_fit(&z.values, &labels)?;
    let points = lda_project(&model, &z.values)?;
    create_dir(out)?;
    write_projection_csv(create(&out.join("projection.csv"))?, &ids, &labels, &points)?;
    write_weights_csv(create(&out.join("lda_weights.csv"))?, &FEATURE_NAMES, &model)?;
    let summary = LdaSummary {
        classes: model.classes.clone(),
        samples: features.len(),
        eigenvalues: model.eigenvalues.clone(),
        separation: separation(&points, &labels)?,
        constant_features: z.constant.iter().map(|&j| FEATURE_NAMES[j].to_string()).collect(),
    };
    emit(&summary, Some(&out.join("lda.json")))
}

pub fn filter(a: &FilterArgs) -> Result<()> {
    let catalog = load_catalog(require(&a.catalog, "catalog")?)?;
    let rule = match (&a.rule, &a.rule_file) {
        (Some(name), None) => FilterRule::builtin(name)?,
        (None, Some(p)) => read_json(p)?,
        _ => return Err(Error::Config("give exactly one of --rule and --rule-file".into())),
    };
    let ids = filter_videos(&catalog, &rule);
    emit(&json!({ "rule": rule.name, "selected": ids }), a.out.as_ref())
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let pred = load_streams(require(&a.pred, "pred")?)?;
    let truth = load_streams(require(&a.truth, "truth")?)?;
    let tasks: Vec<EvalTask> = match &a.tasks {
        Some(ts) => ts.iter().map(|t| enum_value(t.trim(), "tasks")).collect::<Result<_>>()?,
        None => vec![EvalTask::Actions, EvalTask::Boxes, EvalTask::Keypoints],
    };
    let mut cfg = EvalConfig::default();
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = a.iou_threshold {
        cfg.iou_threshold = v;
    }
    if let Some(r) = &a.reference {
        cfg.reference = enum_value(r, "reference")?;
    }
    if let Some(v) = a.action_resolution_s {
        cfg.action_resolution_s = v;
    }
    emit(&evaluate(&pred, &truth, &tasks, &cfg)?, a.out.as_ref())
}

pub fn bench(a: &BenchArgs) -> Result<()> {
    let stream = match &a.input {
        Some(p) => parse_stream(p)?,
        None => bench_stream(a.seed.unwrap_or(7), a.duration_s.unwrap_or(1800.0), a.fps.unwrap_or(30.0))?,
    };
    let cfg = BenchConfig {
        window_s: a.window_s.unwrap_or(5.0),
        tracker: tracker_config(&a.tracker, TrackerConfig::default()),
    };
    if !(cfg.window_s > 0.0) {
        return Err(Error::Config("--window-s must be > 0".into()));
    }
    emit(&run_bench(&stream, &cfg)?, a.out.as_ref())
}

pub fn run(a: &RunArgs) -> Result<()> {
    let out = require(&a.out, "out")?;
    let mut cfg: RunConfig = from_spec(&a.spec)?;
    if let Some(v) = a.seed {
        cfg.synth.seed = v;
    }
    if let Some(v) = a.resolution_s {
        cfg.resolution_s = v;
    }
    apply_corruption(&a.corruption, &mut cfg.synth);
    cfg.tracker = tracker_config(&a.tracker, cfg.tracker);
    let report = run_pipeline(&cfg, out)?;
    emit(
        &json!({
            "out": out,
            "skill": report.skill,
            "opening_cutting": report.opening_cutting,
            "lda_separation": report.lda.separation,
            "id_switches": report.tracking.id_switches,
            "truth_recovery": report.truth_recovery,
        }),
        None,
    )
}
