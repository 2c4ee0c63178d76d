//! Synthetic cohorts with known ground truth, tracking scoring, the
//! end-to-end pipeline and the streaming latency bench.

pub mod synth;

pub use synth::{
    bench_stream, corrupt, load_sidecar, synth_generate, two_hand_scenario, write_synth, Corruption, ExperienceProfile, HandTruth,
    Phase, ProcedureClass, ProcedureCohort, Sidecar, SkillCohort, SynthOutput, SynthSpec, SynthVideo,
};
pub mod tracking_eval;

pub use tracking_eval::{score_tracking, TrackingScore, MATCH_IOU};
pub mod bench;

pub use bench::{bench, BenchConfig, BenchReport, LatencyStats, FRAME_BUDGET_S, WINDOW_BUDGET_S};
pub mod pipeline;

pub use pipeline::{
    run_pipeline, skill_cohort, write_manifest, FilterSummary, MetricCohort, GroupResult, LdaSummary, RunConfig, RunReport, TrackingSummary,
    TruthRecovery,
};
