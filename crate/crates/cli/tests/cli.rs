use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn surgscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surgscope"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json_stdout(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A tiny cohort: two videos per procedure class and one clip per operator group.
fn small_synth(dir: &Path) {
    let o = surgscope(&[
        "synth",
        "--out",
        path(dir),
        "--videos-per-class",
        "2",
        "--operators-per-group",
        "1",
        "--clips-per-operator",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&surgscope(&["--help"])), 0);
    assert_eq!(code(&surgscope(&["--version"])), 0);
    assert_eq!(code(&surgscope(&["track", "--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&surgscope(&[])), 1);
    assert_eq!(code(&surgscope(&["track", "--bogus"])), 1);
    assert_eq!(code(&surgscope(&["track"])), 1);
}

#[test]
fn missing_input_exits_one_and_bad_values_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let o = surgscope(&["track", "--input", path(&dir.path().join("absent.jsonl")), "--out", path(&out)]);
    assert_eq!(code(&o), 1);

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(
        &bad,
        "{\"video_id\":\"v\",\"fps\":30}\n{\"frame\":0,\"t\":0.0,\"dets\":[[\"hand\",1.5,0,0,10,10]]}\n",
    )
    .unwrap();
    let o = surgscope(&["track", "--input", path(&bad), "--out", path(&out)]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn config_rejects_unknown_sections_and_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    for body in [r#"{"trak":{}}"#, r#"{"track":{"max_age":3,"wat":1}}"#, r#"[1,2]"#, r#"{"track":[]}"#] {
        std::fs::write(&cfg, body).unwrap();
        let o = surgscope(&["--config", path(&cfg), "track", "--input", "x", "--out", "y"]);
        assert_eq!(code(&o), 1, "{body}");
    }
}

#[test]
fn config_values_apply_and_flags_override_them() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"filter":{"rule":"thyroidectomy","catalog":"missing.jsonl"}}"#).unwrap();
    small_synth(dir.path());
    let catalog = dir.path().join("catalog.jsonl");

    // catalog from the flag, rule from the config
    let o = surgscope(&["--config", path(&cfg), "filter", "--catalog", path(&catalog)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json_stdout(&o);
    assert_eq!(v["rule"], "thyroidectomy");
    assert_eq!(v["selected"].as_array().unwrap().len(), 2);

    let o = surgscope(&["--config", path(&cfg), "filter", "--catalog", path(&catalog), "--rule", "pilonidal"]);
    assert_eq!(json_stdout(&o)["rule"], "pilonidal");

    // config-only: the missing catalog path is used and reported as an input error
    assert_eq!(code(&surgscope(&["--config", path(&cfg), "filter"])), 1);
}

#[test]
fn analysis_chain_over_synthetic_cohort() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_synth(d);
    let p = |s: &str| d.join(s).to_str().unwrap().to_string();

    let o = surgscope(&["track", "--input", &p("streams/skill"), "--out", &p("tracks")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_dir(d.join("tracks")).unwrap().count(), 4);

    let o = surgscope(&["skill", "--tracks", &p("tracks"), "--clips", &p("clips.json"), "--out", &p("skill")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("skill/skill_summary.csv").exists());

    let o = surgscope(&[
        "signature",
        "--input",
        &p("streams/procedures"),
        "--class-map",
        &p("class_map.json"),
        "--out",
        &p("signature.csv"),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let o = surgscope(&[
        "featurize",
        "--input",
        &p("streams/procedures"),
        "--class-map",
        &p("class_map.json"),
        "--out",
        &p("features.csv"),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = std::fs::read_to_string(d.join("features.csv")).unwrap().lines().count();
    assert_eq!(rows, 7);

    let o = surgscope(&["lda", "--features", &p("features.csv"), "--out", &p("lda")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("lda/projection.csv").exists());

    let o = surgscope(&["eval", "--pred", &p("streams/procedures"), "--truth", &p("truth/procedures"), "--tasks", "actions"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json_stdout(&o);
    assert_eq!(v["overall"]["actions"]["accuracy"], 1.0);
}

#[test]
fn bench_reports_budgets() {
    let o = surgscope(&["bench", "--duration-s", "60", "--fps", "30"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json_stdout(&o);
    assert_eq!(v["frames"], 1800);
    assert_eq!(v["frame_within_budget"], true);
}

#[test]
fn run_writes_a_reproducible_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"run":{"seed":3,"spec":{"synth":{"procedures":{"videos_per_class":4},"skill":{"operators_per_group":2,"clips_per_operator":2}}}}}"#,
    )
    .unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = surgscope(&["--config", path(&cfg), "run", "--out", path(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let v = json_stdout(&o);
        assert!(v["lda_separation"]["ratio"].as_f64().unwrap() > 0.0);
    }
    let manifest = |d: &Path| std::fs::read(d.join("manifest.json")).unwrap();
    assert_eq!(manifest(&a), manifest(&b));
    let report: Value = serde_json::from_slice(&std::fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 3);
}
