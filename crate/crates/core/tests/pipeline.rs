use std::fs;
use std::path::{Path, PathBuf};

use webslr::pipeline::manifest::RunManifest;
use webslr::pipeline::{
    EntryStatus, Pipeline, PipelineError, RunOptions, Stage, LOCK_FILE, PROTOCOL_COPY, RELEVANCE, REPORT_MD,
};
use webslr::protocol::load_protocol;
use webslr::Exec;

fn protocol_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/cloud_api/protocol.toml")
}

fn offline(force: bool) -> RunOptions {
    RunOptions {
        force,
        offline: true,
        exec: Exec::default(),
    }
}

fn open(workdir: &Path, force: bool) -> Pipeline {
    Pipeline::open(&protocol_path(), workdir, offline(force)).unwrap()
}

#[test]
fn stage_without_upstream_output_names_the_dependency() {
    let dir = tempfile::tempdir().unwrap();
    let err = open(dir.path(), false).run_stage(Stage::Select).unwrap_err();
    assert!(matches!(
        err,
        PipelineError::MissingDependency {
            stage: Stage::Select,
            requires: Stage::Fetch
        }
    ));
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("requires stage: fetch"));
}

#[test]
fn rerun_is_up_to_date_and_manifest_only_grows() {
    let dir = tempfile::tempdir().unwrap();
    let first = open(dir.path(), false).run_all().unwrap();
    assert!(first.iter().all(|r| r.status == EntryStatus::Ok));
    let manifest_before = fs::read_to_string(dir.path().join("manifest.jsonl")).unwrap();
    assert!(dir.path().join(PROTOCOL_COPY).is_file());

    let second = open(dir.path(), false).run_all().unwrap();
    assert!(second.iter().all(|r| r.status == EntryStatus::UpToDate));
    let manifest_after = fs::read_to_string(dir.path().join("manifest.jsonl")).unwrap();
    assert!(manifest_after.starts_with(&manifest_before));

    let manifest = RunManifest::open(dir.path()).unwrap();
    assert_eq!(manifest.entries().len(), 2 * Stage::ALL.len());
    let (protocol, _) = load_protocol(&protocol_path()).unwrap();
    for e in manifest.entries() {
        assert_eq!(e.rng_seed, protocol.rng_seed);
        assert_eq!(e.protocol_hash.len(), 64);
    }
    let mine = manifest.latest_success("mine").unwrap();
    assert!(mine.outputs.contains_key("mine/model.json"));
    assert!(mine.inputs.keys().any(|k| k.contains("themes")));
}

#[test]
fn forced_rerun_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    open(dir.path(), false).run_all().unwrap();
    let report = fs::read_to_string(dir.path().join(REPORT_MD)).unwrap();
    let rerun = open(dir.path(), true).run_all().unwrap();
    assert!(rerun.iter().all(|r| r.status == EntryStatus::Ok));
    assert_eq!(fs::read_to_string(dir.path().join(REPORT_MD)).unwrap(), report);
}

#[test]
fn missing_output_triggers_a_rerun() {
    let dir = tempfile::tempdir().unwrap();
    open(dir.path(), false).run_all().unwrap();
    fs::remove_file(dir.path().join(REPORT_MD)).unwrap();
    let report = open(dir.path(), false).run_stage(Stage::Report).unwrap();
    assert_eq!(report.status, EntryStatus::Ok);
    assert!(dir.path().join(REPORT_MD).is_file());
}

#[test]
fn edited_upstream_artifact_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    open(dir.path(), false).run_all().unwrap();
    let path = dir.path().join(RELEVANCE);
    let mut text = fs::read_to_string(&path).unwrap();
    text.push(' ');
    fs::write(&path, text).unwrap();

    let err = open(dir.path(), false).run_stage(Stage::Extract).unwrap_err();
    match &err {
        PipelineError::HashMismatch { stage, producer, artifact } => {
            assert_eq!(*stage, Stage::Extract);
            assert_eq!(*producer, Stage::Select);
            assert_eq!(artifact, RELEVANCE);
        }
        other => panic!("expected a hash mismatch, got {other}"),
    }
    assert_eq!(err.exit_code(), 2);

    let forced = open(dir.path(), true).run_stage(Stage::Extract).unwrap();
    assert_eq!(forced.status, EntryStatus::Ok);
}

#[test]
fn changed_protocol_reruns_stages() {
    let dir = tempfile::tempdir().unwrap();
    open(dir.path(), false).run_all().unwrap();
    let (mut protocol, base) = load_protocol(&protocol_path()).unwrap();
    protocol.mining.min_confidence = 0.9;
    let mut p = Pipeline::with_protocol(protocol, base, dir.path(), offline(false)).unwrap();
    let reports = p.run_all().unwrap();
    let mine = reports.iter().find(|r| r.stage == Stage::Mine).unwrap();
    assert_eq!(mine.status, EntryStatus::Ok);
}

#[test]
fn work_directory_is_locked_while_open() {
    let dir = tempfile::tempdir().unwrap();
    let held = open(dir.path(), false);
    assert!(dir.path().join(LOCK_FILE).exists());
    let err = Pipeline::open(&protocol_path(), dir.path(), offline(false)).err().unwrap();
    assert!(matches!(err, PipelineError::Locked(_)));
    assert_eq!(err.exit_code(), 2);
    drop(held);
    assert!(!dir.path().join(LOCK_FILE).exists());
    open(dir.path(), false);
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    open(a.path(), false).run_all().unwrap();
    let sequential = RunOptions {
        exec: Exec::Sequential,
        ..offline(false)
    };
    Pipeline::open(&protocol_path(), b.path(), sequential).unwrap().run_all().unwrap();
    for rel in ["extract/evidence_table.json", "synthesize/themes.json", "mine/model.json", REPORT_MD] {
        assert_eq!(
            fs::read(a.path().join(rel)).unwrap(),
            fs::read(b.path().join(rel)).unwrap(),
            "{rel}"
        );
    }
}

#[test]
fn invalid_protocol_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "title = \"x\"\n").unwrap();
    let err = Pipeline::open(&bad, &dir.path().join("work"), offline(false)).err().unwrap();
    assert_eq!(err.exit_code(), 1);
}
