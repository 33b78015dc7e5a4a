use std::path::Path;
use std::process::Command;

fn ebioc(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ebioc")).current_dir(dir).args(args).output().expect("spawn")
}

fn ok(dir: &Path, args: &[&str]) {
    let o = ebioc(dir, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

const CONFIG: &str = r#"
[scenario]
count = 16
horizon = 20
[train]
epochs = 2
batch_size = 6
[train.sampler]
steps = 6
[eval]
samples = 2
horizons = [1.0, 2.0]
[corner]
horizon = 20
[corner.sampler]
steps = 4
record_path = true
"#;

fn pipeline(dir: &Path, workers: &str) {
    std::fs::write(dir.join("cfg.toml"), CONFIG).unwrap();
    let g = ["--config", "cfg.toml", "--seed", "11", "--workers", workers];
    fn with<'a>(g: &[&'a str], rest: &[&'a str]) -> Vec<&'a str> {
        g.iter().chain(rest).copied().collect()
    }
    ok(dir, &with(&g, &["gen-data", "--theta-star", "lane_keeper", "--out", "train.jsonl", "--split", "0.75", "--test-out", "test.jsonl"]));
    ok(dir, &with(&g, &["train", "--data", "train.jsonl", "--cost", "linear", "--solver", "langevin", "--coop", "on", "--out", "ck.json", "--log", "log.jsonl"]));
    ok(dir, &with(&g, &["sample", "--ckpt", "ck.json", "--data", "test.jsonl", "--out", "pred.jsonl"]));
    ok(dir, &with(&g, &["eval", "--pred", "pred.jsonl", "--gt", "test.jsonl", "--report", "report.json", "--csv", "report.csv"]));
    ok(dir, &with(&g, &["corner", "--ckpt", "ck.json", "--report", "corner.json", "--trace-csv", "trace.csv"]));
}

#[test]
fn lane_keeper_pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path(), "1");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["n_demos"], 4);
    assert_eq!(report["report"]["rows"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("horizon,avg_rmse,min_rmse,missing_rate\n"));
    let corner: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("corner.json")).unwrap()).unwrap();
    assert_eq!(corner["total"], 6);
    assert_eq!(std::fs::read_to_string(dir.path().join("log.jsonl")).unwrap().lines().count(), 2);
}

#[test]
fn identical_seeds_give_identical_reports_for_any_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path(), "1");
    pipeline(b.path(), "3");
    for f in ["train.jsonl", "test.jsonl", "ck.json", "pred.jsonl", "report.json", "report.csv", "corner.json", "trace.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn ilqr_with_cnn_cost_is_rejected_before_loading_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = ebioc(dir.path(), &["train", "--data", "missing.jsonl", "--cost", "cnn", "--solver", "ilqr", "--out", "ck.json"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("unsupported"), "{err}");
    assert!(!dir.path().join("ck.json").exists());
}

#[test]
fn unknown_config_keys_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "epochs = 1\n[train]\nbatch = 3\n").unwrap();
    let o = ebioc(dir.path(), &["--config", "bad.toml", "gen-data", "--out", "x.jsonl"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("epochs") && err.contains("train.batch"), "{err}");
}

#[test]
fn tracks_are_ingested() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.toml"), "[scenario]\ncount = 3\nhorizon = 10\n").unwrap();
    ok(dir.path(), &["--config", "cfg.toml", "gen-data", "--out", "demos.jsonl"]);
    let demos: Vec<ebioc::types::Demonstration> = ebioc::io::read_jsonl_file(&dir.path().join("demos.jsonl")).unwrap();
    let tracks: Vec<_> = demos.iter().map(ebioc::data::to_track).collect();
    ebioc::io::write_jsonl_file(&tracks, &dir.path().join("tracks.jsonl")).unwrap();
    ok(dir.path(), &["infer-controls", "--tracks", "tracks.jsonl", "--out", "inferred.jsonl", "--report", "fit.json"]);
    let back: Vec<ebioc::types::Demonstration> = ebioc::io::read_jsonl_file(&dir.path().join("inferred.jsonl")).unwrap();
    assert_eq!(back.len(), 3);
    for (a, b) in back.iter().zip(&demos) {
        for (p, q) in a.expert.states.iter().zip(&b.expert.states) {
            assert!((p.x - q.x).hypot(p.y - q.y) < 0.01);
        }
    }
}
