use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_pose2gait");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        "seed = 3\n\
         output_dir = {out:?}\n\
         [data]\nwalks = {walks:?}\n\
         [generation]\nsubjects_ds1 = 6\nsubjects_ds2 = 3\nwalks_per_subject = 2\n\
         [model]\nlr = 1e-3\nepochs = 2\n\
         [eval]\nk = 3\nvariants = [\"main\", \"mirror\"]\n{extra}",
        out = dir.join("out"),
        walks = dir.join("out/walks.jsonl"),
    );
    let path = dir.join("c.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

#[test]
fn generate_writes_configured_counts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    let o = run(&["generate", "--config", cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    let walks = String::from_utf8(read(out.join("walks.jsonl"))).unwrap();
    let truth = String::from_utf8(read(out.join("truth.jsonl"))).unwrap();
    // 9 subjects x 2 walks x 3 trackers
    assert_eq!(walks.lines().count(), 54);
    assert_eq!(truth.lines().count(), 54);
    assert!(stderr(&o).contains("event=generate subjects=9 walks=18 records=54"));

    let first = (read(out.join("walks.jsonl")), read(out.join("manifest-generate.json")));
    assert!(run(&["generate", "--config", cfg]).status.success());
    assert_eq!(first.0, read(out.join("walks.jsonl")));
    assert_eq!(first.1, read(out.join("manifest-generate.json")));

    let o = run(&["generate", "--config", cfg, "--seed", "4"]);
    assert!(o.status.success());
    assert_ne!(first.0, read(out.join("walks.jsonl")));

    let o = run(&["generate", "--config", cfg, "--cohort", "DS2"]);
    assert!(o.status.success());
    assert_eq!(read(out.join("walks.jsonl")).split(|&b| b == b'\n').filter(|l| !l.is_empty()).count(), 18);
}

#[test]
fn pipeline_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    let out = dir.path().join("out");
    assert!(run(&["generate", "--config", cfg]).status.success());

    let files = [
        "baseline.jsonl",
        "model.ckpt",
        "train_log.json",
        "predictions.jsonl",
        "evaluate-report.json",
        "evaluate-metrics.jsonl",
        "manifest-train.json",
        "manifest-evaluate.json",
    ];
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        for cmd in ["baseline", "train", "predict", "evaluate"] {
            let o = run(&[cmd, "--config", cfg]);
            assert!(o.status.success(), "{cmd}: {}", stderr(&o));
        }
        snapshots.push(files.map(|f| read(out.join(f))));
    }
    assert_eq!(snapshots[0], snapshots[1]);

    let baseline = String::from_utf8(read(out.join("baseline.jsonl"))).unwrap();
    let row: serde_json::Value = serde_json::from_str(baseline.lines().next().unwrap()).unwrap();
    assert!(row["step_time_s"].is_f64());
    assert!(row["velocity_cm_s"].is_null());

    let tables = String::from_utf8(read(out.join("evaluate-tables.txt"))).unwrap();
    assert!(tables.contains("velocity"));
    let metrics = String::from_utf8(read(out.join("evaluate-metrics.jsonl"))).unwrap();
    assert!(metrics.contains("\"variant\":\"main\",\"cohort\":\"all\",\"feature\":\"velocity\",\"metric\":\"rho\""));
}

#[test]
fn manifest_reruns_the_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("out");
    assert!(run(&["generate", "--config", cfg.to_str().unwrap(), "--seed", "9"]).status.success());
    let walks = read(out.join("walks.jsonl"));
    let manifest = dir.path().join("m.json");
    std::fs::copy(out.join("manifest-generate.json"), &manifest).unwrap();
    std::fs::remove_file(out.join("walks.jsonl")).unwrap();
    let o = run(&["generate", "--config", manifest.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(walks, read(out.join("walks.jsonl")));
}

#[test]
fn ablate_runs_each_variant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    assert!(run(&["generate", "--config", cfg]).status.success());
    let o = run(&["ablate", "--config", cfg, "--variant", "main", "--variant", "lower_body"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_slice(&read(dir.path().join("out/ablate-report.json"))).unwrap();
    let variants: Vec<&str> = report.as_array().unwrap().iter().map(|r| r["variant"].as_str().unwrap()).collect();
    assert_eq!(variants, ["main", "lower_body"]);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "[extra]\nkey = 1\n");
    let o = run(&["generate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("extra"), "{}", stderr(&o));

    let o = run(&["generate", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["evaluate", "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "no walks file configured");

    let o = run(&["evaluate", "--variant", "batchnorm"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn leakage_between_train_and_val_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let walks = dir.path().join("out/walks.jsonl");
    let extra = format!("train_walks = {walks:?}\nval_walks = {walks:?}\n");
    // The extra keys belong to [data]; place them there.
    let cfg = write_config(dir.path(), "");
    let text = std::fs::read_to_string(&cfg).unwrap().replace("[generation]", &format!("{extra}[generation]"));
    std::fs::write(&cfg, text).unwrap();
    let cfg = cfg.to_str().unwrap();
    assert!(run(&["generate", "--config", cfg]).status.success());
    let o = run(&["train", "--config", cfg]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("appears in both training and validation"), "{err}");
    assert!(err.contains("subject `"), "{err}");
}

#[test]
fn malformed_walks_exit_3_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    assert!(run(&["generate", "--config", cfg]).status.success());
    let path = dir.path().join("out/walks.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[1] = lines[1].replace("\"fps\":30.0", "\"fps\":-1.0");
    std::fs::write(&path, lines.join("\n")).unwrap();
    let o = run(&["baseline", "--config", cfg]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("line 2") && err.contains("fps"), "{err}");
}

#[test]
fn short_walks_are_skipped_and_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    assert!(run(&["generate", "--config", cfg]).status.success());
    assert!(run(&["train", "--config", cfg]).status.success());

    let path = dir.path().join("out/walks.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut rec: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
    rec["frames"].as_array_mut().unwrap().truncate(50);
    let short_id = rec["walk_id"].as_str().unwrap().to_string();
    lines[0] = rec.to_string();
    std::fs::write(&path, lines.join("\n")).unwrap();

    let o = run(&["predict", "--config", cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains(&format!("event=skip walk_id={short_id} index=0")), "{err}");
    let skipped = std::fs::read_to_string(dir.path().join("out/skipped-predict.jsonl")).unwrap();
    assert_eq!(skipped.lines().count(), 1);
    let preds = std::fs::read_to_string(dir.path().join("out/predictions.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(preds.lines().next().unwrap()).unwrap();
    assert!(first["skipped"].as_str().unwrap().contains("50 frames"));
    assert!(first["velocity_cm_s"].is_null());
}
