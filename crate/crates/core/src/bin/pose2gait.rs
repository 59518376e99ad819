//! `pose2gait` command-line tool.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 1 anything
//! else. Log lines on stderr are `key=value` pairs.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pose2gait::config::{ExperimentConfig, Manifest};
use pose2gait::eval::{assign_folds, metric_records, render_tables, run_ablation, EvalReport, Variant};
use pose2gait::gaitevents::{baseline_features_2d, DetectorConfig};
use pose2gait::model::{prepare_records, train_with_progress, SkippedWalk, TrainedModel};
use pose2gait::preprocess::interpolate_missing;
use pose2gait::synthgait::generate_dataset;
use pose2gait::walkio::{read_walks, write_features, write_walks, FeatureRow};
use pose2gait::{Cohort, Error, WalkRecord};

#[derive(Parser)]
#[command(name = "pose2gait", version, about = "Gait features from 2D frontal pose sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset: walks.jsonl plus truth.jsonl.
    Generate(Common),
    /// Classical footfall-detection baseline (step time only).
    Baseline(Common),
    /// Train one model and save it as model.ckpt.
    Train(Common),
    /// Subject-stratified k-fold cross-validation of one variant.
    Evaluate(Common),
    /// Cross-validate every configured variant on shared folds.
    Ablate(Common),
    /// Apply a saved model to a walks file.
    Predict(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Walks file, overriding `data.walks`.
    #[arg(long)]
    walks: Option<PathBuf>,
    /// Model file, overriding `data.checkpoint`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Variant to evaluate, or variants to ablate (repeatable).
    #[arg(long = "variant")]
    variants: Vec<Variant>,
    /// Restrict input walks (or generated subjects) to one cohort.
    #[arg(long)]
    cohort: Option<Cohort>,
}

enum Failure {
    Config(String),
    Data(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Other(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Data(m) | Failure::Other(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            Error::Shape(_) | Error::NonFinite(_) => Failure::Other(e.to_string()),
            other => Failure::Data(other.to_string()),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn quote(v: &str) -> String {
    if !v.is_empty() && v.chars().all(|c| c.is_ascii_graphic() && c != '"' && c != '=') {
        v.to_string()
    } else {
        format!("{v:?}")
    }
}

fn log(event: &str, fields: &[(&str, &dyn Display)]) {
    let mut line = format!("event={event}");
    for (k, v) in fields {
        line.push(' ');
        line.push_str(k);
        line.push('=');
        line.push_str(&quote(&v.to_string()));
    }
    eprintln!("{line}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::Generate(c) => ("generate", c),
        Command::Baseline(c) => ("baseline", c),
        Command::Train(c) => ("train", c),
        Command::Evaluate(c) => ("evaluate", c),
        Command::Ablate(c) => ("ablate", c),
        Command::Predict(c) => ("predict", c),
    };
    let result = load_config(common).and_then(|cfg| {
        std::fs::create_dir_all(&cfg.output_dir)
            .map_err(|e| Failure::Data(format!("{}: {e}", cfg.output_dir.display())))?;
        let outputs = match &cli.command {
            Command::Generate(c) => generate(&cfg, c),
            Command::Baseline(c) => baseline(&cfg, c),
            Command::Train(c) => train(&cfg, c),
            Command::Evaluate(c) => evaluate(&cfg, c),
            Command::Ablate(c) => ablate(&cfg, c),
            Command::Predict(c) => predict(&cfg, c),
        }?;
        let manifest = Manifest::new(name, &cfg, outputs).write(&cfg.output_dir)?;
        log("done", &[("command", &name), ("manifest", &manifest.display())]);
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            log("error", &[("command", &name), ("code", &f.code()), ("message", &f.message())]);
            ExitCode::from(f.code())
        }
    }
}

fn load_config(c: &Common) -> Outcome<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| match e {
            Error::Io { .. } => Failure::Config(e.to_string()),
            other => other.into(),
        })?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.set_seed(s);
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    if let Some(w) = &c.walks {
        cfg.data.walks = Some(w.clone());
    }
    if let Some(p) = &c.checkpoint {
        cfg.data.checkpoint = Some(p.clone());
    }
    if !c.variants.is_empty() {
        cfg.eval.variants = c.variants.clone();
    }
    if let Some(cohort) = c.cohort {
        match cohort {
            Cohort::DS1 => cfg.generation.subjects_ds2 = 0,
            Cohort::DS2 => cfg.generation.subjects_ds1 = 0,
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_walks(path: Option<&Path>, what: &str, cohort: Option<Cohort>) -> Outcome<Vec<WalkRecord>> {
    let path = path.ok_or_else(|| Failure::Config(format!("no {what} file: set it in [data] or pass --walks")))?;
    let mut records = read_walks(path).map_err(|e| match e {
        Error::Schema { .. } => Failure::Data(format!("{}: {e}", path.display())),
        other => other.into(),
    })?;
    if let Some(c) = cohort {
        records.retain(|r| r.meta.cohort == c);
    }
    if records.is_empty() {
        return Err(Failure::Data(format!("{}: no walks", path.display())));
    }
    log("read", &[("path", &path.display()), ("records", &records.len())]);
    Ok(records)
}

fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Outcome<String> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Other(e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok(name.to_string())
}

fn write_lines<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Outcome<String> {
    let path = dir.join(name);
    let mut text = String::new();
    for r in rows {
        text.push_str(&serde_json::to_string(r).map_err(|e| Failure::Other(e.to_string()))?);
        text.push('\n');
    }
    std::fs::write(&path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok(name.to_string())
}

/// Log every skipped walk and write them to `skipped-<command>.jsonl`.
fn report_skips(dir: &Path, command: &str, skipped: &[SkippedWalk]) -> Outcome<Option<String>> {
    for s in skipped {
        log("skip", &[("walk_id", &s.walk_id), ("index", &s.index), ("reason", &s.reason)]);
    }
    if skipped.is_empty() {
        return Ok(None);
    }
    write_lines(dir, &format!("skipped-{command}.jsonl"), skipped).map(Some)
}

fn generate(cfg: &ExperimentConfig, _c: &Common) -> Outcome<Vec<String>> {
    let records = generate_dataset(&cfg.generation, cfg.seed)?;
    let dir = &cfg.output_dir;
    write_walks(&records, dir.join("walks.jsonl"))?;
    let truth: Vec<FeatureRow> = records
        .iter()
        .map(|r| {
            let t = r.truth.as_ref().expect("generated walks carry truth");
            FeatureRow::full(r.meta.walk_id.clone(), t).with_tracker(r.meta.tracker)
        })
        .collect();
    write_features(&truth, dir.join("truth.jsonl"))?;
    let subjects = cfg.generation.subjects_ds1 + cfg.generation.subjects_ds2;
    log(
        "generate",
        &[
            ("subjects", &subjects),
            ("walks", &(subjects * cfg.generation.walks_per_subject)),
            ("records", &records.len()),
        ],
    );
    Ok(vec!["walks.jsonl".into(), "truth.jsonl".into()])
}

fn baseline(cfg: &ExperimentConfig, c: &Common) -> Outcome<Vec<String>> {
    let records = load_walks(cfg.data.walks.as_deref(), "walks", c.cohort)?;
    let det = DetectorConfig::default();
    let mut rows = Vec::with_capacity(records.len());
    let mut skipped = Vec::new();
    for (index, r) in records.iter().enumerate() {
        let id = &r.meta.walk_id;
        match interpolate_missing(&r.sequence).and_then(|s| baseline_features_2d(&s, &det)) {
            Ok(b) => rows.push(FeatureRow {
                walk_id: id.clone(),
                tracker: Some(r.meta.tracker),
                step_time_s: Some(b.step_time_s),
                step_width_cm: None,
                step_length_cm: None,
                velocity_cm_s: None,
                skipped: None,
            }),
            Err(e) => {
                let reason = e.to_string();
                rows.push(FeatureRow::skipped(id.clone(), reason.clone()).with_tracker(r.meta.tracker));
                skipped.push(SkippedWalk { index, walk_id: id.clone(), reason });
            }
        }
    }
    write_features(&rows, cfg.output_dir.join("baseline.jsonl"))?;
    let mut outputs = vec!["baseline.jsonl".to_string()];
    outputs.extend(report_skips(&cfg.output_dir, "baseline", &skipped)?);
    log("baseline", &[("records", &records.len()), ("skipped", &skipped.len())]);
    if skipped.len() == records.len() {
        return Err(Failure::Data("no walk produced baseline features".into()));
    }
    Ok(outputs)
}

/// Training and validation records: the two files from `[data]` when both
/// are given, else the walks file with one subject fold held out.
fn train_split(cfg: &ExperimentConfig, cohort: Option<Cohort>) -> Outcome<(Vec<WalkRecord>, Vec<WalkRecord>)> {
    if let (Some(t), Some(v)) = (&cfg.data.train_walks, &cfg.data.val_walks) {
        return Ok((
            load_walks(Some(t), "train_walks", cohort)?,
            load_walks(Some(v), "val_walks", cohort)?,
        ));
    }
    let records = load_walks(cfg.data.walks.as_deref(), "walks", cohort)?;
    let mut subjects: BTreeMap<String, Cohort> = BTreeMap::new();
    for r in &records {
        subjects.insert(r.meta.subject_id.clone(), r.meta.cohort);
    }
    let list: Vec<(String, Cohort)> = subjects.into_iter().collect();
    let folds = assign_folds(&list, cfg.eval.k.min(list.len()), cfg.seed)?;
    let (train, val): (Vec<WalkRecord>, Vec<WalkRecord>) = records
        .into_iter()
        .partition(|r| folds.fold_of(&r.meta.subject_id) != Some(0));
    Ok((train, val))
}

fn train(cfg: &ExperimentConfig, c: &Common) -> Outcome<Vec<String>> {
    let (train_records, val_records) = train_split(cfg, c.cohort)?;
    let dir = &cfg.output_dir;
    let mut skipped = prepare_records(&train_records, &cfg.preprocess, false, true)?.skipped;
    skipped.extend(prepare_records(&val_records, &cfg.preprocess, false, true)?.skipped);
    let mut outputs: Vec<String> = report_skips(dir, "train", &skipped)?.into_iter().collect();
    log(
        "train_start",
        &[
            ("train_records", &train_records.len()),
            ("val_records", &val_records.len()),
            ("epochs", &cfg.model.epochs),
        ],
    );
    let report = train_with_progress(&train_records, &val_records, &cfg.model, &cfg.preprocess, |s| {
        log(
            "epoch",
            &[("epoch", &s.epoch), ("train_loss", &s.train_loss), ("val_loss", &s.val_loss)],
        );
    })?;
    let ckpt = cfg.checkpoint_path();
    report.best.save(&ckpt)?;
    #[derive(Serialize)]
    struct Curve<'a> {
        best_epoch: usize,
        num_train_sequences: usize,
        num_val_sequences: usize,
        train_loss: &'a [f64],
        val_loss: &'a [f64],
    }
    outputs.push(write_json(
        dir,
        "train_log.json",
        &Curve {
            best_epoch: report.best_epoch,
            num_train_sequences: report.num_train_sequences,
            num_val_sequences: report.num_val_sequences,
            train_loss: &report.train_loss,
            val_loss: &report.val_loss,
        },
    )?);
    outputs.push(ckpt.display().to_string());
    log(
        "train",
        &[
            ("best_epoch", &report.best_epoch),
            ("val_loss", &report.val_loss[report.best_epoch]),
            ("checkpoint", &ckpt.display()),
        ],
    );
    Ok(outputs)
}

fn write_reports(cfg: &ExperimentConfig, stem: &str, reports: &[EvalReport]) -> Outcome<Vec<String>> {
    let dir = &cfg.output_dir;
    let tables = render_tables(reports);
    print!("{tables}");
    let table_name = format!("{stem}-tables.txt");
    std::fs::write(dir.join(&table_name), &tables).map_err(|e| Failure::Data(e.to_string()))?;
    let mut outputs = vec![
        write_json(dir, &format!("{stem}-report.json"), reports)?,
        write_lines(dir, &format!("{stem}-metrics.jsonl"), &metric_records(reports))?,
        table_name,
    ];
    let mut skipped: Vec<SkippedWalk> = reports.iter().flat_map(|r| r.skipped.iter().cloned()).collect();
    skipped.sort_by(|a, b| a.index.cmp(&b.index));
    skipped.dedup();
    outputs.extend(report_skips(dir, stem, &skipped)?);
    for r in reports {
        for m in r.metrics.iter().filter(|m| m.cohort == "all") {
            log(
                "metric",
                &[
                    ("variant", &r.variant),
                    ("feature", &m.feature),
                    ("rho", &m.rho.map_or("-".into(), |v| format!("{v:.4}"))),
                    ("mae", &format!("{:.4}", m.mae)),
                    ("n", &m.n),
                ],
            );
        }
    }
    Ok(outputs)
}

fn evaluate(cfg: &ExperimentConfig, c: &Common) -> Outcome<Vec<String>> {
    let variant = match c.variants.as_slice() {
        [] => Variant::Main,
        [v] => *v,
        _ => return Err(Failure::Config("evaluate takes at most one --variant".into())),
    };
    let records = load_walks(cfg.data.walks.as_deref(), "walks", c.cohort)?;
    let reports = run_ablation(&records, &[variant], cfg.eval.k, &cfg.model, &cfg.preprocess, cfg.seed)?;
    write_reports(cfg, "evaluate", &reports)
}

fn ablate(cfg: &ExperimentConfig, c: &Common) -> Outcome<Vec<String>> {
    let records = load_walks(cfg.data.walks.as_deref(), "walks", c.cohort)?;
    let reports = run_ablation(
        &records,
        &cfg.eval.variants,
        cfg.eval.k,
        &cfg.model,
        &cfg.preprocess,
        cfg.seed,
    )?;
    write_reports(cfg, "ablate", &reports)
}

fn predict(cfg: &ExperimentConfig, c: &Common) -> Outcome<Vec<String>> {
    let ckpt = cfg.checkpoint_path();
    let model = TrainedModel::load(&ckpt)?;
    let records = load_walks(cfg.data.walks.as_deref(), "walks", c.cohort)?;
    let rows = model.predict(&records, &model.preprocess)?;
    write_features(&rows, cfg.output_dir.join("predictions.jsonl"))?;
    let skipped: Vec<SkippedWalk> = rows
        .iter()
        .enumerate()
        .filter_map(|(index, r)| {
            r.skipped.as_ref().map(|reason| SkippedWalk {
                index,
                walk_id: r.walk_id.clone(),
                reason: reason.clone(),
            })
        })
        .collect();
    let mut outputs = vec!["predictions.jsonl".to_string()];
    outputs.extend(report_skips(&cfg.output_dir, "predict", &skipped)?);
    log(
        "predict",
        &[("checkpoint", &ckpt.display()), ("records", &rows.len()), ("skipped", &skipped.len())],
    );
    if skipped.len() == rows.len() {
        return Err(Failure::Data("no walk could be predicted".into()));
    }
    Ok(outputs)
}
