//! Subject-stratified k-fold cross-validation, rank correlation and MAE,
//! per-cohort breakdowns and the ablation runner.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::{prepare_records, train, Pose2GaitConfig, SkippedWalk};
use crate::preprocess::{Normalization, PreprocessConfig};
use crate::synthgait::derive_seed;
use crate::types::{Cohort, GaitFeatures, JointLayout, Tracker, WalkRecord, NUM_FEATURES};

/// Subject to fold index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub folds: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, subject_id: &str) -> Option<usize> {
        self.folds.get(subject_id).copied()
    }

    pub fn subjects_in(&self, fold: usize) -> Vec<&str> {
        self.folds
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(s, _)| s.as_str())
            .collect()
    }

    /// Test fold `i`, validation fold `(i + 1) mod k`.
    pub fn roles(&self, i: usize) -> (usize, usize) {
        (i, (i + 1) % self.k)
    }
}

/// Shuffle each cohort's subjects and deal them round-robin, continuing
/// where the previous cohort stopped so fold sizes stay balanced overall.
pub fn assign_folds(subjects: &[(String, Cohort)], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    let mut by_cohort: BTreeMap<Cohort, BTreeSet<&str>> = BTreeMap::new();
    for (s, c) in subjects {
        by_cohort.entry(*c).or_default().insert(s.as_str());
    }
    let total: usize = by_cohort.values().map(|s| s.len()).sum();
    if total < k {
        return Err(Error::invalid(format!("{total} subjects cannot fill {k} folds")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = BTreeMap::new();
    let mut offset = 0;
    for ids in by_cohort.values() {
        let mut ids: Vec<&str> = ids.iter().copied().collect();
        ids.shuffle(&mut rng);
        for (i, s) in ids.iter().enumerate() {
            if folds.insert(s.to_string(), (offset + i) % k).is_some() {
                return Err(Error::invalid(format!("subject `{s}` listed under two cohorts")));
            }
        }
        offset += ids.len();
    }
    Ok(FoldAssignment { k, folds })
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &p in &idx[i..=j] {
            ranks[p] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Spearman's rank correlation with a two-sided t-approximation p-value.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::invalid(format!("need at least 3 pairs, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spearman input".into()));
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let mean = (n as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (da, db) = (a - mean, b - mean);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid("rank correlation undefined for constant input"));
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::invalid(e.to_string()))?;
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Ok(Correlation { rho, p_value, n })
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::invalid(format!(
            "mae needs equal non-zero lengths, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// One configuration row of the ablation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Main,
    Mirror,
    LowerBody,
    PerFrame,
    Ds1Only,
    Ds2Only,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Main,
        Variant::Mirror,
        Variant::LowerBody,
        Variant::PerFrame,
        Variant::Ds1Only,
        Variant::Ds2Only,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Main => "main",
            Variant::Mirror => "mirror",
            Variant::LowerBody => "lower_body",
            Variant::PerFrame => "per_frame",
            Variant::Ds1Only => "ds1_only",
            Variant::Ds2Only => "ds2_only",
        }
    }

    /// Preprocessing for this variant, starting from `base`.
    pub fn preprocess(self, base: &PreprocessConfig) -> PreprocessConfig {
        let mut p = *base;
        match self {
            Variant::Mirror => p.mirror = true,
            Variant::LowerBody => p.joints = JointLayout::Lower6,
            Variant::PerFrame => p.normalization = Normalization::PerFrame,
            Variant::Main | Variant::Ds1Only | Variant::Ds2Only => {}
        }
        p
    }

    /// Cohort the variant is restricted to, if any.
    pub fn cohort(self) -> Option<Cohort> {
        match self {
            Variant::Ds1Only => Some(Cohort::DS1),
            Variant::Ds2Only => Some(Cohort::DS2),
            _ => None,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim_start_matches('+');
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown variant `{s}`")))
    }
}

/// Metrics of one feature on one subset of test predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMetrics {
    pub feature: String,
    /// `"all"`, `"DS1"` or `"DS2"`.
    pub cohort: String,
    pub n: usize,
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldDetail {
    pub fold: usize,
    pub validation_fold: usize,
    pub test_subjects: Vec<String>,
    pub num_train_sequences: usize,
    pub num_val_sequences: usize,
    pub num_test: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub mae: [f64; NUM_FEATURES],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub walk_id: String,
    pub subject_id: String,
    pub cohort: Cohort,
    pub tracker: Tracker,
    pub fold: usize,
    pub truth: GaitFeatures,
    pub predicted: GaitFeatures,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: Variant,
    pub k: usize,
    pub seed: u64,
    pub fingerprint: String,
    pub metrics: Vec<FeatureMetrics>,
    pub folds: Vec<FoldDetail>,
    pub predictions: Vec<Prediction>,
    pub skipped: Vec<SkippedWalk>,
}

impl EvalReport {
    pub fn metric(&self, cohort: &str, feature: &str) -> Option<&FeatureMetrics> {
        self.metrics
            .iter()
            .find(|m| m.cohort == cohort && m.feature == feature)
    }
}

#[derive(Serialize)]
struct FingerprintInput<'a> {
    variant: Variant,
    k: usize,
    seed: u64,
    model: &'a Pose2GaitConfig,
    preprocess: &'a PreprocessConfig,
    records: usize,
}

/// SHA-256 over the canonical JSON of anything serialisable.
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("serialisable config");
    hex::encode(Sha256::digest(&json))
}

fn metrics_for(preds: &[&Prediction], cohort: &str) -> Result<Vec<FeatureMetrics>> {
    (0..NUM_FEATURES)
        .map(|f| {
            let p: Vec<f64> = preds.iter().map(|r| r.predicted.to_array()[f]).collect();
            let t: Vec<f64> = preds.iter().map(|r| r.truth.to_array()[f]).collect();
            let corr = spearman_rho(&p, &t).ok();
            Ok(FeatureMetrics {
                feature: GaitFeatures::NAMES[f].to_string(),
                cohort: cohort.to_string(),
                n: p.len(),
                rho: corr.map(|c| c.rho),
                p_value: corr.map(|c| c.p_value),
                mae: mae(&p, &t)?,
            })
        })
        .collect()
}

/// Pooled metrics over all predictions, then per cohort present.
pub fn summarize(preds: &[Prediction]) -> Result<Vec<FeatureMetrics>> {
    let all: Vec<&Prediction> = preds.iter().collect();
    let mut out = metrics_for(&all, "all")?;
    for c in Cohort::ALL {
        let sub: Vec<&Prediction> = preds.iter().filter(|p| p.cohort == c).collect();
        if !sub.is_empty() {
            out.extend(metrics_for(&sub, c.as_str())?);
        }
    }
    Ok(out)
}

fn subjects_of(records: &[WalkRecord]) -> Vec<(String, Cohort)> {
    let set: BTreeSet<(String, Cohort)> = records
        .iter()
        .map(|r| (r.meta.subject_id.clone(), r.meta.cohort))
        .collect();
    set.into_iter().collect()
}

fn run_fold(
    records: &[WalkRecord],
    folds: &FoldAssignment,
    fold: usize,
    cfg: &Pose2GaitConfig,
    pcfg: &PreprocessConfig,
) -> Result<(FoldDetail, Vec<Prediction>, Vec<SkippedWalk>)> {
    let (test_f, val_f) = folds.roles(fold);
    let mut tr = Vec::new();
    let mut va = Vec::new();
    let mut te = Vec::new();
    for r in records {
        let f = folds
            .fold_of(&r.meta.subject_id)
            .ok_or_else(|| Error::invalid(format!("subject `{}` has no fold", r.meta.subject_id)))?;
        if f == test_f {
            te.push(r.clone());
        } else if f == val_f {
            va.push(r.clone());
        } else {
            tr.push(r.clone());
        }
    }
    if te.is_empty() {
        return Err(Error::invalid(format!("fold {fold} has no test walks")));
    }
    let fold_cfg = Pose2GaitConfig {
        seed: derive_seed(cfg.seed, &[fold as u64]),
        ..cfg.clone()
    };
    let rep = train(&tr, &va, &fold_cfg, pcfg)?;
    let set = prepare_records(&te, pcfg, false, true)?;
    let preds = rep.best.predict_prepared(&set)?;
    let out: Vec<Prediction> = set
        .sources
        .iter()
        .zip(&preds)
        .zip(&set.truths)
        .map(|((&src, p), t)| {
            let r = &te[src];
            Prediction {
                walk_id: r.meta.walk_id.clone(),
                subject_id: r.meta.subject_id.clone(),
                cohort: r.meta.cohort,
                tracker: r.meta.tracker,
                fold,
                truth: *t,
                predicted: *p,
            }
        })
        .collect();
    if out.is_empty() {
        return Err(Error::invalid(format!("fold {fold} has no usable test walks")));
    }
    let fold_mae: [f64; NUM_FEATURES] = std::array::from_fn(|f| {
        out.iter()
            .map(|p| (p.predicted.to_array()[f] - p.truth.to_array()[f]).abs())
            .sum::<f64>()
            / out.len() as f64
    });
    let mut skipped = rep.skipped.clone();
    skipped.extend(set.skipped.iter().cloned());
    let detail = FoldDetail {
        fold,
        validation_fold: val_f,
        test_subjects: folds.subjects_in(test_f).iter().map(|s| s.to_string()).collect(),
        num_train_sequences: rep.num_train_sequences,
        num_val_sequences: rep.num_val_sequences,
        num_test: out.len(),
        best_epoch: rep.best_epoch,
        best_val_loss: rep.val_loss[rep.best_epoch],
        mae: fold_mae,
    };
    Ok((detail, out, skipped))
}

fn cross_validate(
    records: &[WalkRecord],
    folds: &FoldAssignment,
    variant: Variant,
    cfg: &Pose2GaitConfig,
    pcfg: &PreprocessConfig,
    seed: u64,
) -> Result<EvalReport> {
    let results: Vec<_> = (0..folds.k)
        .into_par_iter()
        .map(|i| run_fold(records, folds, i, cfg, pcfg))
        .collect::<Result<_>>()?;
    let mut details = Vec::new();
    let mut predictions = Vec::new();
    let mut skipped = Vec::new();
    for (d, p, s) in results {
        details.push(d);
        predictions.extend(p);
        skipped.extend(s);
    }
    let metrics = summarize(&predictions)?;
    Ok(EvalReport {
        variant,
        k: folds.k,
        seed,
        fingerprint: fingerprint(&FingerprintInput {
            variant,
            k: folds.k,
            seed,
            model: cfg,
            preprocess: pcfg,
            records: records.len(),
        }),
        metrics,
        folds: details,
        predictions,
        skipped,
    })
}

/// k-fold CV: fold `i` tests, fold `i + 1` validates, the rest train.
/// Metrics are computed on the pooled test predictions.
pub fn run_cross_validation(
    records: &[WalkRecord],
    k: usize,
    cfg: &Pose2GaitConfig,
    pcfg: &PreprocessConfig,
    seed: u64,
) -> Result<EvalReport> {
    let folds = assign_folds(&subjects_of(records), k, seed)?;
    cross_validate(records, &folds, Variant::Main, cfg, pcfg, seed)
}

/// One report per variant, all sharing one fold assignment.
pub fn run_ablation(
    records: &[WalkRecord],
    variants: &[Variant],
    k: usize,
    cfg: &Pose2GaitConfig,
    base: &PreprocessConfig,
    seed: u64,
) -> Result<Vec<EvalReport>> {
    if variants.is_empty() {
        return Err(Error::invalid("no ablation variants given"));
    }
    let folds = assign_folds(&subjects_of(records), k, seed)?;
    variants
        .iter()
        .map(|&v| {
            let pcfg = v.preprocess(base);
            match v.cohort() {
                Some(c) => {
                    let subset: Vec<WalkRecord> = records.iter().filter(|r| r.meta.cohort == c).cloned().collect();
                    let sub_folds = FoldAssignment {
                        k,
                        folds: folds
                            .folds
                            .iter()
                            .filter(|(s, _)| subset.iter().any(|r| &r.meta.subject_id == *s))
                            .map(|(s, &f)| (s.clone(), f))
                            .collect(),
                    };
                    cross_validate(&subset, &sub_folds, v, cfg, &pcfg, seed)
                }
                None => cross_validate(records, &folds, v, cfg, &pcfg, seed),
            }
        })
        .collect()
}

/// One flat metric value keyed by variant, cohort, feature and metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub variant: String,
    pub cohort: String,
    pub feature: String,
    pub metric: String,
    pub value: Option<f64>,
}

pub fn metric_records(reports: &[EvalReport]) -> Vec<MetricRecord> {
    let mut out = Vec::new();
    for r in reports {
        for m in &r.metrics {
            let rec = |metric: &str, value| MetricRecord {
                variant: r.variant.to_string(),
                cohort: m.cohort.clone(),
                feature: m.feature.clone(),
                metric: metric.to_string(),
                value,
            };
            out.push(rec("rho", m.rho));
            out.push(rec("p_value", m.p_value));
            out.push(rec("mae", Some(m.mae)));
            out.push(rec("n", Some(m.n as f64)));
        }
    }
    out
}

fn fmt_rho(m: Option<&FeatureMetrics>) -> String {
    match m.and_then(|m| m.rho.map(|r| (r, m.p_value.unwrap_or(1.0)))) {
        Some((r, p)) => format!("{r:>6.3}{}", if p < 0.01 { "*" } else { " " }),
        None => format!("{:>7}", "-"),
    }
}

fn fmt_mae(m: Option<&FeatureMetrics>) -> String {
    m.map_or_else(|| format!("{:>8}", "-"), |m| format!("{:>8.3}", m.mae))
}

/// Per-variant tables of rho and MAE by cohort, then a variant-by-feature
/// rho matrix. `*` marks p < 0.01.
pub fn render_tables(reports: &[EvalReport]) -> String {
    let mut s = String::new();
    for r in reports {
        let _ = writeln!(s, "variant {}  (k={}, seed={}, n={})", r.variant, r.k, r.seed, r.predictions.len());
        let _ = writeln!(
            s,
            "{:<16} {:>7} {:>8} {:>7} {:>8} {:>7} {:>8}",
            "feature", "rho", "MAE", "DS1 rho", "DS1 MAE", "DS2 rho", "DS2 MAE"
        );
        for f in GaitFeatures::NAMES {
            let _ = writeln!(
                s,
                "{:<16} {} {} {} {} {} {}",
                f,
                fmt_rho(r.metric("all", f)),
                fmt_mae(r.metric("all", f)),
                fmt_rho(r.metric("DS1", f)),
                fmt_mae(r.metric("DS1", f)),
                fmt_rho(r.metric("DS2", f)),
                fmt_mae(r.metric("DS2", f)),
            );
        }
        s.push('\n');
    }
    if reports.len() > 1 {
        let _ = write!(s, "{:<12}", "variant");
        for f in GaitFeatures::NAMES {
            let _ = write!(s, " {f:>16}");
        }
        s.push('\n');
        for r in reports {
            let _ = write!(s, "{:<12}", r.variant.as_str());
            for f in GaitFeatures::NAMES {
                let _ = write!(s, " {:>16}", fmt_rho(r.metric("all", f)));
            }
            s.push('\n');
        }
    }
    s
}
