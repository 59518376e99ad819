//! The gait network: a shared 1D-convolutional encoder over the pose
//! sequence, joined with walk metadata and fed to one small regression head
//! per gait feature. Training, best-epoch selection and prediction.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    load_checkpoint, save_checkpoint, Adam, AdamConfig, Architecture, Graph, LayerSpec, ModelState, Tensor, Var,
};
use crate::preprocess::{mirror, prepare, to_model_input, ModelInput, PreprocessConfig};
use crate::types::{GaitFeatures, LossWeights, WalkRecord, METADATA_LEN, NUM_FEATURES};
use crate::walkio::FeatureRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvLayer {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Pose2GaitConfig {
    pub conv_layers: Vec<ConvLayer>,
    pub head_hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub loss_weights: LossWeights,
    /// Train on per-feature z-scores (fit on the training set). When off
    /// the loss sees physical units and only the weights balance features.
    pub standardize_targets: bool,
    pub seed: u64,
}

impl Default for Pose2GaitConfig {
    fn default() -> Self {
        let c = |out_channels, kernel, stride| ConvLayer {
            out_channels,
            kernel,
            stride,
        };
        Pose2GaitConfig {
            conv_layers: vec![c(32, 5, 2), c(48, 5, 2), c(64, 5, 2), c(64, 3, 1)],
            head_hidden: 64,
            lr: 1e-5,
            epochs: 200,
            batch_size: 20,
            loss_weights: LossWeights::default(),
            standardize_targets: true,
            seed: 0,
        }
    }
}

impl Pose2GaitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.conv_layers.is_empty() || self.head_hidden == 0 {
            return Err(Error::Config("need at least one conv layer and a non-empty head".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        self.adam().validate()?;
        self.loss_weights.validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }

    /// Network layout for `frames x 2 * joints` input.
    pub fn architecture(&self, frames: usize, joints: usize) -> Result<Architecture> {
        let mut encoder = Vec::new();
        let mut c_in = 2 * joints;
        for l in &self.conv_layers {
            encoder.push(LayerSpec::Conv1d {
                in_channels: c_in,
                out_channels: l.out_channels,
                kernel: l.kernel,
                stride: l.stride,
            });
            encoder.push(LayerSpec::Relu);
            c_in = l.out_channels;
        }
        encoder.push(LayerSpec::Flatten);
        let mut arch = Architecture {
            input_frames: frames,
            input_channels: 2 * joints,
            metadata_len: METADATA_LEN,
            encoder,
            head: vec![],
            num_heads: NUM_FEATURES,
        };
        let flat = arch.embedding_len()?;
        arch.head = vec![
            LayerSpec::Linear {
                in_features: flat + METADATA_LEN,
                out_features: self.head_hidden,
            },
            LayerSpec::Relu,
            LayerSpec::Linear {
                in_features: self.head_hidden,
                out_features: 1,
            },
        ];
        arch.validate()?;
        Ok(arch)
    }
}

/// Per-feature affine map between physical units and training units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardizer {
    pub mean: [f64; NUM_FEATURES],
    pub sd: [f64; NUM_FEATURES],
}

impl Standardizer {
    pub fn identity() -> Self {
        Standardizer {
            mean: [0.0; NUM_FEATURES],
            sd: [1.0; NUM_FEATURES],
        }
    }

    /// Mean and population SD of each feature. A constant feature gets
    /// SD 1 so it still maps to zero.
    pub fn fit(truths: &[GaitFeatures]) -> Result<Self> {
        if truths.is_empty() {
            return Err(Error::invalid("cannot fit a standardizer on no data"));
        }
        let n = truths.len() as f64;
        let mut mean = [0.0; NUM_FEATURES];
        for t in truths {
            for (m, v) in mean.iter_mut().zip(t.to_array()) {
                *m += v / n;
            }
        }
        let mut sd = [0.0; NUM_FEATURES];
        for t in truths {
            for f in 0..NUM_FEATURES {
                sd[f] += (t.to_array()[f] - mean[f]).powi(2) / n;
            }
        }
        for s in &mut sd {
            *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
        }
        Ok(Standardizer { mean, sd })
    }

    pub fn forward(&self, f: &GaitFeatures) -> [f64; NUM_FEATURES] {
        let a = f.to_array();
        std::array::from_fn(|i| (a[i] - self.mean[i]) / self.sd[i])
    }

    pub fn inverse(&self, z: &[f64; NUM_FEATURES]) -> GaitFeatures {
        GaitFeatures::from_array(std::array::from_fn(|i| z[i] * self.sd[i] + self.mean[i]))
    }
}

/// Model inputs stacked into contiguous buffers.
#[derive(Debug, Clone, Default)]
pub struct PreparedSet {
    pub frames: usize,
    pub channels: usize,
    /// Index of the source record for each sequence.
    pub sources: Vec<usize>,
    pub walk_ids: Vec<String>,
    pub subject_ids: Vec<String>,
    pub inputs: Vec<f32>,
    pub metadata: Vec<f32>,
    /// Physical units; empty when the records carry no truth.
    pub truths: Vec<GaitFeatures>,
    pub skipped: Vec<SkippedWalk>,
}

/// A record that could not be turned into model input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedWalk {
    /// Position in the input record list.
    pub index: usize,
    pub walk_id: String,
    pub reason: String,
}

impl PreparedSet {
    pub fn len(&self) -> usize {
        self.walk_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walk_ids.is_empty()
    }

    fn push(&mut self, source: usize, walk_id: &str, subject_id: &str, input: ModelInput, truth: Option<GaitFeatures>) {
        self.sources.push(source);
        self.walk_ids.push(walk_id.to_string());
        self.subject_ids.push(subject_id.to_string());
        self.inputs.extend_from_slice(&input.data);
        self.metadata.extend_from_slice(&input.metadata);
        if let Some(t) = truth {
            self.truths.push(t);
        }
    }

    fn gather(&self, idx: &[usize]) -> (Vec<f32>, Vec<f32>) {
        let (w, m) = (self.frames * self.channels, METADATA_LEN);
        let mut x = Vec::with_capacity(idx.len() * w);
        let mut meta = Vec::with_capacity(idx.len() * m);
        for &i in idx {
            x.extend_from_slice(&self.inputs[i * w..(i + 1) * w]);
            meta.extend_from_slice(&self.metadata[i * m..(i + 1) * m]);
        }
        (x, meta)
    }
}

/// Preprocess records into model input. Walks failing preprocessing are
/// listed in `skipped`. With `augment_mirror` each usable walk is followed
/// by its lateral reflection.
pub fn prepare_records(
    records: &[WalkRecord],
    pcfg: &PreprocessConfig,
    augment_mirror: bool,
    require_truth: bool,
) -> Result<PreparedSet> {
    pcfg.validate()?;
    let mut set = PreparedSet {
        frames: pcfg.window_frames,
        channels: 2 * pcfg.joints.num_joints(),
        ..PreparedSet::default()
    };
    for (ri, r) in records.iter().enumerate() {
        if require_truth && r.truth.is_none() {
            return Err(Error::Preprocess {
                walk_id: r.meta.walk_id.clone(),
                reason: "missing ground-truth features".into(),
            });
        }
        let seq = match prepare(&r.sequence, pcfg) {
            Ok(s) => s,
            Err(e) => {
                set.skipped.push(SkippedWalk {
                    index: ri,
                    walk_id: r.meta.walk_id.clone(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let input = to_model_input(&seq, &r.meta, pcfg)?;
        set.push(ri, &r.meta.walk_id, &r.meta.subject_id, input, r.truth);
        if augment_mirror {
            let m = to_model_input(&mirror(&seq), &r.meta, pcfg)?;
            set.push(ri, &r.meta.walk_id, &r.meta.subject_id, m, r.truth);
        }
    }
    Ok(set)
}

fn check_disjoint_subjects(a: &[WalkRecord], b: &[WalkRecord]) -> Result<()> {
    let sa: BTreeSet<&str> = a.iter().map(|r| r.meta.subject_id.as_str()).collect();
    match b.iter().find(|r| sa.contains(r.meta.subject_id.as_str())) {
        Some(r) => Err(Error::SubjectLeakage {
            subject_id: r.meta.subject_id.clone(),
        }),
        None => Ok(()),
    }
}

/// A trained network plus what is needed to apply it to raw walks.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub state: ModelState,
    pub standardizer: Standardizer,
    pub preprocess: PreprocessConfig,
    pub loss_weights: LossWeights,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointExtra {
    standardizer: Standardizer,
    preprocess: PreprocessConfig,
    loss_weights: LossWeights,
}

impl TrainedModel {
    fn extra(&self) -> Result<serde_json::Value> {
        serde_json::to_value(CheckpointExtra {
            standardizer: self.standardizer,
            preprocess: self.preprocess,
            loss_weights: self.loss_weights,
        })
        .map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_checkpoint(path, &self.state, &self.extra()?)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        crate::nn::write_checkpoint(&mut buf, &self.state, &self.extra()?)?;
        Ok(buf)
    }

    fn from_parts(state: ModelState, extra: serde_json::Value) -> Result<Self> {
        let extra: CheckpointExtra =
            serde_json::from_value(extra).map_err(|e| Error::Checkpoint(format!("model metadata: {e}")))?;
        let m = TrainedModel {
            state,
            standardizer: extra.standardizer,
            preprocess: extra.preprocess,
            loss_weights: extra.loss_weights,
        };
        m.check_preprocess(&m.preprocess)?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (state, extra) = load_checkpoint(path)?;
        Self::from_parts(state, extra)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (state, extra) = crate::nn::read_checkpoint(bytes)?;
        Self::from_parts(state, extra)
    }

    fn check_preprocess(&self, pcfg: &PreprocessConfig) -> Result<()> {
        let a = &self.state.arch;
        if a.input_frames != pcfg.window_frames || a.input_channels != 2 * pcfg.joints.num_joints() {
            return Err(Error::Checkpoint(format!(
                "architecture expects {} frames x {} channels, preprocessing gives {} x {}",
                a.input_frames,
                a.input_channels,
                pcfg.window_frames,
                2 * pcfg.joints.num_joints()
            )));
        }
        Ok(())
    }

    /// Raw network output (training units) for a prepared batch.
    pub fn forward_standardized(&self, set: &PreparedSet) -> Result<Vec<[f64; NUM_FEATURES]>> {
        const CHUNK: usize = 64;
        let mut out = Vec::with_capacity(set.len());
        let idx: Vec<usize> = (0..set.len()).collect();
        for chunk in idx.chunks(CHUNK) {
            let (x, m) = set.gather(chunk);
            let y = self.state.predict(chunk.len(), &x, &m)?;
            out.extend(
                y.chunks_exact(NUM_FEATURES)
                    .map(|r| std::array::from_fn(|i| r[i] as f64)),
            );
        }
        Ok(out)
    }

    /// Predictions in physical units, one per prepared sequence.
    pub fn predict_prepared(&self, set: &PreparedSet) -> Result<Vec<GaitFeatures>> {
        Ok(self
            .forward_standardized(set)?
            .iter()
            .map(|z| self.standardizer.inverse(z))
            .collect())
    }

    /// One feature row per input record, in input order. Walks that fail
    /// preprocessing become skipped rows with the reason.
    pub fn predict(&self, records: &[WalkRecord], pcfg: &PreprocessConfig) -> Result<Vec<FeatureRow>> {
        self.check_preprocess(pcfg)?;
        let set = prepare_records(records, pcfg, false, false)?;
        let preds = self.predict_prepared(&set)?;
        let mut rows: Vec<Option<FeatureRow>> = vec![None; records.len()];
        for (&src, p) in set.sources.iter().zip(&preds) {
            rows[src] = Some(FeatureRow::full(records[src].meta.walk_id.clone(), p));
        }
        for sk in &set.skipped {
            rows[sk.index] = Some(FeatureRow::skipped(sk.walk_id.clone(), sk.reason.clone()));
        }
        let rows = rows
            .into_iter()
            .zip(records)
            .map(|(row, r)| {
                row.expect("every record is predicted or skipped")
                    .with_tracker(r.meta.tracker)
            })
            .collect();
        Ok(rows)
    }

    /// Gradient of the summed outputs with respect to the metadata vector of
    /// one prepared sequence.
    pub fn metadata_gradient(&self, set: &PreparedSet, index: usize) -> Result<[f64; METADATA_LEN]> {
        if index >= set.len() {
            return Err(Error::invalid(format!("index {index} out of range")));
        }
        let (x, m) = set.gather(&[index]);
        let mut g = Graph::<f32>::new();
        let params: Vec<Var> = self.state.params.iter().map(|p| g.constant(p.clone())).collect();
        let xv = g.constant(Tensor::new(vec![1, set.frames, set.channels], x)?);
        let mv = g.param(Tensor::new(vec![1, METADATA_LEN], m)?);
        let y = self.state.arch.forward(&mut g, &params, xv, mv)?;
        let s = g.sum(y)?;
        let grads = g.backward(s)?;
        let gm = grads.get(mv).ok_or_else(|| Error::invalid("no metadata gradient"))?;
        Ok(std::array::from_fn(|i| gm.data()[i] as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// 0-based index into the loss curves.
    pub best_epoch: usize,
    pub best: TrainedModel,
    /// The model after the final epoch.
    pub last: TrainedModel,
    pub num_train_sequences: usize,
    pub num_val_sequences: usize,
    pub skipped: Vec<SkippedWalk>,
}

fn standardized_targets(set: &PreparedSet, st: &Standardizer) -> Vec<f32> {
    set.truths
        .iter()
        .flat_map(|t| st.forward(t).map(|v| v as f32))
        .collect()
}

fn weighted_mse_f64(pred: &[[f64; NUM_FEATURES]], target: &[f32], w: &[f64; NUM_FEATURES]) -> f64 {
    let mut total = 0.0;
    for (i, p) in pred.iter().enumerate() {
        for f in 0..NUM_FEATURES {
            let e = p[f] - target[i * NUM_FEATURES + f] as f64;
            total += w[f] * e * e;
        }
    }
    total / (pred.len() * NUM_FEATURES) as f64
}

pub fn train(
    train_records: &[WalkRecord],
    val_records: &[WalkRecord],
    cfg: &Pose2GaitConfig,
    pcfg: &PreprocessConfig,
) -> Result<TrainReport> {
    train_with_progress(train_records, val_records, cfg, pcfg, |_| {})
}

/// As [`train`], calling `on_epoch` after every epoch.
pub fn train_with_progress(
    train_records: &[WalkRecord],
    val_records: &[WalkRecord],
    cfg: &Pose2GaitConfig,
    pcfg: &PreprocessConfig,
    mut on_epoch: impl FnMut(EpochStats),
) -> Result<TrainReport> {
    cfg.validate()?;
    pcfg.validate()?;
    if train_records.is_empty() || val_records.is_empty() {
        return Err(Error::invalid("training and validation sets must be non-empty"));
    }
    check_disjoint_subjects(train_records, val_records)?;

    let train_set = prepare_records(train_records, pcfg, pcfg.mirror, true)?;
    let val_set = prepare_records(val_records, pcfg, false, true)?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::invalid("no usable walks after preprocessing"));
    }
    let mut skipped = train_set.skipped.clone();
    skipped.extend(val_set.skipped.iter().cloned());

    let standardizer = if cfg.standardize_targets {
        Standardizer::fit(&train_set.truths)?
    } else {
        Standardizer::identity()
    };
    let y_train = standardized_targets(&train_set, &standardizer);
    let y_val = standardized_targets(&val_set, &standardizer);
    let weights = cfg.loss_weights.to_array();
    let w32 = weights.map(|v| v as f32);

    let arch = cfg.architecture(pcfg.window_frames, pcfg.joints.num_joints())?;
    let mut model = TrainedModel {
        state: ModelState::init(arch, cfg.seed)?,
        standardizer,
        preprocess: *pcfg,
        loss_weights: cfg.loss_weights,
    };
    let adam = Adam::new(cfg.adam())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5348_5546_464c_4521);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut train_curve = Vec::with_capacity(cfg.epochs);
    let mut val_curve = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::INFINITY, 0usize, model.clone());

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (x, m) = train_set.gather(batch);
            let y: Vec<f32> = batch
                .iter()
                .flat_map(|&i| y_train[i * NUM_FEATURES..(i + 1) * NUM_FEATURES].iter().copied())
                .collect();
            let b = batch.len();
            let mut g = Graph::<f32>::new();
            let pvars: Vec<Var> = model.state.params.iter().map(|p| g.param(p.clone())).collect();
            let xv = g.constant(Tensor::new(vec![b, train_set.frames, train_set.channels], x)?);
            let mv = g.constant(Tensor::new(vec![b, METADATA_LEN], m)?);
            let tv = g.constant(Tensor::new(vec![b, NUM_FEATURES], y)?);
            let out = model.state.arch.forward(&mut g, &pvars, xv, mv)?;
            let loss = g.weighted_mse(out, tv, &w32)?;
            epoch_loss += g.value(loss).item()? as f64 * b as f64;
            let mut grads = g.backward(loss)?;
            let gs: Vec<Tensor<f32>> = pvars
                .iter()
                .map(|&v| grads.take(v).ok_or_else(|| Error::invalid("missing parameter gradient")))
                .collect::<Result<_>>()?;
            let crate::nn::ModelState { params, adam: st, .. } = &mut model.state;
            adam.step(params, &gs, st)?;
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let val_pred = model.forward_standardized(&val_set)?;
        let val_loss = weighted_mse_f64(&val_pred, &y_val, &weights);
        if !val_loss.is_finite() {
            return Err(Error::NonFinite(format!("validation loss at epoch {epoch}")));
        }
        train_curve.push(train_loss);
        val_curve.push(val_loss);
        if val_loss < best.0 {
            best = (val_loss, epoch, model.clone());
        }
        on_epoch(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
    }

    Ok(TrainReport {
        train_loss: train_curve,
        val_loss: val_curve,
        best_epoch: best.1,
        best: best.2,
        last: model,
        num_train_sequences: train_set.len(),
        num_val_sequences: val_set.len(),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgait::{generate_dataset, GenerationConfig};
    use crate::types::JointLayout;

    fn tiny_data(subjects: usize, walks: usize) -> Vec<WalkRecord> {
        let cfg = GenerationConfig {
            subjects_ds1: subjects,
            subjects_ds2: 0,
            walks_per_subject: walks,
            ..GenerationConfig::default()
        };
        generate_dataset(&cfg, 3).unwrap()
    }

    #[test]
    fn default_architecture_sizes() {
        let arch = Pose2GaitConfig::default().architecture(120, 12).unwrap();
        let shapes = arch.encoder_shapes().unwrap();
        let lens: Vec<usize> = shapes
            .iter()
            .filter(|s| s.len() == 2)
            .step_by(2)
            .map(|s| s[0])
            .collect();
        assert_eq!(lens, vec![58, 27, 12, 10]);
        assert_eq!(arch.embedding_len().unwrap(), 640);
        assert_eq!(
            arch.head[0],
            LayerSpec::Linear {
                in_features: 645,
                out_features: 64
            }
        );
        assert_eq!(arch.num_heads, 4);
        let lower = Pose2GaitConfig::default().architecture(120, 6).unwrap();
        assert_eq!(lower.input_channels, 12);
    }

    #[test]
    fn standardizer_round_trip() {
        let t = vec![
            GaitFeatures::new(0.5, 10.0, 30.0, 60.0),
            GaitFeatures::new(0.7, 14.0, 40.0, 40.0),
        ];
        let s = Standardizer::fit(&t).unwrap();
        assert_eq!(s.mean, [0.6, 12.0, 35.0, 50.0]);
        let z = s.forward(&t[0]);
        for v in z {
            assert!((v.abs() - 1.0).abs() < 1e-12);
        }
        let back = s.inverse(&z).to_array();
        for (a, b) in back.iter().zip(t[0].to_array()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn leakage_is_rejected_before_training() {
        let data = tiny_data(2, 1);
        let err = train(&data, &data[..1], &Pose2GaitConfig::default(), &PreprocessConfig::default()).unwrap_err();
        assert!(matches!(err, Error::SubjectLeakage { .. }));
        assert!(train(&data, &[], &Pose2GaitConfig::default(), &PreprocessConfig::default()).is_err());
    }

    fn quick_cfg(epochs: usize) -> Pose2GaitConfig {
        Pose2GaitConfig {
            lr: 1e-3,
            epochs,
            seed: 11,
            ..Pose2GaitConfig::default()
        }
    }

    fn split(data: &[WalkRecord]) -> (Vec<WalkRecord>, Vec<WalkRecord>) {
        data.iter()
            .cloned()
            .partition(|r| r.meta.subject_id != "s000")
    }

    #[test]
    fn training_is_deterministic_and_selects_best_epoch() {
        let (tr, va) = split(&tiny_data(3, 1));
        let a = train(&tr, &va, &quick_cfg(4), &PreprocessConfig::default()).unwrap();
        let b = train(&tr, &va, &quick_cfg(4), &PreprocessConfig::default()).unwrap();
        assert_eq!(a.train_loss, b.train_loss);
        assert_eq!(a.val_loss, b.val_loss);
        assert_eq!(a.best.to_bytes().unwrap(), b.best.to_bytes().unwrap());
        assert_eq!(a.last.state.adam.step, 4);
        assert_eq!(a.train_loss.len(), 4);
        assert!(a.val_loss.iter().all(|&v| a.val_loss[a.best_epoch] <= v));
        assert_eq!(a.num_train_sequences, 6);
        assert_eq!(a.num_val_sequences, 3);
    }

    #[test]
    fn unstandardized_training_keeps_physical_units() {
        let (tr, va) = split(&tiny_data(3, 1));
        let cfg = Pose2GaitConfig {
            standardize_targets: false,
            ..quick_cfg(1)
        };
        let r = train(&tr, &va, &cfg, &PreprocessConfig::default()).unwrap();
        assert_eq!(r.best.standardizer, Standardizer::identity());
        let on = train(&tr, &va, &quick_cfg(1), &PreprocessConfig::default()).unwrap();
        assert_ne!(on.best.standardizer, Standardizer::identity());
        assert!(r.train_loss[0] > on.train_loss[0]);
    }

    #[test]
    fn mirror_doubles_training_sequences() {
        let (tr, va) = split(&tiny_data(3, 1));
        let pcfg = PreprocessConfig {
            mirror: true,
            ..PreprocessConfig::default()
        };
        let r = train(&tr, &va, &quick_cfg(1), &pcfg).unwrap();
        assert_eq!(r.num_train_sequences, 12);
        assert_eq!(r.num_val_sequences, 3);
    }

    #[test]
    fn predict_reports_short_walks_and_survives_round_trip() {
        let (tr, va) = split(&tiny_data(2, 1));
        let pcfg = PreprocessConfig {
            joints: JointLayout::Lower6,
            ..PreprocessConfig::default()
        };
        let rep = train(&tr, &va, &quick_cfg(2), &pcfg).unwrap();
        let mut recs = va.clone();
        let mut short = recs[0].clone();
        short.meta.walk_id = "short".into();
        short.sequence = short.sequence.slice_frames(0, 50).unwrap();
        recs.insert(1, short);
        let rows = rep.best.predict(&recs, &pcfg).unwrap();
        assert_eq!(rows.len(), recs.len());
        assert!(rows[1].skipped.is_some());
        assert!(rows[0].skipped.is_none() && rows[2].skipped.is_none());

        let back = TrainedModel::from_bytes(&rep.best.to_bytes().unwrap()).unwrap();
        assert_eq!(back.predict(&recs, &pcfg).unwrap(), rows);
        assert!(back.predict(&recs, &PreprocessConfig::default()).is_err());
    }
}
