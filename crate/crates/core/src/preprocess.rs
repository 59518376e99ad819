//! Pose sequence preprocessing: gap filling, smoothing, tail cropping,
//! joint selection, normalisation and lateral mirroring.
//!
//! The pipeline order is fixed: interpolate, smooth, crop, select,
//! normalise. Mirroring is a training-time augmentation applied afterwards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaitevents::moving_average;
use crate::types::{encode_metadata, JointLayout, Keypoint, PoseSequence, WalkMetadata, METADATA_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// One translation and scale for the whole sequence, taken from the
    /// center frame. Keeps the approach-scaling cue.
    PerVideo,
    /// Every frame centered and scaled independently.
    PerFrame,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub window_frames: usize,
    pub normalization: Normalization,
    pub joints: JointLayout,
    /// Add laterally reflected copies of training sequences.
    pub mirror: bool,
    pub smoothing_window: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            window_frames: 120,
            normalization: Normalization::PerVideo,
            joints: JointLayout::Full12,
            mirror: false,
            smoothing_window: 5,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_frames < 2 {
            return Err(Error::invalid("window_frames must be at least 2"));
        }
        if self.smoothing_window == 0 || self.smoothing_window % 2 == 0 {
            return Err(Error::invalid(format!(
                "smoothing_window must be odd and >= 1, got {}",
                self.smoothing_window
            )));
        }
        Ok(())
    }
}

/// Fill `conf = 0` gaps per joint by linear interpolation between the
/// nearest valid frames; leading and trailing gaps take the nearest valid
/// value. Output confidences are 1.
pub fn interpolate_missing(seq: &PoseSequence) -> Result<PoseSequence> {
    let (n, nj) = (seq.num_frames(), seq.num_joints());
    let mut out = seq.map_keypoints(|_, _, k| Keypoint::new(k.x, k.y, 1.0));
    for j in 0..nj {
        let valid: Vec<usize> = (0..n).filter(|&t| seq.get(t, j).is_valid()).collect();
        if valid.len() < 2 {
            return Err(Error::InsufficientDetections {
                joint: seq.joint_names()[j].to_string(),
                valid: valid.len(),
            });
        }
        if valid.len() == n {
            continue;
        }
        let mut next = 0;
        for t in 0..n {
            while next < valid.len() && valid[next] < t {
                next += 1;
            }
            if next < valid.len() && valid[next] == t {
                continue;
            }
            let k = if next == 0 {
                seq.get(valid[0], j)
            } else if next == valid.len() {
                seq.get(valid[valid.len() - 1], j)
            } else {
                let (a, b) = (valid[next - 1], valid[next]);
                let (ka, kb) = (seq.get(a, j), seq.get(b, j));
                let s = (t - a) as f64 / (b - a) as f64;
                Keypoint::new(ka.x + s * (kb.x - ka.x), ka.y + s * (kb.y - ka.y), 1.0)
            };
            *out.get_mut(t, j) = Keypoint::new(k.x, k.y, 1.0);
        }
    }
    Ok(out)
}

/// Centered moving average per joint and coordinate, truncated at the edges.
pub fn smooth(seq: &PoseSequence, window: usize) -> Result<PoseSequence> {
    if window == 0 || window % 2 == 0 || window > seq.num_frames() {
        return Err(Error::invalid(format!(
            "smoothing window {window} must be odd and in 1..={}",
            seq.num_frames()
        )));
    }
    if window == 1 {
        return Ok(seq.clone());
    }
    let mut out = seq.clone();
    for j in 0..seq.num_joints() {
        let track: Vec<[f64; 2]> = seq.joint_track(j).iter().map(|k| [k.x, k.y]).collect();
        for (t, [x, y]) in moving_average(&track, window).into_iter().enumerate() {
            let k = out.get_mut(t, j);
            k.x = x;
            k.y = y;
        }
    }
    Ok(out)
}

/// The last `frames` frames.
pub fn crop_tail(seq: &PoseSequence, frames: usize) -> Result<PoseSequence> {
    let n = seq.num_frames();
    if n < frames || frames == 0 {
        return Err(Error::SequenceTooShort { len: n, needed: frames });
    }
    seq.slice_frames(n - frames, n)
}

fn similarity(seq: &PoseSequence, frame_params: impl Fn(usize) -> ((f64, f64), f64)) -> PoseSequence {
    seq.map_keypoints(|t, _, k| {
        let ((cx, cy), scale) = frame_params(t);
        Keypoint::new((k.x - cx) / scale, (k.y - cy) / scale, k.conf)
    })
}

const MIN_HIP_WIDTH: f64 = 1e-9;

/// Center frame's mid-hip to the origin and its hip width to 1, applied to
/// every frame.
pub fn normalize_per_video(seq: &PoseSequence) -> Result<PoseSequence> {
    let center = seq.num_frames() / 2;
    let width = seq.hip_width(center);
    if !(width > MIN_HIP_WIDTH) {
        return Err(Error::DegenerateHipWidth { frame: center });
    }
    let origin = seq.mid_hip(center);
    Ok(similarity(seq, |_| (origin, width)))
}

/// Every frame's mid-hip to the origin and hip width to 1.
pub fn normalize_per_frame(seq: &PoseSequence) -> Result<PoseSequence> {
    if let Some(frame) = (0..seq.num_frames()).find(|&t| !(seq.hip_width(t) > MIN_HIP_WIDTH)) {
        return Err(Error::DegenerateHipWidth { frame });
    }
    Ok(similarity(seq, |t| (seq.mid_hip(t), seq.hip_width(t))))
}

pub fn normalize(seq: &PoseSequence, mode: Normalization) -> Result<PoseSequence> {
    match mode {
        Normalization::PerVideo => normalize_per_video(seq),
        Normalization::PerFrame => normalize_per_frame(seq),
    }
}

/// Lateral reflection: `x -> -x` and left/right joints exchanged.
pub fn mirror(seq: &PoseSequence) -> PoseSequence {
    let layout = seq.layout();
    let mut out = seq.clone();
    for t in 0..seq.num_frames() {
        for j in 0..seq.num_joints() {
            let k = seq.get(t, layout.mirror_index(j));
            *out.get_mut(t, j) = Keypoint::new(-k.x, k.y, k.conf);
        }
    }
    out
}

/// Reduce to a joint set in canonical order.
pub fn select_joints(seq: &PoseSequence, target: JointLayout) -> Result<PoseSequence> {
    let from = seq.layout();
    if from == target {
        return Ok(seq.clone());
    }
    let idx: Vec<usize> = target
        .names()
        .iter()
        .map(|name| {
            from.index_of(name)
                .ok_or_else(|| Error::invalid(format!("joint `{name}` not present")))
        })
        .collect::<Result<_>>()?;
    let mut kps = Vec::with_capacity(seq.num_frames() * idx.len());
    for t in 0..seq.num_frames() {
        kps.extend(idx.iter().map(|&j| seq.get(t, j)));
    }
    PoseSequence::new(kps, target, seq.fps)
}

/// Run the full pipeline (without mirroring) on a raw sequence.
pub fn prepare(seq: &PoseSequence, cfg: &PreprocessConfig) -> Result<PoseSequence> {
    let filled = interpolate_missing(seq)?;
    if filled.num_frames() < cfg.window_frames {
        return Err(Error::SequenceTooShort {
            len: filled.num_frames(),
            needed: cfg.window_frames,
        });
    }
    let smoothed = smooth(&filled, cfg.smoothing_window)?;
    let cropped = crop_tail(&smoothed, cfg.window_frames)?;
    let selected = select_joints(&cropped, cfg.joints)?;
    normalize(&selected, cfg.normalization)
}

/// Network input for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub frames: usize,
    /// `frames x 2J`, frame-major, channels `[x_0..x_{J-1}, y_0..y_{J-1}]`.
    pub data: Vec<f32>,
    pub metadata: [f32; METADATA_LEN],
}

impl ModelInput {
    pub fn channels(&self) -> usize {
        self.data.len() / self.frames
    }
}

pub fn to_model_input(
    seq: &PoseSequence,
    meta: &WalkMetadata,
    cfg: &PreprocessConfig,
) -> Result<ModelInput> {
    if seq.num_frames() != cfg.window_frames {
        return Err(Error::Shape(format!(
            "sequence has {} frames, model expects {}",
            seq.num_frames(),
            cfg.window_frames
        )));
    }
    if seq.layout() != cfg.joints {
        return Err(Error::Shape(format!(
            "sequence has {} joints, model expects {}",
            seq.num_joints(),
            cfg.joints.num_joints()
        )));
    }
    let nj = seq.num_joints();
    let mut data = Vec::with_capacity(seq.num_frames() * 2 * nj);
    for t in 0..seq.num_frames() {
        let frame = seq.frame(t);
        data.extend(frame.iter().map(|k| k.x as f32));
        data.extend(frame.iter().map(|k| k.y as f32));
    }
    Ok(ModelInput {
        frames: seq.num_frames(),
        data,
        metadata: encode_metadata(meta).map(|v| v as f32),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Cohort, Tracker};
    use proptest::prelude::*;

    fn seq_from_x(xs: &[f64]) -> PoseSequence {
        PoseSequence::from_fn(xs.len(), JointLayout::Lower6, 30.0, |t, j| {
            Keypoint::new(xs[t] + j as f64, 0.5 * j as f64, 1.0)
        })
        .unwrap()
    }

    fn walkish(n: usize, scale_growth: f64) -> PoseSequence {
        PoseSequence::from_fn(n, JointLayout::Full12, 30.0, |t, j| {
            let s = 1.0 + scale_growth * t as f64;
            let side = if j % 2 == 0 { 1.0 } else { -1.0 };
            let x = 320.0 + s * side * (10.0 + j as f64) + (t as f64 * 0.3).sin();
            let y = 200.0 + s * 8.0 * j as f64;
            Keypoint::new(x, y, 1.0)
        })
        .unwrap()
    }

    fn meta() -> WalkMetadata {
        WalkMetadata {
            walk_id: "w".into(),
            subject_id: "s".into(),
            cohort: Cohort::DS1,
            tracker: Tracker::TrackerA,
        }
    }

    #[test]
    fn interpolation_identity_without_gaps() {
        let s = seq_from_x(&[0.0, 1.0, 2.0]);
        assert_eq!(interpolate_missing(&s).unwrap(), s);
    }

    #[test]
    fn interpolation_fills_linear_gap() {
        let mut s = seq_from_x(&[0.0, 0.0, 0.0, 0.0, 8.0]);
        for t in 1..4 {
            s.get_mut(t, 0).conf = 0.0;
            s.get_mut(t, 0).x = 99.0;
        }
        let out = interpolate_missing(&s).unwrap();
        let xs: Vec<f64> = (0..5).map(|t| out.get(t, 0).x).collect();
        assert_eq!(xs, vec![0.0, 2.0, 4.0, 6.0, 8.0]);
        assert!(out.keypoints().iter().all(|k| k.conf == 1.0));
    }

    #[test]
    fn interpolation_extends_edges() {
        let mut s = seq_from_x(&[5.0, 6.0, 7.0, 8.0]);
        s.get_mut(0, 2).conf = 0.0;
        s.get_mut(3, 2).conf = 0.0;
        let out = interpolate_missing(&s).unwrap();
        assert_eq!(out.get(0, 2).x, s.get(1, 2).x);
        assert_eq!(out.get(3, 2).x, s.get(2, 2).x);
    }

    #[test]
    fn interpolation_needs_two_detections() {
        let mut s = seq_from_x(&[0.0, 1.0, 2.0]);
        let ankle = JointLayout::Lower6.left_ankle();
        s.get_mut(0, ankle).conf = 0.0;
        s.get_mut(1, ankle).conf = 0.0;
        match interpolate_missing(&s) {
            Err(Error::InsufficientDetections { joint, valid }) => {
                assert_eq!(joint, "left_ankle");
                assert_eq!(valid, 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn smoothing_cases() {
        let s = seq_from_x(&[0.0, 3.0, 6.0, 9.0, 12.0]);
        assert_eq!(smooth(&s, 1).unwrap(), s);
        let out = smooth(&s, 3).unwrap();
        let xs: Vec<f64> = (0..5).map(|t| out.get(t, 0).x).collect();
        assert_eq!(xs, vec![1.5, 3.0, 6.0, 9.0, 10.5]);
        let c = seq_from_x(&[2.0; 7]);
        assert_eq!(smooth(&c, 5).unwrap(), c);
        assert!(smooth(&s, 2).is_err());
        assert!(smooth(&s, 7).is_err());
    }

    #[test]
    fn crop_keeps_tail() {
        let xs: Vec<f64> = (0..300).map(f64::from).collect();
        let s = seq_from_x(&xs);
        let c = crop_tail(&s, 120).unwrap();
        assert_eq!(c.num_frames(), 120);
        assert_eq!(c.get(0, 0).x, 180.0);
        assert_eq!(c.get(119, 0).x, 299.0);
        let s120 = seq_from_x(&xs[..120]);
        assert_eq!(crop_tail(&s120, 120).unwrap(), s120);
        assert!(matches!(
            crop_tail(&seq_from_x(&xs[..100]), 120),
            Err(Error::SequenceTooShort { len: 100, needed: 120 })
        ));
    }

    #[test]
    fn per_video_normalizes_center_frame() {
        let layout = JointLayout::Lower6;
        let s = PoseSequence::from_fn(5, layout, 30.0, |t, j| {
            let k = if j == layout.left_hip() {
                Keypoint::new(6.0, 7.0, 1.0)
            } else if j == layout.right_hip() {
                Keypoint::new(4.0, 7.0, 1.0)
            } else {
                Keypoint::new(t as f64, j as f64, 1.0)
            };
            k
        })
        .unwrap();
        let n = normalize_per_video(&s).unwrap();
        assert_eq!(n.mid_hip(2), (0.0, 0.0));
        assert!((n.hip_width(2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn per_video_keeps_approach_scaling() {
        let s = walkish(120, 0.01);
        let n = normalize_per_video(&s).unwrap();
        assert!(n.hip_width(119) > 1.0);
        assert!(n.hip_width(0) < 1.0);
        let f = normalize_per_frame(&s).unwrap();
        assert!((f.hip_width(0) - 1.0).abs() < 1e-9 && (f.hip_width(119) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_hips_are_rejected() {
        let s = seq_from_x(&[0.0; 4]).map_keypoints(|_, _, _| Keypoint::new(1.0, 1.0, 1.0));
        assert!(matches!(
            normalize_per_video(&s),
            Err(Error::DegenerateHipWidth { frame: 2 })
        ));
        assert!(matches!(
            normalize_per_frame(&s),
            Err(Error::DegenerateHipWidth { frame: 0 })
        ));
    }

    #[test]
    fn mirror_symmetric_pose() {
        let layout = JointLayout::Lower6;
        let s = PoseSequence::from_fn(1, layout, 30.0, |_, j| {
            if j == layout.left_ankle() {
                Keypoint::new(-1.0, 0.0, 1.0)
            } else if j == layout.right_ankle() {
                Keypoint::new(1.0, 0.0, 1.0)
            } else {
                Keypoint::new(if j % 2 == 0 { -2.0 } else { 2.0 }, 3.0, 1.0)
            }
        })
        .unwrap();
        let m = mirror(&s);
        assert_eq!(m.get(0, layout.left_ankle()), Keypoint::new(-1.0, 0.0, 1.0));
        assert_eq!(m.get(0, layout.right_ankle()), Keypoint::new(1.0, 0.0, 1.0));
    }

    #[test]
    fn joint_selection() {
        let s = walkish(4, 0.0);
        assert_eq!(select_joints(&s, JointLayout::Full12).unwrap(), s);
        let lower = select_joints(&s, JointLayout::Lower6).unwrap();
        assert_eq!(
            lower.joint_names(),
            ["left_hip", "right_hip", "left_knee", "right_knee", "left_ankle", "right_ankle"]
        );
        assert_eq!(lower.get(2, 0), s.get(2, 6));
        assert_eq!(select_joints(&lower, JointLayout::Lower6).unwrap(), lower);
        assert!(select_joints(&lower, JointLayout::Full12).is_err());
    }

    #[test]
    fn model_input_shapes() {
        let cfg = PreprocessConfig::default();
        let s = walkish(120, 0.0);
        let input = to_model_input(&s, &meta(), &cfg).unwrap();
        assert_eq!((input.frames, input.channels()), (120, 24));
        assert_eq!(input.data[0], s.get(0, 0).x as f32);
        assert_eq!(input.data[12], s.get(0, 0).y as f32);
        assert_eq!(input.metadata, [1.0, 0.0, 0.0, 1.0, 0.0]);

        let lower_cfg = PreprocessConfig {
            joints: JointLayout::Lower6,
            ..cfg
        };
        let lower = select_joints(&s, JointLayout::Lower6).unwrap();
        let li = to_model_input(&lower, &meta(), &lower_cfg).unwrap();
        assert_eq!((li.frames, li.channels()), (120, 12));

        let short = walkish(119, 0.0);
        assert!(matches!(to_model_input(&short, &meta(), &cfg), Err(Error::Shape(_))));
    }

    #[test]
    fn prepare_pipeline_output_shape() {
        let cfg = PreprocessConfig::default();
        let s = walkish(150, 0.005);
        let p = prepare(&s, &cfg).unwrap();
        assert_eq!(p.num_frames(), 120);
        let (mx, my) = p.mid_hip(60);
        assert!(mx.abs() < 1e-12 && my.abs() < 1e-12);
        assert!((p.hip_width(60) - 1.0).abs() < 1e-12);
        assert!(matches!(prepare(&walkish(100, 0.0), &cfg), Err(Error::SequenceTooShort { .. })));
    }

    fn arb_seq() -> impl Strategy<Value = PoseSequence> {
        (3usize..20, proptest::collection::vec(-50.0f64..50.0, 12 * 2 * 20))
            .prop_map(|(n, v)| {
                PoseSequence::from_fn(n, JointLayout::Full12, 30.0, |t, j| {
                    let i = 2 * (t * 12 + j);
                    // keep hips apart
                    let bias = if j == 6 { 80.0 } else if j == 7 { -80.0 } else { 0.0 };
                    Keypoint::new(v[i] + bias, v[i + 1], 1.0)
                })
                .unwrap()
            })
    }

    proptest! {
        #[test]
        fn per_video_similarity_invariant(seq in arb_seq(), s in 0.1f64..10.0, dx in -100.0f64..100.0, dy in -100.0f64..100.0) {
            let moved = seq.map_keypoints(|_, _, k| Keypoint::new(s * k.x + dx, s * k.y + dy, k.conf));
            let a = normalize_per_video(&seq).unwrap();
            let b = normalize_per_video(&moved).unwrap();
            for (p, q) in a.keypoints().iter().zip(b.keypoints()) {
                prop_assert!((p.x - q.x).abs() <= 1e-6 && (p.y - q.y).abs() <= 1e-6);
            }
        }

        #[test]
        fn normalization_is_idempotent(seq in arb_seq()) {
            for mode in [Normalization::PerVideo, Normalization::PerFrame] {
                let once = normalize(&seq, mode).unwrap();
                let twice = normalize(&once, mode).unwrap();
                for (p, q) in once.keypoints().iter().zip(twice.keypoints()) {
                    prop_assert!((p.x - q.x).abs() <= 1e-9 && (p.y - q.y).abs() <= 1e-9);
                }
            }
        }

        #[test]
        fn mirror_involution_and_commutation(seq in arb_seq()) {
            prop_assert_eq!(mirror(&mirror(&seq)), seq.clone());
            let w = if seq.num_frames() >= 3 { 3 } else { 1 };
            let a = mirror(&smooth(&seq, w).unwrap());
            let b = smooth(&mirror(&seq), w).unwrap();
            for (p, q) in a.keypoints().iter().zip(b.keypoints()) {
                prop_assert!((p.x - q.x).abs() <= 1e-9 && (p.y - q.y).abs() <= 1e-9);
            }
            let k = seq.num_frames() - 1;
            prop_assert_eq!(mirror(&crop_tail(&seq, k).unwrap()), crop_tail(&mirror(&seq), k).unwrap());
        }
    }
}
