//! Shared domain types.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of predicted gait features.
pub const NUM_FEATURES: usize = 4;

/// Length of the metadata vector: 3 tracker slots followed by 2 cohort slots.
pub const METADATA_LEN: usize = 5;

/// Canonical 12-joint order. Left precedes right in every pair.
pub const FULL_JOINTS: [&str; 12] = [
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
];

/// Canonical lower-body order.
pub const LOWER_JOINTS: [&str; 6] = [
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointLayout {
    Full12,
    Lower6,
}

impl JointLayout {
    pub fn names(self) -> &'static [&'static str] {
        match self {
            JointLayout::Full12 => &FULL_JOINTS,
            JointLayout::Lower6 => &LOWER_JOINTS,
        }
    }

    pub fn num_joints(self) -> usize {
        self.names().len()
    }

    pub fn from_num_joints(j: usize) -> Option<Self> {
        match j {
            12 => Some(JointLayout::Full12),
            6 => Some(JointLayout::Lower6),
            _ => None,
        }
    }

    /// Recognise a layout from joint names; the order must be canonical.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Option<Self> {
        [JointLayout::Full12, JointLayout::Lower6]
            .into_iter()
            .find(|l| {
                l.names().len() == names.len()
                    && l.names().iter().zip(names).all(|(a, b)| *a == b.as_ref())
            })
    }

    /// Index of a joint by name.
    pub fn index_of(self, name: &str) -> Option<usize> {
        self.names().iter().position(|n| *n == name)
    }

    pub fn left_hip(self) -> usize {
        self.index_of("left_hip").unwrap()
    }

    pub fn right_hip(self) -> usize {
        self.index_of("right_hip").unwrap()
    }

    pub fn left_knee(self) -> usize {
        self.index_of("left_knee").unwrap()
    }

    pub fn right_knee(self) -> usize {
        self.index_of("right_knee").unwrap()
    }

    pub fn left_ankle(self) -> usize {
        self.index_of("left_ankle").unwrap()
    }

    pub fn right_ankle(self) -> usize {
        self.index_of("right_ankle").unwrap()
    }

    /// Joint index after exchanging left and right. Both canonical layouts
    /// store pairs as adjacent (left, right) entries.
    pub fn mirror_index(self, j: usize) -> usize {
        j ^ 1
    }
}

/// One detected 2D joint.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// Detection confidence in [0, 1]; zero marks a missing detection.
    pub conf: f64,
}

impl Keypoint {
    pub fn new(x: f64, y: f64, conf: f64) -> Self {
        Keypoint { x, y, conf }
    }

    pub fn is_valid(&self) -> bool {
        self.conf > 0.0
    }
}

/// A T x J grid of 2D keypoints, stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    keypoints: Vec<Keypoint>,
    num_frames: usize,
    layout: JointLayout,
    pub fps: f64,
}

impl PoseSequence {
    pub fn new(keypoints: Vec<Keypoint>, layout: JointLayout, fps: f64) -> Result<Self> {
        let j = layout.num_joints();
        if keypoints.is_empty() || keypoints.len() % j != 0 {
            return Err(Error::Shape(format!(
                "{} keypoints is not a positive multiple of {j} joints",
                keypoints.len()
            )));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::invalid(format!("fps must be positive, got {fps}")));
        }
        for (i, k) in keypoints.iter().enumerate() {
            if !(0.0..=1.0).contains(&k.conf) {
                return Err(Error::invalid(format!(
                    "frame {} joint {}: conf {} outside [0, 1]",
                    i / j,
                    layout.names()[i % j],
                    k.conf
                )));
            }
            if !(k.x.is_finite() && k.y.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "frame {} joint {}",
                    i / j,
                    layout.names()[i % j]
                )));
            }
        }
        Ok(PoseSequence {
            num_frames: keypoints.len() / j,
            keypoints,
            layout,
            fps,
        })
    }

    /// Build from a per-frame closure.
    pub fn from_fn(
        num_frames: usize,
        layout: JointLayout,
        fps: f64,
        mut f: impl FnMut(usize, usize) -> Keypoint,
    ) -> Result<Self> {
        let j = layout.num_joints();
        let mut keypoints = Vec::with_capacity(num_frames * j);
        for t in 0..num_frames {
            for jj in 0..j {
                keypoints.push(f(t, jj));
            }
        }
        Self::new(keypoints, layout, fps)
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_joints(&self) -> usize {
        self.layout.num_joints()
    }

    pub fn layout(&self) -> JointLayout {
        self.layout
    }

    pub fn joint_names(&self) -> &'static [&'static str] {
        self.layout.names()
    }

    pub fn get(&self, t: usize, j: usize) -> Keypoint {
        self.keypoints[t * self.num_joints() + j]
    }

    pub fn get_mut(&mut self, t: usize, j: usize) -> &mut Keypoint {
        let n = self.num_joints();
        &mut self.keypoints[t * n + j]
    }

    pub fn frame(&self, t: usize) -> &[Keypoint] {
        let n = self.num_joints();
        &self.keypoints[t * n..(t + 1) * n]
    }

    pub fn keypoints(&self) -> &[Keypoint] {
        &self.keypoints
    }

    /// Keypoints of one joint across all frames.
    pub fn joint_track(&self, j: usize) -> Vec<Keypoint> {
        (0..self.num_frames).map(|t| self.get(t, j)).collect()
    }

    /// Contiguous frames `start..end`.
    pub fn slice_frames(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.num_frames {
            return Err(Error::invalid(format!(
                "frame range {start}..{end} out of 0..{}",
                self.num_frames
            )));
        }
        let n = self.num_joints();
        Ok(PoseSequence {
            keypoints: self.keypoints[start * n..end * n].to_vec(),
            num_frames: end - start,
            layout: self.layout,
            fps: self.fps,
        })
    }

    /// Euclidean distance between the hips of frame `t`.
    pub fn hip_width(&self, t: usize) -> f64 {
        let l = self.get(t, self.layout.left_hip());
        let r = self.get(t, self.layout.right_hip());
        (l.x - r.x).hypot(l.y - r.y)
    }

    pub fn mid_hip(&self, t: usize) -> (f64, f64) {
        let l = self.get(t, self.layout.left_hip());
        let r = self.get(t, self.layout.right_hip());
        ((l.x + r.x) / 2.0, (l.y + r.y) / 2.0)
    }

    /// Apply `f` to every keypoint, keeping the layout.
    pub fn map_keypoints(&self, mut f: impl FnMut(usize, usize, Keypoint) -> Keypoint) -> Self {
        let n = self.num_joints();
        let keypoints = self
            .keypoints
            .iter()
            .enumerate()
            .map(|(i, k)| f(i / n, i % n, *k))
            .collect();
        PoseSequence {
            keypoints,
            num_frames: self.num_frames,
            layout: self.layout,
            fps: self.fps,
        }
    }
}

/// Walk-averaged gait features in physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitFeatures {
    pub step_time_s: f64,
    pub step_width_cm: f64,
    pub step_length_cm: f64,
    pub velocity_cm_s: f64,
}

impl GaitFeatures {
    pub const NAMES: [&'static str; NUM_FEATURES] =
        ["step_time", "step_width", "step_length", "velocity"];

    pub fn new(step_time_s: f64, step_width_cm: f64, step_length_cm: f64, velocity_cm_s: f64) -> Self {
        GaitFeatures {
            step_time_s,
            step_width_cm,
            step_length_cm,
            velocity_cm_s,
        }
    }

    pub fn from_array(a: [f64; NUM_FEATURES]) -> Self {
        GaitFeatures::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(&self) -> [f64; NUM_FEATURES] {
        [
            self.step_time_s,
            self.step_width_cm,
            self.step_length_cm,
            self.velocity_cm_s,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in Self::NAMES.iter().zip(self.to_array()) {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cohort {
    DS1,
    DS2,
}

impl Cohort {
    pub const ALL: [Cohort; 2] = [Cohort::DS1, Cohort::DS2];

    pub fn as_str(self) -> &'static str {
        match self {
            Cohort::DS1 => "DS1",
            Cohort::DS2 => "DS2",
        }
    }
}

impl fmt::Display for Cohort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Cohort {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "DS1" => Ok(Cohort::DS1),
            "DS2" => Ok(Cohort::DS2),
            _ => Err(Error::invalid(format!("unknown cohort `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tracker {
    TrackerA,
    TrackerB,
    TrackerC,
}

impl Tracker {
    pub const ALL: [Tracker; 3] = [Tracker::TrackerA, Tracker::TrackerB, Tracker::TrackerC];

    pub fn as_str(self) -> &'static str {
        match self {
            Tracker::TrackerA => "TrackerA",
            Tracker::TrackerB => "TrackerB",
            Tracker::TrackerC => "TrackerC",
        }
    }
}

impl fmt::Display for Tracker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tracker {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "TrackerA" => Ok(Tracker::TrackerA),
            "TrackerB" => Ok(Tracker::TrackerB),
            "TrackerC" => Ok(Tracker::TrackerC),
            _ => Err(Error::invalid(format!("unknown tracker `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WalkMetadata {
    pub walk_id: String,
    pub subject_id: String,
    pub cohort: Cohort,
    pub tracker: Tracker,
}

/// One-hot tracker (A, B, C) followed by one-hot cohort (DS1, DS2).
pub fn encode_metadata(meta: &WalkMetadata) -> [f64; METADATA_LEN] {
    let mut v = [0.0; METADATA_LEN];
    v[meta.tracker as usize] = 1.0;
    v[3 + meta.cohort as usize] = 1.0;
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkRecord {
    pub meta: WalkMetadata,
    pub sequence: PoseSequence,
    pub truth: Option<GaitFeatures>,
}

/// Per-feature weights of the training loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub step_time: f64,
    pub step_width: f64,
    pub step_length: f64,
    pub velocity: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            step_time: 0.5,
            step_width: 2.0,
            step_length: 1.25,
            velocity: 1.0,
        }
    }
}

impl LossWeights {
    pub fn to_array(&self) -> [f64; NUM_FEATURES] {
        [self.step_time, self.step_width, self.step_length, self.velocity]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in GaitFeatures::NAMES.iter().zip(self.to_array()) {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid(format!("loss weight for {name} must be > 0, got {w}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(tracker: Tracker, cohort: Cohort) -> WalkMetadata {
        WalkMetadata {
            walk_id: "w".into(),
            subject_id: "s".into(),
            cohort,
            tracker,
        }
    }

    #[test]
    fn metadata_encoding_order() {
        assert_eq!(
            encode_metadata(&meta(Tracker::TrackerA, Cohort::DS1)),
            [1.0, 0.0, 0.0, 1.0, 0.0]
        );
        assert_eq!(
            encode_metadata(&meta(Tracker::TrackerC, Cohort::DS2)),
            [0.0, 0.0, 1.0, 0.0, 1.0]
        );
        assert_eq!(
            encode_metadata(&meta(Tracker::TrackerB, Cohort::DS1)),
            [0.0, 1.0, 0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn metadata_encoding_sums_to_two() {
        for t in Tracker::ALL {
            for c in Cohort::ALL {
                let v = encode_metadata(&meta(t, c));
                assert_eq!(v.len(), METADATA_LEN);
                assert_eq!(v.iter().sum::<f64>(), 2.0);
            }
        }
    }

    #[test]
    fn layouts_mirror_pairs() {
        for layout in [JointLayout::Full12, JointLayout::Lower6] {
            let names = layout.names();
            for j in 0..names.len() {
                let m = layout.mirror_index(j);
                assert_eq!(
                    names[j].replacen("left", "X", 1).replacen("right", "X", 1),
                    names[m].replacen("left", "X", 1).replacen("right", "X", 1)
                );
                assert_ne!(j, m);
            }
        }
        assert_eq!(JointLayout::from_names(&LOWER_JOINTS), Some(JointLayout::Lower6));
        assert_eq!(JointLayout::from_names(&["left_hip"]), None);
    }

    #[test]
    fn sequence_rejects_bad_conf() {
        let kps = vec![Keypoint::new(0.0, 0.0, 1.5); 6];
        assert!(PoseSequence::new(kps, JointLayout::Lower6, 30.0).is_err());
    }

    #[test]
    fn default_weights_match_table() {
        assert_eq!(LossWeights::default().to_array(), [0.5, 2.0, 1.25, 1.0]);
    }
}
