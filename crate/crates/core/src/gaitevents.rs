//! Footfall detection from ankle trajectories.
//!
//! A planted foot is stationary, so stance phases show up as runs of frames
//! where the (smoothed) ankle speed drops below a threshold. The first frame
//! of a run is a heel strike, the last a toe off. Step distances come from
//! the ankle positions at heel strikes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{GaitFeatures, PoseSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Foot {
    Left,
    Right,
}

impl Foot {
    pub fn other(self) -> Foot {
        match self {
            Foot::Left => Foot::Right,
            Foot::Right => Foot::Left,
        }
    }
}

/// Detector settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// Stance threshold as a fraction of the 95th-percentile speed.
    pub threshold_fraction: f64,
    pub min_stance_s: f64,
    /// Centered moving-average window applied to positions, in frames.
    pub smoothing_window: usize,
    /// Minimum length of input, in seconds.
    pub min_duration_s: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            threshold_fraction: 0.15,
            min_stance_s: 0.1,
            smoothing_window: 5,
            min_duration_s: 2.0,
        }
    }
}

/// Stance phases of one foot. Frames are indices into the input series.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FootEvents {
    /// Inclusive `(first, last)` frames of every stance.
    pub stances: Vec<(usize, usize)>,
    /// Stance starts not truncated by the start of the recording.
    pub heel_strikes: Vec<usize>,
    /// Stance ends not truncated by the end of the recording.
    pub toe_offs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FootfallEvents {
    pub left: FootEvents,
    pub right: FootEvents,
}

impl FootfallEvents {
    pub fn foot(&self, foot: Foot) -> &FootEvents {
        match foot {
            Foot::Left => &self.left,
            Foot::Right => &self.right,
        }
    }

    /// Heel strikes of both feet in time order.
    pub fn heel_strikes(&self) -> Vec<(usize, Foot)> {
        let mut all: Vec<(usize, Foot)> = self
            .left
            .heel_strikes
            .iter()
            .map(|&f| (f, Foot::Left))
            .chain(self.right.heel_strikes.iter().map(|&f| (f, Foot::Right)))
            .collect();
        all.sort();
        all
    }

    /// Ordering and interleaving invariants.
    pub fn check(&self) -> Result<()> {
        for foot in [&self.left, &self.right] {
            if !foot.stances.windows(2).all(|w| w[0].1 < w[1].0)
                || !foot.stances.iter().all(|s| s.0 <= s.1)
                || !foot.heel_strikes.windows(2).all(|w| w[0] < w[1])
                || !foot.toe_offs.windows(2).all(|w| w[0] < w[1])
            {
                return Err(Error::invalid("events are not strictly increasing"));
            }
        }
        if self.heel_strikes().windows(2).any(|w| w[0].1 == w[1].1) {
            return Err(Error::NonAlternating);
        }
        Ok(())
    }
}

/// Centered moving average with truncated windows at the edges.
pub(crate) fn moving_average<const D: usize>(xs: &[[f64; D]], window: usize) -> Vec<[f64; D]> {
    let half = window / 2;
    let n = xs.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let mut acc = [0.0; D];
            for x in &xs[lo..hi] {
                for d in 0..D {
                    acc[d] += x[d];
                }
            }
            acc.map(|a| a / (hi - lo) as f64)
        })
        .collect()
}

/// Per-frame speed (units per frame) by central differences.
fn speeds<const D: usize>(xs: &[[f64; D]]) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            let dist: f64 = (0..D).map(|d| (xs[b][d] - xs[a][d]).powi(2)).sum::<f64>().sqrt();
            dist / (b - a).max(1) as f64
        })
        .collect()
}

fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

fn detect_foot<const D: usize>(track: &[[f64; D]], fps: f64, cfg: &DetectorConfig) -> FootEvents {
    let smoothed = moving_average(track, cfg.smoothing_window.max(1));
    let speed = speeds(&smoothed);
    let threshold = cfg.threshold_fraction * percentile(&speed, 0.95);
    let min_len = (cfg.min_stance_s * fps).ceil().max(1.0) as usize;
    let n = track.len();
    // Backward-difference speed of the raw track, used to undo the boundary
    // blur introduced by smoothing.
    let raw_step = |i: usize| -> f64 {
        (0..D)
            .map(|d| (track[i][d] - track[i - 1][d]).powi(2))
            .sum::<f64>()
            .sqrt()
    };

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < n {
        if speed[i] > threshold {
            i += 1;
            continue;
        }
        let mut start = i;
        while i < n && speed[i] <= threshold {
            i += 1;
        }
        let mut end = i - 1;
        if end + 1 - start < min_len {
            continue;
        }
        let floor = runs.last().map_or(0, |r| r.1 + 1);
        while start > floor && raw_step(start) <= threshold {
            start -= 1;
        }
        while end + 1 < n && raw_step(end + 1) <= threshold {
            end += 1;
        }
        match runs.last_mut() {
            Some(prev) if start <= prev.1 + 1 => prev.1 = prev.1.max(end),
            _ => runs.push((start, end)),
        }
        i = i.max(end + 1);
    }

    let mut events = FootEvents::default();
    for (start, end) in runs {
        events.stances.push((start, end));
        if start > 0 {
            events.heel_strikes.push(start);
        }
        if end < n - 1 {
            events.toe_offs.push(end);
        }
    }
    events
}

/// Drop heel strikes that repeat the previous foot, keeping the earlier one.
fn enforce_alternation(events: &mut FootfallEvents) {
    let mut keep_left = Vec::new();
    let mut keep_right = Vec::new();
    let mut last: Option<Foot> = None;
    for (frame, foot) in events.heel_strikes() {
        if last == Some(foot) {
            continue;
        }
        last = Some(foot);
        match foot {
            Foot::Left => keep_left.push(frame),
            Foot::Right => keep_right.push(frame),
        }
    }
    events.left.heel_strikes = keep_left;
    events.right.heel_strikes = keep_right;
}

/// Detect stance phases of both feet from ankle positions (2D or 3D).
pub fn detect_footfalls<const D: usize>(
    left: &[[f64; D]],
    right: &[[f64; D]],
    fps: f64,
    cfg: &DetectorConfig,
) -> Result<FootfallEvents> {
    if left.len() != right.len() {
        return Err(Error::Shape(format!(
            "left ankle has {} frames, right has {}",
            left.len(),
            right.len()
        )));
    }
    let needed = (cfg.min_duration_s * fps).ceil() as usize;
    if left.len() < needed.max(3) {
        return Err(Error::SequenceTooShort {
            len: left.len(),
            needed: needed.max(3),
        });
    }
    if left.iter().chain(right).flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ankle trajectory".into()));
    }
    let mut events = FootfallEvents {
        left: detect_foot(left, fps, cfg),
        right: detect_foot(right, fps, cfg),
    };
    if events.left.stances.is_empty() || events.right.stances.is_empty() {
        return Err(Error::NoStanceDetected);
    }
    enforce_alternation(&mut events);
    events.check()?;
    Ok(events)
}

/// 3D trajectories used for feature extraction. `z` is the anterior
/// (walking) axis and `x` the lateral axis.
#[derive(Debug, Clone, Copy)]
pub struct Trajectories3D<'a> {
    pub left_ankle: &'a [[f64; 3]],
    pub right_ankle: &'a [[f64; 3]],
    pub mid_hip: &'a [[f64; 3]],
}

/// Mean step time, length and width over consecutive opposite-foot heel
/// strikes; velocity from mid-hip displacement between the first and last
/// heel strike.
pub fn features_from_events(
    events: &FootfallEvents,
    traj: &Trajectories3D<'_>,
    fps: f64,
) -> Result<GaitFeatures> {
    let strikes = events.heel_strikes();
    if strikes.len() < 2 {
        return Err(Error::TooFewSteps {
            found: strikes.len(),
            needed: 2,
        });
    }
    if strikes.windows(2).any(|w| w[0].1 == w[1].1) {
        return Err(Error::NonAlternating);
    }
    let n = traj.mid_hip.len();
    if traj.left_ankle.len() != n || traj.right_ankle.len() != n {
        return Err(Error::Shape("trajectories differ in length".into()));
    }
    if let Some(&(f, _)) = strikes.iter().find(|(f, _)| *f >= n) {
        return Err(Error::invalid(format!("heel strike at frame {f} beyond {n} frames")));
    }
    let ankle = |frame: usize, foot: Foot| match foot {
        Foot::Left => traj.left_ankle[frame],
        Foot::Right => traj.right_ankle[frame],
    };
    let steps = (strikes.len() - 1) as f64;
    let (mut frames, mut length, mut width) = (0.0, 0.0, 0.0);
    for w in strikes.windows(2) {
        let (a, b) = (ankle(w[0].0, w[0].1), ankle(w[1].0, w[1].1));
        frames += (w[1].0 - w[0].0) as f64;
        length += (b[2] - a[2]).abs();
        width += (b[0] - a[0]).abs();
    }
    let (first, last) = (strikes[0].0, strikes[strikes.len() - 1].0);
    let velocity =
        (traj.mid_hip[last][2] - traj.mid_hip[first][2]).abs() / ((last - first) as f64 / fps);
    Ok(GaitFeatures::new(
        frames / steps / fps,
        width / steps,
        length / steps,
        velocity,
    ))
}

/// Run detection and feature extraction on noise-free 3D trajectories.
pub fn oracle_features(
    traj: &Trajectories3D<'_>,
    fps: f64,
    cfg: &DetectorConfig,
) -> Result<(FootfallEvents, GaitFeatures)> {
    let events = detect_footfalls(traj.left_ankle, traj.right_ankle, fps, cfg)?;
    let features = features_from_events(&events, traj, fps)?;
    Ok((events, features))
}

/// Classical 2D baseline. Only step time is recoverable from image-plane
/// ankle motion; spatial features are not produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineFeatures {
    pub step_time_s: f64,
}

pub fn baseline_features_2d(seq: &PoseSequence, cfg: &DetectorConfig) -> Result<BaselineFeatures> {
    if seq.keypoints().iter().any(|k| !k.is_valid()) {
        return Err(Error::invalid(
            "sequence has missing detections; interpolate before running the baseline",
        ));
    }
    let layout = seq.layout();
    let track = |j: usize| -> Vec<[f64; 2]> {
        seq.joint_track(j).iter().map(|k| [k.x, k.y]).collect()
    };
    let (left, right) = (track(layout.left_ankle()), track(layout.right_ankle()));
    let events = detect_footfalls(&left, &right, seq.fps, cfg)?;
    let strikes = events.heel_strikes();
    if strikes.len() < 2 {
        return Err(Error::TooFewSteps {
            found: strikes.len(),
            needed: 2,
        });
    }
    let span = (strikes[strikes.len() - 1].0 - strikes[0].0) as f64;
    Ok(BaselineFeatures {
        step_time_s: span / (strikes.len() - 1) as f64 / seq.fps,
    })
}
