//! Synthetic walks toward a wall-mounted camera with known gait features.
//!
//! World frame: `x` lateral (positive towards the image right, which is the
//! walker's left), `y` up from the floor, `z` distance along the hallway from
//! the camera plane. Walkers approach the camera, so `z` decreases over time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaitevents::Foot;
use crate::types::{
    Cohort, GaitFeatures, JointLayout, Keypoint, PoseSequence, Tracker, WalkMetadata, WalkRecord,
    FULL_JOINTS,
};

/// Mixes a base seed with a path of indices into an independent stream seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    path.iter()
        .fold(splitmix(seed), |acc, &p| splitmix(acc ^ splitmix(p.wrapping_add(0xA5A5))))
}

/// Commanded gait of one walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitParams {
    pub step_time_s: f64,
    pub step_width_cm: f64,
    pub step_length_cm: f64,
    /// Always `step_length_cm / step_time_s`.
    pub velocity_cm_s: f64,
    /// Fraction of a gait cycle each foot spends on the ground.
    pub stance_fraction: f64,
    pub subject_height_cm: f64,
    /// Per-step coefficients of variation around the commanded values.
    pub step_time_cv: f64,
    pub step_width_cv: f64,
    pub step_length_cv: f64,
    /// Peak arm swing angle; zero holds the hands behind the back.
    pub arm_swing_deg: f64,
}

impl GaitParams {
    /// Noise-free parameters with typical body proportions.
    pub fn new(step_time_s: f64, step_width_cm: f64, step_length_cm: f64) -> Self {
        GaitParams {
            step_time_s,
            step_width_cm,
            step_length_cm,
            velocity_cm_s: step_length_cm / step_time_s,
            stance_fraction: 0.62,
            subject_height_cm: 165.0,
            step_time_cv: 0.0,
            step_width_cv: 0.0,
            step_length_cv: 0.0,
            arm_swing_deg: 15.0,
        }
    }

    /// Replace the three step quantities, keeping velocity consistent.
    pub fn with_steps(mut self, step_time_s: f64, step_width_cm: f64, step_length_cm: f64) -> Self {
        self.step_time_s = step_time_s;
        self.step_width_cm = step_width_cm;
        self.step_length_cm = step_length_cm;
        self.velocity_cm_s = step_length_cm / step_time_s;
        self
    }

    pub fn with_step_noise(mut self, time_cv: f64, width_cv: f64, length_cv: f64) -> Self {
        self.step_time_cv = time_cv;
        self.step_width_cv = width_cv;
        self.step_length_cv = length_cv;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step_time_s", self.step_time_s),
            ("step_width_cm", self.step_width_cm),
            ("step_length_cm", self.step_length_cm),
            ("subject_height_cm", self.subject_height_cm),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        let expected = self.step_length_cm / self.step_time_s;
        if (self.velocity_cm_s - expected).abs() > 1e-9 * expected {
            return Err(Error::invalid(format!(
                "velocity {} inconsistent with step_length / step_time = {expected}",
                self.velocity_cm_s
            )));
        }
        if !(self.stance_fraction > 0.4 && self.stance_fraction < 0.8) {
            return Err(Error::invalid(format!(
                "stance_fraction {} outside (0.4, 0.8)",
                self.stance_fraction
            )));
        }
        for (name, cv) in [
            ("step_time_cv", self.step_time_cv),
            ("step_width_cv", self.step_width_cv),
            ("step_length_cv", self.step_length_cv),
        ] {
            if !(cv.is_finite() && (0.0..0.5).contains(&cv)) {
                return Err(Error::invalid(format!("{name} must be in [0, 0.5), got {cv}")));
            }
        }
        Ok(())
    }
}

/// Mean and coefficient of variation of one gait quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCv {
    pub mean: f64,
    pub cv: f64,
}

/// Population anchors for a cohort: step time (s), step width (cm) and step
/// length (cm).
pub fn cohort_distribution(cohort: Cohort) -> [MeanCv; 3] {
    let m = |mean, cv| MeanCv { mean, cv };
    match cohort {
        Cohort::DS1 => [m(0.60, 0.21), m(17.0, 0.27), m(30.0, 0.32)],
        Cohort::DS2 => [m(0.61, 0.43), m(17.0, 0.27), m(32.0, 0.29)],
    }
}

/// Log-normal with the given mean and CV, rejection-truncated to
/// `mean ± 3 SD` (and to positive values).
pub fn truncated_lognormal(rng: &mut impl Rng, dist: MeanCv) -> f64 {
    if dist.cv == 0.0 {
        return dist.mean;
    }
    let sigma2 = (1.0 + dist.cv * dist.cv).ln();
    let mu = dist.mean.ln() - sigma2 / 2.0;
    let ln = LogNormal::new(mu, sigma2.sqrt()).expect("valid log-normal");
    let sd = dist.mean * dist.cv;
    let (lo, hi) = ((dist.mean - 3.0 * sd).max(0.0), dist.mean + 3.0 * sd);
    loop {
        let v = ln.sample(rng);
        if v > lo && v < hi {
            return v;
        }
    }
}

/// Draw a subject's gait for a cohort. Deterministic in `seed`.
pub fn sample_gait_params(cohort: Cohort, seed: u64) -> GaitParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [time, width, length] = cohort_distribution(cohort);
    let step_time = truncated_lognormal(&mut rng, time);
    let step_width = truncated_lognormal(&mut rng, width);
    let step_length = truncated_lognormal(&mut rng, length);
    let height: f64 = Normal::new(165.0f64, 9.0)
        .unwrap()
        .sample(&mut rng)
        .clamp(140.0, 195.0);
    GaitParams {
        stance_fraction: rng.random_range(0.58..0.68),
        subject_height_cm: height,
        step_time_cv: 0.03,
        step_width_cv: 0.10,
        step_length_cv: 0.04,
        arm_swing_deg: rng.random_range(10.0..25.0),
        ..GaitParams::new(step_time, step_width, step_length)
    }
}

/// One heel strike emitted by the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    pub foot: Foot,
    pub heel_strike_s: f64,
    pub toe_off_s: f64,
    /// Ankle position while the foot is planted.
    pub position: [f64; 3],
}

/// Where the walk happens in the hallway.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    /// Pelvis distance from the camera plane at the last frame.
    pub end_distance_cm: f64,
    /// Lateral offset of the walking line from the optical axis.
    pub lateral_offset_cm: f64,
}

impl Default for Placement {
    fn default() -> Self {
        Placement {
            end_distance_cm: 250.0,
            lateral_offset_cm: 0.0,
        }
    }
}

/// Noise-free 3D joint trajectories in the canonical 12-joint order.
#[derive(Debug, Clone, PartialEq)]
pub struct Walk3D {
    pub fps: f64,
    pub params: GaitParams,
    num_frames: usize,
    joints: Vec<[f64; 3]>,
    pelvis: Vec<[f64; 3]>,
    /// All heel strikes in time order, including some before the first
    /// frame and after the last.
    pub steps: Vec<StepEvent>,
}

impl Walk3D {
    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn joint(&self, t: usize, j: usize) -> [f64; 3] {
        self.joints[t * FULL_JOINTS.len() + j]
    }

    pub fn joint_track(&self, j: usize) -> Vec<[f64; 3]> {
        (0..self.num_frames).map(|t| self.joint(t, j)).collect()
    }

    pub fn pelvis(&self) -> &[[f64; 3]] {
        &self.pelvis
    }

    pub fn ankle_track(&self, foot: Foot) -> Vec<[f64; 3]> {
        let layout = JointLayout::Full12;
        self.joint_track(match foot {
            Foot::Left => layout.left_ankle(),
            Foot::Right => layout.right_ankle(),
        })
    }

    /// Copy with both ankle joints moved `ankle_cm` and both knees `knee_cm`
    /// laterally away from the body midline (negative moves them inward).
    /// Step events, and so the truth, are unchanged: tracked landmarks are
    /// not the points the walkway measures.
    pub fn with_landmark_offsets(&self, ankle_cm: f64, knee_cm: f64) -> Walk3D {
        let layout = JointLayout::Full12;
        let mut out = self.clone();
        let nj = FULL_JOINTS.len();
        for t in 0..self.num_frames {
            let mid = self.pelvis[t][0];
            for (ankle, knee, hip) in [
                (layout.left_ankle(), layout.left_knee(), layout.left_hip()),
                (layout.right_ankle(), layout.right_knee(), layout.right_hip()),
            ] {
                let side = (self.joints[t * nj + hip][0] - mid).signum();
                out.joints[t * nj + ankle][0] += side * ankle_cm;
                out.joints[t * nj + knee][0] += side * knee_cm;
            }
        }
        out
    }

    /// Heel strikes whose time falls on frames `start..end`.
    pub fn steps_in_frames(&self, start: usize, end: usize) -> impl Iterator<Item = (usize, &StepEvent)> {
        let lo = start as f64 / self.fps;
        let hi = (end as f64 - 1.0) / self.fps;
        self.steps
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.heel_strike_s >= lo && s.heel_strike_s <= hi)
    }

    fn from_parts(
        fps: f64,
        params: GaitParams,
        joints: Vec<[f64; 3]>,
        pelvis: Vec<[f64; 3]>,
        steps: Vec<StepEvent>,
    ) -> Self {
        Walk3D {
            fps,
            params,
            num_frames: pelvis.len(),
            joints,
            pelvis,
            steps,
        }
    }
}

pub fn simulate_walk3d(params: &GaitParams, duration_s: f64, fps: f64, seed: u64) -> Result<Walk3D> {
    simulate_walk3d_at(params, duration_s, fps, seed, &Placement::default())
}

struct Body {
    hip_height: f64,
    hip_half: f64,
    ankle_height: f64,
    thigh: f64,
    shank: f64,
    torso: f64,
    shoulder_half: f64,
    upper_arm: f64,
    forearm: f64,
}

impl Body {
    fn from_height(h: f64) -> Self {
        Body {
            hip_height: 0.50 * h,
            hip_half: 0.055 * h,
            ankle_height: 0.039 * h,
            thigh: 0.245 * h,
            shank: 0.246 * h,
            torso: 0.32 * h,
            shoulder_half: 0.115 * h,
            upper_arm: 0.186 * h,
            forearm: 0.146 * h,
        }
    }
}

const FOOT_LIFT_CM: f64 = 5.0;
const PELVIS_BOB_CM: f64 = 1.5;
const PELVIS_SWAY_CM: f64 = 1.5;

fn lerp3(a: [f64; 3], b: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2])]
}

fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Knee from hip and ankle with a forward (towards -z) bend.
fn knee_position(hip: [f64; 3], ankle: [f64; 3], thigh: f64, shank: f64) -> [f64; 3] {
    let d = [ankle[0] - hip[0], ankle[1] - hip[1], ankle[2] - hip[2]];
    let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let u = [d[0] / dist, d[1] / dist, d[2] / dist];
    if dist >= thigh + shank {
        return add3(hip, [u[0] * thigh, u[1] * thigh, u[2] * thigh]);
    }
    let a = (thigh * thigh - shank * shank + dist * dist) / (2.0 * dist);
    let h = (thigh * thigh - a * a).max(0.0).sqrt();
    // forward direction orthogonalised against the leg axis
    let fwd = [0.0, 0.0, -1.0];
    let dot = fwd[2] * u[2];
    let mut p = [fwd[0] - dot * u[0], fwd[1] - dot * u[1], fwd[2] - dot * u[2]];
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    if n > 1e-12 {
        p = [p[0] / n, p[1] / n, p[2] / n];
    }
    [
        hip[0] + a * u[0] + h * p[0],
        hip[1] + a * u[1] + h * p[1],
        hip[2] + a * u[2] + h * p[2],
    ]
}

/// Simulate `duration_s` seconds of walking at `fps`, ending with the pelvis
/// at `placement.end_distance_cm` from the camera plane.
pub fn simulate_walk3d_at(
    params: &GaitParams,
    duration_s: f64,
    fps: f64,
    seed: u64,
    placement: &Placement,
) -> Result<Walk3D> {
    params.validate()?;
    if !(fps > 0.0 && duration_s > 0.0) {
        return Err(Error::invalid("duration and fps must be positive"));
    }
    if duration_s < 4.0 * params.step_time_s {
        return Err(Error::invalid(format!(
            "duration {duration_s} s is shorter than two gait cycles ({} s)",
            4.0 * params.step_time_s
        )));
    }
    let num_frames = (duration_s * fps).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first_foot = if rng.random::<bool>() {
        Foot::Left
    } else {
        Foot::Right
    };
    let phase: f64 = rng.random();
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let mut perturb = |mean: f64, cv: f64| -> f64 {
        if cv == 0.0 {
            mean
        } else {
            let z: f64 = std_normal.sample(&mut rng);
            mean * (1.0 + cv * z.clamp(-3.0, 3.0))
        }
    };

    // Heel strikes from well before the first frame to well after the last.
    let t0 = -(3.0 + phase) * params.step_time_s;
    let t_end = duration_s + 3.0 * params.step_time_s;
    let c = placement.lateral_offset_cm;
    let body = Body::from_height(params.subject_height_cm);

    let mut times = vec![t0];
    let mut lengths = vec![params.step_length_cm];
    let mut widths = vec![params.step_width_cm];
    while *times.last().unwrap() <= t_end {
        let dt = perturb(params.step_time_s, params.step_time_cv);
        times.push(times.last().unwrap() + dt);
        lengths.push(perturb(params.step_length_cm, params.step_length_cv));
        widths.push(perturb(params.step_width_cm, params.step_width_cv));
    }
    let n_steps = times.len();
    let foot_of = |k: usize| if k % 2 == 0 { first_foot } else { first_foot.other() };
    let lateral = |f: Foot, w: f64| match f {
        Foot::Left => c + w / 2.0,
        Foot::Right => c - w / 2.0,
    };
    let mut z = 0.0;
    let mut positions = Vec::with_capacity(n_steps);
    for k in 0..n_steps {
        if k > 0 {
            z -= lengths[k];
        }
        positions.push([lateral(foot_of(k), widths[k]), body.ankle_height, z]);
    }
    // Toe off of step k happens a stance fraction into the stride to k + 2.
    let toe_off = |k: usize| -> f64 {
        let next = if k + 2 < n_steps {
            times[k + 2]
        } else {
            times[k] + 2.0 * params.step_time_s
        };
        times[k] + params.stance_fraction * (next - times[k])
    };

    // Pelvis z passes the midpoint of the two feet at every heel strike.
    let pelvis_z_at_strike = |k: usize| (positions[k][2] + positions[k - 1][2]) / 2.0;
    let last_step_before = |t: f64| times.partition_point(|&s| s <= t) - 1;

    let ankle_at = |foot: Foot, t: f64| -> [f64; 3] {
        let mut k = last_step_before(t);
        if foot_of(k) != foot {
            k -= 1;
        }
        if t <= toe_off(k) || k + 2 >= n_steps {
            return positions[k];
        }
        let start = toe_off(k);
        let u = ((t - start) / (times[k + 2] - start)).clamp(0.0, 1.0);
        let s = (1.0 - (std::f64::consts::PI * u).cos()) / 2.0;
        let mut p = lerp3(positions[k], positions[k + 2], s);
        p[1] += FOOT_LIFT_CM * (std::f64::consts::PI * u).sin();
        p
    };

    let mut raw_pelvis = Vec::with_capacity(num_frames);
    let mut ankles = Vec::with_capacity(num_frames);
    for i in 0..num_frames {
        let t = i as f64 / fps;
        let k = last_step_before(t);
        let frac = (t - times[k]) / (times[k + 1] - times[k]);
        let pz = pelvis_z_at_strike(k) + frac * (pelvis_z_at_strike(k + 1) - pelvis_z_at_strike(k));
        let sway_sign = if foot_of(k) == Foot::Left { 1.0 } else { -1.0 };
        let bump = (std::f64::consts::PI * frac).sin();
        raw_pelvis.push([
            c + sway_sign * PELVIS_SWAY_CM * bump,
            body.hip_height - PELVIS_BOB_CM + PELVIS_BOB_CM * bump,
            pz,
        ]);
        ankles.push([ankle_at(Foot::Left, t), ankle_at(Foot::Right, t)]);
    }

    // Shift along z so the walk ends at the requested distance.
    let shift = placement.end_distance_cm - raw_pelvis[num_frames - 1][2];
    let sh = |p: [f64; 3]| [p[0], p[1], p[2] + shift];
    let pelvis: Vec<[f64; 3]> = raw_pelvis.into_iter().map(sh).collect();
    let steps: Vec<StepEvent> = (0..n_steps)
        .map(|k| StepEvent {
            foot: foot_of(k),
            heel_strike_s: times[k],
            toe_off_s: toe_off(k),
            position: sh(positions[k]),
        })
        .collect();

    let swing = params.arm_swing_deg.to_radians();
    let mut joints = Vec::with_capacity(num_frames * FULL_JOINTS.len());
    for i in 0..num_frames {
        let p = pelvis[i];
        let [la, ra] = ankles[i];
        let (la, ra) = (sh(la), sh(ra));
        let l_hip = [p[0] + body.hip_half, p[1], p[2]];
        let r_hip = [p[0] - body.hip_half, p[1], p[2]];
        let l_knee = knee_position(l_hip, la, body.thigh, body.shank);
        let r_knee = knee_position(r_hip, ra, body.thigh, body.shank);
        let l_sh = [p[0] + body.shoulder_half, p[1] + body.torso, p[2] - 2.0];
        let r_sh = [p[0] - body.shoulder_half, p[1] + body.torso, p[2] - 2.0];

        let (l_el, l_wr, r_el, r_wr) = if swing > 0.0 {
            // An arm swings forward while the same-side foot is behind.
            let rel = ((la[2] - ra[2]) / params.step_length_cm).clamp(-1.0, 1.0);
            let arm = |sh: [f64; 3], theta: f64, out: f64| {
                let el = add3(
                    sh,
                    [out, -body.upper_arm * theta.cos(), -body.upper_arm * theta.sin()],
                );
                let fa = theta + 0.35 + 0.5 * theta.max(0.0);
                let wr = add3(el, [out * 0.5, -body.forearm * fa.cos(), -body.forearm * fa.sin()]);
                (el, wr)
            };
            let (le, lw) = arm(l_sh, swing * rel, 2.0);
            let (re, rw) = arm(r_sh, -swing * rel, -2.0);
            (le, lw, re, rw)
        } else {
            let back = 25f64.to_radians();
            let el = |sh: [f64; 3], out: f64| {
                add3(sh, [out, -body.upper_arm * back.cos(), body.upper_arm * back.sin()])
            };
            let wr = |side: f64| [p[0] + side * 4.0, p[1] + 0.05 * params.subject_height_cm, p[2] + 14.0];
            (el(l_sh, 3.0), wr(1.0), el(r_sh, -3.0), wr(-1.0))
        };

        joints.extend_from_slice(&[
            l_sh, r_sh, l_el, r_el, l_wr, r_wr, l_hip, r_hip, l_knee, r_knee, la, ra,
        ]);
    }

    Ok(Walk3D::from_parts(fps, *params, joints, pelvis, steps))
}

/// Walk-averaged features over the heel strikes inside frames
/// `window.start..window.end`, from the simulator's own events.
///
/// A step is counted when both of its bounding heel strikes lie in the
/// window. Velocity is pelvis displacement between the first and last of
/// those heel strikes over the elapsed time.
pub fn true_features(walk: &Walk3D, window: std::ops::Range<usize>) -> Result<GaitFeatures> {
    if window.start >= window.end || window.end > walk.num_frames() {
        return Err(Error::invalid(format!(
            "window {}..{} outside 0..{}",
            window.start,
            window.end,
            walk.num_frames()
        )));
    }
    // Strikes in a window are consecutive indices; index 0 has no predecessor.
    let strikes: Vec<usize> = walk
        .steps_in_frames(window.start, window.end)
        .map(|(k, _)| k)
        .filter(|&k| k > 0)
        .collect();
    if strikes.len() < 2 {
        return Err(Error::TooFewSteps {
            found: strikes.len(),
            needed: 2,
        });
    }
    let n = (strikes.len() - 1) as f64;
    let (mut time, mut width, mut length) = (0.0, 0.0, 0.0);
    for k in strikes.windows(2) {
        let (a, b) = (&walk.steps[k[0]], &walk.steps[k[1]]);
        time += b.heel_strike_s - a.heel_strike_s;
        width += (b.position[0] - a.position[0]).abs();
        length += a.position[2] - b.position[2];
    }
    let pelvis_z = |k: usize| (walk.steps[k].position[2] + walk.steps[k - 1].position[2]) / 2.0;
    let (first, last) = (strikes[0], strikes[strikes.len() - 1]);
    let velocity = (pelvis_z(first) - pelvis_z(last))
        / (walk.steps[last].heel_strike_s - walk.steps[first].heel_strike_s);
    let f = GaitFeatures::new(time / n, width / n, length / n, velocity);
    f.validate()?;
    Ok(f)
}

/// Pinhole camera at a given height, looking along +z and pitched down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    pub focal_px: f64,
    pub principal_u: f64,
    pub principal_v: f64,
    pub height_cm: f64,
    pub pitch_deg: f64,
    pub image_width: u32,
    pub image_height: u32,
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            focal_px: 580.0,
            principal_u: 320.0,
            principal_v: 240.0,
            height_cm: 220.0,
            pitch_deg: 24.0,
            image_width: 640,
            image_height: 480,
        }
    }
}

impl CameraModel {
    /// World point to camera coordinates (x right, y down, z forward).
    pub fn to_camera(&self, p: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.pitch_deg.to_radians().sin_cos();
        let rel = [p[0], p[1] - self.height_cm, p[2]];
        [rel[0], -c * rel[1] - s * rel[2], -s * rel[1] + c * rel[2]]
    }

    pub fn project(&self, p: [f64; 3]) -> Result<(f64, f64)> {
        let [x, y, z] = self.to_camera(p);
        if z <= 0.0 {
            return Err(Error::invalid(format!(
                "point ({:.1}, {:.1}, {:.1}) at or behind the camera plane",
                p[0], p[1], p[2]
            )));
        }
        Ok((
            self.focal_px * x / z + self.principal_u,
            self.focal_px * y / z + self.principal_v,
        ))
    }

    pub fn in_image(&self, (u, v): (f64, f64)) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.image_width as f64 && v < self.image_height as f64
    }
}

pub fn project_to_camera(walk: &Walk3D, cam: &CameraModel) -> Result<PoseSequence> {
    if !(cam.focal_px > 0.0) {
        return Err(Error::invalid("focal length must be positive"));
    }
    let n = FULL_JOINTS.len();
    let mut kps = Vec::with_capacity(walk.num_frames() * n);
    for t in 0..walk.num_frames() {
        for j in 0..n {
            let (u, v) = cam.project(walk.joint(t, j))?;
            kps.push(Keypoint::new(u, v, 1.0));
        }
    }
    PoseSequence::new(kps, JointLayout::Full12, walk.fps)
}

/// Error model of an emulated 2D pose tracker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerProfile {
    pub jitter_px: f64,
    pub dropout: f64,
    pub swap: f64,
}

impl TrackerProfile {
    pub const IDENTITY: TrackerProfile = TrackerProfile {
        jitter_px: 0.0,
        dropout: 0.0,
        swap: 0.0,
    };

    pub fn preset(tracker: Tracker) -> Self {
        match tracker {
            Tracker::TrackerA => TrackerProfile {
                jitter_px: 1.0,
                dropout: 0.01,
                swap: 0.001,
            },
            Tracker::TrackerB => TrackerProfile {
                jitter_px: 2.0,
                dropout: 0.03,
                swap: 0.005,
            },
            Tracker::TrackerC => TrackerProfile {
                jitter_px: 4.0,
                dropout: 0.06,
                swap: 0.01,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.jitter_px.is_finite() && self.jitter_px >= 0.0) {
            return Err(Error::invalid("jitter must be >= 0"));
        }
        for (name, p) in [("dropout", self.dropout), ("swap", self.swap)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Longest left/right swap run in frames.
const MAX_SWAP_RUN: usize = 10;

/// Jitter, drop and swap keypoints. Deterministic in `seed`.
pub fn apply_tracker_noise(seq: &PoseSequence, profile: &TrackerProfile, seed: u64) -> PoseSequence {
    apply_noise_masked(seq, profile, seed, |_| true)
}

/// Like [`apply_tracker_noise`], restricting dropout to joints where
/// `drop_joint(j)` holds.
pub fn apply_noise_masked(
    seq: &PoseSequence,
    profile: &TrackerProfile,
    seed: u64,
    drop_joint: impl Fn(usize) -> bool,
) -> PoseSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, profile.jitter_px.max(0.0)).unwrap();
    let mut out = seq.clone();
    let (n_frames, n_joints) = (seq.num_frames(), seq.num_joints());

    if profile.swap > 0.0 {
        let mut swapped_until = vec![0usize; n_joints / 2];
        for t in 0..n_frames {
            for pair in 0..n_joints / 2 {
                if t >= swapped_until[pair] && rng.random::<f64>() < profile.swap {
                    swapped_until[pair] = t + rng.random_range(2..=MAX_SWAP_RUN);
                }
                if t < swapped_until[pair] {
                    let (l, r) = (seq.get(t, 2 * pair), seq.get(t, 2 * pair + 1));
                    *out.get_mut(t, 2 * pair) = r;
                    *out.get_mut(t, 2 * pair + 1) = l;
                }
            }
        }
    }
    for t in 0..n_frames {
        for j in 0..n_joints {
            let kp = out.get_mut(t, j);
            if profile.jitter_px > 0.0 {
                kp.x += jitter.sample(&mut rng);
                kp.y += jitter.sample(&mut rng);
            }
            if profile.dropout > 0.0 && rng.random::<f64>() < profile.dropout && drop_joint(j) {
                *kp = Keypoint::new(0.0, 0.0, 0.0);
            }
        }
    }
    out
}

/// Dataset generation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationConfig {
    pub subjects_ds1: usize,
    pub subjects_ds2: usize,
    pub walks_per_subject: usize,
    pub duration_s: f64,
    pub fps: f64,
    /// Truth is computed over the last `window_frames` frames.
    pub window_frames: usize,
    /// Walk-to-walk CV around a subject's base step quantities.
    pub walk_cv: f64,
    pub hands_behind_back_fraction: f64,
    pub end_distance_min_cm: f64,
    pub end_distance_max_cm: f64,
    pub lateral_offset_sd_cm: f64,
    /// Per-subject SD of the lateral offset between the tracked ankle
    /// landmark and the heel contact point, applied outward on both feet.
    pub ankle_landmark_sd_cm: f64,
    /// Additional walk-to-walk SD of that offset.
    pub ankle_landmark_walk_sd_cm: f64,
    /// Per-subject SD of the same kind of lateral offset on the knees.
    pub knee_landmark_sd_cm: f64,
    pub camera: CameraModel,
    pub trackers: TrackerPresets,
}

/// Noise profile per tracker slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerPresets {
    pub tracker_a: TrackerProfile,
    pub tracker_b: TrackerProfile,
    pub tracker_c: TrackerProfile,
}

impl Default for TrackerPresets {
    fn default() -> Self {
        TrackerPresets {
            tracker_a: TrackerProfile::preset(Tracker::TrackerA),
            tracker_b: TrackerProfile::preset(Tracker::TrackerB),
            tracker_c: TrackerProfile::preset(Tracker::TrackerC),
        }
    }
}

impl TrackerPresets {
    pub fn get(&self, t: Tracker) -> &TrackerProfile {
        match t {
            Tracker::TrackerA => &self.tracker_a,
            Tracker::TrackerB => &self.tracker_b,
            Tracker::TrackerC => &self.tracker_c,
        }
    }
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            subjects_ds1: 38,
            subjects_ds2: 12,
            walks_per_subject: 20,
            duration_s: 5.0,
            fps: 30.0,
            window_frames: 120,
            walk_cv: 0.06,
            hands_behind_back_fraction: 0.3,
            end_distance_min_cm: 230.0,
            end_distance_max_cm: 290.0,
            lateral_offset_sd_cm: 10.0,
            ankle_landmark_sd_cm: 3.0,
            ankle_landmark_walk_sd_cm: 1.0,
            knee_landmark_sd_cm: 3.0,
            camera: CameraModel::default(),
            trackers: TrackerPresets::default(),
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subjects_ds1 + self.subjects_ds2 == 0 || self.walks_per_subject == 0 {
            return Err(Error::invalid("subject and walk counts must be positive"));
        }
        if !(self.fps > 0.0 && self.duration_s > 0.0) {
            return Err(Error::invalid("fps and duration must be positive"));
        }
        if self.window_frames < 2 || self.window_frames > (self.duration_s * self.fps).round() as usize {
            return Err(Error::invalid(format!(
                "window of {} frames does not fit a {} s walk",
                self.window_frames, self.duration_s
            )));
        }
        if !(0.0..=1.0).contains(&self.hands_behind_back_fraction) {
            return Err(Error::invalid("hands_behind_back_fraction outside [0, 1]"));
        }
        if !(self.walk_cv >= 0.0 && self.walk_cv < 0.5) {
            return Err(Error::invalid("walk_cv must be in [0, 0.5)"));
        }
        if !(self.end_distance_min_cm > 0.0 && self.end_distance_min_cm <= self.end_distance_max_cm) {
            return Err(Error::invalid("end distance range is empty"));
        }
        if !(self.lateral_offset_sd_cm >= 0.0 && self.ankle_landmark_sd_cm >= 0.0 && self.ankle_landmark_walk_sd_cm >= 0.0 && self.knee_landmark_sd_cm >= 0.0) {
            return Err(Error::invalid("offset SDs must be non-negative"));
        }
        for t in Tracker::ALL {
            self.trackers.get(t).validate()?;
        }
        Ok(())
    }
}

/// A synthetic subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub subject_id: String,
    pub cohort: Cohort,
    pub base: GaitParams,
    pub ankle_offset_cm: f64,
    pub knee_offset_cm: f64,
}

pub fn subjects(cfg: &GenerationConfig, seed: u64) -> Vec<Subject> {
    let cohorts = std::iter::repeat_n(Cohort::DS1, cfg.subjects_ds1)
        .chain(std::iter::repeat_n(Cohort::DS2, cfg.subjects_ds2));
    cohorts
        .enumerate()
        .map(|(i, cohort)| {
            let s = derive_seed(seed, &[1, i as u64]);
            let mut base = sample_gait_params(cohort, s);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(s, &[2]));
            if rng.random::<f64>() < cfg.hands_behind_back_fraction {
                base.arm_swing_deg = 0.0;
            }
            let ankle_offset_cm = cfg.ankle_landmark_sd_cm * rng.sample::<f64, _>(StandardNormal);
            let knee_offset_cm = cfg.knee_landmark_sd_cm * rng.sample::<f64, _>(StandardNormal);
            Subject {
                subject_id: format!("s{i:03}"),
                cohort,
                base,
                ankle_offset_cm,
                knee_offset_cm,
            }
        })
        .collect()
}

/// One simulated walk before tracker noise.
#[derive(Debug, Clone)]
pub struct SimulatedWalk {
    pub walk_id: String,
    pub subject: usize,
    pub walk: Walk3D,
    pub clean: PoseSequence,
    pub truth: GaitFeatures,
}

/// Simulate and project walk `w` of subject `subject`.
pub fn simulate_subject_walk(
    cfg: &GenerationConfig,
    subj: &Subject,
    subject_index: usize,
    w: usize,
    seed: u64,
) -> Result<SimulatedWalk> {
    let ws = derive_seed(seed, &[3, subject_index as u64, w as u64]);
    let mut rng = ChaCha8Rng::seed_from_u64(ws);
    let mc = |mean| MeanCv { mean, cv: cfg.walk_cv };
    let b = subj.base;
    let params = b.with_steps(
        truncated_lognormal(&mut rng, mc(b.step_time_s)),
        truncated_lognormal(&mut rng, mc(b.step_width_cm)),
        truncated_lognormal(&mut rng, mc(b.step_length_cm)),
    );
    let placement = Placement {
        end_distance_cm: rng.random_range(cfg.end_distance_min_cm..=cfg.end_distance_max_cm),
        lateral_offset_cm: Normal::new(0.0, cfg.lateral_offset_sd_cm.max(0.0))
            .unwrap()
            .sample(&mut rng),
    };
    // very slow walkers get a longer approach so the walk spans two cycles
    let duration = cfg.duration_s.max(4.5 * params.step_time_s);
    let walk = simulate_walk3d_at(&params, duration, cfg.fps, rng.random(), &placement)?;
    let n = walk.num_frames();
    let truth = true_features(&walk, n - cfg.window_frames..n)?;
    let offset = subj.ankle_offset_cm + cfg.ankle_landmark_walk_sd_cm * rng.sample::<f64, _>(StandardNormal);
    let clean = project_to_camera(&walk.with_landmark_offsets(offset, subj.knee_offset_cm), &cfg.camera)?;
    Ok(SimulatedWalk {
        walk_id: format!("{}-w{w:02}", subj.subject_id),
        subject: subject_index,
        walk,
        clean,
        truth,
    })
}

/// Generate every (subject, walk, tracker) record, sorted by walk id then
/// tracker. Deterministic in `seed` regardless of thread count.
pub fn generate_dataset(cfg: &GenerationConfig, seed: u64) -> Result<Vec<WalkRecord>> {
    cfg.validate()?;
    let subjects = subjects(cfg, seed);
    let jobs: Vec<(usize, usize)> = (0..subjects.len())
        .flat_map(|s| (0..cfg.walks_per_subject).map(move |w| (s, w)))
        .collect();
    let per_walk: Vec<Vec<WalkRecord>> = jobs
        .par_iter()
        .map(|&(s, w)| -> Result<Vec<WalkRecord>> {
            let subj = &subjects[s];
            let sim = simulate_subject_walk(cfg, subj, s, w, seed)?;
            Ok(Tracker::ALL
                .iter()
                .map(|&tracker| {
                    let noise_seed = derive_seed(seed, &[4, s as u64, w as u64, tracker as u64]);
                    WalkRecord {
                        meta: WalkMetadata {
                            walk_id: sim.walk_id.clone(),
                            subject_id: subj.subject_id.clone(),
                            cohort: subj.cohort,
                            tracker,
                        },
                        sequence: apply_tracker_noise(&sim.clean, cfg.trackers.get(tracker), noise_seed),
                        truth: Some(sim.truth),
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut records: Vec<WalkRecord> = per_walk.into_iter().flatten().collect();
    records.sort_by(|a, b| {
        (a.meta.walk_id.as_str(), a.meta.tracker).cmp(&(b.meta.walk_id.as_str(), b.meta.tracker))
    });
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    #[test]
    fn ds1_step_length_matches_population() {
        let draws: Vec<f64> = (0..10_000)
            .map(|i| sample_gait_params(Cohort::DS1, i).step_length_cm)
            .collect();
        let (mean, sd) = stats(&draws);
        assert!((mean - 30.0).abs() <= 0.05 * 30.0, "mean {mean}");
        assert!((sd / mean - 0.32).abs() <= 0.05, "cv {}", sd / mean);
    }

    #[test]
    fn ds2_step_time_matches_population() {
        let draws: Vec<f64> = (0..10_000)
            .map(|i| sample_gait_params(Cohort::DS2, 77 + i).step_time_s)
            .collect();
        let (mean, _) = stats(&draws);
        assert!((mean - 0.61).abs() <= 0.05 * 0.61, "mean {mean}");
    }

    #[test]
    fn sampling_is_deterministic_and_consistent() {
        let a = sample_gait_params(Cohort::DS2, 42);
        assert_eq!(a, sample_gait_params(Cohort::DS2, 42));
        a.validate().unwrap();
        assert!((a.velocity_cm_s - a.step_length_cm / a.step_time_s).abs() < 1e-9 * a.velocity_cm_s);
    }

    #[test]
    fn pelvis_displacement_follows_velocity() {
        // 55 cm/s for 4 s, commanded without per-step noise.
        let p = GaitParams::new(0.6, 15.0, 33.0);
        let w = simulate_walk3d(&p, 4.0, 30.0, 9).unwrap();
        let pel = w.pelvis();
        let elapsed = (pel.len() - 1) as f64 / 30.0;
        let disp = pel[0][2] - pel[pel.len() - 1][2];
        assert!((disp - 55.0 * elapsed).abs() <= 1.0, "disp {disp}");
    }

    #[test]
    fn pelvis_strictly_decreasing() {
        let p = sample_gait_params(Cohort::DS1, 3);
        let w = simulate_walk3d(&p, 5.0, 30.0, 3).unwrap();
        assert!(w.pelvis().windows(2).all(|p| p[1][2] < p[0][2]));
    }

    #[test]
    fn stance_ankles_are_stationary() {
        for seed in 0..20 {
            let p = sample_gait_params(Cohort::DS1, seed);
            let w = simulate_walk3d(&p, 5.0, 30.0, seed).unwrap();
            for foot in [Foot::Left, Foot::Right] {
                let track = w.ankle_track(foot);
                for s in w.steps.iter().filter(|s| s.foot == foot) {
                    for i in 1..w.num_frames() {
                        let t = i as f64 / w.fps;
                        let tp = (i - 1) as f64 / w.fps;
                        if tp >= s.heel_strike_s && t <= s.toe_off_s {
                            let d: f64 = (0..3).map(|c| (track[i][c] - track[i - 1][c]).powi(2)).sum();
                            assert!(d.sqrt() < 1.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn heel_strike_interval_matches_step_time() {
        let p = GaitParams::new(0.6, 15.0, 30.0);
        let w = simulate_walk3d(&p, 5.0, 30.0, 1).unwrap();
        let frames: Vec<f64> = w.steps.iter().map(|s| s.heel_strike_s * 30.0).collect();
        for d in frames.windows(2) {
            assert!((d[1] - d[0] - 18.0).abs() <= 1.0);
        }
    }

    #[test]
    fn too_short_duration_is_rejected() {
        let p = GaitParams::new(0.6, 15.0, 30.0);
        assert!(simulate_walk3d(&p, 2.0, 30.0, 1).is_err());
    }

    #[test]
    fn noise_free_truth_equals_command() {
        let p = GaitParams::new(0.55, 14.0, 36.0);
        let w = simulate_walk3d(&p, 5.0, 30.0, 5).unwrap();
        let f = true_features(&w, 30..150).unwrap();
        assert!((f.step_time_s - 0.55).abs() < 1e-9);
        assert!((f.step_width_cm - 14.0).abs() < 1e-9);
        assert!((f.step_length_cm - 36.0).abs() < 1e-9);
        assert!((f.velocity_cm_s - 36.0 / 0.55).abs() < 1e-9);
    }

    #[test]
    fn noisy_truth_averages_emitted_steps() {
        // 30 cm with 5% per-step CV: the window average equals the mean of
        // the simulator's own emitted steps and stays near the command.
        let p = GaitParams::new(0.6, 15.0, 30.0).with_step_noise(0.0, 0.0, 0.05);
        let w = simulate_walk3d(&p, 4.0, 30.0, 11).unwrap();
        // window with 6 or 7 heel strikes
        let f = true_features(&w, 0..120).unwrap();
        let ks: Vec<usize> = w.steps_in_frames(0, 120).map(|(k, _)| k).collect();
        let emitted: Vec<f64> = ks
            .windows(2)
            .map(|k| w.steps[k[0]].position[2] - w.steps[k[1]].position[2])
            .collect();
        let oracle = emitted.iter().sum::<f64>() / emitted.len() as f64;
        assert!(ks.len() >= 6);
        assert!((f.step_length_cm - oracle).abs() < 1e-9);
        assert!((f.step_length_cm - 30.0).abs() <= 2.0);
    }

    #[test]
    fn window_with_one_strike_is_an_error() {
        let p = GaitParams::new(0.6, 15.0, 30.0);
        let w = simulate_walk3d(&p, 5.0, 30.0, 1).unwrap();
        let first = (w.steps.iter().find(|s| s.heel_strike_s >= 0.0).unwrap().heel_strike_s * 30.0)
            .ceil() as usize;
        assert!(matches!(
            true_features(&w, first..first + 5),
            Err(Error::TooFewSteps { .. })
        ));
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let cam = CameraModel {
            pitch_deg: 0.0,
            ..CameraModel::default()
        };
        let (u, v) = cam.project([0.0, cam.height_cm, 300.0]).unwrap();
        assert_eq!((u, v), (cam.principal_u, cam.principal_v));
        let pitched = CameraModel::default();
        let (s, c) = pitched.pitch_deg.to_radians().sin_cos();
        let p = [0.0, pitched.height_cm - 300.0 * s, 300.0 * c];
        let (u, v) = pitched.project(p).unwrap();
        assert!((u - 320.0).abs() < 1e-9 && (v - 240.0).abs() < 1e-9);
    }

    #[test]
    fn halving_distance_doubles_hip_width() {
        let cam = CameraModel {
            pitch_deg: 0.0,
            ..CameraModel::default()
        };
        let width_at = |z: f64| {
            let (ul, _) = cam.project([9.0, cam.height_cm, z]).unwrap();
            let (ur, _) = cam.project([-9.0, cam.height_cm, z]).unwrap();
            ul - ur
        };
        assert_eq!(width_at(200.0), 2.0 * width_at(400.0));
    }

    #[test]
    fn behind_camera_is_an_error() {
        let cam = CameraModel::default();
        assert!(cam.project([0.0, cam.height_cm, -10.0]).is_err());
        assert!(cam.project([0.0, cam.height_cm, 0.0]).is_err());
    }

    #[test]
    fn projected_walk_grows_and_stays_in_image() {
        let cfg = GenerationConfig::default();
        for seed in 0..10 {
            let p = sample_gait_params(Cohort::DS2, seed);
            let w = simulate_walk3d(&p, 5.0, 30.0, seed).unwrap();
            let seq = project_to_camera(&w, &cfg.camera).unwrap();
            let n = seq.num_frames();
            let first: f64 = (0..30).map(|t| seq.hip_width(t)).sum::<f64>() / 30.0;
            let last: f64 = (n - 30..n).map(|t| seq.hip_width(t)).sum::<f64>() / 30.0;
            assert!(last > first);
            for k in seq.keypoints() {
                assert!(cfg.camera.in_image((k.x, k.y)), "{k:?}");
            }
        }
    }

    fn small_seq() -> PoseSequence {
        let p = GaitParams::new(0.6, 15.0, 30.0);
        let w = simulate_walk3d(&p, 3.0, 30.0, 1).unwrap();
        project_to_camera(&w, &CameraModel::default()).unwrap()
    }

    #[test]
    fn identity_profile_is_identity() {
        let seq = small_seq();
        assert_eq!(apply_tracker_noise(&seq, &TrackerProfile::IDENTITY, 3), seq);
    }

    #[test]
    fn full_ankle_dropout() {
        let seq = small_seq();
        let profile = TrackerProfile {
            dropout: 1.0,
            ..TrackerProfile::IDENTITY
        };
        let layout = JointLayout::Full12;
        let ankles = [layout.left_ankle(), layout.right_ankle()];
        let out = apply_noise_masked(&seq, &profile, 1, |j| ankles.contains(&j));
        for t in 0..out.num_frames() {
            for &a in &ankles {
                assert_eq!(out.get(t, a).conf, 0.0);
            }
            assert_eq!(out.get(t, 0).conf, 1.0);
        }
    }

    #[test]
    fn jitter_magnitude_matches_folded_normal() {
        let n_frames = 100_000 / 24 + 1;
        let seq = PoseSequence::from_fn(n_frames, JointLayout::Full12, 30.0, |_, _| {
            Keypoint::new(100.0, 100.0, 1.0)
        })
        .unwrap();
        let profile = TrackerProfile {
            jitter_px: 2.0,
            ..TrackerProfile::IDENTITY
        };
        let out = apply_tracker_noise(&seq, &profile, 5);
        let mut total = 0.0;
        let mut n = 0.0;
        for k in out.keypoints() {
            total += (k.x - 100.0).abs() + (k.y - 100.0).abs();
            n += 2.0;
        }
        let expected = 2.0 * (2.0 / std::f64::consts::PI).sqrt();
        assert!(((total / n) - expected).abs() <= 0.05 * expected);
    }

    #[test]
    fn swaps_exchange_pairs_for_runs() {
        let seq = small_seq();
        let profile = TrackerProfile {
            swap: 0.2,
            ..TrackerProfile::IDENTITY
        };
        let out = apply_tracker_noise(&seq, &profile, 8);
        let mut swapped = 0;
        for t in 0..seq.num_frames() {
            for pair in 0..6 {
                let (l, r) = (out.get(t, 2 * pair), out.get(t, 2 * pair + 1));
                if l != seq.get(t, 2 * pair) {
                    assert_eq!(l, seq.get(t, 2 * pair + 1));
                    assert_eq!(r, seq.get(t, 2 * pair));
                    swapped += 1;
                }
            }
        }
        assert!(swapped > 0);
        assert_eq!(out, apply_tracker_noise(&seq, &profile, 8));
    }

    fn tiny_config() -> GenerationConfig {
        GenerationConfig {
            subjects_ds1: 1,
            subjects_ds2: 1,
            walks_per_subject: 3,
            ..GenerationConfig::default()
        }
    }

    #[test]
    fn dataset_counts() {
        let recs = generate_dataset(&tiny_config(), 1).unwrap();
        assert_eq!(recs.len(), 18);
        let mut ids: Vec<&str> = recs.iter().map(|r| r.meta.walk_id.as_str()).collect();
        ids.dedup();
        assert_eq!(ids.len(), 6);
        for r in &recs {
            r.truth.unwrap().validate().unwrap();
        }
    }

    #[test]
    fn dataset_is_deterministic() {
        let a = generate_dataset(&tiny_config(), 7).unwrap();
        let b = generate_dataset(&tiny_config(), 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn velocity_varies_more_between_than_within_subjects() {
        let cfg = GenerationConfig {
            subjects_ds1: 8,
            subjects_ds2: 4,
            walks_per_subject: 5,
            ..GenerationConfig::default()
        };
        let recs = generate_dataset(&cfg, 3).unwrap();
        let mut by_subject: std::collections::BTreeMap<&str, Vec<f64>> = Default::default();
        for r in recs.iter().filter(|r| r.meta.tracker == Tracker::TrackerA) {
            by_subject
                .entry(&r.meta.subject_id)
                .or_default()
                .push(r.truth.unwrap().velocity_cm_s);
        }
        let means: Vec<f64> = by_subject.values().map(|v| stats(v).0).collect();
        let between = stats(&means).1.powi(2);
        let within = by_subject.values().map(|v| stats(v).1.powi(2)).sum::<f64>()
            / by_subject.len() as f64;
        assert!(between / within > 1.0, "ratio {}", between / within);
    }

    #[test]
    fn landmark_offsets_widen_knees_and_ankles_only() {
        let p = GaitParams::new(0.6, 17.0, 30.0);
        let w = simulate_walk3d(&p, 5.0, 30.0, 9).unwrap();
        let o = w.with_landmark_offsets(2.0, -1.5);
        let l = JointLayout::Full12;
        let sep = |w: &Walk3D, t, a: usize, b: usize| (w.joint(t, a)[0] - w.joint(t, b)[0]).abs();
        for t in [0, 40, 100] {
            let ankles = sep(&o, t, l.left_ankle(), l.right_ankle()) - sep(&w, t, l.left_ankle(), l.right_ankle());
            let knees = sep(&o, t, l.left_knee(), l.right_knee()) - sep(&w, t, l.left_knee(), l.right_knee());
            assert!((ankles - 4.0).abs() < 1e-9, "{ankles}");
            assert!((knees + 3.0).abs() < 1e-9, "{knees}");
            assert_eq!(w.joint(t, l.left_hip()), o.joint(t, l.left_hip()));
        }
        let n = w.num_frames();
        assert_eq!(true_features(&w, n - 120..n).unwrap(), true_features(&o, n - 120..n).unwrap());
    }
}
