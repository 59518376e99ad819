//! Line-delimited walk and feature files.
//!
//! A walks file holds one JSON object per line:
//!
//! ```text
//! {"walk_id":"s000-w00","subject_id":"s000","cohort":"DS1","tracker":"TrackerA",
//!  "fps":30.0,"joint_names":[...],"frames":[[[x,y,conf],...],...],
//!  "truth":{"step_time_s":0.6,"step_width_cm":17.0,"step_length_cm":30.0,"velocity_cm_s":50.0}}
//! ```
//!
//! `truth` is optional. A features file holds one [`FeatureRow`] per line.
//! Blank lines are ignored in both formats.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::types::{
    Cohort, GaitFeatures, JointLayout, Keypoint, PoseSequence, Tracker, WalkMetadata, WalkRecord,
};

const WALK_FIELDS: [&str; 8] = [
    "walk_id",
    "subject_id",
    "cohort",
    "tracker",
    "fps",
    "joint_names",
    "frames",
    "truth",
];

pub fn read_walks(path: impl AsRef<Path>) -> Result<Vec<WalkRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_walks(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_walks(reader: impl BufRead) -> Result<Vec<WalkRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<stream>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_walk_line(&line, i + 1)?);
    }
    Ok(out)
}

pub fn write_walks(records: &[WalkRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        writeln!(w, "{}", walk_to_line(r)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Serialise one record as a single JSON line (no trailing newline).
pub fn walk_to_line(r: &WalkRecord) -> String {
    let frames: Vec<Vec<[f64; 3]>> = (0..r.sequence.num_frames())
        .map(|t| {
            r.sequence
                .frame(t)
                .iter()
                .map(|k| [k.x, k.y, k.conf])
                .collect()
        })
        .collect();
    let mut obj = Map::new();
    obj.insert("walk_id".into(), r.meta.walk_id.clone().into());
    obj.insert("subject_id".into(), r.meta.subject_id.clone().into());
    obj.insert("cohort".into(), r.meta.cohort.as_str().into());
    obj.insert("tracker".into(), r.meta.tracker.as_str().into());
    obj.insert("fps".into(), r.sequence.fps.into());
    obj.insert(
        "joint_names".into(),
        serde_json::to_value(r.sequence.joint_names()).expect("names serialise"),
    );
    obj.insert(
        "frames".into(),
        serde_json::to_value(frames).expect("finite frames serialise"),
    );
    if let Some(t) = &r.truth {
        obj.insert(
            "truth".into(),
            serde_json::to_value(t).expect("finite truth serialises"),
        );
    }
    Value::Object(obj).to_string()
}

fn schema(line: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn parse_walk_line(text: &str, line: usize) -> Result<WalkRecord> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| schema(line, "<record>", e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| schema(line, "<record>", "expected a JSON object"))?;
    if let Some(k) = obj.keys().find(|k| !WALK_FIELDS.contains(&k.as_str())) {
        return Err(schema(line, k, "unknown field"));
    }

    let get = |field: &str| obj.get(field).ok_or_else(|| schema(line, field, "missing field"));
    let get_str = |field: &str| -> Result<String> {
        get(field)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| schema(line, field, "expected a string"))
    };

    let walk_id = get_str("walk_id")?;
    let subject_id = get_str("subject_id")?;
    let cohort: Cohort = get_str("cohort")?
        .parse()
        .map_err(|e: Error| schema(line, "cohort", e.to_string()))?;
    let tracker: Tracker = get_str("tracker")?
        .parse()
        .map_err(|e: Error| schema(line, "tracker", e.to_string()))?;
    let fps = get("fps")?
        .as_f64()
        .filter(|f| f.is_finite() && *f > 0.0)
        .ok_or_else(|| schema(line, "fps", "expected a positive number"))?;

    let names: Vec<String> = get("joint_names")?
        .as_array()
        .and_then(|a| a.iter().map(|v| v.as_str().map(str::to_string)).collect())
        .ok_or_else(|| schema(line, "joint_names", "expected an array of strings"))?;
    let layout = JointLayout::from_names(&names).ok_or_else(|| {
        schema(
            line,
            "joint_names",
            format!("{} joints not in a canonical 12- or 6-joint order", names.len()),
        )
    })?;
    let num_joints = layout.num_joints();

    let frames = get("frames")?
        .as_array()
        .ok_or_else(|| schema(line, "frames", "expected an array of frames"))?;
    if frames.is_empty() {
        return Err(schema(line, "frames", "sequence has no frames"));
    }
    let mut keypoints = Vec::with_capacity(frames.len() * num_joints);
    for (t, frame) in frames.iter().enumerate() {
        let joints = frame
            .as_array()
            .ok_or_else(|| schema(line, "frames", format!("frame {t} is not an array")))?;
        if joints.len() != num_joints {
            return Err(schema(
                line,
                "frames",
                format!("frame {t} has {} joints, expected {num_joints}", joints.len()),
            ));
        }
        for (j, kp) in joints.iter().enumerate() {
            let xyz: Option<Vec<f64>> = kp
                .as_array()
                .filter(|a| a.len() == 3)
                .and_then(|a| a.iter().map(Value::as_f64).collect());
            let xyz = xyz.ok_or_else(|| {
                schema(line, "frames", format!("frame {t} joint {j} is not [x, y, conf]"))
            })?;
            if !(0.0..=1.0).contains(&xyz[2]) {
                return Err(schema(
                    line,
                    "frames.conf",
                    format!("frame {t} joint {}: conf {} outside [0, 1]", names[j], xyz[2]),
                ));
            }
            keypoints.push(Keypoint::new(xyz[0], xyz[1], xyz[2]));
        }
    }
    let sequence = PoseSequence::new(keypoints, layout, fps)
        .map_err(|e| schema(line, "frames", e.to_string()))?;

    let truth = match obj.get("truth") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let t: GaitFeatures = serde_json::from_value(v.clone())
                .map_err(|e| schema(line, "truth", e.to_string()))?;
            t.validate().map_err(|e| schema(line, "truth", e.to_string()))?;
            Some(t)
        }
    };

    Ok(WalkRecord {
        meta: WalkMetadata {
            walk_id,
            subject_id,
            cohort,
            tracker,
        },
        sequence,
        truth,
    })
}

/// One line of a features file: a prediction, a partial (baseline) result,
/// or a skipped walk with its reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureRow {
    pub walk_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracker: Option<Tracker>,
    pub step_time_s: Option<f64>,
    pub step_width_cm: Option<f64>,
    pub step_length_cm: Option<f64>,
    pub velocity_cm_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

impl FeatureRow {
    pub fn full(walk_id: impl Into<String>, f: &GaitFeatures) -> Self {
        FeatureRow {
            walk_id: walk_id.into(),
            tracker: None,
            step_time_s: Some(f.step_time_s),
            step_width_cm: Some(f.step_width_cm),
            step_length_cm: Some(f.step_length_cm),
            velocity_cm_s: Some(f.velocity_cm_s),
            skipped: None,
        }
    }

    pub fn skipped(walk_id: impl Into<String>, reason: impl Into<String>) -> Self {
        FeatureRow {
            walk_id: walk_id.into(),
            tracker: None,
            step_time_s: None,
            step_width_cm: None,
            step_length_cm: None,
            velocity_cm_s: None,
            skipped: Some(reason.into()),
        }
    }

    pub fn with_tracker(mut self, tracker: Tracker) -> Self {
        self.tracker = Some(tracker);
        self
    }

    /// All four values when present.
    pub fn features(&self) -> Option<GaitFeatures> {
        Some(GaitFeatures::new(
            self.step_time_s?,
            self.step_width_cm?,
            self.step_length_cm?,
            self.velocity_cm_s?,
        ))
    }
}

pub fn write_features(rows: &[FeatureRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in rows {
        let line = serde_json::to_string(r).map_err(|e| Error::invalid(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<Vec<FeatureRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: FeatureRow =
            serde_json::from_str(&line).map_err(|e| schema(i + 1, "<record>", e.to_string()))?;
        out.push(row);
    }
    Ok(out)
}
