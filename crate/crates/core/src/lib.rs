//! Walk-averaged spatiotemporal gait features (step time, step width, step
//! length, velocity) from 2D frontal-view pose sequences.
//!
//! The crate is organised bottom-up:
//!
//! - [`types`] and [`walkio`]: domain types and the line-delimited walk and
//!   feature file formats.
//! - [`synthgait`]: a kinematic walk simulator with a pinhole camera and
//!   emulated pose-tracker noise, used as training data and ground truth.
//! - [`gaitevents`]: heuristic footfall detection from ankle trajectories.
//! - [`preprocess`]: interpolation, smoothing, cropping, normalisation and
//!   mirroring of pose sequences into model input tensors.
//! - [`nn`]: a small tensor kernel with reverse-mode gradients and Adam.
//! - [`model`]: the shared-encoder / per-feature-head network, training and
//!   prediction.
//! - [`eval`]: subject-stratified cross-validation, Spearman's rho, MAE and
//!   the ablation runner.
//! - [`config`]: the experiment configuration file.

pub mod config;
pub mod error;
pub mod eval;
pub mod gaitevents;
pub mod model;
pub mod nn;
pub mod preprocess;
pub mod synthgait;
pub mod types;
pub mod walkio;

pub use error::{Error, Result};
pub use types::{
    encode_metadata, Cohort, GaitFeatures, JointLayout, Keypoint, LossWeights, PoseSequence,
    Tracker, WalkMetadata, WalkRecord, METADATA_LEN, NUM_FEATURES,
};
