//! File formats and in-memory containers for datasets, frame dumps, and
//! trained models.
//!
//! All binary payloads are little-endian. Samples and weights are stored as
//! f32; computation everywhere else is f64. Values produced by this crate
//! are quantized through f32 at the point of creation, so everything that
//! reaches disk round-trips bit-exactly.

mod dataset;
mod frames;
mod model;

pub use dataset::{load_dataset, save_dataset, Dataset};
pub use frames::{load_frames, save_frames};
pub use model::{load_model, save_model, MODEL_MAGIC};

use crate::ClassId;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}: {detail}")]
    Malformed { path: String, detail: String },
    #[error("{path}: expected {expected} bytes, found {actual}")]
    SizeMismatch {
        path: String,
        expected: u64,
        actual: u64,
    },
    #[error(
        "{path}: label value {value} out of range (valid: 0..{})",
        crate::NUM_CLASSES
    )]
    BadLabel { path: String, value: u8 },
    #[error("{path}: bad magic bytes")]
    BadMagic { path: String },
    #[error("{path}: header does not match payload: {detail}")]
    HeaderMismatch { path: String, detail: String },
    #[error("{path}: file truncated")]
    Truncated { path: String },
    #[error("invalid recording: {0}")]
    InvalidRecording(String),
}

/// One multi-channel recording with a per-sample label track.
///
/// `samples[ch][i]` is channel `ch` at sample index `i`; every channel row
/// has the same length as `labels`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmgRecording {
    pub subject_id: String,
    pub session_id: String,
    pub sample_rate_hz: f64,
    pub samples: Vec<Vec<f64>>,
    pub labels: Vec<ClassId>,
}

impl EmgRecording {
    pub fn num_channels(&self) -> usize {
        self.samples.len()
    }

    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    /// Check the structural invariants: consistent row lengths, at least one
    /// sample and channel, labels in range.
    pub fn validate(&self) -> Result<(), DataError> {
        if self.samples.is_empty() {
            return Err(DataError::InvalidRecording(format!(
                "{} session {}: no channels",
                self.subject_id, self.session_id
            )));
        }
        if self.labels.is_empty() {
            return Err(DataError::InvalidRecording(format!(
                "{} session {}: no samples",
                self.subject_id, self.session_id
            )));
        }
        for (ch, row) in self.samples.iter().enumerate() {
            if row.len() != self.labels.len() {
                return Err(DataError::InvalidRecording(format!(
                    "{} session {}: channel {} has {} samples, labels have {}",
                    self.subject_id,
                    self.session_id,
                    ch,
                    row.len(),
                    self.labels.len()
                )));
            }
        }
        if let Some(&bad) = self
            .labels
            .iter()
            .find(|&&l| l as usize >= crate::NUM_CLASSES)
        {
            return Err(DataError::InvalidRecording(format!(
                "{} session {}: label value {bad} out of range",
                self.subject_id, self.session_id
            )));
        }
        Ok(())
    }
}
