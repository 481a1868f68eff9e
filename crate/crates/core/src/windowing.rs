//! Sliding-window segmentation of labeled recordings into fixed-size 2D
//! frames (channels x time).
//!
//! Windows never cross a label boundary: each maximal constant-label run is
//! segmented independently. For a run of length `R`, window length `T`, and
//! stride `S = T - floor(f * T)`, the number of frames is
//! `floor((R - T) / S) + 1` when `R >= T` and 0 otherwise.

use crate::dataio::EmgRecording;
use crate::ClassId;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WindowError {
    #[error("invalid window parameters: {0}")]
    BadParams(String),
    #[error("no recordings to segment")]
    Empty,
    #[error("recording {subject} session {session} has {actual} channels, expected {expected}")]
    ChannelMismatch {
        subject: String,
        session: String,
        expected: usize,
        actual: usize,
    },
}

/// Window length in samples and overlap as a fraction of the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowParams {
    pub window_len: usize,
    pub overlap_frac: f64,
}

impl WindowParams {
    pub fn new(window_len: usize, overlap_frac: f64) -> Result<Self, WindowError> {
        let p = WindowParams {
            window_len,
            overlap_frac,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), WindowError> {
        if self.window_len == 0 {
            return Err(WindowError::BadParams("window length must be >= 1".into()));
        }
        if !self.overlap_frac.is_finite() || !(0.0..1.0).contains(&self.overlap_frac) {
            return Err(WindowError::BadParams(format!(
                "overlap fraction {} outside [0, 1)",
                self.overlap_frac
            )));
        }
        Ok(())
    }

    /// Overlap in samples: `floor(f * T)`.
    pub fn overlap(&self) -> usize {
        (self.overlap_frac * self.window_len as f64).floor() as usize
    }

    /// Stride between consecutive window starts; always >= 1 for f < 1.
    pub fn stride(&self) -> usize {
        self.window_len - self.overlap()
    }
}

/// Frames per constant-label run: 0 if the run is shorter than the window,
/// else `floor((run_len - t) / s) + 1`.
pub fn frame_count(run_len: usize, t: usize, s: usize) -> usize {
    if run_len < t {
        0
    } else {
        (run_len - t) / s + 1
    }
}

/// Identifies the recording a frame came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordingRef {
    pub subject_id: String,
    pub session_id: String,
}

/// One frame: a channels-x-time window with a single label.
/// `data` is row-major, `num_channels` rows of `window_len` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub recording: usize,
    pub start: usize,
    pub label: ClassId,
    pub data: Vec<f64>,
}

/// All frames cut from a set of recordings with one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    pub num_channels: usize,
    pub window_len: usize,
    pub overlap_frac: f64,
    pub recordings: Vec<RecordingRef>,
    pub frames: Vec<Frame>,
}

impl FrameSet {
    /// Frame counts per class id.
    pub fn class_counts(&self) -> [usize; crate::NUM_CLASSES] {
        let mut counts = [0usize; crate::NUM_CLASSES];
        for f in &self.frames {
            counts[f.label as usize] += 1;
        }
        counts
    }
}

/// Maximal constant-label runs of `labels` as (start, length, label).
fn label_runs(labels: &[ClassId]) -> Vec<(usize, usize, ClassId)> {
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[start] {
            runs.push((start, i - start, labels[start]));
            start = i;
        }
    }
    runs
}

/// Cut every recording into frames. Frame order is deterministic:
/// recordings in input order, runs left to right, windows left to right.
/// Frame values are quantized through f32 so persisted frame dumps reload
/// bit-exactly. Accepts owned recordings or references.
pub fn segment<R: std::borrow::Borrow<EmgRecording>>(
    recs: &[R],
    params: &WindowParams,
) -> Result<FrameSet, WindowError> {
    params.validate()?;
    let first = recs.first().ok_or(WindowError::Empty)?.borrow();
    let k = first.num_channels();
    let (t, s) = (params.window_len, params.stride());

    let mut set = FrameSet {
        num_channels: k,
        window_len: t,
        overlap_frac: params.overlap_frac,
        recordings: Vec::with_capacity(recs.len()),
        frames: Vec::new(),
    };

    for (ri, rec) in recs.iter().map(std::borrow::Borrow::borrow).enumerate() {
        if rec.num_channels() != k {
            return Err(WindowError::ChannelMismatch {
                subject: rec.subject_id.clone(),
                session: rec.session_id.clone(),
                expected: k,
                actual: rec.num_channels(),
            });
        }
        set.recordings.push(RecordingRef {
            subject_id: rec.subject_id.clone(),
            session_id: rec.session_id.clone(),
        });
        for (run_start, run_len, label) in label_runs(&rec.labels) {
            let n = frame_count(run_len, t, s);
            for w in 0..n {
                let start = run_start + w * s;
                let mut data = Vec::with_capacity(k * t);
                for row in &rec.samples {
                    data.extend(row[start..start + t].iter().map(|&v| v as f32 as f64));
                }
                set.frames.push(Frame {
                    recording: ri,
                    start,
                    label,
                    data,
                });
            }
        }
    }
    Ok(set)
}
