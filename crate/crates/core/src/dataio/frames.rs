//! Frame archive format: an 8-byte magic, one JSON header line describing
//! the segmentation (channel count, window length, overlap, class names,
//! source recordings, frame count), then each frame as a fixed-size record:
//! u32 recording index, u64 start sample, u8 label, and the window itself
//! as little-endian f32 row-major (channel rows, time columns).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::windowing::{Frame, FrameSet, RecordingRef};
use crate::{CLASS_NAMES, NUM_CLASSES};

pub const FRAMES_MAGIC: &[u8; 8] = b"EMGFRM1\0";
const FRAMES_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct FramesHeader {
    version: u32,
    num_channels: usize,
    window_len: usize,
    overlap_frac: f64,
    class_names: Vec<String>,
    recordings: Vec<RecordingEntry>,
    frame_count: u64,
}

#[derive(Serialize, Deserialize)]
struct RecordingEntry {
    subject_id: String,
    session_id: String,
}

pub fn save_frames(path: &Path, set: &FrameSet) -> Result<(), DataError> {
    let p = path.display().to_string();
    let header = FramesHeader {
        version: FRAMES_VERSION,
        num_channels: set.num_channels,
        window_len: set.window_len,
        overlap_frac: set.overlap_frac,
        class_names: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
        recordings: set
            .recordings
            .iter()
            .map(|r| RecordingEntry {
                subject_id: r.subject_id.clone(),
                session_id: r.session_id.clone(),
            })
            .collect(),
        frame_count: set.frames.len() as u64,
    };
    let header = serde_json::to_string(&header).expect("header serializes");
    let record = 13 + 4 * set.num_channels * set.window_len;
    let mut bytes = Vec::with_capacity(16 + header.len() + record * set.frames.len());
    bytes.extend_from_slice(FRAMES_MAGIC);
    bytes.extend_from_slice(header.as_bytes());
    bytes.push(b'\n');
    for frame in &set.frames {
        if frame.recording >= set.recordings.len() {
            return Err(DataError::Malformed {
                path: p.clone(),
                detail: format!("frame references recording {}", frame.recording),
            });
        }
        if frame.data.len() != set.num_channels * set.window_len {
            return Err(DataError::Malformed {
                path: p.clone(),
                detail: "frame data length disagrees with header".into(),
            });
        }
        bytes.extend_from_slice(&(frame.recording as u32).to_le_bytes());
        bytes.extend_from_slice(&(frame.start as u64).to_le_bytes());
        bytes.push(frame.label);
        for &v in &frame.data {
            if !v.is_finite() {
                return Err(DataError::Malformed {
                    path: p.clone(),
                    detail: "refusing to save non-finite sample".into(),
                });
            }
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_frames(path: &Path) -> Result<FrameSet, DataError> {
    let p = path.display().to_string();
    let bytes = fs::read(path)?;
    if bytes.len() < FRAMES_MAGIC.len() || &bytes[..FRAMES_MAGIC.len()] != FRAMES_MAGIC {
        return Err(DataError::BadMagic { path: p.clone() });
    }
    let rest = &bytes[FRAMES_MAGIC.len()..];
    let nl = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| DataError::Malformed {
            path: p.clone(),
            detail: "missing header line".into(),
        })?;
    let header: FramesHeader =
        serde_json::from_slice(&rest[..nl]).map_err(|e| DataError::Malformed {
            path: p.clone(),
            detail: format!("bad header: {}", e),
        })?;
    if header.version != FRAMES_VERSION {
        return Err(DataError::Malformed {
            path: p.clone(),
            detail: format!("unsupported version {}", header.version),
        });
    }
    if header.class_names != CLASS_NAMES {
        return Err(DataError::HeaderMismatch {
            path: p.clone(),
            detail: "class list differs from this build".into(),
        });
    }
    if header.num_channels == 0 || header.window_len == 0 {
        return Err(DataError::Malformed {
            path: p.clone(),
            detail: "zero-sized frame geometry".into(),
        });
    }

    let record = 13 + 4 * header.num_channels * header.window_len;
    let expected = record
        .checked_mul(header.frame_count as usize)
        .ok_or_else(|| DataError::Malformed {
            path: p.clone(),
            detail: "frame count overflows".into(),
        })?;
    let payload = &rest[nl + 1..];
    if payload.len() < expected {
        return Err(DataError::Truncated { path: p.clone() });
    }
    if payload.len() > expected {
        return Err(DataError::HeaderMismatch {
            path: p.clone(),
            detail: format!(
                "{} trailing bytes after {} declared frames",
                payload.len() - expected,
                header.frame_count
            ),
        });
    }

    let values = header.num_channels * header.window_len;
    let mut frames = Vec::with_capacity(header.frame_count as usize);
    for chunk in payload.chunks_exact(record) {
        let recording = u32::from_le_bytes(chunk[0..4].try_into().unwrap()) as usize;
        let start = u64::from_le_bytes(chunk[4..12].try_into().unwrap()) as usize;
        let label = chunk[12];
        if recording >= header.recordings.len() {
            return Err(DataError::Malformed {
                path: p.clone(),
                detail: format!("frame references recording {}", recording),
            });
        }
        if label as usize >= NUM_CLASSES {
            return Err(DataError::BadLabel {
                path: p.clone(),
                value: label,
            });
        }
        let mut data = Vec::with_capacity(values);
        for s in chunk[13..].chunks_exact(4) {
            let v = f32::from_le_bytes(s.try_into().unwrap());
            if !v.is_finite() {
                return Err(DataError::Malformed {
                    path: p.clone(),
                    detail: "non-finite sample value".into(),
                });
            }
            data.push(v as f64);
        }
        frames.push(Frame {
            recording,
            start,
            label,
            data,
        });
    }

    Ok(FrameSet {
        num_channels: header.num_channels,
        window_len: header.window_len,
        overlap_frac: header.overlap_frac,
        recordings: header
            .recordings
            .into_iter()
            .map(|r| RecordingRef {
                subject_id: r.subject_id,
                session_id: r.session_id,
            })
            .collect(),
        frames,
    })
}
