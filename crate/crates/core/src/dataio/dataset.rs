//! Dataset directory layout: a `manifest.json` index plus two flat binary
//! files per recording. Sample files hold little-endian f32 in sample-major
//! interleaved order (`sample0_ch0, sample0_ch1, ...`); label files hold one
//! u8 per sample.

use super::{DataError, EmgRecording};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

const MANIFEST_VERSION: u32 = 1;
pub(crate) const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sample_rate_hz: f64,
    pub num_channels: usize,
    pub recordings: Vec<EmgRecording>,
}

impl Dataset {
    /// Wrap recordings, checking they agree on channel count and rate.
    pub fn new(recordings: Vec<EmgRecording>) -> Result<Self, DataError> {
        let first = recordings
            .first()
            .ok_or_else(|| DataError::InvalidRecording("dataset has no recordings".into()))?;
        let (rate, channels) = (first.sample_rate_hz, first.num_channels());
        for rec in &recordings {
            rec.validate()?;
            if rec.num_channels() != channels || rec.sample_rate_hz != rate {
                return Err(DataError::InvalidRecording(format!(
                    "{} session {}: channel count or rate differs from the first recording",
                    rec.subject_id, rec.session_id
                )));
            }
        }
        Ok(Dataset {
            sample_rate_hz: rate,
            num_channels: channels,
            recordings,
        })
    }

    /// Sorted unique subject ids.
    pub fn subject_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .recordings
            .iter()
            .map(|r| r.subject_id.clone())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    version: u32,
    sample_rate_hz: f64,
    num_channels: usize,
    class_names: Vec<String>,
    recordings: Vec<ManifestRecording>,
}

#[derive(Serialize, Deserialize)]
struct ManifestRecording {
    subject_id: String,
    session_id: String,
    num_samples: usize,
    samples_file: String,
    labels_file: String,
}

/// Write a dataset directory. Existing files with the same names are
/// overwritten; the directory is created if needed.
pub fn save_dataset(dir: &Path, ds: &Dataset) -> Result<(), DataError> {
    for rec in &ds.recordings {
        rec.validate()?;
        for row in &rec.samples {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(DataError::InvalidRecording(format!(
                    "{} session {}: non-finite sample",
                    rec.subject_id, rec.session_id
                )));
            }
        }
    }
    fs::create_dir_all(dir)?;

    let mut manifest = ManifestFile {
        version: MANIFEST_VERSION,
        sample_rate_hz: ds.sample_rate_hz,
        num_channels: ds.num_channels,
        class_names: crate::CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
        recordings: Vec::new(),
    };

    let mut stems = std::collections::BTreeSet::new();
    for rec in &ds.recordings {
        let stem = format!("{}_{}", rec.subject_id, rec.session_id);
        if !stems.insert(stem.clone()) {
            return Err(DataError::InvalidRecording(format!(
                "duplicate recording file stem {stem}"
            )));
        }
        let samples_file = format!("{stem}.samples");
        let labels_file = format!("{stem}.labels");

        let mut w = BufWriter::new(fs::File::create(dir.join(&samples_file))?);
        for i in 0..rec.num_samples() {
            for row in &rec.samples {
                w.write_all(&(row[i] as f32).to_le_bytes())?;
            }
        }
        w.flush()?;
        fs::write(dir.join(&labels_file), &rec.labels)?;

        manifest.recordings.push(ManifestRecording {
            subject_id: rec.subject_id.clone(),
            session_id: rec.session_id.clone(),
            num_samples: rec.num_samples(),
            samples_file,
            labels_file,
        });
    }

    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    fs::write(dir.join(MANIFEST_NAME), json)?;
    Ok(())
}

/// Read a dataset directory written by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<Dataset, DataError> {
    let manifest_path = dir.join(MANIFEST_NAME);
    let path_str = manifest_path.display().to_string();
    let text = fs::read_to_string(&manifest_path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            DataError::Malformed {
                path: path_str.clone(),
                detail: "manifest not found".into(),
            }
        } else {
            DataError::Io(e)
        }
    })?;
    let manifest: ManifestFile = serde_json::from_str(&text).map_err(|e| DataError::Malformed {
        path: path_str.clone(),
        detail: e.to_string(),
    })?;
    if manifest.version != MANIFEST_VERSION {
        return Err(DataError::Malformed {
            path: path_str.clone(),
            detail: format!("unsupported version {}", manifest.version),
        });
    }
    if manifest.class_names != crate::CLASS_NAMES {
        return Err(DataError::Malformed {
            path: path_str.clone(),
            detail: format!("unexpected class names {:?}", manifest.class_names),
        });
    }
    if manifest.num_channels == 0 || manifest.recordings.is_empty() {
        return Err(DataError::Malformed {
            path: path_str,
            detail: "empty dataset".into(),
        });
    }

    let k = manifest.num_channels;
    let mut recordings = Vec::with_capacity(manifest.recordings.len());
    for entry in &manifest.recordings {
        let spath = dir.join(&entry.samples_file);
        let bytes = fs::read(&spath)?;
        let expected = 4 * k as u64 * entry.num_samples as u64;
        if bytes.len() as u64 != expected {
            return Err(DataError::SizeMismatch {
                path: spath.display().to_string(),
                expected,
                actual: bytes.len() as u64,
            });
        }
        let mut samples = vec![vec![0.0f64; entry.num_samples]; k];
        for i in 0..entry.num_samples {
            for (ch, row) in samples.iter_mut().enumerate() {
                let off = 4 * (i * k + ch);
                let v = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
                if !v.is_finite() {
                    return Err(DataError::Malformed {
                        path: spath.display().to_string(),
                        detail: format!("non-finite sample at index {i}, channel {ch}"),
                    });
                }
                row[i] = v as f64;
            }
        }

        let lpath = dir.join(&entry.labels_file);
        let labels = fs::read(&lpath)?;
        if labels.len() != entry.num_samples {
            return Err(DataError::SizeMismatch {
                path: lpath.display().to_string(),
                expected: entry.num_samples as u64,
                actual: labels.len() as u64,
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= crate::NUM_CLASSES) {
            return Err(DataError::BadLabel {
                path: lpath.display().to_string(),
                value: bad,
            });
        }

        recordings.push(EmgRecording {
            subject_id: entry.subject_id.clone(),
            session_id: entry.session_id.clone(),
            sample_rate_hz: manifest.sample_rate_hz,
            samples,
            labels,
        });
    }
    Dataset::new(recordings)
}
