//! Seeded synthetic multichannel sEMG generator.
//!
//! Each recording alternates active trials with rest periods. An active
//! trial of class `c` is built as `M_c * w(t) * e(t)` plus unit-variance
//! sensor noise, where `M_c` is a per-class spatial mixing matrix
//! (perturbed per subject), `w(t)` are eight independent band-limited
//! Gaussian carriers, and `e(t)` is a trapezoidal activation envelope.
//! Rest periods are sensor noise alone and carry the NM label.
//!
//! The class identity therefore lives in the spatial covariance across
//! channels, which is what a 2D conv net over (channel, time) frames can
//! exploit. Everything derives from the config seed through stable keys,
//! so identical configs give bit-identical datasets, recording by
//! recording, regardless of generation order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::EmgRecording;
use crate::dsp::design_bandpass;
use crate::seedmix;
use crate::windowing::{segment, WindowParams};
use crate::{ClassId, NUM_CLASSES};

/// Independent noise carriers mixed into each active trial.
pub const NUM_CARRIERS: usize = 8;

/// Carrier pass-band floor in Hz.
const CARRIER_LO_HZ: f64 = 20.0;
/// Carrier pass-band ceiling in Hz, capped below Nyquist at low rates.
const CARRIER_HI_HZ: f64 = 450.0;
/// Envelope rise and fall time in seconds.
const EDGE_S: f64 = 0.5;
/// Carrier filter warm-up discarded before each trial, in seconds.
const WARMUP_S: f64 = 0.25;
/// Strength of the per-subject mixing-matrix perturbation.
const SUBJECT_JITTER: f64 = 0.35;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    BadConfig(String),
    #[error("separability check needs at least 2 classes, found {0}")]
    TooFewClasses(usize),
    #[error("separability check produced no test frames")]
    NotEnoughData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// The full acquisition protocol.
    Full,
    /// Reduced preset for quick runs: 1 session, 3 trials per class, 512 Hz.
    Small,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub subjects: usize,
    pub sessions: usize,
    pub trials_per_active_class: usize,
    pub trial_duration_s: f64,
    pub rest_duration_s: f64,
    pub sample_rate_hz: f64,
    pub channels: usize,
    pub snr: f64,
    pub scale: Scale,
}

impl SynthConfig {
    /// Full-protocol defaults: 4 subjects, 5 sessions, 10 trials per active
    /// class, 5 s trials and rests, 1024 Hz, 32 channels, SNR 3.
    pub fn defaults(seed: u64) -> Self {
        SynthConfig {
            seed,
            subjects: 4,
            sessions: 5,
            trials_per_active_class: 10,
            trial_duration_s: 5.0,
            rest_duration_s: 5.0,
            sample_rate_hz: 1024.0,
            channels: 32,
            snr: 3.0,
            scale: Scale::Full,
        }
    }

    /// Resolve the scale preset: `Small` overrides sessions to 1, trials
    /// per class to 3, and the rate to 512 Hz.
    pub fn effective(&self) -> SynthConfig {
        let mut cfg = self.clone();
        if cfg.scale == Scale::Small {
            cfg.sessions = 1;
            cfg.trials_per_active_class = 3;
            cfg.sample_rate_hz = 512.0;
        }
        cfg
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::BadConfig(msg));
        if self.subjects == 0 || self.sessions == 0 || self.trials_per_active_class == 0 {
            return bad("subject, session, and trial counts must be >= 1".into());
        }
        if !(self.trial_duration_s > 0.0) || !(self.rest_duration_s > 0.0) {
            return bad(format!(
                "durations must be positive, got trial {} s, rest {} s",
                self.trial_duration_s, self.rest_duration_s
            ));
        }
        if !(self.sample_rate_hz > 0.0) {
            return bad(format!(
                "sample rate {} must be positive",
                self.sample_rate_hz
            ));
        }
        if self.channels == 0 {
            return bad("channel count must be >= 1".into());
        }
        if !self.snr.is_finite() || !(self.snr > 0.0) {
            return bad(format!("snr {} must be positive and finite", self.snr));
        }
        if (self.trial_duration_s * self.sample_rate_hz).round() < 1.0
            || (self.rest_duration_s * self.sample_rate_hz).round() < 1.0
        {
            return bad("durations are shorter than one sample".into());
        }
        Ok(())
    }

    fn trial_samples(&self) -> usize {
        (self.trial_duration_s * self.sample_rate_hz).round() as usize
    }

    fn rest_samples(&self) -> usize {
        (self.rest_duration_s * self.sample_rate_hz).round() as usize
    }

    /// Samples per recording after scale resolution: one trial plus one
    /// rest period per active trial.
    pub fn recording_samples(&self) -> usize {
        let cfg = self.effective();
        let trials = (NUM_CLASSES - 1) * cfg.trials_per_active_class;
        trials * (cfg.trial_samples() + cfg.rest_samples())
    }
}

/// Per-class spatial mixing matrix, `channels` rows by [`NUM_CARRIERS`]
/// columns, flattened row-major. The class pattern is shared across
/// subjects; a weaker seeded perturbation individualizes each subject.
fn mixing_matrix(cfg: &SynthConfig, subject_id: &str, class: ClassId) -> Vec<f64> {
    let n = cfg.channels * NUM_CARRIERS;
    let base_seed = seedmix::mix(cfg.seed, &[seedmix::hash_str("class-mixing"), class as u64]);
    let mut base_rng = ChaCha8Rng::seed_from_u64(base_seed);
    let subj_seed = seedmix::mix(
        cfg.seed,
        &[
            seedmix::hash_str("subject-mixing"),
            seedmix::hash_str(subject_id),
            class as u64,
        ],
    );
    let mut subj_rng = ChaCha8Rng::seed_from_u64(subj_seed);
    (0..n)
        .map(|_| {
            let base: f64 = base_rng.sample(StandardNormal);
            let jitter: f64 = subj_rng.sample(StandardNormal);
            base + SUBJECT_JITTER * jitter
        })
        .collect()
}

fn subject_ids(cfg: &SynthConfig) -> Vec<String> {
    (1..=cfg.subjects).map(|i| format!("s{i:02}")).collect()
}

fn session_ids(cfg: &SynthConfig) -> Vec<String> {
    (1..=cfg.sessions).map(|i| format!("{i:02}")).collect()
}

/// Generate every recording of the configured protocol, ordered by
/// (subject, session). Recordings are independent given their derived
/// seeds, so they can be produced in parallel and collected in order.
pub fn generate(config: &SynthConfig) -> Result<Vec<EmgRecording>, SynthError> {
    let cfg = config.effective();
    cfg.validate()?;
    let carrier_hi = CARRIER_HI_HZ.min(0.45 * cfg.sample_rate_hz);
    if carrier_hi <= CARRIER_LO_HZ {
        return Err(SynthError::BadConfig(format!(
            "sample rate {} Hz leaves no carrier band above {CARRIER_LO_HZ} Hz",
            cfg.sample_rate_hz
        )));
    }

    let mut cells = Vec::new();
    for subject in subject_ids(&cfg) {
        for session in session_ids(&cfg) {
            cells.push((subject.clone(), session));
        }
    }
    cells
        .into_par_iter()
        .map(|(subject, session)| generate_recording(&cfg, &subject, &session, carrier_hi))
        .collect()
}

fn generate_recording(
    cfg: &SynthConfig,
    subject: &str,
    session: &str,
    carrier_hi: f64,
) -> Result<EmgRecording, SynthError> {
    let rate = cfg.sample_rate_hz;
    let k = cfg.channels;
    let trial_len = cfg.trial_samples();
    let rest_len = cfg.rest_samples();
    let warmup = (WARMUP_S * rate).round() as usize;
    let edge = ((EDGE_S * rate).round() as usize).max(1);

    let carrier_filter = design_bandpass(CARRIER_LO_HZ, carrier_hi, rate, 4)
        .map_err(|e| SynthError::BadConfig(format!("carrier band design failed: {e}")))?;

    let mixing: Vec<Vec<f64>> = (1..NUM_CLASSES)
        .map(|c| mixing_matrix(cfg, subject, c as ClassId))
        .collect();

    let seed = seedmix::mix(
        cfg.seed,
        &[
            seedmix::hash_str("recording"),
            seedmix::hash_str(subject),
            seedmix::hash_str(session),
        ],
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Trial schedule: each active class the same number of times, in an
    // order shuffled per recording.
    let mut schedule: Vec<ClassId> = (1..NUM_CLASSES as ClassId)
        .flat_map(|c| std::iter::repeat(c).take(cfg.trials_per_active_class))
        .collect();
    schedule.shuffle(&mut rng);

    let total = schedule.len() * (trial_len + rest_len);
    let mut samples = vec![Vec::with_capacity(total); k];
    let mut labels: Vec<ClassId> = Vec::with_capacity(total);
    let mut carriers = vec![vec![0.0f64; warmup + trial_len]; NUM_CARRIERS];
    let mut active = vec![vec![0.0f64; trial_len]; k];

    for &class in &schedule {
        // Band-limited unit-variance carriers; the filter warm-up is
        // generated and discarded so every trial starts settled.
        for row in carriers.iter_mut() {
            for v in row.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            carrier_filter.run_forward(row);
        }
        let m = &mixing[class as usize - 1];
        let mut sumsq = 0.0;
        for (ch, out) in active.iter_mut().enumerate() {
            for (t, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for j in 0..NUM_CARRIERS {
                    acc += m[ch * NUM_CARRIERS + j] * carriers[j][warmup + t];
                }
                let rise = ((t + 1) as f64 / edge as f64).min(1.0);
                let fall = ((trial_len - t) as f64 / edge as f64).min(1.0);
                let v = acc * rise.min(fall);
                *o = v;
                sumsq += v * v;
            }
        }
        // Scale the whole trial so its RMS over all channels is `snr`
        // times the unit noise RMS.
        let rms = (sumsq / (k * trial_len) as f64).sqrt();
        let gain = if rms > 0.0 { cfg.snr / rms } else { 0.0 };

        for t in 0..trial_len {
            for (ch, row) in samples.iter_mut().enumerate() {
                let noise: f64 = rng.sample(StandardNormal);
                let v = active[ch][t] * gain + noise;
                row.push(v as f32 as f64);
            }
        }
        labels.extend(std::iter::repeat(class).take(trial_len));

        for _ in 0..rest_len {
            for row in samples.iter_mut() {
                let noise: f64 = rng.sample(StandardNormal);
                row.push(noise as f32 as f64);
            }
        }
        labels.extend(std::iter::repeat(0).take(rest_len));
    }

    Ok(EmgRecording {
        subject_id: subject.to_string(),
        session_id: session.to_string(),
        sample_rate_hz: rate,
        samples,
        labels,
    })
}

/// Nearest-centroid baseline over per-window channel-RMS features, as a
/// cheap gate on generator quality: windows of 125 samples without
/// overlap, a per-class 70/30 split in frame order, centroids from the
/// train portion, accuracy over the test portion.
pub fn separability_check(recordings: &[EmgRecording]) -> Result<f64, SynthError> {
    let params = WindowParams::new(125, 0.0)
        .map_err(|e| SynthError::BadConfig(format!("window params: {e}")))?;
    let set =
        segment(recordings, &params).map_err(|e| SynthError::BadConfig(format!("segment: {e}")))?;

    let mut by_class: Vec<Vec<Vec<f64>>> = vec![Vec::new(); NUM_CLASSES];
    for frame in &set.frames {
        let mut feat = Vec::with_capacity(set.num_channels);
        for ch in 0..set.num_channels {
            let row = &frame.data[ch * set.window_len..(ch + 1) * set.window_len];
            let sumsq: f64 = row.iter().map(|v| v * v).sum();
            feat.push((sumsq / set.window_len as f64).sqrt());
        }
        by_class[frame.label as usize].push(feat);
    }
    let present = by_class.iter().filter(|f| !f.is_empty()).count();
    if present < 2 {
        return Err(SynthError::TooFewClasses(present));
    }

    // Per class: first 70% of frames (in segmentation order) train the
    // centroid, the rest are test points. A single-frame class trains only.
    let mut centroids: Vec<Option<Vec<f64>>> = vec![None; NUM_CLASSES];
    let mut tests: Vec<(usize, Vec<f64>)> = Vec::new();
    for (c, feats) in by_class.iter().enumerate() {
        if feats.is_empty() {
            continue;
        }
        let n_train = ((feats.len() as f64 * 0.7).floor() as usize).max(1);
        let mut centroid = vec![0.0; set.num_channels];
        for f in &feats[..n_train.min(feats.len())] {
            for (acc, v) in centroid.iter_mut().zip(f) {
                *acc += v;
            }
        }
        for acc in centroid.iter_mut() {
            *acc /= n_train.min(feats.len()) as f64;
        }
        centroids[c] = Some(centroid);
        for f in feats.iter().skip(n_train) {
            tests.push((c, f.clone()));
        }
    }
    if tests.is_empty() {
        return Err(SynthError::NotEnoughData);
    }

    let mut correct = 0usize;
    for (true_class, feat) in &tests {
        let mut best = (f64::INFINITY, 0usize);
        for (c, centroid) in centroids.iter().enumerate() {
            if let Some(centroid) = centroid {
                let d: f64 = centroid
                    .iter()
                    .zip(feat)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if d < best.0 {
                    best = (d, c);
                }
            }
        }
        if best.1 == *true_class {
            correct += 1;
        }
    }
    Ok(correct as f64 / tests.len() as f64)
}
