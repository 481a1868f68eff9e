//! IIR preprocessing: a mains notch, a Butterworth band-pass, zero-phase
//! forward-backward application, and class-wise z-score normalization.
//!
//! All filters are cascades of biquad sections with `a0` normalized to 1.
//! Each section is the bilinear transform of an analog prototype stage,
//! pre-warped so the digital response matches the analog one exactly at the
//! design frequency. Coefficients are computed and applied in f64.

use crate::dataio::EmgRecording;
use crate::ClassId;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("invalid filter parameter: {0}")]
    BadParam(String),
    #[error("designed filter is unstable (pole radius {radius:.6} >= 1)")]
    Unstable { radius: f64 },
    #[error("signal too short for filtering: {len} samples, need more than {min}")]
    TooShort { len: usize, min: usize },
    #[error("non-finite sample in input")]
    NonFinite,
    #[error("recording has no samples")]
    Empty,
}

/// One second-order section, direct form, `a0` normalized to 1:
/// `y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]`.
/// First-order sections are represented with `b2 = a2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Larger root magnitude of `z^2 + a1 z + a2`.
    pub fn pole_radius(&self) -> f64 {
        let disc = self.a1 * self.a1 - 4.0 * self.a2;
        if disc >= 0.0 {
            let s = disc.sqrt();
            let r1 = (-self.a1 + s) / 2.0;
            let r2 = (-self.a1 - s) / 2.0;
            r1.abs().max(r2.abs())
        } else {
            // Complex pair: |z|^2 = a2.
            self.a2.abs().sqrt()
        }
    }

    /// Complex response at angular frequency `w` (radians/sample), as (re, im).
    fn response(&self, w: f64) -> (f64, f64) {
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (
            self.b0 + self.b1 * c1 + self.b2 * c2,
            self.b1 * s1 + self.b2 * s2,
        );
        let den = (
            1.0 + self.a1 * c1 + self.a2 * c2,
            self.a1 * s1 + self.a2 * s2,
        );
        let d = den.0 * den.0 + den.1 * den.1;
        (
            (num.0 * den.0 + num.1 * den.1) / d,
            (num.1 * den.0 - num.0 * den.1) / d,
        )
    }
}

/// A cascade of biquad sections tied to the sample rate it was designed for.
#[derive(Debug, Clone, PartialEq)]
pub struct BiquadCascade {
    pub sections: Vec<Biquad>,
    pub sample_rate_hz: f64,
}

impl BiquadCascade {
    /// Total filter order (each full biquad contributes 2, first-order
    /// sections contribute 1).
    pub fn order(&self) -> usize {
        self.sections
            .iter()
            .map(|s| if s.a2 == 0.0 && s.b2 == 0.0 { 1 } else { 2 })
            .sum()
    }

    /// Magnitude response |H(f)| evaluated analytically from coefficients.
    pub fn magnitude_at(&self, f_hz: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * f_hz / self.sample_rate_hz;
        self.sections
            .iter()
            .map(|s| {
                let (re, im) = s.response(w);
                (re * re + im * im).sqrt()
            })
            .product()
    }

    pub fn max_pole_radius(&self) -> f64 {
        self.sections
            .iter()
            .map(Biquad::pole_radius)
            .fold(0.0, f64::max)
    }

    pub fn is_stable(&self) -> bool {
        self.max_pole_radius() < 1.0
    }

    /// Causal pass over `x` from zero initial state (direct form II
    /// transposed), section by section.
    pub fn run_forward(&self, x: &mut [f64]) {
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for v in x.iter_mut() {
                let xin = *v;
                let y = s.b0 * xin + z1;
                z1 = s.b1 * xin - s.a1 * y + z2;
                z2 = s.b2 * xin - s.a2 * y;
                *v = y;
            }
        }
    }
}

fn check_stable(c: BiquadCascade) -> Result<BiquadCascade, DspError> {
    if c.is_stable() {
        Ok(c)
    } else {
        Err(DspError::Unstable {
            radius: c.max_pole_radius(),
        })
    }
}

/// Design a single-section notch at `f0_hz` with quality factor `q`.
///
/// Zeros sit exactly on the unit circle at the notch frequency, so
/// |H(f0)| = 0, while gain at DC and Nyquist is exactly 1.
pub fn design_notch(f0_hz: f64, q: f64, fs_hz: f64) -> Result<BiquadCascade, DspError> {
    if !(fs_hz > 0.0) || !f0_hz.is_finite() || !q.is_finite() {
        return Err(DspError::BadParam(format!(
            "notch f0={f0_hz}, q={q}, fs={fs_hz}"
        )));
    }
    if f0_hz <= 0.0 || f0_hz >= fs_hz / 2.0 {
        return Err(DspError::BadParam(format!(
            "notch frequency {f0_hz} Hz outside (0, {}) Hz",
            fs_hz / 2.0
        )));
    }
    if q <= 0.0 {
        return Err(DspError::BadParam(format!("notch q {q} must be positive")));
    }
    let w0 = 2.0 * std::f64::consts::PI * f0_hz / fs_hz;
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    let section = Biquad {
        b0: 1.0 / a0,
        b1: -2.0 * w0.cos() / a0,
        b2: 1.0 / a0,
        a1: -2.0 * w0.cos() / a0,
        a2: (1.0 - alpha) / a0,
    };
    check_stable(BiquadCascade {
        sections: vec![section],
        sample_rate_hz: fs_hz,
    })
}

/// Butterworth pole-pair quality factors for a prototype of order `n`,
/// plus a flag for the extra real pole when `n` is odd.
///
/// Prototype poles sit on the unit circle at angles theta from the
/// imaginary axis; a conjugate pair at angle theta has Q = 1 / (2 sin theta).
fn butterworth_qs(n: usize) -> (Vec<f64>, bool) {
    let mut qs = Vec::new();
    let pairs = n / 2;
    for i in 0..pairs {
        let theta = std::f64::consts::PI * (2 * i + 1) as f64 / (2.0 * n as f64);
        qs.push(1.0 / (2.0 * theta.sin()));
    }
    (qs, n % 2 == 1)
}

fn lowpass_biquad(fc_hz: f64, q: f64, fs_hz: f64) -> Biquad {
    let w0 = 2.0 * std::f64::consts::PI * fc_hz / fs_hz;
    let (cw, sw) = (w0.cos(), w0.sin());
    let alpha = sw / (2.0 * q);
    let a0 = 1.0 + alpha;
    Biquad {
        b0: (1.0 - cw) / 2.0 / a0,
        b1: (1.0 - cw) / a0,
        b2: (1.0 - cw) / 2.0 / a0,
        a1: -2.0 * cw / a0,
        a2: (1.0 - alpha) / a0,
    }
}

fn highpass_biquad(fc_hz: f64, q: f64, fs_hz: f64) -> Biquad {
    let w0 = 2.0 * std::f64::consts::PI * fc_hz / fs_hz;
    let (cw, sw) = (w0.cos(), w0.sin());
    let alpha = sw / (2.0 * q);
    let a0 = 1.0 + alpha;
    Biquad {
        b0: (1.0 + cw) / 2.0 / a0,
        b1: -(1.0 + cw) / a0,
        b2: (1.0 + cw) / 2.0 / a0,
        a1: -2.0 * cw / a0,
        a2: (1.0 - alpha) / a0,
    }
}

/// First-order sections for odd prototype orders, from the bilinear
/// transform with the warp anchored at `fc_hz`.
fn lowpass_first_order(fc_hz: f64, fs_hz: f64) -> Biquad {
    let k = (std::f64::consts::PI * fc_hz / fs_hz).tan();
    Biquad {
        b0: k / (k + 1.0),
        b1: k / (k + 1.0),
        b2: 0.0,
        a1: (k - 1.0) / (k + 1.0),
        a2: 0.0,
    }
}

fn highpass_first_order(fc_hz: f64, fs_hz: f64) -> Biquad {
    let k = (std::f64::consts::PI * fc_hz / fs_hz).tan();
    Biquad {
        b0: 1.0 / (k + 1.0),
        b1: -1.0 / (k + 1.0),
        b2: 0.0,
        a1: (k - 1.0) / (k + 1.0),
        a2: 0.0,
    }
}

/// Design a Butterworth band-pass as a high-pass cascade at `lo_hz` followed
/// by a low-pass cascade at `hi_hz`, each of prototype order `order`.
///
/// With well-separated edges (the intended regime, e.g. 10..500 Hz) each
/// edge sees -3.01 dB from its own cascade and essentially 0 dB from the
/// other, and the stop-band roll-off is monotone on both sides. Gain at DC
/// is exactly 0. The upper edge may sit close to Nyquist; sections are
/// checked for stability after design.
pub fn design_bandpass(
    lo_hz: f64,
    hi_hz: f64,
    fs_hz: f64,
    order: usize,
) -> Result<BiquadCascade, DspError> {
    if !(fs_hz > 0.0) || !lo_hz.is_finite() || !hi_hz.is_finite() {
        return Err(DspError::BadParam(format!(
            "bandpass lo={lo_hz}, hi={hi_hz}, fs={fs_hz}"
        )));
    }
    if !(0.0 < lo_hz && lo_hz < hi_hz && hi_hz < fs_hz / 2.0) {
        return Err(DspError::BadParam(format!(
            "bandpass edges ({lo_hz}, {hi_hz}) Hz must satisfy 0 < lo < hi < {}",
            fs_hz / 2.0
        )));
    }
    if order == 0 {
        return Err(DspError::BadParam("bandpass order must be >= 1".into()));
    }
    let (qs, odd) = butterworth_qs(order);
    let mut sections = Vec::new();
    for &q in &qs {
        sections.push(highpass_biquad(lo_hz, q, fs_hz));
    }
    if odd {
        sections.push(highpass_first_order(lo_hz, fs_hz));
    }
    for &q in &qs {
        sections.push(lowpass_biquad(hi_hz, q, fs_hz));
    }
    if odd {
        sections.push(lowpass_first_order(hi_hz, fs_hz));
    }
    check_stable(BiquadCascade {
        sections,
        sample_rate_hz: fs_hz,
    })
}

/// Padding length at which the slowest pole has decayed below 1e-15.
fn settle_len(cascade: &BiquadCascade) -> usize {
    let r = cascade.max_pole_radius();
    let floor = 3 * cascade.order();
    if r <= 0.0 {
        return floor;
    }
    let n = (1e-15f64.ln() / r.ln()).ceil();
    (n as usize).clamp(floor, 65_536)
}

/// Zero-phase filtering: run the cascade forward, reverse, run it again,
/// reverse. The signal is extended at both ends by odd reflection long
/// enough for edge transients to decay, then the center is returned, so the
/// result behaves like the symmetric two-sided filter on the interior:
/// filtering a time-reversed signal gives the time-reversed result.
pub fn filter_forward_backward(x: &[f64], cascade: &BiquadCascade) -> Result<Vec<f64>, DspError> {
    let min = 3 * cascade.order();
    if x.len() <= min {
        return Err(DspError::TooShort { len: x.len(), min });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(DspError::NonFinite);
    }
    let n = x.len();
    let pad = settle_len(cascade).min(n - 1);

    // Odd extension: reflect around the end points so the extension joins
    // without a step. ext[i] = 2*x[0] - x[pad-i] on the left.
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in 0..pad {
        ext.push(2.0 * x[0] - x[pad - i]);
    }
    ext.extend_from_slice(x);
    for i in 0..pad {
        ext.push(2.0 * x[n - 1] - x[n - 2 - i]);
    }

    cascade.run_forward(&mut ext);
    ext.reverse();
    cascade.run_forward(&mut ext);
    ext.reverse();

    Ok(ext[pad..pad + n].to_vec())
}

/// Z-score each channel separately within each label group, using the
/// population standard deviation (divide by N). Groups whose deviation falls
/// below 1e-12 are set to zero rather than amplifying noise. Statistics are
/// per recording; labels are untouched.
pub fn zscore_classwise(rec: &EmgRecording) -> Result<EmgRecording, DspError> {
    let len = rec.labels.len();
    if len == 0 {
        return Err(DspError::Empty);
    }
    for row in &rec.samples {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(DspError::NonFinite);
        }
    }
    let classes: Vec<ClassId> = {
        let mut seen = [false; crate::NUM_CLASSES];
        for &l in &rec.labels {
            seen[l as usize] = true;
        }
        (0..crate::NUM_CLASSES as u8)
            .filter(|&c| seen[c as usize])
            .collect()
    };

    let mut out = rec.clone();
    for &class in &classes {
        let idx: Vec<usize> = rec
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        let n = idx.len() as f64;
        for (ch, row) in rec.samples.iter().enumerate() {
            let mean = idx.iter().map(|&i| row[i]).sum::<f64>() / n;
            let var = idx.iter().map(|&i| (row[i] - mean).powi(2)).sum::<f64>() / n;
            let sigma = var.sqrt();
            let dest = &mut out.samples[ch];
            if sigma < 1e-12 {
                for &i in &idx {
                    dest[i] = 0.0;
                }
            } else {
                for &i in &idx {
                    dest[i] = (row[i] - mean) / sigma;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const FS: f64 = 1024.0;

    fn db(mag: f64) -> f64 {
        20.0 * mag.log10()
    }

    #[test]
    fn notch_kills_center_and_spares_neighbors() {
        let c = design_notch(50.0, 30.0, FS).unwrap();
        assert!(db(c.magnitude_at(50.0)) <= -40.0);
        assert!(db(c.magnitude_at(40.0)).abs() <= 1.0);
        assert!(db(c.magnitude_at(60.0)).abs() <= 1.0);
        // Unity at DC and Nyquist by construction.
        assert_abs_diff_eq!(c.magnitude_at(0.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.magnitude_at(FS / 2.0), 1.0, epsilon = 1e-12);
        assert!(c.is_stable());
    }

    #[test]
    fn bandpass_response_meets_band_and_stopband() {
        let c = design_bandpass(10.0, 500.0, FS, 4).unwrap();
        assert!(c.is_stable(), "pole radius {}", c.max_pole_radius());
        assert_eq!(c.sections.len(), 4);
        // Edges at -3 dB within 1 dB; mid-band flat; stop bands down.
        assert!((db(c.magnitude_at(10.0)) + 3.01).abs() <= 1.0);
        assert!((db(c.magnitude_at(500.0)) + 3.01).abs() <= 1.0);
        assert!(db(c.magnitude_at(100.0)) >= -1.0);
        assert!(db(c.magnitude_at(2.0)) <= -20.0);
        assert!(c.magnitude_at(0.0) <= 1e-2);
    }

    #[test]
    fn bandpass_rolloff_is_monotone_outside_band() {
        let c = design_bandpass(10.0, 500.0, FS, 4).unwrap();
        let mut prev = c.magnitude_at(0.5);
        for i in 1..20 {
            let f = 0.5 + (10.0 - 0.5) * i as f64 / 20.0;
            let m = c.magnitude_at(f);
            assert!(m >= prev, "low-side response dips at {f} Hz");
            prev = m;
        }
        let mut prev = c.magnitude_at(500.0);
        for i in 1..=20 {
            let f = 500.0 + (FS / 2.0 - 500.0) * i as f64 / 21.0;
            let m = c.magnitude_at(f);
            assert!(m <= prev, "high-side response rises at {f} Hz");
            prev = m;
        }
    }

    #[test]
    fn odd_order_bandpass_designs_and_stays_stable() {
        for order in [1, 2, 3, 5] {
            let c = design_bandpass(20.0, 200.0, FS, order).unwrap();
            assert!(c.is_stable());
            assert_eq!(c.order(), 2 * order);
            assert!((db(c.magnitude_at(20.0)) + 3.01).abs() <= 1.0);
        }
    }

    #[test]
    fn bad_design_params_are_rejected() {
        assert!(design_notch(0.0, 30.0, FS).is_err());
        assert!(design_notch(512.0, 30.0, FS).is_err());
        assert!(design_notch(50.0, -1.0, FS).is_err());
        assert!(design_bandpass(500.0, 10.0, FS, 4).is_err());
        assert!(design_bandpass(10.0, 512.0, FS, 4).is_err());
        assert!(design_bandpass(10.0, 500.0, FS, 0).is_err());
    }

    #[test]
    fn forward_backward_removes_notched_tone() {
        let c = design_notch(50.0, 30.0, FS).unwrap();
        let n = 8192;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 50.0 * i as f64 / FS).sin())
            .collect();
        let y = filter_forward_backward(&x, &c).unwrap();
        // Steady state: measure the middle half, away from edge transients.
        let mid = &y[n / 4..3 * n / 4];
        let rms = (mid.iter().map(|v| v * v).sum::<f64>() / mid.len() as f64).sqrt();
        let in_rms = (0.5f64).sqrt();
        assert!(rms <= 0.01 * in_rms, "residual rms {rms}");
    }

    #[test]
    fn forward_backward_passes_inband_tone_unscaled() {
        let c = design_bandpass(10.0, 500.0, FS, 4).unwrap();
        let n = 8192;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 100.0 * i as f64 / FS).sin())
            .collect();
        let y = filter_forward_backward(&x, &c).unwrap();
        let mid = &y[n / 4..3 * n / 4];
        let rms = (mid.iter().map(|v| v * v).sum::<f64>() / mid.len() as f64).sqrt();
        // Two passes of -1 dB worst case at 100 Hz still keep ~unity.
        assert!(
            (rms / (0.5f64).sqrt() - 1.0).abs() < 0.05,
            "rms ratio {rms}"
        );
    }

    #[test]
    fn forward_backward_zero_in_zero_out() {
        let c = design_bandpass(10.0, 500.0, FS, 4).unwrap();
        let y = filter_forward_backward(&vec![0.0; 4096], &c).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_backward_commutes_with_time_reversal() {
        for cascade in [
            design_notch(50.0, 30.0, FS).unwrap(),
            design_bandpass(10.0, 500.0, FS, 4).unwrap(),
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let n = 9000;
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = filter_forward_backward(&x, &cascade).unwrap();
            let xr: Vec<f64> = x.iter().rev().copied().collect();
            let yr = filter_forward_backward(&xr, &cascade).unwrap();
            let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in y.iter().zip(yr.iter().rev()) {
                assert!(
                    (a - b).abs() <= 1e-9 * scale.max(1.0),
                    "asymmetry {}",
                    (a - b).abs()
                );
            }
        }
    }

    #[test]
    fn forward_backward_rejects_short_and_nonfinite() {
        let c = design_bandpass(10.0, 500.0, FS, 4).unwrap();
        assert!(matches!(
            filter_forward_backward(&[0.0; 24], &c),
            Err(DspError::TooShort { .. })
        ));
        let mut x = vec![0.0; 4096];
        x[7] = f64::NAN;
        assert!(matches!(
            filter_forward_backward(&x, &c),
            Err(DspError::NonFinite)
        ));
    }

    fn tiny_recording(samples: Vec<Vec<f64>>, labels: Vec<ClassId>) -> EmgRecording {
        EmgRecording {
            subject_id: "S01".into(),
            session_id: "01".into(),
            sample_rate_hz: FS,
            samples,
            labels,
        }
    }

    #[test]
    fn zscore_matches_hand_computed_values() {
        let rec = tiny_recording(vec![vec![1.0, 2.0, 3.0]], vec![1, 1, 1]);
        let out = zscore_classwise(&rec).unwrap();
        let expect = [-1.224_744_871_391_589, 0.0, 1.224_744_871_391_589];
        for (v, e) in out.samples[0].iter().zip(expect) {
            assert_abs_diff_eq!(v, &e, epsilon = 1e-9);
        }
    }

    #[test]
    fn zscore_groups_are_independent_per_class_and_channel() {
        let rec = tiny_recording(
            vec![
                vec![1.0, 2.0, 3.0, 10.0, 20.0, 30.0],
                vec![5.0, 5.0, 8.0, 1.0, 1.0, 4.0],
            ],
            vec![0, 0, 0, 2, 2, 2],
        );
        let out = zscore_classwise(&rec).unwrap();
        for &class in &[0u8, 2u8] {
            let idx: Vec<usize> = rec
                .labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == class)
                .map(|(i, _)| i)
                .collect();
            for row in &out.samples {
                let n = idx.len() as f64;
                let mean = idx.iter().map(|&i| row[i]).sum::<f64>() / n;
                let var = idx.iter().map(|&i| (row[i] - mean).powi(2)).sum::<f64>() / n;
                assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-12);
                assert_abs_diff_eq!(var, 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn zscore_constant_group_maps_to_zeros() {
        let rec = tiny_recording(vec![vec![3.5, 3.5, 3.5, 1.0, 2.0]], vec![0, 0, 0, 1, 1]);
        let out = zscore_classwise(&rec).unwrap();
        assert_eq!(&out.samples[0][..3], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn zscore_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let labels: Vec<ClassId> = (0..600).map(|i| ((i / 100) % 5) as u8).collect();
        let samples: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..600).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .collect();
        let rec = tiny_recording(samples, labels);
        let once = zscore_classwise(&rec).unwrap();
        let twice = zscore_classwise(&once).unwrap();
        for (a, b) in once.samples.iter().zip(&twice.samples) {
            for (x, y) in a.iter().zip(b) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zscore_rejects_nan_and_empty() {
        let rec = tiny_recording(vec![vec![f64::NAN, 1.0]], vec![0, 0]);
        assert!(matches!(zscore_classwise(&rec), Err(DspError::NonFinite)));
        let rec = tiny_recording(vec![], vec![]);
        assert!(matches!(zscore_classwise(&rec), Err(DspError::Empty)));
    }
}
