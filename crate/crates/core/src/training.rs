//! Supervised training loop: stratified splitting, cross-entropy loss,
//! Adam updates, and a fixed-epoch schedule with per-epoch curves.
//!
//! One training run is strictly sequential. Every random choice (the
//! split, the weight init, each epoch's shuffle, each frame's dropout
//! mask) is drawn from a single stream seeded by the config, so one seed
//! reproduces the entire run bit for bit. Wall-clock seconds are the only
//! report field that varies between identical runs.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::eval::ConfusionMatrix;
use crate::nn::{Gradients, Network, NetworkSpec, NnError, Tensor};
use crate::windowing::FrameSet;
use crate::{ClassId, NUM_CLASSES};

/// Cross-entropy clamp: probabilities below this contribute a finite loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// Parameter group names in canonical slice order, for diagnostics.
const PARAM_NAMES: [&str; 12] = [
    "conv1.weights",
    "conv1.bias",
    "conv2.weights",
    "conv2.bias",
    "conv3.weights",
    "conv3.bias",
    "conv4.weights",
    "conv4.bias",
    "dense1.weights",
    "dense1.bias",
    "dense2.weights",
    "dense2.bias",
];

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("frame set is empty")]
    EmptyFrameSet,
    #[error("class {class} has {count} frames, need at least 2 to split")]
    ClassTooSmall { class: usize, count: usize },
    #[error("training needs at least 2 classes, found {0}")]
    TooFewClasses(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value during training: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Network(#[from] NnError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

/// First and second moment estimates per parameter, one pair of buffers
/// per parameter group, plus the step counter for bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new_for(net: &Network) -> Self {
        let shapes: Vec<usize> = net.param_slices().iter().map(|s| s.len()).collect();
        AdamState {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update with bias correction:
    /// m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2;
    /// theta <- theta - lr * m-hat / (sqrt(v-hat) + eps).
    /// A non-finite gradient aborts with its location.
    pub fn step(
        &mut self,
        net: &mut Network,
        grads: &Gradients,
        cfg: &AdamConfig,
    ) -> Result<(), TrainError> {
        let gslices = grads.slices();
        if gslices.len() != self.m.len() {
            return Err(TrainError::ShapeMismatch(format!(
                "{} gradient groups vs {} state groups",
                gslices.len(),
                self.m.len()
            )));
        }
        self.step += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.step as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.step as i32);
        for (si, (params, g)) in net.param_slices_mut().into_iter().zip(&gslices).enumerate() {
            if params.len() != g.len() {
                return Err(TrainError::ShapeMismatch(format!(
                    "{}: {} parameters vs {} gradients",
                    PARAM_NAMES[si],
                    params.len(),
                    g.len()
                )));
            }
            let (m, v) = (&mut self.m[si], &mut self.v[si]);
            for (pi, (p, &gv)) in params.iter_mut().zip(g.iter()).enumerate() {
                if !gv.is_finite() {
                    return Err(TrainError::NonFinite(format!(
                        "gradient {}[{pi}] = {gv}",
                        PARAM_NAMES[si]
                    )));
                }
                m[pi] = cfg.beta1 * m[pi] + (1.0 - cfg.beta1) * gv;
                v[pi] = cfg.beta2 * v[pi] + (1.0 - cfg.beta2) * gv * gv;
                let m_hat = m[pi] / bc1;
                let v_hat = v[pi] / bc2;
                *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub train_fraction: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Reference settings: Adam at 1e-4 with the usual moment decays,
    /// 35 epochs, a stratified 70/30 split, batches of 32.
    pub fn defaults(seed: u64) -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 35,
            train_fraction: 0.7,
            batch_size: 32,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::BadConfig(msg));
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad(format!(
                "learning rate {} must be positive",
                self.learning_rate
            ));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} {b} must lie in [0, 1)"));
            }
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return bad(format!("epsilon {} must be positive", self.epsilon));
        }
        if self.epochs == 0 {
            return bad("epoch count must be >= 1".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!(
                "train fraction {} must lie in (0, 1)",
                self.train_fraction
            ));
        }
        if self.batch_size == 0 {
            return bad("batch size must be >= 1".into());
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// One epoch of curve data. Validation is the held-out test partition
/// evaluated without dropout.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub curve: Vec<EpochStats>,
    pub test_accuracy: f64,
    pub test_f1_macro: f64,
    pub confusion: ConfusionMatrix,
    pub seconds: f64,
    pub seed: u64,
}

impl TrainReport {
    /// Per-epoch curve as CSV text, one row per epoch.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_accuracy,val_loss,val_accuracy\n");
        for (i, e) in self.curve.iter().enumerate() {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6}\n",
                i + 1,
                e.train_loss,
                e.train_accuracy,
                e.val_loss,
                e.val_accuracy
            ));
        }
        out
    }
}

/// Stratified split: per class, a seeded shuffle picks floor(fraction*n)
/// frames for training (at least 1), the rest for test. Partitions keep
/// the original frame order, so the split only decides membership.
pub fn split_frames(
    frames: &FrameSet,
    fraction: f64,
    seed: u64,
) -> Result<(FrameSet, FrameSet), TrainError> {
    if frames.frames.is_empty() {
        return Err(TrainError::EmptyFrameSet);
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(TrainError::BadConfig(format!(
            "split fraction {fraction} must lie in (0, 1)"
        )));
    }

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (i, f) in frames.frames.iter().enumerate() {
        by_class[f.label as usize].push(i);
    }
    for (class, idxs) in by_class.iter().enumerate() {
        if !idxs.is_empty() && idxs.len() < 2 {
            return Err(TrainError::ClassTooSmall {
                class,
                count: idxs.len(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for idxs in by_class.iter_mut() {
        if idxs.is_empty() {
            continue;
        }
        idxs.shuffle(&mut rng);
        // fraction < 1 guarantees floor(f*n) <= n-1, so test is never
        // empty for a class that passed the n >= 2 gate.
        let n_train = ((idxs.len() as f64 * fraction).floor() as usize).max(1);
        train_idx.extend_from_slice(&idxs[..n_train]);
        test_idx.extend_from_slice(&idxs[n_train..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let subset = |idxs: &[usize]| FrameSet {
        num_channels: frames.num_channels,
        window_len: frames.window_len,
        overlap_frac: frames.overlap_frac,
        recordings: frames.recordings.clone(),
        frames: idxs.iter().map(|&i| frames.frames[i].clone()).collect(),
    };
    Ok((subset(&train_idx), subset(&test_idx)))
}

/// Categorical cross-entropy against a hard target, clamped so a zero
/// probability yields a large finite loss instead of infinity.
pub fn cross_entropy(probs: &[f64], target: ClassId) -> f64 {
    -probs[target as usize].max(PROB_FLOOR).ln()
}

fn frame_tensor(frames: &FrameSet, idx: usize) -> Tensor {
    Tensor::from_data(
        1,
        frames.num_channels,
        frames.window_len,
        frames.frames[idx].data.clone(),
    )
}

/// Dropout-free pass over a partition: mean loss plus a confusion matrix.
fn eval_pass(net: &Network, frames: &FrameSet) -> (f64, ConfusionMatrix) {
    let mut cm = ConfusionMatrix::new();
    let mut loss_sum = 0.0;
    for i in 0..frames.frames.len() {
        let x = frame_tensor(frames, i);
        let tape = net.forward_eval(&x);
        let label = frames.frames[i].label;
        loss_sum += cross_entropy(&tape.probs, label);
        let pred = tape
            .probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        cm.record(label as usize, pred);
    }
    (loss_sum / frames.frames.len() as f64, cm)
}

/// Train the standard classifier on a frame set.
///
/// The input is split 70/30 (per the config), a fresh network is
/// initialized for the frame geometry, and exactly `epochs` passes run
/// with per-epoch reshuffling, mini-batch gradient averaging, and live
/// dropout. Validation metrics come from the test partition in eval mode;
/// the report's final metrics are the last epoch's.
pub fn train(
    frames: &FrameSet,
    kernel: usize,
    cfg: &TrainConfig,
) -> Result<(Network, TrainReport), TrainError> {
    cfg.validate()?;
    if frames.frames.is_empty() {
        return Err(TrainError::EmptyFrameSet);
    }
    let classes_present = frames.class_counts().iter().filter(|&&n| n > 0).count();
    if classes_present < 2 {
        return Err(TrainError::TooFewClasses(classes_present));
    }
    let expect = frames.num_channels * frames.window_len;
    if let Some((i, f)) = frames
        .frames
        .iter()
        .enumerate()
        .find(|(_, f)| f.data.len() != expect)
    {
        return Err(TrainError::ShapeMismatch(format!(
            "frame {i} holds {} values, geometry says {expect}",
            f.data.len()
        )));
    }

    let started = Instant::now();

    // One stream drives every random decision, in a fixed order.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let split_seed: u64 = rng.gen();
    let init_seed: u64 = rng.gen();

    let (train_set, test_set) = split_frames(frames, cfg.train_fraction, split_seed)?;

    let mut spec = NetworkSpec::standard(frames.window_len, kernel);
    spec.input_height = frames.num_channels;
    if ![3, 5, 7].contains(&kernel) {
        return Err(TrainError::BadConfig(format!(
            "kernel size must be 3, 5, or 7, got {kernel}"
        )));
    }
    let mut net = Network::init(spec, init_seed)?;
    let mut adam = AdamState::new_for(&net);
    let mut grads = Gradients::zeros_for(&net);
    let adam_cfg = cfg.adam();

    let n_train = train_set.frames.len();
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut last_cm = ConfusionMatrix::new();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            grads.fill_zero();
            for &idx in batch {
                let x = frame_tensor(&train_set, idx);
                let mask_seed: u64 = rng.gen();
                let tape = net.forward_train(&x, mask_seed);
                let label = train_set.frames[idx].label;
                let loss = cross_entropy(&tape.probs, label);
                if !loss.is_finite() {
                    return Err(TrainError::NonFinite(format!(
                        "loss diverged at epoch {} on frame {idx}: {loss}",
                        epoch + 1
                    )));
                }
                loss_sum += loss;
                let pred = tape
                    .probs
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap();
                if pred == label as usize {
                    correct += 1;
                }
                net.backward(&tape, label as usize, &mut grads);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut net, &grads, &adam_cfg)?;
        }
        let (val_loss, cm) = eval_pass(&net, &test_set);
        curve.push(EpochStats {
            train_loss: loss_sum / n_train as f64,
            train_accuracy: correct as f64 / n_train as f64,
            val_loss,
            val_accuracy: cm.accuracy(),
        });
        last_cm = cm;
    }

    let report = TrainReport {
        test_accuracy: last_cm.accuracy(),
        test_f1_macro: last_cm.macro_f1(),
        confusion: last_cm,
        curve,
        seconds: started.elapsed().as_secs_f64(),
        seed: cfg.seed,
    };
    Ok((net, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::windowing::Frame;
    use approx::assert_abs_diff_eq;

    /// A frame set with `per_class` frames per class, 8 channels, width 20.
    /// Class c puts a strong constant on channel c with mild deterministic
    /// jitter, so classes separate trivially.
    fn toy_frames(per_class: usize) -> FrameSet {
        let (k, t) = (8, 20);
        let mut frames = Vec::new();
        for c in 0..NUM_CLASSES {
            for i in 0..per_class {
                let mut data = vec![0.0f64; k * t];
                for (j, v) in data.iter_mut().enumerate() {
                    let jitter = ((j * 31 + i * 17 + c * 7) % 13) as f64 / 26.0;
                    *v = jitter - 0.25;
                }
                for v in &mut data[c * t..(c + 1) * t] {
                    *v += 3.0;
                }
                frames.push(Frame {
                    recording: 0,
                    start: (c * per_class + i) * t,
                    label: c as ClassId,
                    data,
                });
            }
        }
        FrameSet {
            num_channels: k,
            window_len: t,
            overlap_frac: 0.0,
            recordings: Vec::new(),
            frames,
        }
    }

    fn tiny_net(seed: u64) -> Network {
        let mut spec = NetworkSpec::standard(20, 3);
        spec.input_height = 8;
        Network::init(spec, seed).unwrap()
    }

    #[test]
    fn adam_zero_gradient_leaves_parameters_unchanged() {
        let mut net = tiny_net(1);
        let before: Vec<Vec<f64>> = net.param_slices().iter().map(|s| s.to_vec()).collect();
        let grads = Gradients::zeros_for(&net);
        let mut adam = AdamState::new_for(&net);
        let cfg = TrainConfig::defaults(0).adam();
        adam.step(&mut net, &grads, &cfg).unwrap();
        let after: Vec<Vec<f64>> = net.param_slices().iter().map(|s| s.to_vec()).collect();
        assert_eq!(before, after);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut net = tiny_net(2);
        let before = net.dense2.bias.clone();
        let mut grads = Gradients::zeros_for(&net);
        // Opposite gradients on two entries: with bias correction the first
        // step is -lr * g / (|g| + eps), essentially -lr * sign(g).
        grads.dense2_b[0] = 0.5;
        grads.dense2_b[1] = -0.5;
        let mut adam = AdamState::new_for(&net);
        let cfg = TrainConfig::defaults(0).adam();
        adam.step(&mut net, &grads, &cfg).unwrap();
        let d0 = net.dense2.bias[0] - before[0];
        let d1 = net.dense2.bias[1] - before[1];
        assert_abs_diff_eq!(d0, -1e-4, epsilon = 1e-7);
        assert_abs_diff_eq!(d1, 1e-4, epsilon = 1e-7);
        assert_eq!(d0, -d1, "odd symmetry: equal magnitude, opposite sign");
        // Step-1 magnitude never exceeds lr / (1 - beta1).
        assert!(d0.abs() <= 1e-4 / (1.0 - 0.9) + 1e-12);
        assert_eq!(net.dense2.bias[2], before[2], "untouched entry stays put");
    }

    #[test]
    fn adam_rejects_non_finite_gradients() {
        let mut net = tiny_net(3);
        let mut grads = Gradients::zeros_for(&net);
        grads.conv_w[1][7] = f64::NAN;
        let mut adam = AdamState::new_for(&net);
        let cfg = TrainConfig::defaults(0).adam();
        let err = adam.step(&mut net, &grads, &cfg).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("conv2.weights[7]"), "diagnostic was: {msg}");
    }

    #[test]
    fn cross_entropy_known_values() {
        let uniform = [0.2; 5];
        assert_abs_diff_eq!(cross_entropy(&uniform, 3), 5.0f64.ln(), epsilon = 1e-12);
        let certain = [0.0, 1.0, 0.0, 0.0, 0.0];
        assert_eq!(cross_entropy(&certain, 1), 0.0);
        let tiny = [1.0 - 1e-15, 1e-15, 0.0, 0.0, 0.0];
        // Clamped at 1e-12 regardless of how small the probability is.
        assert_abs_diff_eq!(cross_entropy(&tiny, 1), -(1e-12f64).ln(), epsilon = 1e-9);
        assert_abs_diff_eq!(cross_entropy(&tiny, 2), -(1e-12f64).ln(), epsilon = 1e-9);
    }

    #[test]
    fn split_is_stratified_disjoint_and_exhaustive() {
        let frames = toy_frames(10);
        let (train, test) = split_frames(&frames, 0.7, 9).unwrap();
        assert_eq!(train.frames.len(), 35);
        assert_eq!(test.frames.len(), 15);
        for counts in [train.class_counts(), test.class_counts()] {
            assert!(counts.iter().all(|&n| n == counts[0]), "{counts:?}");
        }
        // Disjoint and exhaustive: every input frame lands in exactly one
        // partition. Frames are unique here, so membership is testable.
        let mut seen: Vec<&Frame> = train.frames.iter().chain(&test.frames).collect();
        seen.sort_by_key(|f| f.start);
        let original: Vec<&Frame> = frames.frames.iter().collect();
        assert_eq!(seen, original);
    }

    #[test]
    fn split_floor_rule_on_seven_frames() {
        let mut frames = toy_frames(7);
        frames.frames.retain(|f| f.label == 0 || f.label == 1);
        let (train, test) = split_frames(&frames, 0.7, 1).unwrap();
        // floor(0.7 * 7) = 4 per class.
        assert_eq!(train.class_counts()[0], 4);
        assert_eq!(test.class_counts()[0], 3);
        assert_eq!(train.frames.len(), 8);
        assert_eq!(test.frames.len(), 6);
    }

    #[test]
    fn split_same_seed_is_identical_and_seeds_differ() {
        let frames = toy_frames(6);
        let a = split_frames(&frames, 0.7, 4).unwrap();
        let b = split_frames(&frames, 0.7, 4).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let c = split_frames(&frames, 0.7, 5).unwrap();
        assert_ne!(a.0, c.0, "different seeds should pick different members");
    }

    #[test]
    fn split_rejects_single_frame_class_and_bad_fraction() {
        let mut frames = toy_frames(3);
        frames
            .frames
            .retain(|f| f.label != 2 || f.start == 2 * 3 * 20);
        assert!(matches!(
            split_frames(&frames, 0.7, 0),
            Err(TrainError::ClassTooSmall { class: 2, count: 1 })
        ));
        let frames = toy_frames(3);
        assert!(split_frames(&frames, 1.0, 0).is_err());
        assert!(split_frames(&frames, 0.0, 0).is_err());
    }

    #[test]
    fn train_is_bit_deterministic_given_a_seed() {
        let frames = toy_frames(4);
        let mut cfg = TrainConfig::defaults(21);
        cfg.epochs = 3;
        let (net_a, rep_a) = train(&frames, 3, &cfg).unwrap();
        let (net_b, rep_b) = train(&frames, 3, &cfg).unwrap();
        assert_eq!(rep_a.curve, rep_b.curve);
        assert_eq!(rep_a.test_accuracy, rep_b.test_accuracy);
        assert_eq!(rep_a.test_f1_macro, rep_b.test_f1_macro);
        assert_eq!(rep_a.confusion.counts(), rep_b.confusion.counts());
        for (a, b) in net_a.param_slices().iter().zip(net_b.param_slices()) {
            assert_eq!(*a, b, "weights must match bit for bit");
        }
        assert_eq!(rep_a.curve.len(), cfg.epochs);
        for e in &rep_a.curve {
            assert!(e.train_loss.is_finite() && e.val_loss.is_finite());
        }
    }

    #[test]
    fn overfits_separable_toy_data() {
        let frames = toy_frames(8);
        let mut cfg = TrainConfig::defaults(3);
        cfg.learning_rate = 1e-3;
        cfg.epochs = 40;
        let (_, report) = train(&frames, 3, &cfg).unwrap();
        let last = report.curve.last().unwrap();
        assert!(
            last.train_accuracy >= 0.99,
            "train accuracy {} after {} epochs",
            last.train_accuracy,
            cfg.epochs
        );
    }

    #[test]
    fn default_rate_loss_descends_smoothly() {
        // Enough frames that per-epoch loss averages out dropout noise.
        let frames = toy_frames(40);
        let mut cfg = TrainConfig::defaults(7);
        cfg.epochs = 30;
        let (_, report) = train(&frames, 3, &cfg).unwrap();
        let losses: Vec<f64> = report.curve.iter().map(|e| e.train_loss).collect();
        assert!(
            losses.last().unwrap() < &losses[0],
            "no descent: {losses:?}"
        );
        // Smoothed over 5 epochs the training loss never increases while
        // the run is still descending.
        let smooth: Vec<f64> = losses
            .windows(5)
            .map(|w| w.iter().sum::<f64>() / 5.0)
            .collect();
        for pair in smooth.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-9,
                "smoothed loss rose: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn random_labels_score_near_chance() {
        let mut frames = toy_frames(40);
        // Deterministic label scramble decouples labels from patterns.
        for (i, f) in frames.frames.iter_mut().enumerate() {
            f.label = ((i * 7 + 3) % NUM_CLASSES) as ClassId;
        }
        let mut cfg = TrainConfig::defaults(5);
        cfg.epochs = 5;
        let (_, report) = train(&frames, 3, &cfg).unwrap();
        assert!(
            (report.test_accuracy - 0.2).abs() <= 0.1,
            "expected chance-level accuracy, got {}",
            report.test_accuracy
        );
    }

    #[test]
    fn train_rejects_degenerate_inputs() {
        let frames = toy_frames(4);
        let cfg = TrainConfig::defaults(0);
        assert!(matches!(
            train(&frames, 4, &cfg),
            Err(TrainError::BadConfig(_))
        ));
        let mut single = frames.clone();
        single.frames.iter_mut().for_each(|f| f.label = 2);
        assert!(matches!(
            train(&single, 3, &cfg),
            Err(TrainError::TooFewClasses(1))
        ));
        let empty = FrameSet {
            frames: Vec::new(),
            ..frames.clone()
        };
        assert!(matches!(
            train(&empty, 3, &cfg),
            Err(TrainError::EmptyFrameSet)
        ));
        let mut bad = TrainConfig::defaults(0);
        bad.epochs = 0;
        assert!(train(&frames, 3, &bad).is_err());
        let mut bad = TrainConfig::defaults(0);
        bad.train_fraction = 1.0;
        assert!(train(&frames, 3, &bad).is_err());
    }

    #[test]
    fn curve_csv_has_one_row_per_epoch() {
        let frames = toy_frames(3);
        let mut cfg = TrainConfig::defaults(2);
        cfg.epochs = 4;
        let (_, report) = train(&frames, 3, &cfg).unwrap();
        let csv = report.curve_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(
            lines[0],
            "epoch,train_loss,train_accuracy,val_loss,val_accuracy"
        );
        assert!(lines[1].starts_with("1,"));
        assert!(lines[4].starts_with("4,"));
    }
}
