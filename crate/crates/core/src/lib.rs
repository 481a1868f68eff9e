//! End-to-end toolkit for gesture classification from multi-channel surface
//! EMG: synthetic signal generation, IIR preprocessing, sliding-window
//! segmentation into 2D frames, a small from-scratch CNN with exact
//! reverse-mode gradients, Adam training, evaluation metrics, and a
//! window/overlap/kernel sweep harness.
//!
//! The pipeline stages are plain functions over plain data; every stage is
//! deterministic given its seed, so whole experiment grids reproduce
//! byte-for-byte.

pub mod dataio;
pub mod dsp;
pub mod eval;
pub mod nn;
pub mod seedmix;
pub mod sweep;
pub mod synthgen;
pub mod training;
pub mod windowing;

/// Class ids are fixed throughout: 0 NM (no motion), 1 WS (wrist supination),
/// 2 WP (wrist pronation), 3 HO (hand open), 4 HC (hand close).
pub const NUM_CLASSES: usize = 5;

/// Class names in id order.
pub const CLASS_NAMES: [&str; NUM_CLASSES] = ["NM", "WS", "WP", "HO", "HC"];

/// Label type used everywhere; valid values are `0..NUM_CLASSES`.
pub type ClassId = u8;
