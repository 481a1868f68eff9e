//! Compact convolutional classifier with exact reverse-mode gradients.
//!
//! The architecture is fixed in shape but parametric in input width and
//! kernel size: four conv blocks (same-padding conv, ReLU, inverted dropout,
//! 2x2 max pooling on the last two), channel-wise global max pooling, one
//! hidden dense layer with ReLU, and a softmax readout.
//!
//! All arithmetic runs in f64. Initial parameters are quantized through f32
//! so that a model saved to disk (f32 payload) and reloaded reproduces the
//! in-memory network bit for bit.

pub mod conv;
pub mod tensor;

pub use tensor::Tensor;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid network configuration: {0}")]
    BadSpec(String),
}

/// Shape-level description of the classifier. Everything needed to rebuild
/// the parameter layout lives here, so it doubles as the model file header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_channels: usize,
    pub input_height: usize,
    pub input_width: usize,
    pub kernel: usize,
    pub block_channels: [usize; 4],
    pub block_pool: [bool; 4],
    pub dense_units: usize,
    pub classes: usize,
    pub dropout: f64,
}

impl NetworkSpec {
    /// The configuration used throughout: 32-row frames, four blocks of
    /// 32/32/64/64 filters with pooling on the last two, 128 hidden units,
    /// five classes, dropout 0.1.
    pub fn standard(window_len: usize, kernel: usize) -> Self {
        NetworkSpec {
            input_channels: 1,
            input_height: 32,
            input_width: window_len,
            kernel,
            block_channels: [32, 32, 64, 64],
            block_pool: [false, false, true, true],
            dense_units: 128,
            classes: crate::NUM_CLASSES,
            dropout: 0.1,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.input_channels == 0 || self.input_height == 0 || self.input_width == 0 {
            return Err(NnError::BadSpec("input dimensions must be positive".into()));
        }
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(NnError::BadSpec(format!(
                "kernel size must be odd, got {}",
                self.kernel
            )));
        }
        if self.block_channels.iter().any(|&c| c == 0) {
            return Err(NnError::BadSpec("block channels must be positive".into()));
        }
        if self.dense_units == 0 {
            return Err(NnError::BadSpec("dense layer must have units".into()));
        }
        if self.classes < 2 {
            return Err(NnError::BadSpec("need at least two classes".into()));
        }
        if !self.dropout.is_finite() || !(0.0..1.0).contains(&self.dropout) {
            return Err(NnError::BadSpec(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        let (mut h, mut w) = (self.input_height, self.input_width);
        for (i, &pool) in self.block_pool.iter().enumerate() {
            if pool {
                if h < 2 || w < 2 {
                    return Err(NnError::BadSpec(format!(
                        "block {} pools a {}x{} map; both sides must be >= 2",
                        i + 1,
                        h,
                        w
                    )));
                }
                h /= 2;
                w /= 2;
            }
        }
        Ok(())
    }

    /// Output shape of each block as (channels, height, width).
    pub fn block_shapes(&self) -> [(usize, usize, usize); 4] {
        let (mut h, mut w) = (self.input_height, self.input_width);
        let mut shapes = [(0, 0, 0); 4];
        for i in 0..4 {
            if self.block_pool[i] {
                h /= 2;
                w /= 2;
            }
            shapes[i] = (self.block_channels[i], h, w);
        }
        shapes
    }
}

#[derive(Debug, Clone)]
pub struct ConvLayer {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    /// Row-major [out_ch][in_ch][kernel][kernel].
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major [out_dim][in_dim].
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Network {
    pub spec: NetworkSpec,
    pub conv: [ConvLayer; 4],
    pub dense1: DenseLayer,
    pub dense2: DenseLayer,
}

/// Everything the backward pass needs, captured during a forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    pub x0: Tensor,
    /// Pre-activation conv outputs, one per block.
    pub conv_out: Vec<Tensor>,
    /// Final block outputs (after ReLU, dropout, and optional pooling).
    pub block_out: Vec<Tensor>,
    /// Flat winner indices per pooled block; empty for unpooled blocks.
    pub pool_argmax: Vec<Vec<u32>>,
    /// Keep/drop flags per block output element; empty when dropout is off.
    pub masks: Vec<Vec<u8>>,
    pub feat: Vec<f64>,
    pub feat_argmax: Vec<u32>,
    pub hidden_pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Parameter gradients, laid out exactly like the network parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub conv_w: [Vec<f64>; 4],
    pub conv_b: [Vec<f64>; 4],
    pub dense1_w: Vec<f64>,
    pub dense1_b: Vec<f64>,
    pub dense2_w: Vec<f64>,
    pub dense2_b: Vec<f64>,
}

impl Gradients {
    pub fn zeros_for(net: &Network) -> Self {
        Gradients {
            conv_w: std::array::from_fn(|i| vec![0.0; net.conv[i].weights.len()]),
            conv_b: std::array::from_fn(|i| vec![0.0; net.conv[i].bias.len()]),
            dense1_w: vec![0.0; net.dense1.weights.len()],
            dense1_b: vec![0.0; net.dense1.bias.len()],
            dense2_w: vec![0.0; net.dense2.weights.len()],
            dense2_b: vec![0.0; net.dense2.bias.len()],
        }
    }

    /// Gradient slices in the canonical parameter order (matches
    /// [`Network::param_slices`]).
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = Vec::with_capacity(12);
        for i in 0..4 {
            v.push(&self.conv_w[i]);
            v.push(&self.conv_b[i]);
        }
        v.push(&self.dense1_w);
        v.push(&self.dense1_b);
        v.push(&self.dense2_w);
        v.push(&self.dense2_b);
        v
    }

    pub fn fill_zero(&mut self) {
        for i in 0..4 {
            self.conv_w[i].fill(0.0);
            self.conv_b[i].fill(0.0);
        }
        self.dense1_w.fill(0.0);
        self.dense1_b.fill(0.0);
        self.dense2_w.fill(0.0);
        self.dense2_b.fill(0.0);
    }

    pub fn scale(&mut self, s: f64) {
        for i in 0..4 {
            for g in self.conv_w[i].iter_mut() {
                *g *= s;
            }
            for g in self.conv_b[i].iter_mut() {
                *g *= s;
            }
        }
        for g in self
            .dense1_w
            .iter_mut()
            .chain(self.dense1_b.iter_mut())
            .chain(self.dense2_w.iter_mut())
            .chain(self.dense2_b.iter_mut())
        {
            *g *= s;
        }
    }
}

enum DropoutMode<'a> {
    /// Evaluation: dropout disabled.
    Identity,
    /// Training: sample fresh keep/drop masks from this seed.
    Sample(u64),
    /// Replay previously sampled masks (used by gradient checks).
    Frozen(&'a [Vec<u8>]),
}

impl Network {
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self, NnError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Uniform +-sqrt(6 / fan_in), quantized through f32 so the model
        // file round-trips exactly.
        let mut draw = |n: usize, fan_in: usize| -> Vec<f64> {
            let bound = (6.0 / fan_in as f64).sqrt();
            (0..n)
                .map(|_| rng.gen_range(-bound..bound) as f32 as f64)
                .collect()
        };
        let k = spec.kernel;
        let mut conv = Vec::with_capacity(4);
        let mut in_ch = spec.input_channels;
        for &out_ch in &spec.block_channels {
            let fan_in = in_ch * k * k;
            conv.push(ConvLayer {
                in_ch,
                out_ch,
                kernel: k,
                weights: draw(out_ch * in_ch * k * k, fan_in),
                bias: vec![0.0; out_ch],
            });
            in_ch = out_ch;
        }
        let feat_dim = spec.block_channels[3];
        let dense1 = DenseLayer {
            in_dim: feat_dim,
            out_dim: spec.dense_units,
            weights: draw(spec.dense_units * feat_dim, feat_dim),
            bias: vec![0.0; spec.dense_units],
        };
        let dense2 = DenseLayer {
            in_dim: spec.dense_units,
            out_dim: spec.classes,
            weights: draw(spec.classes * spec.dense_units, spec.dense_units),
            bias: vec![0.0; spec.classes],
        };
        let conv: [ConvLayer; 4] = conv.try_into().expect("four blocks");
        Ok(Network {
            spec,
            conv,
            dense1,
            dense2,
        })
    }

    /// Parameter slices in canonical order: conv1 w, conv1 b, ..., conv4 b,
    /// dense1 w, dense1 b, dense2 w, dense2 b. The model file and the
    /// optimizer both follow this order.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = Vec::with_capacity(12);
        for layer in &self.conv {
            v.push(&layer.weights);
            v.push(&layer.bias);
        }
        v.push(&self.dense1.weights);
        v.push(&self.dense1.bias);
        v.push(&self.dense2.weights);
        v.push(&self.dense2.bias);
        v
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::with_capacity(12);
        for layer in self.conv.iter_mut() {
            v.push(&mut layer.weights);
            v.push(&mut layer.bias);
        }
        v.push(&mut self.dense1.weights);
        v.push(&mut self.dense1.bias);
        v.push(&mut self.dense2.weights);
        v.push(&mut self.dense2.bias);
        v
    }

    pub fn num_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    /// Forward pass with dropout disabled (inference / validation).
    pub fn forward_eval(&self, x: &Tensor) -> Tape {
        self.forward_impl(x, DropoutMode::Identity)
    }

    /// Forward pass sampling dropout masks from `mask_seed`.
    pub fn forward_train(&self, x: &Tensor, mask_seed: u64) -> Tape {
        self.forward_impl(x, DropoutMode::Sample(mask_seed))
    }

    /// Forward pass replaying the dropout masks of an earlier tape.
    pub fn forward_masked(&self, x: &Tensor, masks: &[Vec<u8>]) -> Tape {
        self.forward_impl(x, DropoutMode::Frozen(masks))
    }

    pub fn predict(&self, x: &Tensor) -> (usize, Vec<f64>) {
        let tape = self.forward_eval(x);
        let mut best = 0;
        for (i, &p) in tape.probs.iter().enumerate() {
            if p > tape.probs[best] {
                best = i;
            }
        }
        (best, tape.probs)
    }

    fn forward_impl(&self, x: &Tensor, mode: DropoutMode) -> Tape {
        assert_eq!(x.channels, self.spec.input_channels, "input channels");
        assert_eq!(x.height, self.spec.input_height, "input height");
        assert_eq!(x.width, self.spec.input_width, "input width");
        let p = self.spec.dropout;
        let scale = 1.0 / (1.0 - p);
        let mut rng = match mode {
            DropoutMode::Sample(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };

        let mut conv_out: Vec<Tensor> = Vec::with_capacity(4);
        let mut block_out: Vec<Tensor> = Vec::with_capacity(4);
        let mut pool_argmax: Vec<Vec<u32>> = Vec::with_capacity(4);
        let mut masks: Vec<Vec<u8>> = Vec::with_capacity(4);

        for i in 0..4 {
            let src = if i == 0 { x } else { &block_out[i - 1] };
            let mut out = Tensor::zeros(self.conv[i].out_ch, src.height, src.width);
            conv::conv_forward(src, &self.conv[i], &mut out);
            conv_out.push(out.clone());

            let mask: Vec<u8> = match &mode {
                DropoutMode::Identity => Vec::new(),
                DropoutMode::Sample(_) => {
                    let r = rng.as_mut().expect("sampling rng");
                    (0..out.data.len())
                        .map(|_| u8::from(r.gen::<f64>() >= p))
                        .collect()
                }
                DropoutMode::Frozen(m) => m[i].clone(),
            };
            if mask.is_empty() {
                for v in out.data.iter_mut() {
                    *v = v.max(0.0);
                }
            } else {
                assert_eq!(mask.len(), out.data.len(), "dropout mask length");
                for (v, &keep) in out.data.iter_mut().zip(&mask) {
                    *v = if keep == 1 { v.max(0.0) * scale } else { 0.0 };
                }
            }
            masks.push(mask);

            if self.spec.block_pool[i] {
                let mut pooled = Tensor::zeros(out.channels, out.height / 2, out.width / 2);
                let mut arg = Vec::new();
                conv::maxpool2(&out, &mut pooled, &mut arg);
                pool_argmax.push(arg);
                block_out.push(pooled);
            } else {
                pool_argmax.push(Vec::new());
                block_out.push(out);
            }
        }

        let (feat, feat_argmax) = conv::global_max(&block_out[3]);
        let mut hidden_pre = vec![0.0; self.dense1.out_dim];
        conv::dense_forward(&feat, &self.dense1, &mut hidden_pre);
        let hidden: Vec<f64> = hidden_pre.iter().map(|&v| v.max(0.0)).collect();
        let mut logits = vec![0.0; self.dense2.out_dim];
        conv::dense_forward(&hidden, &self.dense2, &mut logits);
        let probs = conv::softmax(&logits);

        Tape {
            x0: x.clone(),
            conv_out,
            block_out,
            pool_argmax,
            masks,
            feat,
            feat_argmax,
            hidden_pre,
            hidden,
            logits,
            probs,
        }
    }

    /// Accumulate the cross-entropy gradient for one frame into `grads`.
    /// The loss is -ln p\[target\]; combined with softmax the logit
    /// gradient is probs minus the one-hot target.
    pub fn backward(&self, tape: &Tape, target: usize, grads: &mut Gradients) {
        assert!(target < self.spec.classes, "target class in range");
        let scale = 1.0 / (1.0 - self.spec.dropout);

        let mut dlogits = tape.probs.clone();
        dlogits[target] -= 1.0;

        let mut dhidden = vec![0.0; self.dense1.out_dim];
        conv::dense_backward(
            &tape.hidden,
            &dlogits,
            &self.dense2,
            &mut grads.dense2_w,
            &mut grads.dense2_b,
            &mut dhidden,
        );
        for (g, &pre) in dhidden.iter_mut().zip(&tape.hidden_pre) {
            if pre <= 0.0 {
                *g = 0.0;
            }
        }
        let mut dfeat = vec![0.0; self.dense1.in_dim];
        conv::dense_backward(
            &tape.feat,
            &dhidden,
            &self.dense1,
            &mut grads.dense1_w,
            &mut grads.dense1_b,
            &mut dfeat,
        );

        // Route feature gradients back to the winning spatial positions.
        let last = &tape.block_out[3];
        let hw = last.spatial();
        let mut dblock = Tensor::zeros(last.channels, last.height, last.width);
        for (c, (&g, &a)) in dfeat.iter().zip(&tape.feat_argmax).enumerate() {
            dblock.data[c * hw + a as usize] += g;
        }

        for i in (0..4).rev() {
            let mut dact = if self.spec.block_pool[i] {
                let pre = &tape.conv_out[i];
                let mut d = Tensor::zeros(pre.channels, pre.height, pre.width);
                conv::maxpool2_backward(&dblock, &tape.pool_argmax[i], &mut d);
                d
            } else {
                dblock
            };
            let mask = &tape.masks[i];
            if !mask.is_empty() {
                for (g, &keep) in dact.data.iter_mut().zip(mask) {
                    *g = if keep == 1 { *g * scale } else { 0.0 };
                }
            }
            for (g, &pre) in dact.data.iter_mut().zip(&tape.conv_out[i].data) {
                if pre <= 0.0 {
                    *g = 0.0;
                }
            }
            let src = if i == 0 {
                &tape.x0
            } else {
                &tape.block_out[i - 1]
            };
            let (dw, db) = (&mut grads.conv_w[i], &mut grads.conv_b[i]);
            conv::conv_backward_params(src, &dact, &self.conv[i], dw, db);
            if i > 0 {
                let mut dx = Tensor::zeros(src.channels, src.height, src.width);
                conv::conv_backward_input(&dact, &self.conv[i], &mut dx);
                dblock = dx;
            } else {
                dblock = dact; // keep the loop variable alive; unused
            }
        }
        let _ = dblock;
    }
}

/// Build the standard classifier for a given frame width and kernel size.
/// Kernel sizes other than 3, 5, or 7 are rejected.
pub fn build_network(window_len: usize, kernel: usize, seed: u64) -> Result<Network, NnError> {
    if ![3, 5, 7].contains(&kernel) {
        return Err(NnError::BadSpec(format!(
            "kernel size must be 3, 5, or 7, got {}",
            kernel
        )));
    }
    Network::init(NetworkSpec::standard(window_len, kernel), seed)
}
