use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::taxonomy::NUM_LABELS;

/// Standard deviation of the Gaussian weight initialization.
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ViTConfig {
    pub image_size: usize,
    pub patch_size: usize,
    pub channels: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub mlp_dim: usize,
    pub num_classes: usize,
}

impl Default for ViTConfig {
    fn default() -> Self {
        ViTConfig::toy()
    }
}

impl ViTConfig {
    /// Desk-scale configuration used for training in tests and the CLI.
    pub const fn toy() -> Self {
        ViTConfig {
            image_size: 32,
            patch_size: 8,
            channels: 3,
            hidden_dim: 32,
            num_layers: 2,
            num_heads: 4,
            mlp_dim: 64,
            num_classes: NUM_LABELS,
        }
    }

    /// ViT-Base/16 at 224×224: 196 patches plus the class token.
    pub const fn base_16() -> Self {
        ViTConfig {
            image_size: 224,
            patch_size: 16,
            channels: 3,
            hidden_dim: 768,
            num_layers: 12,
            num_heads: 12,
            mlp_dim: 3072,
            num_classes: NUM_LABELS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.patch_size == 0 || self.image_size == 0 || !self.image_size.is_multiple_of(self.patch_size) {
            return fail(format!(
                "image_size {} must be a positive multiple of patch_size {}",
                self.image_size, self.patch_size
            ));
        }
        if self.num_heads == 0 || self.hidden_dim == 0 || !self.hidden_dim.is_multiple_of(self.num_heads) {
            return fail(format!(
                "hidden_dim {} must be a positive multiple of num_heads {}",
                self.hidden_dim, self.num_heads
            ));
        }
        if self.channels == 0 || self.mlp_dim == 0 {
            return fail("channels and mlp_dim must be positive".into());
        }
        if self.num_classes != NUM_LABELS {
            return fail(format!("num_classes must be {NUM_LABELS}, got {}", self.num_classes));
        }
        Ok(())
    }

    pub const fn grid(&self) -> usize {
        self.image_size / self.patch_size
    }

    pub const fn num_patches(&self) -> usize {
        self.grid() * self.grid()
    }

    /// Patch tokens plus the class token.
    pub const fn num_tokens(&self) -> usize {
        self.num_patches() + 1
    }

    pub const fn patch_dim(&self) -> usize {
        self.channels * self.patch_size * self.patch_size
    }

    pub const fn head_dim(&self) -> usize {
        self.hidden_dim / self.num_heads
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub ln1_gain: Tensor,
    pub ln1_bias: Tensor,
    pub q_weight: Tensor,
    pub q_bias: Tensor,
    /// Keys carry no bias: a per-key offset shifts every attention logit of a
    /// query by the same amount and cancels in the softmax.
    pub k_weight: Tensor,
    pub v_weight: Tensor,
    pub v_bias: Tensor,
    pub out_weight: Tensor,
    pub out_bias: Tensor,
    pub ln2_gain: Tensor,
    pub ln2_bias: Tensor,
    pub fc1_weight: Tensor,
    pub fc1_bias: Tensor,
    pub fc2_weight: Tensor,
    pub fc2_bias: Tensor,
}

impl LayerParams {
    fn filled(cfg: &ViTConfig, value: f64) -> Self {
        let d = cfg.hidden_dim;
        let m = cfg.mlp_dim;
        let t = |shape: &[usize]| Tensor::filled(shape, value);
        LayerParams {
            ln1_gain: t(&[d]),
            ln1_bias: t(&[d]),
            q_weight: t(&[d, d]),
            q_bias: t(&[d]),
            k_weight: t(&[d, d]),
            v_weight: t(&[d, d]),
            v_bias: t(&[d]),
            out_weight: t(&[d, d]),
            out_bias: t(&[d]),
            ln2_gain: t(&[d]),
            ln2_bias: t(&[d]),
            fc1_weight: t(&[d, m]),
            fc1_bias: t(&[m]),
            fc2_weight: t(&[m, d]),
            fc2_bias: t(&[d]),
        }
    }

    fn tensors(&self) -> [(&'static str, &Tensor); 15] {
        [
            ("ln1.gain", &self.ln1_gain),
            ("ln1.bias", &self.ln1_bias),
            ("attn.q.weight", &self.q_weight),
            ("attn.q.bias", &self.q_bias),
            ("attn.k.weight", &self.k_weight),
            ("attn.v.weight", &self.v_weight),
            ("attn.v.bias", &self.v_bias),
            ("attn.out.weight", &self.out_weight),
            ("attn.out.bias", &self.out_bias),
            ("ln2.gain", &self.ln2_gain),
            ("ln2.bias", &self.ln2_bias),
            ("mlp.fc1.weight", &self.fc1_weight),
            ("mlp.fc1.bias", &self.fc1_bias),
            ("mlp.fc2.weight", &self.fc2_weight),
            ("mlp.fc2.bias", &self.fc2_bias),
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Tensor; 15] {
        [
            &mut self.ln1_gain,
            &mut self.ln1_bias,
            &mut self.q_weight,
            &mut self.q_bias,
            &mut self.k_weight,
            &mut self.v_weight,
            &mut self.v_bias,
            &mut self.out_weight,
            &mut self.out_bias,
            &mut self.ln2_gain,
            &mut self.ln2_bias,
            &mut self.fc1_weight,
            &mut self.fc1_bias,
            &mut self.fc2_weight,
            &mut self.fc2_bias,
        ]
    }
}

/// All trainable tensors. Weight matrices are stored `[in, out]` and applied
/// as `x · W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ViTConfig,
    pub patch_weight: Tensor,
    pub patch_bias: Tensor,
    pub class_token: Tensor,
    pub pos_embed: Tensor,
    pub layers: Vec<LayerParams>,
    pub final_ln_gain: Tensor,
    pub final_ln_bias: Tensor,
    pub head_weight: Tensor,
    pub head_bias: Tensor,
}

impl ModelParams {
    /// Every tensor set to `value`; gradients start from `filled(cfg, 0.0)`.
    pub fn filled(cfg: &ViTConfig, value: f64) -> Self {
        let d = cfg.hidden_dim;
        let t = |shape: &[usize]| Tensor::filled(shape, value);
        ModelParams {
            config: *cfg,
            patch_weight: t(&[cfg.patch_dim(), d]),
            patch_bias: t(&[d]),
            class_token: t(&[d]),
            pos_embed: t(&[cfg.num_tokens(), d]),
            layers: (0..cfg.num_layers).map(|_| LayerParams::filled(cfg, value)).collect(),
            final_ln_gain: t(&[d]),
            final_ln_bias: t(&[d]),
            head_weight: t(&[d, cfg.num_classes]),
            head_bias: t(&[cfg.num_classes]),
        }
    }

    /// Seeded initialization: weight matrices and positional embeddings from
    /// N(0, 0.02²), layernorm gains 1, biases and class token 0. Tensors are
    /// filled in [`ModelParams::tensors`] order from one generator stream.
    pub fn init(cfg: &ViTConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut p = ModelParams::filled(cfg, 0.0);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut rng = rng::stream_rng(seed, Stream::Init);
        let names: Vec<String> = p.tensors().into_iter().map(|(n, _)| n).collect();
        for (name, t) in names.iter().zip(p.tensors_mut()) {
            if name.ends_with("weight") || name == "pos_embed" {
                for x in t.data_mut() {
                    *x = normal.sample(&mut rng);
                }
            } else if name.ends_with("gain") {
                t.data_mut().fill(1.0);
            }
        }
        Ok(p)
    }

    /// Named tensors in a fixed order, e.g. `layers.0.attn.q.weight`.
    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = alloc::vec![
            ("patch.weight".into(), &self.patch_weight),
            ("patch.bias".into(), &self.patch_bias),
            ("class_token".into(), &self.class_token),
            ("pos_embed".into(), &self.pos_embed),
        ];
        for (i, layer) in self.layers.iter().enumerate() {
            for (name, t) in layer.tensors() {
                out.push((format!("layers.{i}.{name}"), t));
            }
        }
        out.push(("final_ln.gain".into(), &self.final_ln_gain));
        out.push(("final_ln.bias".into(), &self.final_ln_bias));
        out.push(("head.weight".into(), &self.head_weight));
        out.push(("head.bias".into(), &self.head_bias));
        out
    }

    /// Same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = alloc::vec![
            &mut self.patch_weight,
            &mut self.patch_bias,
            &mut self.class_token,
            &mut self.pos_embed,
        ];
        for layer in &mut self.layers {
            out.extend(layer.tensors_mut());
        }
        out.push(&mut self.final_ln_gain);
        out.push(&mut self.final_ln_bias);
        out.push(&mut self.head_weight);
        out.push(&mut self.head_bias);
        out
    }

    /// Rebuilds parameters from named tensors, e.g. a loaded checkpoint.
    /// Names, order and shapes must match `ModelParams::filled(cfg, _)`.
    pub fn from_named(cfg: &ViTConfig, tensors: Vec<(String, Tensor)>) -> Result<Self> {
        cfg.validate()?;
        let mut p = ModelParams::filled(cfg, 0.0);
        let expected: Vec<(String, Vec<usize>)> = p
            .tensors()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        if expected.len() != tensors.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} tensors, got {}",
                expected.len(),
                tensors.len()
            )));
        }
        for ((want_name, want_shape), (slot, (name, t))) in
            expected.iter().zip(p.tensors_mut().into_iter().zip(tensors))
        {
            if *want_name != name {
                return Err(Error::ShapeMismatch(format!(
                    "expected tensor {want_name}, got {name}"
                )));
            }
            t.expect_shape(&name, want_shape)?;
            if !t.is_finite() {
                return Err(Error::NonFinite(name));
            }
            *slot = t;
        }
        Ok(p)
    }

    pub fn num_values(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.is_finite())
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        let src: Vec<&Tensor> = other.tensors().into_iter().map(|(_, t)| t).collect();
        for (dst, src) in self.tensors_mut().into_iter().zip(src) {
            for (a, b) in dst.data_mut().iter_mut().zip(src.data()) {
                *a += scale * b;
            }
        }
    }
}
