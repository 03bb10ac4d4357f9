//! A small Vision Transformer for 17-way multi-label classification.
//!
//! Patch embedding, pre-layernorm encoder blocks (multi-head self-attention
//! and a GELU MLP, each with a residual connection), a final layernorm on the
//! class token and a linear head followed by independent sigmoids. The
//! backward pass is written out by hand in 64-bit floats so it can be checked
//! against finite differences.

mod loss;
mod model;
mod ops;
mod params;
mod tensor;

pub use loss::{bce_logit_grad, bce_loss};
pub use model::{
    accumulate_gradients, attention, attention_probs, backward, forward, layer_norm, patch_embed, Gradients,
    LAYER_NORM_EPS,
};
pub use params::{LayerParams, ModelParams, ViTConfig, INIT_STD};
pub use tensor::Tensor;
