//! Model checkpoint: versioned JSON with the architecture and every named
//! tensor. Floats are written in shortest round-trip form, so a
//! load/save cycle reproduces the file byte for byte.

use std::path::Path;

use capsule_core::vit::{ModelParams, Tensor, ViTConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::{read_json, write_json};

pub const CHECKPOINT_FORMAT: &str = "capsule-vit-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfigJson {
    pub image_size: usize,
    pub patch_size: usize,
    pub channels: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub mlp_dim: usize,
    pub num_classes: usize,
}

impl From<ViTConfig> for ModelConfigJson {
    fn from(c: ViTConfig) -> Self {
        ModelConfigJson {
            image_size: c.image_size,
            patch_size: c.patch_size,
            channels: c.channels,
            hidden_dim: c.hidden_dim,
            num_layers: c.num_layers,
            num_heads: c.num_heads,
            mlp_dim: c.mlp_dim,
            num_classes: c.num_classes,
        }
    }
}

impl From<ModelConfigJson> for ViTConfig {
    fn from(c: ModelConfigJson) -> Self {
        ViTConfig {
            image_size: c.image_size,
            patch_size: c.patch_size,
            channels: c.channels,
            hidden_dim: c.hidden_dim,
            num_layers: c.num_layers,
            num_heads: c.num_heads,
            mlp_dim: c.mlp_dim,
            num_classes: c.num_classes,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorJson {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointJson {
    format: String,
    version: u32,
    config: ModelConfigJson,
    tensors: Vec<TensorJson>,
}

pub fn save_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let json = CheckpointJson {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        config: params.config.into(),
        tensors: params
            .tensors()
            .into_iter()
            .map(|(name, t)| TensorJson {
                name,
                shape: t.shape().to_vec(),
                data: t.data().to_vec(),
            })
            .collect(),
    };
    write_json(&json, path.as_ref())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    let json: CheckpointJson = read_json(path.as_ref())?;
    if json.format != CHECKPOINT_FORMAT || json.version != CHECKPOINT_VERSION {
        return Err(Error::SchemaMismatch(format!(
            "expected {CHECKPOINT_FORMAT} version {CHECKPOINT_VERSION}, got {} version {}",
            json.format, json.version
        )));
    }
    let cfg: ViTConfig = json.config.into();
    let tensors = json
        .tensors
        .into_iter()
        .map(|t| Ok((t.name, Tensor::from_vec(&t.shape, t.data)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelParams::from_named(&cfg, tensors)?)
}
