//! Training configuration file (TOML, or JSON when the extension is `.json`).
//!
//! ```toml
//! epochs = 200
//! batch_size = 8
//! learning_rate = 0.001
//! seed = 0
//! checkpoint = "model.json"    # relative to this file
//! loss_curve = "loss.csv"      # optional, default: <checkpoint stem>.loss.csv
//!
//! [model]                      # optional, default: toy configuration
//! image_size = 32
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};

use capsule_core::trainer::TrainConfig;
use capsule_core::vit::ViTConfig;
use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    image_size: Option<usize>,
    patch_size: Option<usize>,
    channels: Option<usize>,
    hidden_dim: Option<usize>,
    num_layers: Option<usize>,
    num_heads: Option<usize>,
    mlp_dim: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFileRaw {
    epochs: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    epsilon: Option<f64>,
    seed: Option<u64>,
    checkpoint: PathBuf,
    loss_curve: Option<PathBuf>,
    model: Option<ModelSection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainFile {
    pub train: TrainConfig,
    pub model: ViTConfig,
    pub checkpoint_path: PathBuf,
    pub loss_curve_path: PathBuf,
}

pub fn read_train_config(path: impl AsRef<Path>) -> Result<TrainFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let raw: TrainFileRaw = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| Error::SchemaMismatch(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| Error::SchemaMismatch(format!("{}: {}", path.display(), e.message())))?
    };
    let d = TrainConfig::default();
    let train = TrainConfig {
        epochs: raw.epochs.unwrap_or(d.epochs),
        batch_size: raw.batch_size.unwrap_or(d.batch_size),
        learning_rate: raw.learning_rate.unwrap_or(d.learning_rate),
        beta1: raw.beta1.unwrap_or(d.beta1),
        beta2: raw.beta2.unwrap_or(d.beta2),
        epsilon: raw.epsilon.unwrap_or(d.epsilon),
        seed: raw.seed.unwrap_or(d.seed),
    };
    train.validate()?;
    let t = ViTConfig::toy();
    let model = match raw.model {
        None => t,
        Some(m) => ViTConfig {
            image_size: m.image_size.unwrap_or(t.image_size),
            patch_size: m.patch_size.unwrap_or(t.patch_size),
            channels: m.channels.unwrap_or(t.channels),
            hidden_dim: m.hidden_dim.unwrap_or(t.hidden_dim),
            num_layers: m.num_layers.unwrap_or(t.num_layers),
            num_heads: m.num_heads.unwrap_or(t.num_heads),
            mlp_dim: m.mlp_dim.unwrap_or(t.mlp_dim),
            num_classes: t.num_classes,
        },
    };
    model.validate()?;
    let base = path.parent().unwrap_or(Path::new(""));
    let checkpoint_path = base.join(&raw.checkpoint);
    let loss_curve_path = match raw.loss_curve {
        Some(p) => base.join(p),
        None => checkpoint_path.with_extension("loss.csv"),
    };
    Ok(TrainFile {
        train,
        model,
        checkpoint_path,
        loss_curve_path,
    })
}

/// `epoch,mean_loss` with 1-based epochs.
pub fn write_loss_curve(curve: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("epoch,mean_loss\n");
    for (i, l) in curve.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, l));
    }
    let mut f = std::fs::File::create(path).map_err(Error::io(path))?;
    f.write_all(out.as_bytes()).map_err(Error::io(path))
}
