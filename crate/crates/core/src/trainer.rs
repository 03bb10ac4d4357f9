//! Adam training of the toy ViT on manifest frames, and prediction.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::manifest::{FrameRecord, Manifest};
use crate::metrics::{PredictionRow, PredictionSet};
use crate::rng::{self, Stream};
use crate::synth::FrameSource;
use crate::taxonomy::LabelSet;
use crate::vit::{self, Gradients, ModelParams, Tensor, ViTConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seeds parameter initialization and the per-epoch shuffles.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 8,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::InvalidConfig("epochs and batch_size must be at least 1".into()));
        }
        // lr = 0 is accepted: it freezes the parameters.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        let unit = |x: f64| (0.0..1.0).contains(&x);
        if !unit(self.beta1) || !unit(self.beta2) || self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::InvalidConfig("betas must be in [0, 1) and epsilon positive".into()));
        }
        Ok(())
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: TrainConfig,
    first: ModelParams,
    second: ModelParams,
    step: i32,
}

impl Adam {
    pub fn new(params: &ModelParams, cfg: TrainConfig) -> Self {
        Adam {
            cfg,
            first: ModelParams::filled(&params.config, 0.0),
            second: ModelParams::filled(&params.config, 0.0),
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut ModelParams, grads: &Gradients) {
        self.step += 1;
        let TrainConfig { learning_rate: lr, beta1: b1, beta2: b2, epsilon: eps, .. } = self.cfg;
        let c1 = 1.0 - libm::pow(b1, f64::from(self.step));
        let c2 = 1.0 - libm::pow(b2, f64::from(self.step));
        let g: Vec<&Tensor> = grads.tensors().into_iter().map(|(_, t)| t).collect();
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(self.first.tensors_mut())
            .zip(self.second.tensors_mut())
            .zip(g);
        for (((p, m), v), g) in tensors {
            let (p, m, v) = (p.data_mut(), m.data_mut(), v.data_mut());
            for i in 0..p.len() {
                let gi = g.data()[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= lr * mhat / (libm::sqrt(vhat) + eps);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Mean per-example training loss of each epoch.
    pub loss_curve: Vec<f64>,
}

fn resolve<'a>(manifest: &'a Manifest, ids: &[String]) -> Result<Vec<&'a FrameRecord>> {
    ids.iter()
        .map(|id| {
            manifest
                .get(id)
                .ok_or_else(|| Error::Consistency(format!("train frame {id:?} is not in the manifest")))
        })
        .collect()
}

/// Trains from a fresh seeded initialization on `train_ids`.
pub fn train<S: FrameSource + ?Sized>(
    manifest: &Manifest,
    train_ids: &[String],
    source: &S,
    model: &ViTConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let params = ModelParams::init(model, cfg.seed)?;
    train_from(params, manifest, train_ids, source, cfg)
}

/// Trains starting from `params`. Each epoch shuffles the examples with the
/// epoch stream of `cfg.seed`, averages gradients over each batch in example
/// order and takes one Adam step per batch.
pub fn train_from<S: FrameSource + ?Sized>(
    mut params: ModelParams,
    manifest: &Manifest,
    train_ids: &[String],
    source: &S,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let frames = resolve(manifest, train_ids)?;
    if frames.is_empty() {
        return Err(Error::InvalidConfig("no training frames".into()));
    }
    let examples: Vec<(Tensor, LabelSet)> = frames
        .iter()
        .map(|f| Ok((source.image(f)?, f.labels)))
        .collect::<Result<_>>()?;

    let mut adam = Adam::new(&params, *cfg);
    let mut rng = rng::stream_rng(cfg.seed, Stream::Epochs);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut loss_curve = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        rng::shuffle(&mut order, &mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut sum = ModelParams::filled(&params.config, 0.0);
            for &i in batch {
                let (image, labels) = &examples[i];
                epoch_loss += vit::accumulate_gradients(image, *labels, &params, &mut sum)?;
            }
            let mut mean = ModelParams::filled(&params.config, 0.0);
            mean.add_scaled(&sum, 1.0 / batch.len() as f64);
            adam.update(&mut params, &mean);
        }
        if !params.is_finite() {
            return Err(Error::NonFinite("parameters after update".into()));
        }
        loss_curve.push(epoch_loss / examples.len() as f64);
    }
    Ok(TrainOutcome { params, loss_curve })
}

/// Scores every frame, one row per record in the given order.
pub fn predict<'a, S, I>(params: &ModelParams, frames: I, source: &S) -> Result<PredictionSet>
where
    S: FrameSource + ?Sized,
    I: IntoIterator<Item = &'a FrameRecord>,
{
    let rows = frames
        .into_iter()
        .map(|f| {
            Ok(PredictionRow {
                frame_id: f.frame_id.clone(),
                video_id: f.video_id.clone(),
                scores: vit::forward(&source.image(f)?, params)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(PredictionSet { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_manifest, SyntheticImages};

    fn small() -> (Manifest, Vec<String>) {
        let m = synth_manifest(8, 3);
        let ids = m.records().iter().map(|r| r.frame_id.clone()).collect();
        (m, ids)
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let (m, ids) = small();
        let model = ViTConfig::toy();
        let cfg = TrainConfig { epochs: 3, learning_rate: 0.0, ..TrainConfig::default() };
        let out = train(&m, &ids, &SyntheticImages::new(&model), &model, &cfg).unwrap();
        assert_eq!(out.params, ModelParams::init(&model, cfg.seed).unwrap());
        assert!(out.loss_curve.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12));
    }

    #[test]
    fn same_seed_same_curve() {
        let (m, ids) = small();
        let model = ViTConfig::toy();
        let cfg = TrainConfig { epochs: 2, batch_size: 3, ..TrainConfig::default() };
        let src = SyntheticImages::new(&model);
        let a = train(&m, &ids, &src, &model, &cfg).unwrap();
        let b = train(&m, &ids, &src, &model, &cfg).unwrap();
        assert_eq!(a.loss_curve, b.loss_curve);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn untrained_zero_model_scores_half() {
        let (m, _) = small();
        let model = ViTConfig::toy();
        let params = ModelParams::filled(&model, 0.0);
        let preds = predict(&params, m.records(), &SyntheticImages::new(&model)).unwrap();
        assert_eq!(preds.rows.len(), 8);
        assert!(preds.rows.iter().all(|r| r.scores.iter().all(|&s| s == 0.5)));
        let report = crate::metrics::evaluate(&preds, &m, &[0.95]).unwrap();
        assert_eq!(report.overall, alloc::vec![0.0]);
    }

    #[test]
    fn empty_prediction_list() {
        let model = ViTConfig::toy();
        let params = ModelParams::filled(&model, 0.0);
        let preds = predict(&params, core::iter::empty(), &SyntheticImages::new(&model)).unwrap();
        assert!(preds.rows.is_empty());
    }

    #[test]
    fn rejects_bad_configs_and_frames() {
        let (m, ids) = small();
        let model = ViTConfig::toy();
        let src = SyntheticImages::new(&model);
        let bad = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert!(train(&m, &ids, &src, &model, &bad).is_err());
        let bad = TrainConfig { learning_rate: -1.0, ..TrainConfig::default() };
        assert!(train(&m, &ids, &src, &model, &bad).is_err());
        assert!(train(&m, &["ghost".into()], &src, &model, &TrainConfig::default()).is_err());
    }
}
