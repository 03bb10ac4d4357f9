//! Synthetic manifests and label-keyed images, so the whole pipeline runs
//! without real video data.

use alloc::format;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::error::Result;
use crate::manifest::{FrameRecord, Manifest};
use crate::rng::{self, Stream};
use crate::taxonomy::{LabelId, LabelSet, NUM_LABELS};
use crate::vit::{Tensor, ViTConfig};

/// Frames per label in the reference competition data, in label order.
pub const REFERENCE_LABEL_COUNTS: [u64; NUM_LABELS] = [
    2_009, 2_256, 254_994, 1_375_918, 1_878_361, 122, 3_183, 3_692, 5_325, 16_803, 391_715,
    39_105, 6_228, 31_773, 17_660, 18_415, 11_428,
];

/// Frames carrying exactly 1, 2, 3, 4 and 5 labels in the reference data.
pub const REFERENCE_CARDINALITY_COUNTS: [u64; 5] = [2_994_127, 495_142, 22_501, 1_767, 1];

pub const FRAMES_PER_VIDEO: usize = 64;

fn draw_weighted<R: RngCore>(rng: &mut R, weights: &[u64]) -> usize {
    let total: u64 = weights.iter().sum();
    let mut x = rng::uniform_below(rng, total);
    for (i, &w) in weights.iter().enumerate() {
        if x < w {
            return i;
        }
        x -= w;
    }
    unreachable!("draw below total weight")
}

/// A label set with heavy skew: cardinality drawn from `cardinality`
/// weights, labels drawn without replacement in proportion to `label` weights.
pub fn draw_labels<R: RngCore>(rng: &mut R, label: &[u64; NUM_LABELS], cardinality: &[u64]) -> LabelSet {
    let k = draw_weighted(rng, cardinality) + 1;
    let mut weights = *label;
    let mut set = LabelSet::EMPTY;
    for _ in 0..k.min(weights.iter().filter(|&&w| w > 0).count()) {
        let c = draw_weighted(rng, &weights);
        weights[c] = 0;
        set.insert(LabelId::new(c).expect("index below 17"));
    }
    set
}

/// `frames` records in videos of [`FRAMES_PER_VIDEO`], ids `vid_VVV_fNNNNNN`.
pub fn synth_manifest(frames: usize, seed: u64) -> Manifest {
    synth_manifest_with(frames, seed, &REFERENCE_LABEL_COUNTS, &REFERENCE_CARDINALITY_COUNTS)
}

pub fn synth_manifest_with(
    frames: usize,
    seed: u64,
    label_weights: &[u64; NUM_LABELS],
    cardinality_weights: &[u64],
) -> Manifest {
    let mut rng = rng::stream_rng(seed, Stream::Synth);
    let records = (0..frames).map(|i| {
        let (video, index) = (i / FRAMES_PER_VIDEO, i % FRAMES_PER_VIDEO);
        FrameRecord {
            frame_id: format!("vid_{video:03}_f{index:06}"),
            video_id: format!("vid_{video:03}"),
            frame_index: index as u64,
            labels: draw_labels(&mut rng, label_weights, cardinality_weights),
        }
    });
    Manifest::from_records(records).expect("generated ids are unique and label sets non-empty")
}

/// Source of model inputs for manifest frames.
pub trait FrameSource {
    fn image(&self, frame: &FrameRecord) -> Result<Tensor>;
}

/// Images built from the frame's labels: each label adds a fixed ±1 pixel
/// pattern keyed by its index, and the frame id seeds additive uniform noise.
#[derive(Debug, Clone)]
pub struct SyntheticImages {
    shape: [usize; 3],
    patterns: Vec<Vec<f64>>,
    noise: f64,
}

impl SyntheticImages {
    pub const DEFAULT_NOISE: f64 = 0.5;

    pub fn new(cfg: &ViTConfig) -> Self {
        Self::with_noise(cfg, Self::DEFAULT_NOISE)
    }

    pub fn with_noise(cfg: &ViTConfig, noise: f64) -> Self {
        let shape = [cfg.channels, cfg.image_size, cfg.image_size];
        let n = shape.iter().product();
        let patterns = (0..NUM_LABELS as u64)
            .map(|c| {
                let mut rng = rng::stream_rng(c, Stream::Pixels);
                (0..n)
                    .map(|_| if rng.next_u32() & 1 == 1 { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect();
        SyntheticImages { shape, patterns, noise }
    }

    pub fn render(&self, frame_id: &str, labels: LabelSet) -> Tensor {
        let n = self.patterns[0].len();
        let mut rng = rng::stream_rng(rng::fnv1a(frame_id.as_bytes()), Stream::Pixels);
        let mut data: Vec<f64> = (0..n)
            .map(|_| self.noise * (2.0 * rng::unit_f64(&mut rng) - 1.0))
            .collect();
        for l in labels.iter() {
            for (x, p) in data.iter_mut().zip(&self.patterns[l.index()]) {
                *x += p;
            }
        }
        Tensor::from_vec(&self.shape, data).expect("pattern length matches shape")
    }
}

impl FrameSource for SyntheticImages {
    fn image(&self, frame: &FrameRecord) -> Result<Tensor> {
        Ok(self.render(&frame.frame_id, frame.labels))
    }
}
