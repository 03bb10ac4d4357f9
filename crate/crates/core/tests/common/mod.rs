#![allow(dead_code)]

use capsule_core::rng::{self, Stream};
use capsule_core::taxonomy::LabelSet;
use capsule_core::vit::{self, bce_loss, ModelParams, Tensor};
use rayon::prelude::*;

pub fn random_image(shape: &[usize], seed: u64) -> Tensor {
    let mut r = rng::stream_rng(seed, Stream::Synth);
    let n = shape.iter().product();
    let data = (0..n).map(|_| 2.0 * rng::unit_f64(&mut r) - 1.0).collect();
    Tensor::from_vec(shape, data).unwrap()
}

/// Randomizes every tensor so biases, gains and the class token are not at
/// their special initial values.
pub fn perturbed_params(params: &ModelParams, seed: u64, scale: f64) -> ModelParams {
    let mut p = params.clone();
    let mut r = rng::stream_rng(seed, Stream::Synth);
    for t in p.tensors_mut() {
        for x in t.data_mut() {
            *x += scale * (2.0 * rng::unit_f64(&mut r) - 1.0);
        }
    }
    p
}

pub fn loss_at(image: &Tensor, target: LabelSet, params: &ModelParams) -> f64 {
    bce_loss(&vit::forward(image, params).unwrap(), target)
}

#[derive(Debug)]
pub struct TensorCheck {
    pub name: String,
    /// max |analytic - numeric| / max(max |analytic|, max |numeric|)
    pub rel_error: f64,
    pub max_abs_grad: f64,
}

/// Central differences with step `h` for every parameter value, compared
/// tensor by tensor with the analytic gradient.
pub fn gradient_check(image: &Tensor, target: LabelSet, params: &ModelParams, h: f64) -> Vec<TensorCheck> {
    let (_, analytic) = vit::backward(image, target, params).unwrap();
    let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    let sizes: Vec<usize> = params.tensors().iter().map(|(_, t)| t.len()).collect();
    let coords: Vec<(usize, usize)> = sizes
        .iter()
        .enumerate()
        .flat_map(|(t, &n)| (0..n).map(move |i| (t, i)))
        .collect();
    let numeric: Vec<f64> = coords
        .par_chunks(256)
        .flat_map_iter(|chunk| {
            let mut p = params.clone();
            chunk
                .iter()
                .map(|&(t, i)| {
                    let orig = p.tensors_mut()[t].data()[i];
                    p.tensors_mut()[t].data_mut()[i] = orig + h;
                    let up = loss_at(image, target, &p);
                    p.tensors_mut()[t].data_mut()[i] = orig - h;
                    let down = loss_at(image, target, &p);
                    p.tensors_mut()[t].data_mut()[i] = orig;
                    (up - down) / (2.0 * h)
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let mut offset = 0;
    analytic
        .tensors()
        .into_iter()
        .enumerate()
        .map(|(t, (_, a))| {
            let n = &numeric[offset..offset + sizes[t]];
            offset += sizes[t];
            let diff = a.data().iter().zip(n).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            let scale_a = a.data().iter().map(|x| x.abs()).fold(0.0, f64::max);
            let scale_n = n.iter().map(|x| x.abs()).fold(0.0, f64::max);
            let scale = scale_a.max(scale_n);
            TensorCheck {
                name: names[t].clone(),
                rel_error: if scale == 0.0 { 0.0 } else { diff / scale },
                max_abs_grad: scale_a,
            }
        })
        .collect()
}
