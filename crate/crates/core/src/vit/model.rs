use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::loss::{bce_logit_grad, bce_loss};
use super::ops::{self, LayerNormCache};
use super::params::{LayerParams, ModelParams, ViTConfig};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::taxonomy::{LabelSet, NUM_LABELS};

pub const LAYER_NORM_EPS: f64 = 1e-12;

/// Gradients share the parameter layout.
pub type Gradients = ModelParams;

fn check_image(image: &Tensor, cfg: &ViTConfig) -> Result<()> {
    image.expect_shape("image", &[cfg.channels, cfg.image_size, cfg.image_size])
}

/// `[C, H, W]` image to `[N, C·p·p]` patch rows. Patches are taken row by row;
/// inside a patch values run channel, then row, then column.
fn patchify(image: &Tensor, cfg: &ViTConfig) -> Vec<f64> {
    let (p, g, s) = (cfg.patch_size, cfg.grid(), cfg.image_size);
    let pd = cfg.patch_dim();
    let data = image.data();
    let mut out = vec![0.0; cfg.num_patches() * pd];
    for py in 0..g {
        for px in 0..g {
            let row = &mut out[(py * g + px) * pd..(py * g + px + 1) * pd];
            for c in 0..cfg.channels {
                for dy in 0..p {
                    let src = c * s * s + (py * p + dy) * s + px * p;
                    let dst = c * p * p + dy * p;
                    row[dst..dst + p].copy_from_slice(&data[src..src + p]);
                }
            }
        }
    }
    out
}

fn embed(patches: &[f64], params: &ModelParams) -> Vec<f64> {
    let cfg = &params.config;
    let (d, n) = (cfg.hidden_dim, cfg.num_patches());
    let proj = ops::linear(
        patches,
        params.patch_weight.data(),
        params.patch_bias.data(),
        n,
        cfg.patch_dim(),
        d,
    );
    let mut tokens = Vec::with_capacity((n + 1) * d);
    tokens.extend_from_slice(params.class_token.data());
    tokens.extend_from_slice(&proj);
    for (t, p) in tokens.iter_mut().zip(params.pos_embed.data()) {
        *t += p;
    }
    tokens
}

/// Class token followed by projected patches, plus positional embeddings:
/// `[N + 1, D]`.
pub fn patch_embed(image: &Tensor, params: &ModelParams) -> Result<Tensor> {
    let cfg = &params.config;
    check_image(image, cfg)?;
    Tensor::from_vec(&[cfg.num_tokens(), cfg.hidden_dim], embed(&patchify(image, cfg), params))
}

struct AttentionCache {
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// `[heads, T, T]`, rows sum to one.
    probs: Vec<f64>,
    ctx: Vec<f64>,
}

fn attention_forward(x: &[f64], layer: &LayerParams, t: usize, d: usize, heads: usize) -> (Vec<f64>, AttentionCache) {
    let q = ops::linear(x, layer.q_weight.data(), layer.q_bias.data(), t, d, d);
    let k = ops::linear(x, layer.k_weight.data(), &vec![0.0; d], t, d, d);
    let v = ops::linear(x, layer.v_weight.data(), layer.v_bias.data(), t, d, d);
    let hd = d / heads;
    let scale = 1.0 / libm::sqrt(hd as f64);
    let mut probs = vec![0.0; heads * t * t];
    let mut ctx = vec![0.0; t * d];
    for h in 0..heads {
        let off = h * hd;
        for i in 0..t {
            let row = &mut probs[(h * t + i) * t..(h * t + i + 1) * t];
            let qi = &q[i * d + off..i * d + off + hd];
            for (j, s) in row.iter_mut().enumerate() {
                let kj = &k[j * d + off..j * d + off + hd];
                *s = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
            }
            ops::softmax_in_place(row);
            let ci = &mut ctx[i * d + off..i * d + off + hd];
            for (j, &a) in row.iter().enumerate() {
                let vj = &v[j * d + off..j * d + off + hd];
                for (c, vv) in ci.iter_mut().zip(vj) {
                    *c += a * vv;
                }
            }
        }
    }
    let out = ops::linear(&ctx, layer.out_weight.data(), layer.out_bias.data(), t, d, d);
    (out, AttentionCache { q, k, v, probs, ctx })
}

#[allow(clippy::too_many_arguments)]
fn attention_backward(
    x: &[f64],
    layer: &LayerParams,
    cache: &AttentionCache,
    dout: &[f64],
    t: usize,
    d: usize,
    heads: usize,
    g: &mut LayerParams,
) -> Vec<f64> {
    let dctx = ops::linear_backward(
        &cache.ctx,
        layer.out_weight.data(),
        dout,
        t,
        d,
        d,
        g.out_weight.data_mut(),
        g.out_bias.data_mut(),
        true,
    );
    let hd = d / heads;
    let scale = 1.0 / libm::sqrt(hd as f64);
    let mut dq = vec![0.0; t * d];
    let mut dk = vec![0.0; t * d];
    let mut dv = vec![0.0; t * d];
    let mut dscore = vec![0.0; t];
    for h in 0..heads {
        let off = h * hd;
        for i in 0..t {
            let a = &cache.probs[(h * t + i) * t..(h * t + i + 1) * t];
            let dci = &dctx[i * d + off..i * d + off + hd];
            // dA[i, j] = dctx_i · v_j, and dv_j += A[i, j] · dctx_i
            let mut dot = 0.0;
            for j in 0..t {
                let vj = &cache.v[j * d + off..j * d + off + hd];
                let da = dci.iter().zip(vj).map(|(x, y)| x * y).sum::<f64>();
                dscore[j] = da;
                dot += da * a[j];
                for (dvv, c) in dv[j * d + off..j * d + off + hd].iter_mut().zip(dci) {
                    *dvv += a[j] * c;
                }
            }
            for j in 0..t {
                let ds = a[j] * (dscore[j] - dot) * scale;
                for c in 0..hd {
                    dq[i * d + off + c] += ds * cache.k[j * d + off + c];
                    dk[j * d + off + c] += ds * cache.q[i * d + off + c];
                }
            }
        }
    }
    let mut dx = ops::linear_backward(x, layer.q_weight.data(), &dq, t, d, d, g.q_weight.data_mut(), g.q_bias.data_mut(), true);
    let mut no_bias = vec![0.0; d];
    let dxk = ops::linear_backward(x, layer.k_weight.data(), &dk, t, d, d, g.k_weight.data_mut(), &mut no_bias, true);
    let dxv = ops::linear_backward(x, layer.v_weight.data(), &dv, t, d, d, g.v_weight.data_mut(), g.v_bias.data_mut(), true);
    for ((a, b), c) in dx.iter_mut().zip(&dxk).zip(&dxv) {
        *a += b + c;
    }
    dx
}

fn check_tokens(tokens: &Tensor, d: usize, heads: usize) -> Result<usize> {
    match tokens.shape() {
        [t, dd] if *dd == d && *t > 0 && heads > 0 && d.is_multiple_of(heads) => Ok(*t),
        s => Err(Error::ShapeMismatch(format!(
            "attention expects [T, {d}] tokens with {d} divisible by {heads} heads, got {s:?}"
        ))),
    }
}

/// Multi-head self-attention on `[T, D]` tokens, output-projected.
pub fn attention(tokens: &Tensor, layer: &LayerParams, num_heads: usize) -> Result<Tensor> {
    let d = layer.q_bias.len();
    let t = check_tokens(tokens, d, num_heads)?;
    let (out, _) = attention_forward(tokens.data(), layer, t, d, num_heads);
    Tensor::from_vec(&[t, d], out)
}

/// Attention weights `[heads, T, T]` for the same computation as [`attention`].
pub fn attention_probs(tokens: &Tensor, layer: &LayerParams, num_heads: usize) -> Result<Tensor> {
    let d = layer.q_bias.len();
    let t = check_tokens(tokens, d, num_heads)?;
    let (_, cache) = attention_forward(tokens.data(), layer, t, d, num_heads);
    Tensor::from_vec(&[num_heads, t, t], cache.probs)
}

/// Row-wise layernorm of `[T, D]` tokens.
pub fn layer_norm(tokens: &Tensor, gain: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let d = gain.len();
    let t = match tokens.shape() {
        [t, dd] if *dd == d && bias.len() == d => *t,
        s => return Err(Error::ShapeMismatch(format!("layer_norm over {d} features, got {s:?}"))),
    };
    let (y, _) = ops::layer_norm(tokens.data(), gain.data(), bias.data(), t, d, LAYER_NORM_EPS);
    Tensor::from_vec(&[t, d], y)
}

struct BlockCache {
    ln1: LayerNormCache,
    h1: Vec<f64>,
    attn: AttentionCache,
    ln2: LayerNormCache,
    h2: Vec<f64>,
    u: Vec<f64>,
    gelu: Vec<f64>,
}

struct ForwardCache {
    patches: Vec<f64>,
    blocks: Vec<BlockCache>,
    lnf: LayerNormCache,
    cls: Vec<f64>,
    logits: [f64; NUM_LABELS],
}

fn block_forward(x: Vec<f64>, layer: &LayerParams, cfg: &ViTConfig) -> (Vec<f64>, BlockCache) {
    let (t, d, m) = (cfg.num_tokens(), cfg.hidden_dim, cfg.mlp_dim);
    let (h1, ln1) = ops::layer_norm(&x, layer.ln1_gain.data(), layer.ln1_bias.data(), t, d, LAYER_NORM_EPS);
    let (a, attn) = attention_forward(&h1, layer, t, d, cfg.num_heads);
    let x2: Vec<f64> = x.iter().zip(&a).map(|(p, q)| p + q).collect();
    let (h2, ln2) = ops::layer_norm(&x2, layer.ln2_gain.data(), layer.ln2_bias.data(), t, d, LAYER_NORM_EPS);
    let u = ops::linear(&h2, layer.fc1_weight.data(), layer.fc1_bias.data(), t, d, m);
    let gelu: Vec<f64> = u.iter().map(|&v| ops::gelu(v)).collect();
    let mlp = ops::linear(&gelu, layer.fc2_weight.data(), layer.fc2_bias.data(), t, m, d);
    let out = x2.iter().zip(&mlp).map(|(p, q)| p + q).collect();
    (out, BlockCache { ln1, h1, attn, ln2, h2, u, gelu })
}

fn block_backward(
    cache: &BlockCache,
    layer: &LayerParams,
    cfg: &ViTConfig,
    dout: Vec<f64>,
    g: &mut LayerParams,
) -> Vec<f64> {
    let (t, d, m) = (cfg.num_tokens(), cfg.hidden_dim, cfg.mlp_dim);
    let dgelu = ops::linear_backward(&cache.gelu, layer.fc2_weight.data(), &dout, t, m, d, g.fc2_weight.data_mut(), g.fc2_bias.data_mut(), true);
    let du: Vec<f64> = dgelu.iter().zip(&cache.u).map(|(dg, &u)| dg * ops::gelu_grad(u)).collect();
    let dh2 = ops::linear_backward(&cache.h2, layer.fc1_weight.data(), &du, t, d, m, g.fc1_weight.data_mut(), g.fc1_bias.data_mut(), true);
    let dx2_ln = ops::layer_norm_backward(&cache.ln2, layer.ln2_gain.data(), &dh2, t, d, g.ln2_gain.data_mut(), g.ln2_bias.data_mut());
    let dx2: Vec<f64> = dout.iter().zip(&dx2_ln).map(|(a, b)| a + b).collect();
    let dh1 = attention_backward(&cache.h1, layer, &cache.attn, &dx2, t, d, cfg.num_heads, g);
    let dx_ln = ops::layer_norm_backward(&cache.ln1, layer.ln1_gain.data(), &dh1, t, d, g.ln1_gain.data_mut(), g.ln1_bias.data_mut());
    dx2.iter().zip(&dx_ln).map(|(a, b)| a + b).collect()
}

fn forward_cached(image: &Tensor, params: &ModelParams) -> Result<ForwardCache> {
    let cfg = &params.config;
    cfg.validate()?;
    check_image(image, cfg)?;
    if params.layers.len() != cfg.num_layers {
        return Err(Error::ShapeMismatch(format!(
            "config has {} layers, parameters have {}",
            cfg.num_layers,
            params.layers.len()
        )));
    }
    let d = cfg.hidden_dim;
    let patches = patchify(image, cfg);
    let mut x = embed(&patches, params);
    let mut blocks = Vec::with_capacity(cfg.num_layers);
    for layer in &params.layers {
        let (next, cache) = block_forward(x, layer, cfg);
        blocks.push(cache);
        x = next;
    }
    let (cls, lnf) = ops::layer_norm(&x[..d], params.final_ln_gain.data(), params.final_ln_bias.data(), 1, d, LAYER_NORM_EPS);
    let head = ops::linear(&cls, params.head_weight.data(), params.head_bias.data(), 1, d, NUM_LABELS);
    let mut logits = [0.0; NUM_LABELS];
    logits.copy_from_slice(&head);
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("logits".into()));
    }
    Ok(ForwardCache { patches, blocks, lnf, cls, logits })
}

fn scores_from_logits(logits: &[f64; NUM_LABELS]) -> [f64; NUM_LABELS] {
    core::array::from_fn(|c| ops::sigmoid(logits[c]))
}

/// Per-label sigmoid scores for one `[C, H, W]` image.
pub fn forward(image: &Tensor, params: &ModelParams) -> Result<[f64; NUM_LABELS]> {
    Ok(scores_from_logits(&forward_cached(image, params)?.logits))
}

/// Loss and exact gradient of the BCE loss for one example.
pub fn backward(image: &Tensor, target: LabelSet, params: &ModelParams) -> Result<(f64, Gradients)> {
    let mut grads = ModelParams::filled(&params.config, 0.0);
    let loss = accumulate_gradients(image, target, params, &mut grads)?;
    Ok((loss, grads))
}

/// Adds the gradient of the BCE loss for one example to `grads` and returns
/// the loss.
pub fn accumulate_gradients(
    image: &Tensor,
    target: LabelSet,
    params: &ModelParams,
    grads: &mut Gradients,
) -> Result<f64> {
    let cache = forward_cached(image, params)?;
    let cfg = &params.config;
    if grads.config != *cfg || grads.layers.len() != params.layers.len() {
        return Err(Error::ShapeMismatch("gradient buffer does not match the model".into()));
    }
    let (t, d) = (cfg.num_tokens(), cfg.hidden_dim);
    let scores = scores_from_logits(&cache.logits);
    let loss = bce_loss(&scores, target);
    let dlogits = bce_logit_grad(&scores, target);

    let dcls = ops::linear_backward(&cache.cls, params.head_weight.data(), &dlogits, 1, d, NUM_LABELS, grads.head_weight.data_mut(), grads.head_bias.data_mut(), true);
    let dx0 = ops::layer_norm_backward(&cache.lnf, params.final_ln_gain.data(), &dcls, 1, d, grads.final_ln_gain.data_mut(), grads.final_ln_bias.data_mut());
    let mut dx = vec![0.0; t * d];
    dx[..d].copy_from_slice(&dx0);

    for ((cache, layer), g) in cache.blocks.iter().zip(&params.layers).zip(grads.layers.iter_mut()).rev() {
        dx = block_backward(cache, layer, cfg, dx, g);
    }

    for (gp, v) in grads.pos_embed.data_mut().iter_mut().zip(&dx) {
        *gp += v;
    }
    for (gc, v) in grads.class_token.data_mut().iter_mut().zip(&dx[..d]) {
        *gc += v;
    }
    ops::linear_backward(
        &cache.patches,
        params.patch_weight.data(),
        &dx[d..],
        cfg.num_patches(),
        cfg.patch_dim(),
        d,
        grads.patch_weight.data_mut(),
        grads.patch_bias.data_mut(),
        false,
    );
    Ok(loss)
}
