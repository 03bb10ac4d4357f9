use crate::taxonomy::{LabelSet, NUM_LABELS};

const LOG_FLOOR: f64 = 1e-12;

fn target_bit(target: LabelSet, c: usize) -> f64 {
    if target.bits() & (1 << c) != 0 {
        1.0
    } else {
        0.0
    }
}

/// Mean binary cross-entropy over the 17 labels, log inputs clamped at 1e-12.
pub fn bce_loss(scores: &[f64; NUM_LABELS], target: LabelSet) -> f64 {
    let total: f64 = (0..NUM_LABELS)
        .map(|c| {
            let y = target_bit(target, c);
            let s = scores[c];
            -(y * libm::log(s.max(LOG_FLOOR)) + (1.0 - y) * libm::log((1.0 - s).max(LOG_FLOOR)))
        })
        .sum();
    total / NUM_LABELS as f64
}

/// Gradient of [`bce_loss`] with respect to the pre-sigmoid logits. Zero where
/// the clamp is active.
pub fn bce_logit_grad(scores: &[f64; NUM_LABELS], target: LabelSet) -> [f64; NUM_LABELS] {
    core::array::from_fn(|c| {
        let y = target_bit(target, c);
        let s = scores[c];
        let clamped = if y == 1.0 { s < LOG_FLOOR } else { 1.0 - s < LOG_FLOOR };
        if clamped {
            0.0
        } else {
            (s - y) / NUM_LABELS as f64
        }
    })
}
