/// Numerically stable two-way softmax.
pub fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

/// Label-smoothed cross-entropy for a two-class softmax.
///
/// Target is `(1 - eps) * onehot + eps / 2`; returns the loss and its gradient
/// with respect to the logits, `probs - target`.
pub fn smoothed_ce(probs: [f64; 2], label: bool, eps: f64) -> (f64, [f64; 2]) {
    debug_assert!((0.0..1.0).contains(&eps), "smoothing {eps} outside [0, 1)");
    let hot = label as usize;
    let mut target = [eps / 2.0; 2];
    target[hot] += 1.0 - eps;
    let loss = -(0..2).map(|k| if target[k] > 0.0 { target[k] * probs[k].max(f64::MIN_POSITIVE).ln() } else { 0.0 }).sum::<f64>();
    (loss, [probs[0] - target[0], probs[1] - target[1]])
}
