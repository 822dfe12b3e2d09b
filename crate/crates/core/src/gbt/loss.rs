//! Softmax cross-entropy and its per-class derivatives.

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-log softmax(logits)[label]`, computed via log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Gradient and Hessian diagonal of [`cross_entropy`] with respect to each
/// logit: `p_k - [k == label]` and `p_k (1 - p_k)`.
pub fn gradients(logits: &[f64], label: usize) -> (Vec<f64>, Vec<f64>) {
    let p = softmax(logits);
    let grad = p
        .iter()
        .enumerate()
        .map(|(k, &pk)| pk - if k == label { 1.0 } else { 0.0 })
        .collect();
    let hess = p.iter().map(|&pk| pk * (1.0 - pk)).collect();
    (grad, hess)
}

/// Probability floor used when scoring held-out rows.
pub const PROB_EPS: f64 = 1e-15;

/// Mean of `-ln p[label]` with probabilities clipped to `[PROB_EPS, 1]`.
/// `None` labels (classes unknown to the model) score as `PROB_EPS`.
pub fn mean_log_loss(probabilities: &[Vec<f64>], labels: &[Option<usize>]) -> f64 {
    assert_eq!(probabilities.len(), labels.len());
    if labels.is_empty() {
        return 0.0;
    }
    let total: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(p, y)| {
            let py = y.map_or(PROB_EPS, |k| p[k].clamp(PROB_EPS, 1.0));
            -py.ln()
        })
        .sum();
    total / labels.len() as f64
}
