/// `log Σ exp(v)`; `-inf` for an empty or all `-inf` slice.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Probabilities `exp(v_i - logsumexp(v))`, computed as shifted weights over
/// their sum so equal inputs map to exactly equal outputs.
pub fn normalize_log_weights(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = shifted.iter().sum();
    shifted.into_iter().map(|w| w / sum).collect()
}
