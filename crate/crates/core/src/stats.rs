//! Small descriptive statistics shared across modules.

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divides by `n`).
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// `exp(-Σ p ln p)` over the positive entries, with `0·ln 0 = 0`.
pub fn entropy_exp<'a>(probs: impl IntoIterator<Item = &'a f64>) -> f64 {
    let h: f64 = probs.into_iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    h.exp()
}
