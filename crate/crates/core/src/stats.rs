//! Sample statistics shared by standardization and correlation.
//!
//! Both use the `n - 1` denominator so a standardized column has unit
//! sample variance and its Pearson correlation with itself is exactly the
//! normalized dot product.

use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sum of squared deviations from the mean.
pub fn centered_sum_sq(x: &[f64], mean: f64) -> f64 {
    x.iter().map(|v| (v - mean) * (v - mean)).sum()
}

/// Sample standard deviation (`n - 1` denominator). Zero for fewer than two values.
pub fn sample_std(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    libm::sqrt(centered_sum_sq(x, m) / (x.len() - 1) as f64)
}

/// Whether a spread is negligible relative to the values' magnitude.
pub(crate) fn is_degenerate_spread(std: f64, mean: f64) -> bool {
    std <= 1e-12 * mean.abs().max(1.0)
}

/// Sample Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::ConstantVector);
    }
    let (ma, mb) = (mean(a), mean(b));
    let (sa, sb) = (centered_sum_sq(a, ma), centered_sum_sq(b, mb));
    let n1 = (a.len() - 1) as f64;
    if is_degenerate_spread(libm::sqrt(sa / n1), ma) || is_degenerate_spread(libm::sqrt(sb / n1), mb) {
        return Err(Error::ConstantVector);
    }
    let cross: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    Ok((cross / libm::sqrt(sa * sb)).clamp(-1.0, 1.0))
}
