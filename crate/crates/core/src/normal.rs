//! Standard normal helpers.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Inverse standard normal CDF; `±∞` at the endpoints.
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    Normal::standard().inverse_cdf(p)
}

/// Two-sided critical value `z_{1-a/2}` for confidence `level = 1 - a`.
pub fn critical_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Usage(format!(
            "confidence level must be in (0, 1), got {level}"
        )));
    }
    Ok(quantile(0.5 + level / 2.0))
}

pub fn cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `values` and
/// the standard normal.
pub fn ks_distance(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return 1.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            let hi = (k as f64 + 1.0) / m - f;
            let lo = f - k as f64 / m;
            hi.max(lo)
        })
        .fold(0.0, f64::max)
}
