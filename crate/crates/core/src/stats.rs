//! Standard normal helpers.

use libm::erfc;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn norm_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - Φ(z)` without cancellation for large `z`.
pub fn norm_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Mean of `N(mu, sigma²)` truncated below at `lower`:
/// `mu + sigma * φ(α) / (1 − Φ(α))` with `α = (lower − mu) / sigma`.
pub fn truncated_normal_mean(mu: f64, sigma: f64, lower: f64) -> f64 {
    if !(sigma > 0.0) {
        return mu.max(lower);
    }
    let alpha = (lower - mu) / sigma;
    let tail = norm_sf(alpha);
    if tail < 1e-300 || alpha > 30.0 {
        // inverse Mills ratio → α for α → ∞
        return lower.max(mu + sigma * alpha);
    }
    let m = mu + sigma * norm_pdf(alpha) / tail;
    m.max(lower)
}
