//! Matérn-5/2 covariance with automatic relevance determination.

const SQRT5: f64 = 2.236_067_977_499_79;

/// Scaled Euclidean distance `sqrt(Σ ((x_j − x'_j) / ℓ_j)²)`.
pub fn scaled_distance(x: &[f64], x2: &[f64], lengthscales: &[f64]) -> f64 {
    x.iter()
        .zip(x2)
        .zip(lengthscales)
        .map(|((a, b), l)| {
            let d = (a - b) / l;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// `σ_f² (1 + √5 r + 5r²/3) exp(−√5 r)`.
pub fn matern52_from_distance(r: f64, signal_var: f64) -> f64 {
    let s = SQRT5 * r;
    signal_var * (1.0 + s + s * s / 3.0) * (-s).exp()
}

pub fn matern52(x: &[f64], x2: &[f64], lengthscales: &[f64], signal_var: f64) -> f64 {
    matern52_from_distance(scaled_distance(x, x2, lengthscales), signal_var)
}

/// `∂k/∂log ℓ_j` divided by `(Δ_j / ℓ_j)²`: `σ_f² (5/3)(1 + √5 r) exp(−√5 r)`.
pub(crate) fn matern52_lengthscale_factor(r: f64, signal_var: f64) -> f64 {
    let s = SQRT5 * r;
    signal_var * (5.0 / 3.0) * (1.0 + s) * (-s).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_distance_is_signal_variance() {
        assert_eq!(matern52(&[0.3, 0.1], &[0.3, 0.1], &[0.5, 2.0], 2.5), 2.5);
    }

    #[test]
    fn unit_distance_closed_form() {
        // (1 + √5 + 5/3) e^{−√5}
        assert!((matern52_from_distance(1.0, 1.0) - 0.523_994_108_831_820_3).abs() < 1e-14);
    }

    #[test]
    fn decays_monotonically() {
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let k = matern52_from_distance(i as f64 * 0.1, 1.0);
            assert!(k < prev);
            prev = k;
        }
        assert!(matern52_from_distance(50.0, 1.0) < 1e-40);
    }

    #[test]
    fn ard_scaling() {
        let a = matern52(&[0.0, 0.0], &[1.0, 0.0], &[2.0, 1.0], 1.0);
        assert!((a - matern52_from_distance(0.5, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn gram_matrices_are_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let n = rng.random_range(2..=50);
            let d = rng.random_range(1..=4);
            let ls: Vec<f64> = (0..d).map(|_| 10f64.powf(rng.random_range(-1.5..1.0))).collect();
            let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
            let k = DMatrix::from_fn(n, n, |i, j| matern52(&pts[i], &pts[j], &ls, 1.0));
            let min = k.symmetric_eigenvalues().min();
            assert!(min >= -1e-8, "min eigenvalue {min}");
        }
    }
}
