//! Empirical performance models: predictive mean and variance of the cost
//! at an encoded configuration.

mod forest;
mod gp;
mod kernel;
mod optimize;

use thiserror::Error;

pub use forest::{ForestConfig, ForestPreset, RandomForest};
pub use forest::Leaf;
pub use gp::{GpConfig, GpHyperparameters, GpModel, LENGTHSCALE_BOUNDS, NOISE_VAR_BOUNDS, SIGNAL_VAR_BOUNDS};
pub use kernel::{matern52, matern52_from_distance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("input has dimension {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least {need} observations, got {got}")]
    NotEnoughData { need: usize, got: usize },
    #[error("training targets must be finite")]
    NonFiniteTargets,
    #[error("covariance matrix is not positive definite even with jitter {0:e}")]
    NotPositiveDefinite(f64),
}

/// Predictive distribution at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    pub fn std(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }
}

/// Shared fit-free interface of fitted models.
pub trait Surrogate {
    fn predict(&self, x: &[f64]) -> Result<Prediction, ModelError>;
}

impl<S: Surrogate + ?Sized> Surrogate for Box<S> {
    fn predict(&self, x: &[f64]) -> Result<Prediction, ModelError> {
        (**self).predict(x)
    }
}

impl<S: Surrogate + ?Sized> Surrogate for &S {
    fn predict(&self, x: &[f64]) -> Result<Prediction, ModelError> {
        (**self).predict(x)
    }
}

/// Which model family a facade uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurrogateKind {
    Gp,
    Forest(ForestPreset),
}

/// A fitted model of either family.
#[derive(Debug, Clone)]
pub enum Model {
    Gp(GpModel),
    Forest(RandomForest),
}

impl Model {
    /// Fits a model of `kind`; `seed` drives restarts and tree randomness.
    pub fn fit(kind: SurrogateKind, x: &[Vec<f64>], y: &[f64], seed: u64) -> Result<Model, ModelError> {
        match kind {
            SurrogateKind::Gp => GpModel::fit(x, y, &GpConfig::with_seed(seed)).map(Model::Gp),
            SurrogateKind::Forest(preset) => {
                RandomForest::fit(x, y, &ForestConfig::preset(preset), seed).map(Model::Forest)
            }
        }
    }
}

impl Surrogate for Model {
    fn predict(&self, x: &[f64]) -> Result<Prediction, ModelError> {
        match self {
            Model::Gp(m) => m.predict(x),
            Model::Forest(m) => m.predict(x),
        }
    }
}

pub(crate) fn check_training_set(x: &[Vec<f64>], y: &[f64], need: usize) -> Result<usize, ModelError> {
    if x.len() != y.len() || x.len() < need {
        return Err(ModelError::NotEnoughData {
            need,
            got: x.len().min(y.len()),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteTargets);
    }
    let dim = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != dim) {
        return Err(ModelError::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    Ok(dim)
}

#[cfg(test)]
mod tests {
    //! Fit/predict contract shared by every model family.
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kinds() -> Vec<SurrogateKind> {
        vec![
            SurrogateKind::Gp,
            SurrogateKind::Forest(ForestPreset::Ac),
            SurrogateKind::Forest(ForestPreset::Hpo),
        ]
    }

    fn dataset(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
        let y = x.iter().map(|r| r.iter().map(|v| (v - 0.3).powi(2)).sum::<f64>()).collect();
        (x, y)
    }

    #[test]
    fn conformance_finite_nonnegative_variance() {
        let (x, y) = dataset(1, 12, 3);
        for kind in kinds() {
            let m = Model::fit(kind, &x, &y, 0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            for _ in 0..200 {
                let q: Vec<f64> = (0..3).map(|_| rng.random()).collect();
                let p = m.predict(&q).unwrap();
                assert!(p.mean.is_finite() && p.variance >= 0.0, "{kind:?}: {p:?}");
            }
        }
    }

    #[test]
    fn conformance_dimension_check() {
        let (x, y) = dataset(3, 6, 2);
        for kind in kinds() {
            let m = Model::fit(kind, &x, &y, 0).unwrap();
            assert!(matches!(m.predict(&[0.5]), Err(ModelError::DimensionMismatch { .. })));
        }
    }

    #[test]
    fn conformance_determinism() {
        let (x, y) = dataset(4, 10, 2);
        for kind in kinds() {
            let a = Model::fit(kind, &x, &y, 9).unwrap();
            let b = Model::fit(kind, &x, &y, 9).unwrap();
            for q in [[0.1, 0.2], [0.7, 0.9]] {
                assert_eq!(a.predict(&q).unwrap(), b.predict(&q).unwrap());
            }
        }
    }

    #[test]
    fn conformance_rejects_non_finite_targets() {
        let x = vec![vec![0.0], vec![1.0]];
        for kind in kinds() {
            assert!(matches!(
                Model::fit(kind, &x, &[0.0, f64::NAN], 0),
                Err(ModelError::NonFiniteTargets)
            ));
        }
    }
}
