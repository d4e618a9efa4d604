//! Imputation of right-censored observations.
//!
//! A censored observation is only known to be at least its threshold `κ`.
//! Given a model's predictive `N(μ, σ²)` at the censored input, the value is
//! replaced by the mean of that normal truncated below at `κ`. The model is
//! then refitted on the uncensored data plus the current imputations and the
//! process repeats until the imputations settle.

use super::{RunHistoryError, TrainingData};
use crate::stats::truncated_normal_mean;
use crate::surrogate::Surrogate;

#[derive(Debug, Clone, Copy)]
pub struct ImputationSettings {
    pub max_iterations: usize,
    /// Stop once the largest change between two passes falls below this.
    pub tolerance: f64,
    /// Upper cap on imputed values (the penalty ceiling in model space).
    pub ceiling: f64,
}

impl ImputationSettings {
    pub fn with_ceiling(ceiling: f64) -> Self {
        Self {
            max_iterations: 5,
            tolerance: 1e-3,
            ceiling,
        }
    }
}

/// Imputed values for the censored entries of `data`, in order. The
/// threshold of a censored entry is its recorded `y`. `fit` trains a model on
/// `(x, y)`; it is called once on the uncensored data and once per
/// refinement pass.
pub fn impute_censored<M, F>(
    data: &TrainingData,
    settings: ImputationSettings,
    mut fit: F,
) -> Result<Vec<f64>, RunHistoryError>
where
    M: Surrogate,
    F: FnMut(&[Vec<f64>], &[f64]) -> Result<M, String>,
{
    let censored: Vec<usize> = (0..data.len()).filter(|&i| data.censored[i]).collect();
    if censored.is_empty() {
        return Ok(Vec::new());
    }
    let kappa: Vec<f64> = censored.iter().map(|&i| data.y[i]).collect();
    let mut x: Vec<Vec<f64>> = Vec::with_capacity(data.len());
    let mut y: Vec<f64> = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        if !data.censored[i] {
            x.push(data.x[i].clone());
            y.push(data.y[i]);
        }
    }
    let n_uncensored = y.len();
    if n_uncensored < 2 {
        // nothing to learn from; fall back to the thresholds themselves
        return Ok(kappa.iter().map(|k| k.min(settings.ceiling).max(*k)).collect());
    }

    let impute = |model: &M| -> Result<Vec<f64>, RunHistoryError> {
        censored
            .iter()
            .zip(&kappa)
            .map(|(&i, &k)| {
                let p = model
                    .predict(&data.x[i])
                    .map_err(|e| RunHistoryError::Model(e.to_string()))?;
                let m = truncated_normal_mean(p.mean, p.variance.max(0.0).sqrt(), k);
                Ok(m.min(settings.ceiling).max(k))
            })
            .collect()
    };

    let model = fit(&x, &y).map_err(RunHistoryError::Model)?;
    let mut current = impute(&model)?;
    for &i in &censored {
        x.push(data.x[i].clone());
    }
    for _ in 1..settings.max_iterations {
        y.truncate(n_uncensored);
        y.extend_from_slice(&current);
        let model = fit(&x, &y).map_err(RunHistoryError::Model)?;
        let next = impute(&model)?;
        let change = next
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        current = next;
        if change < settings.tolerance {
            break;
        }
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::{ModelError, Prediction};

    /// Predicts a fixed normal everywhere.
    struct Fixed(f64, f64);

    impl Surrogate for Fixed {
        fn predict(&self, _x: &[f64]) -> Result<Prediction, ModelError> {
            Ok(Prediction {
                mean: self.0,
                variance: self.1,
            })
        }
    }

    fn data(censored: &[bool], y: &[f64]) -> TrainingData {
        TrainingData {
            x: (0..y.len()).map(|i| vec![i as f64]).collect(),
            y: y.to_vec(),
            censored: censored.to_vec(),
            runtime: vec![0.0; y.len()],
            budget: None,
        }
    }

    #[test]
    fn nothing_censored_is_identity() {
        let d = data(&[false, false], &[1.0, 2.0]);
        let out = impute_censored(&d, ImputationSettings::with_ceiling(100.0), |_, _| Ok(Fixed(0.0, 1.0))).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn truncated_mean_first_pass() {
        let d = data(&[false, false, true], &[1.0, 2.0, 5.0]);
        let settings = ImputationSettings {
            max_iterations: 1,
            ..ImputationSettings::with_ceiling(100.0)
        };
        let out = impute_censored(&d, settings, |_, _| Ok(Fixed(4.0, 1.0))).unwrap();
        assert!((out[0] - 5.525_135_276_160_98).abs() < 1e-9);
    }

    #[test]
    fn far_above_threshold_returns_mean() {
        let d = data(&[false, false, true], &[1.0, 2.0, 5.0]);
        let out = impute_censored(&d, ImputationSettings::with_ceiling(1e6), |_, _| Ok(Fixed(500.0, 1.0))).unwrap();
        assert!((out[0] - 500.0).abs() < 1e-6);
    }

    #[test]
    fn capped_at_ceiling_and_bounded_below() {
        let d = data(&[false, false, true, true], &[1.0, 2.0, 5.0, 6.0]);
        let out = impute_censored(&d, ImputationSettings::with_ceiling(7.0), |_, _| Ok(Fixed(50.0, 4.0))).unwrap();
        assert_eq!(out, vec![7.0, 7.0]);
        let out = impute_censored(&d, ImputationSettings::with_ceiling(70.0), |_, _| Ok(Fixed(-50.0, 1.0))).unwrap();
        assert!(out[0] >= 5.0 && out[1] >= 6.0);
    }

    #[test]
    fn refits_until_stable() {
        let d = data(&[false, false, true], &[1.0, 2.0, 5.0]);
        let mut calls = 0;
        let _ = impute_censored(&d, ImputationSettings::with_ceiling(100.0), |_, _| {
            calls += 1;
            Ok(Fixed(4.0, 1.0))
        })
        .unwrap();
        // initial fit + one refinement whose change is zero
        assert_eq!(calls, 2);
    }
}
