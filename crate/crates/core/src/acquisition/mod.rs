//! Acquisition functions (larger is better, costs are minimized) and their
//! maximization over a configuration space.

mod maximizer;

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{norm_cdf, norm_pdf};
use crate::surrogate::{ModelError, Prediction, Surrogate};

pub use maximizer::{maximize_acquisition, MaximizerSettings, ScoredConfig};

/// Standard deviations below this count as zero.
pub const SIGMA_FLOOR: f64 = 1e-10;
/// Lower bound on the predicted runtime used by EI per second.
pub const RUNTIME_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcquisitionError {
    #[error("predictive variance is negative ({0})")]
    NegativeVariance(f64),
    #[error("{kind:?} requires {field}")]
    MissingField { kind: AcquisitionKind, field: &'static str },
    #[error("configuration space is empty")]
    EmptySpace,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AcquisitionKind {
    #[serde(rename = "EI")]
    Ei,
    #[serde(rename = "LogEI")]
    LogEi,
    #[serde(rename = "PI")]
    Pi,
    #[serde(rename = "LCB")]
    Lcb,
    #[serde(rename = "TS")]
    Ts,
    #[serde(rename = "EIperSec")]
    EiPerSec,
}

/// `(f* − μ)Φ(z) + σφ(z)` with `z = (f* − μ)/σ`; zero when `σ < 1e-10`.
pub fn expected_improvement(f_star: f64, mu: f64, sigma: f64) -> f64 {
    if sigma < SIGMA_FLOOR {
        return 0.0;
    }
    let z = (f_star - mu) / sigma;
    ((f_star - mu) * norm_cdf(z) + sigma * norm_pdf(z)).max(0.0)
}

/// `Φ((f* − μ)/σ)`; for `σ < 1e-10` the indicator `μ < f*`.
pub fn probability_of_improvement(f_star: f64, mu: f64, sigma: f64) -> f64 {
    if sigma < SIGMA_FLOOR {
        return if mu < f_star { 1.0 } else { 0.0 };
    }
    norm_cdf((f_star - mu) / sigma)
}

/// Expected improvement over `f* > 0` of a cost whose logarithm is
/// `N(μ, σ²)`: `f*Φ(v) − exp(μ + σ²/2)Φ(v − σ)` with `v = (ln f* − μ)/σ`.
pub fn log_expected_improvement(f_star: f64, mu: f64, sigma: f64) -> f64 {
    if f_star <= 0.0 {
        return 0.0;
    }
    if sigma < SIGMA_FLOOR {
        return (f_star - mu.exp()).max(0.0);
    }
    let v = (f_star.ln() - mu) / sigma;
    (f_star * norm_cdf(v) - (mu + 0.5 * sigma * sigma).exp() * norm_cdf(v - sigma)).max(0.0)
}

/// `−(μ − βσ)`.
pub fn lower_confidence_bound(mu: f64, sigma: f64, beta: f64) -> f64 {
    -(mu - beta * sigma)
}

/// A fully specified acquisition function.
#[derive(Clone)]
pub enum Acquisition {
    Ei { f_star: f64 },
    LogEi { f_star: f64 },
    Pi { f_star: f64 },
    Lcb { beta: f64 },
    Ts,
    EiPerSec { f_star: f64, runtime_model: Arc<dyn Surrogate + Send + Sync> },
}

impl std::fmt::Debug for Acquisition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Acquisition::Ei { f_star } => write!(f, "EI(f*={f_star})"),
            Acquisition::LogEi { f_star } => write!(f, "LogEI(f*={f_star})"),
            Acquisition::Pi { f_star } => write!(f, "PI(f*={f_star})"),
            Acquisition::Lcb { beta } => write!(f, "LCB(beta={beta})"),
            Acquisition::Ts => f.write_str("TS"),
            Acquisition::EiPerSec { f_star, .. } => write!(f, "EIperSec(f*={f_star})"),
        }
    }
}

impl Acquisition {
    /// Builds an acquisition of `kind`, checking that its required inputs
    /// are present. `lcb_beta` defaults to 1.
    pub fn build(
        kind: AcquisitionKind,
        f_star: Option<f64>,
        lcb_beta: Option<f64>,
        runtime_model: Option<Arc<dyn Surrogate + Send + Sync>>,
    ) -> Result<Acquisition, AcquisitionError> {
        let need = |f: Option<f64>| f.ok_or(AcquisitionError::MissingField { kind, field: "incumbent_cost" });
        Ok(match kind {
            AcquisitionKind::Ei => Acquisition::Ei { f_star: need(f_star)? },
            AcquisitionKind::LogEi => Acquisition::LogEi { f_star: need(f_star)? },
            AcquisitionKind::Pi => Acquisition::Pi { f_star: need(f_star)? },
            AcquisitionKind::Lcb => Acquisition::Lcb {
                beta: lcb_beta.unwrap_or(1.0),
            },
            AcquisitionKind::Ts => Acquisition::Ts,
            AcquisitionKind::EiPerSec => Acquisition::EiPerSec {
                f_star: need(f_star)?,
                runtime_model: runtime_model.ok_or(AcquisitionError::MissingField {
                    kind,
                    field: "runtime_model",
                })?,
            },
        })
    }

    pub fn kind(&self) -> AcquisitionKind {
        match self {
            Acquisition::Ei { .. } => AcquisitionKind::Ei,
            Acquisition::LogEi { .. } => AcquisitionKind::LogEi,
            Acquisition::Pi { .. } => AcquisitionKind::Pi,
            Acquisition::Lcb { .. } => AcquisitionKind::Lcb,
            Acquisition::Ts => AcquisitionKind::Ts,
            Acquisition::EiPerSec { .. } => AcquisitionKind::EiPerSec,
        }
    }

    /// Scores a prediction made at encoded point `x`. `rng` is consumed by
    /// Thompson sampling only.
    pub fn score<R: Rng + ?Sized>(&self, pred: &Prediction, x: &[f64], rng: &mut R) -> Result<f64, AcquisitionError> {
        if pred.variance < 0.0 || pred.variance.is_nan() {
            return Err(AcquisitionError::NegativeVariance(pred.variance));
        }
        let (mu, sigma) = (pred.mean, pred.variance.sqrt());
        Ok(match self {
            Acquisition::Ei { f_star } => expected_improvement(*f_star, mu, sigma),
            Acquisition::LogEi { f_star } => log_expected_improvement(*f_star, mu, sigma),
            Acquisition::Pi { f_star } => probability_of_improvement(*f_star, mu, sigma),
            Acquisition::Lcb { beta } => lower_confidence_bound(mu, sigma, *beta),
            Acquisition::Ts => {
                let z: f64 = rng.sample(StandardNormal);
                -(mu + sigma * z)
            }
            Acquisition::EiPerSec { f_star, runtime_model } => {
                let t = runtime_model.predict(x)?;
                expected_improvement(*f_star, mu, sigma) / t.mean.exp().max(RUNTIME_FLOOR)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pred(mean: f64, variance: f64) -> Prediction {
        Prediction { mean, variance }
    }

    #[test]
    fn ei_closed_forms() {
        assert_eq!(expected_improvement(1.0, 0.0, 0.0), 0.0);
        assert!((expected_improvement(2.0, 2.0, 1.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((expected_improvement(1.0, 0.0, 1.0) - 1.083_315_470_587_686_4).abs() < 1e-13);
    }

    #[test]
    fn pi_at_incumbent_is_half() {
        assert_eq!(probability_of_improvement(3.0, 3.0, 0.7), 0.5);
    }

    #[test]
    fn lcb_without_exploration() {
        assert_eq!(lower_confidence_bound(2.5, 1.0, 0.0), -2.5);
    }

    #[test]
    fn log_ei_deterministic_limit() {
        let e = std::f64::consts::E;
        assert!((log_expected_improvement(e, 0.0, 0.0) - (e - 1.0)).abs() < 1e-15);
        assert!((log_expected_improvement(e, 0.0, 1e-9) - (e - 1.0)).abs() < 1e-8);
    }

    #[test]
    fn ts_with_zero_variance_is_negated_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(Acquisition::Ts.score(&pred(1.5, 0.0), &[], &mut rng).unwrap(), -1.5);
    }

    #[test]
    fn negative_variance_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = Acquisition::Ei { f_star: 0.0 };
        assert!(matches!(a.score(&pred(0.0, -1.0), &[], &mut rng), Err(AcquisitionError::NegativeVariance(_))));
    }

    #[test]
    fn missing_fields_rejected() {
        assert!(Acquisition::build(AcquisitionKind::Ei, None, None, None).is_err());
        assert!(Acquisition::build(AcquisitionKind::EiPerSec, Some(1.0), None, None).is_err());
        assert!(Acquisition::build(AcquisitionKind::Lcb, None, None, None).is_ok());
    }

    struct ConstRuntime(f64);
    impl Surrogate for ConstRuntime {
        fn predict(&self, _x: &[f64]) -> Result<Prediction, ModelError> {
            Ok(pred(self.0, 0.0))
        }
    }

    #[test]
    fn ei_per_second_divides_by_runtime() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = Acquisition::build(AcquisitionKind::EiPerSec, Some(1.0), None, Some(Arc::new(ConstRuntime(2f64.ln()))))
            .unwrap();
        let s = a.score(&pred(0.0, 1.0), &[0.0], &mut rng).unwrap();
        assert!((s - expected_improvement(1.0, 0.0, 1.0) / 2.0).abs() < 1e-12);
        let fast = Acquisition::build(AcquisitionKind::EiPerSec, Some(1.0), None, Some(Arc::new(ConstRuntime(-100.0))))
            .unwrap();
        let s = fast.score(&pred(0.0, 1.0), &[0.0], &mut rng).unwrap();
        assert!((s - expected_improvement(1.0, 0.0, 1.0) / RUNTIME_FLOOR).abs() < 1e-3);
    }

    #[test]
    fn ei_pi_monotone_in_mean() {
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for i in 0..50 {
            let mu = -2.0 + i as f64 * 0.1;
            let cur = (expected_improvement(0.0, mu, 0.5), probability_of_improvement(0.0, mu, 0.5));
            assert!(cur.0 < prev.0 && cur.1 < prev.1);
            prev = cur;
        }
    }
}
