use std::collections::BTreeMap;

use super::{RunHistory, RunHistoryError, Status};
use crate::space::{ConfigurationSpace, Encoding};

/// Minimum number of successful observations at one budget before a model
/// is fitted on that budget: `max(d + 1, 5)` for encoding dimension `d`.
pub fn sufficient_observations(dim: usize) -> usize {
    (dim + 1).max(5)
}

/// Encoded inputs and costs at a single budget level.
#[derive(Debug, Clone, Default)]
pub struct TrainingData {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    /// Whether each observation is right-censored (its cost is a lower bound).
    pub censored: Vec<bool>,
    /// Recorded runtime of each observation.
    pub runtime: Vec<f64>,
    pub budget: Option<f64>,
}

impl TrainingData {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_censored(&self) -> usize {
        self.censored.iter().filter(|c| **c).count()
    }
}

impl RunHistory {
    /// Surrogate training data.
    ///
    /// Without budgets every completed trial is returned. With budgets, the
    /// largest budget holding at least [`sufficient_observations`] successful
    /// trials is chosen; if none qualifies, the budget with the most
    /// observations (lowest on ties). Crashed and memout trials carry
    /// `crash_cost`.
    pub fn training_data(
        &self,
        space: &ConfigurationSpace,
        scheme: Encoding,
        crash_cost: f64,
    ) -> Result<TrainingData, RunHistoryError> {
        let completed: Vec<_> = self
            .trials()
            .filter(|(_, r)| r.result.status.is_complete())
            .collect();
        if completed.is_empty() {
            return Err(RunHistoryError::NoUsableData);
        }

        let budget = if completed.iter().all(|(k, _)| k.budget.is_none()) {
            None
        } else {
            // keyed by bit pattern; budgets are positive so bit order is numeric order
            let mut success: BTreeMap<u64, usize> = BTreeMap::new();
            let mut total: BTreeMap<u64, usize> = BTreeMap::new();
            for (k, r) in &completed {
                let Some(b) = k.budget else { continue };
                *total.entry(b.to_bits()).or_default() += 1;
                if r.result.status == Status::Success {
                    *success.entry(b.to_bits()).or_default() += 1;
                }
            }
            let need = sufficient_observations(space.encoded_len(scheme));
            let chosen = success
                .iter()
                .rev()
                .find(|(_, &n)| n >= need)
                .map(|(&b, _)| b)
                .or_else(|| {
                    total
                        .iter()
                        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                        .map(|(&b, _)| b)
                });
            chosen.map(f64::from_bits)
        };

        let mut data = TrainingData {
            budget,
            ..Default::default()
        };
        for (k, r) in completed {
            if k.budget.map(f64::to_bits) != budget.map(f64::to_bits) {
                continue;
            }
            let config = self.config(k.config_id).ok_or(RunHistoryError::UnknownConfig(k.config_id))?;
            let y = match r.result.status {
                Status::Crashed | Status::Memout => crash_cost,
                _ => r.result.cost,
            };
            data.x.push(space.encode_unchecked(config, scheme));
            data.y.push(y);
            data.censored.push(r.result.censored);
            data.runtime.push(r.result.runtime);
        }
        if data.is_empty() {
            return Err(RunHistoryError::NoUsableData);
        }
        Ok(data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runhistory::{TrialKey, TrialResult};
    use crate::space::{Configuration, Parameter, Value};

    fn space5() -> ConfigurationSpace {
        ConfigurationSpace::new(
            (0..5).map(|i| Parameter::float(format!("x{i}"), 0.0, 1.0)).collect(),
            vec![],
        )
        .unwrap()
    }

    fn add(rh: &mut RunHistory, i: usize, budget: Option<f64>, status: Status) {
        let c = Configuration::from_values(
            (0..5)
                .map(|j| (format!("x{j}"), Value::Float(((i * 7 + j) % 13) as f64 / 13.0 + 1e-3 * i as f64)))
                .collect(),
        );
        let id = rh.add_config(&c);
        let result = TrialResult {
            cost: i as f64,
            runtime: 1.0,
            status,
            censored: false,
        };
        rh.add_trial(
            TrialKey {
                config_id: id,
                instance: None,
                seed: 0,
                budget,
            },
            result,
            0.0,
        )
        .unwrap();
    }

    #[test]
    fn picks_highest_sufficient_budget() {
        // d = 5 → need max(6, 5) = 6 successes; b=9 has 2, b=3 has 10
        let mut rh = RunHistory::new();
        let mut i = 0;
        for (b, n) in [(1.0, 20), (3.0, 10), (9.0, 2)] {
            for _ in 0..n {
                add(&mut rh, i, Some(b), Status::Success);
                i += 1;
            }
        }
        let data = rh.training_data(&space5(), Encoding::Index, 100.0).unwrap();
        assert_eq!(data.budget, Some(3.0));
        assert_eq!(data.len(), 10);
    }

    #[test]
    fn fallback_to_most_observed_budget() {
        let mut rh = RunHistory::new();
        add(&mut rh, 0, Some(1.0), Status::Success);
        add(&mut rh, 1, Some(1.0), Status::Success);
        add(&mut rh, 2, Some(3.0), Status::Success);
        let data = rh.training_data(&space5(), Encoding::Index, 100.0).unwrap();
        assert_eq!(data.budget, Some(1.0));
        assert_eq!(data.len(), 2);
    }

    #[test]
    fn no_budgets_returns_everything() {
        let mut rh = RunHistory::new();
        for i in 0..3 {
            add(&mut rh, i, None, Status::Success);
        }
        let data = rh.training_data(&space5(), Encoding::Index, 100.0).unwrap();
        assert_eq!(data.len(), 3);
        assert_eq!(data.budget, None);
    }

    #[test]
    fn crashes_carry_penalty() {
        let mut rh = RunHistory::new();
        add(&mut rh, 0, None, Status::Success);
        add(&mut rh, 1, None, Status::Crashed);
        let data = rh.training_data(&space5(), Encoding::Index, 42.0).unwrap();
        assert_eq!(data.y, vec![0.0, 42.0]);
    }

    #[test]
    fn empty_history_is_error() {
        let rh = RunHistory::new();
        assert!(matches!(
            rh.training_data(&space5(), Encoding::Index, 1.0),
            Err(RunHistoryError::NoUsableData)
        ));
    }
}
