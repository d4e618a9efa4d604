//! Intensification: how many trials, on which instances, seeds and budgets,
//! each configuration receives before it can become the incumbent.
//!
//! Every intensifier is a state machine. It hands out [`TrialRequest`]s
//! through [`Intensifier::ask`], asks for new challengers when it runs dry,
//! and advances whenever [`Intensifier::process`] sees new results in the
//! run history. Results may arrive in any order.

mod hyperband;
mod oneshot;
mod racing;

use std::collections::{BTreeMap, VecDeque};

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::runhistory::{ConfigId, RunHistory, TrialKey, TrialRecord};
use crate::space::Configuration;

pub use hyperband::{hyperband_plan, sh_schedule, Bracket, HyperbandRunner, Rung};
pub use oneshot::OneShot;
pub use racing::{RaceStep, Racing, RacingState, Slot};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntensificationError {
    #[error("eta must be greater than 1, got {0}")]
    InvalidEta(f64),
    #[error("budgets need 0 < b_min <= b_max, got b_min={b_min}, b_max={b_max}")]
    InvalidBudgets { b_min: f64, b_max: f64 },
    #[error("a bracket needs at least one configuration")]
    NoConfigs,
}

/// One trial handed from an intensifier to an evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRequest {
    pub config: Configuration,
    pub instance: Option<String>,
    pub seed: u64,
    pub budget: Option<f64>,
    pub cutoff: Option<f64>,
}

impl TrialRequest {
    /// Key of this request, registering the configuration if needed.
    pub fn key(&self, rh: &mut RunHistory) -> TrialKey {
        TrialKey {
            config_id: rh.add_config(&self.config),
            instance: self.instance.clone(),
            seed: self.seed,
            budget: self.budget,
        }
    }

    /// Key of this request if the configuration is already known.
    pub fn existing_key(&self, rh: &RunHistory) -> Option<TrialKey> {
        Some(TrialKey {
            config_id: rh.config_id(&self.config)?,
            instance: self.instance.clone(),
            seed: self.seed,
            budget: self.budget,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Continue,
    Reject,
    Promote,
}

/// What an intensifier wants next.
#[derive(Debug, Clone, PartialEq)]
pub enum Next {
    Request(TrialRequest),
    /// Results of outstanding trials are needed before anything else can run.
    Wait,
    /// Supply a new challenger with [`Intensifier::supply`].
    NeedChallenger,
}

/// A completed trial of `key`, if any.
pub(crate) fn completed<'a>(rh: &'a RunHistory, key: &TrialKey) -> Option<&'a TrialRecord> {
    rh.get(key).filter(|r| r.result.status.is_complete())
}

/// Mean cost of `id` over the given (instance, seed) slots: per instance the
/// mean over seeds, then the mean over instances. `None` if any slot lacks a
/// completed result.
pub(crate) fn slot_mean(rh: &RunHistory, id: ConfigId, slots: &[Slot], budget: Option<f64>) -> Option<f64> {
    if slots.is_empty() {
        return None;
    }
    let mut per_instance: BTreeMap<Option<&str>, (f64, usize)> = BTreeMap::new();
    for s in slots {
        let key = TrialKey {
            config_id: id,
            instance: s.instance.clone(),
            seed: s.seed,
            budget,
        };
        let r = completed(rh, &key)?;
        let e = per_instance.entry(s.instance.as_deref()).or_insert((0.0, 0));
        e.0 += r.result.cost;
        e.1 += 1;
    }
    Some(per_instance.values().map(|(s, n)| s / *n as f64).sum::<f64>() / per_instance.len() as f64)
}

/// Any of the three intensification policies.
#[derive(Debug, Clone)]
pub enum Intensifier {
    OneShot(OneShot),
    Racing(Racing),
    Hyperband(HyperbandRunner),
}

impl Intensifier {
    pub fn ask(&mut self, rh: &RunHistory) -> Next {
        match self {
            Intensifier::OneShot(i) => i.ask(rh),
            Intensifier::Racing(i) => i.ask(),
            Intensifier::Hyperband(i) => i.ask(),
        }
    }

    /// Offers a challenger after [`Next::NeedChallenger`].
    pub fn supply(&mut self, config: Configuration, rh: &RunHistory, rng: &mut ChaCha8Rng) {
        match self {
            Intensifier::OneShot(i) => i.supply(config),
            Intensifier::Racing(i) => i.supply(config, rh, rng),
            Intensifier::Hyperband(i) => i.supply(config, rh),
        }
    }

    /// Advances on newly available results. Returns true if the incumbent
    /// changed.
    pub fn process(&mut self, rh: &RunHistory, rng: &mut ChaCha8Rng) -> bool {
        match self {
            Intensifier::OneShot(i) => i.process(rh),
            Intensifier::Racing(i) => i.process(rh, rng),
            Intensifier::Hyperband(i) => i.process(rh),
        }
    }

    pub fn incumbent(&self) -> Option<ConfigId> {
        match self {
            Intensifier::OneShot(i) => i.incumbent(),
            Intensifier::Racing(i) => i.state.incumbent,
            Intensifier::Hyperband(i) => i.incumbent(),
        }
    }

    /// Cost of the incumbent on the comparison set this policy uses.
    pub fn incumbent_cost(&self, rh: &RunHistory) -> Option<f64> {
        let id = self.incumbent()?;
        match self {
            Intensifier::OneShot(i) => rh.aggregate_cost(id, None, i.budget()).ok(),
            Intensifier::Racing(i) => slot_mean(rh, id, &i.state.completed_incumbent_runs(rh), None),
            Intensifier::Hyperband(i) => rh.aggregate_cost(id, None, i.incumbent_budget()).ok(),
        }
    }

    /// Budget at which the incumbent is compared (`None` without budgets).
    pub fn incumbent_budget(&self) -> Option<f64> {
        match self {
            Intensifier::Hyperband(i) => i.incumbent_budget(),
            Intensifier::OneShot(i) => i.budget(),
            Intensifier::Racing(_) => None,
        }
    }
}

/// FIFO of requests not yet handed out.
#[derive(Debug, Clone, Default)]
pub(crate) struct RequestQueue(VecDeque<TrialRequest>);

impl RequestQueue {
    pub(crate) fn push(&mut self, r: TrialRequest) {
        self.0.push_back(r);
    }

    pub(crate) fn pop(&mut self) -> Option<TrialRequest> {
        self.0.pop_front()
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
