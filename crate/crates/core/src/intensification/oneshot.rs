//! One trial per configuration; the incumbent is the cheapest configuration
//! evaluated so far.

use std::collections::VecDeque;

use super::{Next, TrialRequest};
use crate::runhistory::{ConfigId, RunHistory, TrialKey};
use crate::space::Configuration;

#[derive(Debug, Clone)]
pub struct OneShot {
    instance: Option<String>,
    seed: u64,
    budget: Option<f64>,
    cutoff: Option<f64>,
    pending: VecDeque<Configuration>,
    incumbent: Option<ConfigId>,
}

impl OneShot {
    pub fn new(instance: Option<String>, seed: u64, budget: Option<f64>, cutoff: Option<f64>) -> Self {
        Self {
            instance,
            seed,
            budget,
            cutoff,
            pending: VecDeque::new(),
            incumbent: None,
        }
    }

    pub fn incumbent(&self) -> Option<ConfigId> {
        self.incumbent
    }

    pub fn budget(&self) -> Option<f64> {
        self.budget
    }

    fn key(&self, rh: &RunHistory, c: &Configuration) -> Option<TrialKey> {
        Some(TrialKey {
            config_id: rh.config_id(c)?,
            instance: self.instance.clone(),
            seed: self.seed,
            budget: self.budget,
        })
    }

    /// Next challenger without a recorded (or in-flight) trial.
    pub fn ask(&mut self, rh: &RunHistory) -> Next {
        while let Some(c) = self.pending.pop_front() {
            if self.key(rh, &c).is_some_and(|k| rh.contains(&k)) {
                log::debug!("configuration already evaluated; reusing its cost");
                continue;
            }
            return Next::Request(TrialRequest {
                config: c,
                instance: self.instance.clone(),
                seed: self.seed,
                budget: self.budget,
                cutoff: self.cutoff,
            });
        }
        Next::NeedChallenger
    }

    pub fn supply(&mut self, config: Configuration) {
        self.pending.push_back(config);
    }

    pub fn process(&mut self, rh: &RunHistory) -> bool {
        let mut best: Option<(ConfigId, f64)> = None;
        for (id, _) in rh.configs() {
            if let Ok(c) = rh.aggregate_cost(id, None, self.budget) {
                if best.is_none_or(|(_, b)| c < b) {
                    best = Some((id, c));
                }
            }
        }
        let new = best.map(|(id, _)| id);
        let changed = new != self.incumbent;
        self.incumbent = new;
        changed
    }
}
