//! Trial records, cost aggregation and surrogate training data.

mod file;
mod imputation;
mod training;
mod trajectory;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{Configuration, SpaceError};

pub use file::{read_history, read_trajectory, write_history, write_trajectory, HistoryFile};
pub use imputation::{impute_censored, ImputationSettings};
pub use training::{sufficient_observations, TrainingData};
pub use trajectory::TrajectoryEntry;

#[derive(Debug, Error)]
pub enum RunHistoryError {
    #[error("conflicting result for trial {key}: stored {stored:?}, new {new:?}")]
    Conflict {
        key: String,
        stored: TrialResult,
        new: TrialResult,
    },
    #[error("configuration {0} has no completed trials on the requested instances")]
    NoTrials(ConfigId),
    #[error("unknown configuration id {0}")]
    UnknownConfig(ConfigId),
    #[error("run history holds no usable observations")]
    NoUsableData,
    #[error("space digest mismatch: expected {expected}, found {found}")]
    DigestMismatch { expected: String, found: String },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("surrogate model failed during imputation: {0}")]
    Model(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConfigId(pub u32);

impl fmt::Display for ConfigId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Success,
    Timeout,
    Crashed,
    Memout,
    Abort,
    /// Placeholder for an issued but unfinished trial.
    Running,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Success => "SUCCESS",
            Status::Timeout => "TIMEOUT",
            Status::Crashed => "CRASHED",
            Status::Memout => "MEMOUT",
            Status::Abort => "ABORT",
            Status::Running => "RUNNING",
        }
    }

    pub fn parse(s: &str) -> Option<Status> {
        Some(match s {
            "SUCCESS" => Status::Success,
            "TIMEOUT" => Status::Timeout,
            "CRASHED" => Status::Crashed,
            "MEMOUT" => Status::Memout,
            "ABORT" => Status::Abort,
            "RUNNING" => Status::Running,
            _ => return None,
        })
    }

    pub fn is_complete(self) -> bool {
        !matches!(self, Status::Running | Status::Abort)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What the cost measures; decides penalties for failed and timed-out runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    #[default]
    Quality,
    Runtime,
}

/// Unique key of a trial. Budgets compare by bit pattern.
#[derive(Debug, Clone)]
pub struct TrialKey {
    pub config_id: ConfigId,
    pub instance: Option<String>,
    pub seed: u64,
    pub budget: Option<f64>,
}

impl PartialEq for TrialKey {
    fn eq(&self, other: &Self) -> bool {
        self.config_id == other.config_id
            && self.instance == other.instance
            && self.seed == other.seed
            && self.budget.map(f64::to_bits) == other.budget.map(f64::to_bits)
    }
}

impl Eq for TrialKey {}

impl Hash for TrialKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.config_id.hash(state);
        self.instance.hash(state);
        self.seed.hash(state);
        self.budget.map(f64::to_bits).hash(state);
    }
}

impl fmt::Display for TrialKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, instance={}, seed={}, budget={})",
            self.config_id,
            self.instance.as_deref().unwrap_or("none"),
            self.seed,
            self.budget.map_or("none".to_string(), |b| b.to_string())
        )
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrialResult {
    pub cost: f64,
    pub runtime: f64,
    pub status: Status,
    pub censored: bool,
}

impl TrialResult {
    pub fn success(cost: f64, runtime: f64) -> Self {
        Self {
            cost,
            runtime,
            status: Status::Success,
            censored: false,
        }
    }

    pub fn running() -> Self {
        Self {
            cost: 0.0,
            runtime: 0.0,
            status: Status::Running,
            censored: false,
        }
    }
}

impl PartialEq for TrialResult {
    fn eq(&self, other: &Self) -> bool {
        self.cost.to_bits() == other.cost.to_bits()
            && self.runtime.to_bits() == other.runtime.to_bits()
            && self.status == other.status
            && self.censored == other.censored
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub result: TrialResult,
    /// Seconds since the Unix epoch at which the result was recorded.
    pub walltime_end: f64,
}

/// The record of every trial plus the configuration id table.
#[derive(Debug, Clone, Default)]
pub struct RunHistory {
    configs: Vec<Configuration>,
    ids: HashMap<Configuration, ConfigId>,
    trials: IndexMap<TrialKey, TrialRecord>,
    incumbent: Option<ConfigId>,
}

impl RunHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Id of `config`, registering it if unseen.
    pub fn add_config(&mut self, config: &Configuration) -> ConfigId {
        if let Some(&id) = self.ids.get(config) {
            return id;
        }
        let id = ConfigId(self.configs.len() as u32);
        self.configs.push(config.clone());
        self.ids.insert(config.clone(), id);
        id
    }

    pub fn config_id(&self, config: &Configuration) -> Option<ConfigId> {
        self.ids.get(config).copied()
    }

    pub fn config(&self, id: ConfigId) -> Option<&Configuration> {
        self.configs.get(id.0 as usize)
    }

    pub fn configs(&self) -> impl Iterator<Item = (ConfigId, &Configuration)> {
        self.configs.iter().enumerate().map(|(i, c)| (ConfigId(i as u32), c))
    }

    pub fn n_configs(&self) -> usize {
        self.configs.len()
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn incumbent(&self) -> Option<ConfigId> {
        self.incumbent
    }

    pub fn set_incumbent(&mut self, id: Option<ConfigId>) {
        self.incumbent = id;
    }

    /// Stores a trial. Overwriting a running placeholder is allowed and
    /// re-inserting an identical result is a no-op; any other collision is
    /// a conflict.
    pub fn add_trial(
        &mut self,
        key: TrialKey,
        result: TrialResult,
        walltime_end: f64,
    ) -> Result<(), RunHistoryError> {
        if key.config_id.0 as usize >= self.configs.len() {
            return Err(RunHistoryError::UnknownConfig(key.config_id));
        }
        if let Some(existing) = self.trials.get_mut(&key) {
            if existing.result == result {
                return Ok(());
            }
            if existing.result.status == Status::Running {
                *existing = TrialRecord {
                    result,
                    walltime_end,
                };
                return Ok(());
            }
            return Err(RunHistoryError::Conflict {
                key: key.to_string(),
                stored: existing.result,
                new: result,
            });
        }
        self.trials.insert(
            key,
            TrialRecord {
                result,
                walltime_end,
            },
        );
        Ok(())
    }

    pub fn get(&self, key: &TrialKey) -> Option<&TrialRecord> {
        self.trials.get(key)
    }

    pub fn contains(&self, key: &TrialKey) -> bool {
        self.trials.contains_key(key)
    }

    /// All trials in insertion order.
    pub fn trials(&self) -> impl Iterator<Item = (&TrialKey, &TrialRecord)> {
        self.trials.iter()
    }

    pub fn trials_of(&self, id: ConfigId) -> impl Iterator<Item = (&TrialKey, &TrialRecord)> {
        self.trials.iter().filter(move |(k, _)| k.config_id == id)
    }

    /// Completed trials (anything but running placeholders and aborts).
    pub fn n_completed(&self) -> usize {
        self.trials.values().filter(|r| r.result.status.is_complete()).count()
    }

    /// Mean cost of `id`: per instance the mean over seeds, then the mean
    /// over instances. `instances = None` uses every instance the
    /// configuration ran on; only trials whose budget equals `budget` count.
    pub fn aggregate_cost(
        &self,
        id: ConfigId,
        instances: Option<&[Option<String>]>,
        budget: Option<f64>,
    ) -> Result<f64, RunHistoryError> {
        let mut per_instance: BTreeMap<Option<&str>, (f64, usize)> = BTreeMap::new();
        for (k, r) in self.trials_of(id) {
            if !r.result.status.is_complete() {
                continue;
            }
            if k.budget.map(f64::to_bits) != budget.map(f64::to_bits) {
                continue;
            }
            if let Some(set) = instances {
                if !set.contains(&k.instance) {
                    continue;
                }
            }
            let e = per_instance.entry(k.instance.as_deref()).or_insert((0.0, 0));
            e.0 += r.result.cost;
            e.1 += 1;
        }
        if per_instance.is_empty() {
            return Err(RunHistoryError::NoTrials(id));
        }
        let n = per_instance.len() as f64;
        Ok(per_instance.values().map(|(s, c)| s / *c as f64).sum::<f64>() / n)
    }

    /// Cost assigned to crashed runs: ten times the cutoff for runtime
    /// objectives, otherwise twice the worst successful cost.
    pub fn penalty_ceiling(&self, objective: Objective, cutoff: Option<f64>) -> f64 {
        if let (Objective::Runtime, Some(c)) = (objective, cutoff) {
            return 10.0 * c;
        }
        let worst = self
            .trials
            .values()
            .filter(|r| r.result.status == Status::Success)
            .map(|r| r.result.cost)
            .fold(f64::NEG_INFINITY, f64::max);
        if !worst.is_finite() {
            return UNOBSERVED_PENALTY;
        }
        if worst > 0.0 {
            2.0 * worst
        } else {
            worst + worst.abs().max(1.0)
        }
    }

    /// Merges trials from `other`, remapping its configuration ids. On a key
    /// collision the result recorded earliest (by `walltime_end`) wins.
    pub fn merge(&mut self, other: &RunHistory) {
        for (k, r) in &other.trials {
            let config = &other.configs[k.config_id.0 as usize];
            let id = self.add_config(config);
            let key = TrialKey {
                config_id: id,
                ..k.clone()
            };
            match self.trials.get_mut(&key) {
                None => {
                    self.trials.insert(key, *r);
                }
                Some(existing) => {
                    if prefer(r, existing) {
                        *existing = *r;
                    }
                }
            }
        }
    }

    /// Order-independent view used to compare histories semantically.
    pub fn canonical(&self) -> Vec<CanonicalTrial> {
        let mut out: Vec<CanonicalTrial> = self
            .trials
            .iter()
            .map(|(k, r)| CanonicalTrial {
                config: self.configs[k.config_id.0 as usize].to_json().to_string(),
                instance: k.instance.clone(),
                seed: k.seed,
                budget: k.budget.map(f64::to_bits),
                cost: r.result.cost.to_bits(),
                runtime: r.result.runtime.to_bits(),
                status: r.result.status.as_str(),
                censored: r.result.censored,
                walltime_end: r.walltime_end.to_bits(),
            })
            .collect();
        out.sort();
        out
    }
}

/// Cost used for crashes before any successful run has been observed.
pub const UNOBSERVED_PENALTY: f64 = 1.0e9;

/// Whether `candidate` should replace `existing` under earliest-write-wins.
fn prefer(candidate: &TrialRecord, existing: &TrialRecord) -> bool {
    let (c_running, e_running) = (
        candidate.result.status == Status::Running,
        existing.result.status == Status::Running,
    );
    if c_running != e_running {
        return e_running;
    }
    match candidate.walltime_end.total_cmp(&existing.walltime_end) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        // deterministic tie-break so merge order never matters
        std::cmp::Ordering::Equal => {
            (candidate.result.cost.to_bits(), candidate.result.runtime.to_bits(), candidate.result.status.as_str())
                < (existing.result.cost.to_bits(), existing.result.runtime.to_bits(), existing.result.status.as_str())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CanonicalTrial {
    pub config: String,
    pub instance: Option<String>,
    pub seed: u64,
    pub budget: Option<u64>,
    pub cost: u64,
    pub runtime: u64,
    pub status: &'static str,
    pub censored: bool,
    pub walltime_end: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Value;

    pub(crate) fn cfg(x: f64) -> Configuration {
        Configuration::from_values([("x".to_string(), Value::Float(x))].into())
    }

    fn key(id: ConfigId, inst: Option<&str>, seed: u64) -> TrialKey {
        TrialKey {
            config_id: id,
            instance: inst.map(str::to_string),
            seed,
            budget: None,
        }
    }

    #[test]
    fn add_is_idempotent_and_rejects_conflicts() {
        let mut rh = RunHistory::new();
        let id = rh.add_config(&cfg(0.1));
        rh.add_trial(key(id, None, 0), TrialResult::success(1.0, 0.1), 0.0).unwrap();
        assert_eq!(rh.len(), 1);
        rh.add_trial(key(id, None, 0), TrialResult::success(1.0, 0.1), 5.0).unwrap();
        assert_eq!(rh.len(), 1);
        let err = rh.add_trial(key(id, None, 0), TrialResult::success(2.0, 0.1), 6.0);
        assert!(matches!(err, Err(RunHistoryError::Conflict { .. })));
    }

    #[test]
    fn running_placeholder_is_overwritten() {
        let mut rh = RunHistory::new();
        let id = rh.add_config(&cfg(0.1));
        rh.add_trial(key(id, None, 0), TrialResult::running(), 0.0).unwrap();
        rh.add_trial(key(id, None, 0), TrialResult::success(3.0, 1.0), 1.0).unwrap();
        assert_eq!(rh.get(&key(id, None, 0)).unwrap().result.cost, 3.0);
    }

    #[test]
    fn config_ids_are_a_bijection() {
        let mut rh = RunHistory::new();
        let a = rh.add_config(&cfg(0.1));
        let b = rh.add_config(&cfg(0.2));
        assert_ne!(a, b);
        assert_eq!(rh.add_config(&cfg(0.1)), a);
        assert_eq!(rh.config(b), Some(&cfg(0.2)));
    }

    #[test]
    fn aggregate_mean_over_instances() {
        let mut rh = RunHistory::new();
        let id = rh.add_config(&cfg(0.1));
        rh.add_trial(key(id, Some("i1"), 0), TrialResult::success(2.0, 1.0), 0.0).unwrap();
        rh.add_trial(key(id, Some("i2"), 0), TrialResult::success(4.0, 1.0), 0.0).unwrap();
        assert_eq!(rh.aggregate_cost(id, None, None).unwrap(), 3.0);
    }

    #[test]
    fn aggregate_single_trial() {
        let mut rh = RunHistory::new();
        let id = rh.add_config(&cfg(0.1));
        rh.add_trial(key(id, None, 0), TrialResult::success(7.0, 1.0), 0.0).unwrap();
        assert_eq!(rh.aggregate_cost(id, None, None).unwrap(), 7.0);
    }

    #[test]
    fn aggregate_nested_seed_means() {
        // i1 seeds cost 1 and 3 → 2; i2 costs 2 → mean(2, 2) = 2
        let mut rh = RunHistory::new();
        let id = rh.add_config(&cfg(0.1));
        rh.add_trial(key(id, Some("i1"), 0), TrialResult::success(1.0, 1.0), 0.0).unwrap();
        rh.add_trial(key(id, Some("i1"), 1), TrialResult::success(3.0, 1.0), 0.0).unwrap();
        rh.add_trial(key(id, Some("i2"), 0), TrialResult::success(2.0, 1.0), 0.0).unwrap();
        assert_eq!(rh.aggregate_cost(id, None, None).unwrap(), 2.0);
        let only_i1 = [Some("i1".to_string())];
        assert_eq!(rh.aggregate_cost(id, Some(&only_i1), None).unwrap(), 2.0);
    }

    #[test]
    fn aggregate_without_trials_is_error() {
        let mut rh = RunHistory::new();
        let id = rh.add_config(&cfg(0.1));
        assert!(matches!(rh.aggregate_cost(id, None, None), Err(RunHistoryError::NoTrials(_))));
    }

    #[test]
    fn penalty_policy() {
        let mut rh = RunHistory::new();
        assert_eq!(rh.penalty_ceiling(Objective::Runtime, Some(5.0)), 50.0);
        assert_eq!(rh.penalty_ceiling(Objective::Quality, None), UNOBSERVED_PENALTY);
        let id = rh.add_config(&cfg(0.1));
        rh.add_trial(key(id, None, 0), TrialResult::success(4.0, 1.0), 0.0).unwrap();
        assert_eq!(rh.penalty_ceiling(Objective::Quality, None), 8.0);
    }

    #[test]
    fn merge_identity_idempotence_union() {
        let mut a = RunHistory::new();
        let id = a.add_config(&cfg(0.1));
        a.add_trial(key(id, None, 0), TrialResult::success(1.0, 1.0), 1.0).unwrap();
        let mut b = RunHistory::new();
        let id = b.add_config(&cfg(0.2));
        b.add_trial(key(id, None, 0), TrialResult::success(2.0, 1.0), 2.0).unwrap();

        let mut m = a.clone();
        m.merge(&RunHistory::new());
        assert_eq!(m.canonical(), a.canonical());
        m.merge(&a);
        assert_eq!(m.canonical(), a.canonical());
        m.merge(&b);
        assert_eq!(m.len(), 2);
    }

    #[test]
    fn merge_earliest_write_wins() {
        let mut a = RunHistory::new();
        let id = a.add_config(&cfg(0.1));
        a.add_trial(key(id, None, 0), TrialResult::success(1.0, 1.0), 10.0).unwrap();
        let mut b = RunHistory::new();
        let id = b.add_config(&cfg(0.1));
        b.add_trial(key(id, None, 0), TrialResult::success(2.0, 1.0), 5.0).unwrap();
        let mut ab = a.clone();
        ab.merge(&b);
        let mut ba = b.clone();
        ba.merge(&a);
        assert_eq!(ab.canonical(), ba.canonical());
        assert_eq!(ab.trials().next().unwrap().1.result.cost, 2.0);
    }
}
