//! The optimization loop: initial design, surrogate, acquisition and
//! intensifier wired together behind an ask/tell interface.

mod facade;
mod scenario;

use std::collections::{HashSet, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::acquisition::{maximize_acquisition, Acquisition, AcquisitionKind};
use crate::design::{default_design_size, generate_design, DesignError, DesignKind, DesignSpec};
use crate::intensification::{
    HyperbandRunner, IntensificationError, Intensifier, Next, OneShot, Racing, RacingState, TrialRequest,
};
use crate::runhistory::{
    impute_censored, read_history, write_history, write_trajectory, ImputationSettings, Objective, RunHistory,
    RunHistoryError, Status, TrajectoryEntry, TrialKey, TrialResult,
};
use crate::space::{Configuration, Encoding};
use crate::surrogate::{Model, Surrogate, SurrogateKind};
use crate::tae::{TaeError, WorkerPool};

pub use facade::{FacadeConfig, FacadeKind, IntensifierKind};
pub use scenario::{apply_override, load_scenario, Budgets, Limits, Scenario, ScenarioError};

/// Crash-rate abort: more than half of the first this-many trials crashing.
pub const CRASH_WINDOW: usize = 20;
/// How often sibling run histories in the output directory are re-read.
pub const SYNC_INTERVAL: Duration = Duration::from_secs(30);

const MAX_ASK_STEPS: usize = 10_000;
const RANDOM_ATTEMPTS: usize = 1000;
const MODEL_CANDIDATES: usize = 20;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Intensification(#[from] IntensificationError),
    #[error(transparent)]
    History(#[from] RunHistoryError),
    #[error(transparent)]
    Tae(#[from] TaeError),
    #[error("result for {0} was never requested")]
    UnknownRequest(String),
    #[error("result for {0} was already told")]
    DuplicateResult(String),
    #[error("target aborted the run: {0}")]
    TargetAborted(String),
    #[error("{crashed} of the first {seen} trials crashed; last failure: {detail}")]
    CrashRate { crashed: usize, seen: usize, detail: String },
    #[error("no configuration has a result yet")]
    NoIncumbent,
    #[error("interrupted")]
    Interrupted,
}

/// Answer to [`Optimizer::ask`].
#[derive(Debug, Clone, PartialEq)]
pub enum Ask {
    Trial(TrialRequest),
    /// Tell outstanding results first.
    Wait,
    /// The trial or time limit is reached, or the space is used up.
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub incumbent: Configuration,
    pub incumbent_cost: f64,
    pub trajectory: Vec<TrajectoryEntry>,
    pub run_history_path: Option<PathBuf>,
    pub trajectory_path: Option<PathBuf>,
    pub n_trials: usize,
}

/// A censored observation and the value that replaced it, in cost units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Imputation {
    pub threshold: f64,
    pub value: f64,
}

struct Fitted {
    model: Model,
    acquisition: Acquisition,
}

type IncumbentCallback = Box<dyn FnMut(&TrajectoryEntry) + Send>;

/// An optimizer built from a scenario and a [`FacadeConfig`].
pub struct Optimizer {
    scenario: Scenario,
    config: FacadeConfig,
    scheme: Encoding,
    rh: RunHistory,
    intensifier: Intensifier,
    rng: ChaCha8Rng,
    design: VecDeque<Configuration>,
    proposed: HashSet<Configuration>,
    outstanding: HashSet<TrialKey>,
    model_turn: bool,
    n_asked: usize,
    n_told: usize,
    early_crashes: usize,
    last_crash: Option<String>,
    exhausted: bool,
    trajectory: Vec<TrajectoryEntry>,
    start: Instant,
    siblings: RunHistory,
    last_sync: Instant,
    sync_interval: Duration,
    stop: Arc<AtomicBool>,
    on_incumbent: Option<IncumbentCallback>,
    imputations: Vec<Imputation>,
}

/// Builds the optimizer of a preset.
pub fn make_facade(kind: FacadeKind, scenario: Scenario) -> Result<Optimizer, OptimizeError> {
    if kind == FacadeKind::Mf && scenario.budgets.is_none() {
        return Err(OptimizeError::Unsupported(
            "SMAC4MF needs budgets {min, max, eta} in the scenario".into(),
        ));
    }
    Optimizer::new(scenario, FacadeConfig::preset(kind))
}

fn now_epoch() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

impl Optimizer {
    pub fn new(scenario: Scenario, config: FacadeConfig) -> Result<Self, OptimizeError> {
        scenario.validate()?;
        let space = &scenario.space;
        if config.surrogate == SurrogateKind::Gp && space.condition_depth() > 1 {
            return Err(OptimizeError::Unsupported(format!(
                "the Gaussian-process facade supports at most one level of conditions (this space has {}); \
                 use SMAC4HPO for hierarchical spaces",
                space.condition_depth()
            )));
        }
        let scheme = match config.surrogate {
            SurrogateKind::Gp => Encoding::OneHot,
            SurrogateKind::Forest(_) => Encoding::Index,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);

        let n_design = match config.design {
            DesignKind::Default => 1,
            _ => config
                .n_initial
                .unwrap_or_else(|| default_design_size(space, scenario.limits.max_trials.unwrap_or(usize::MAX))),
        };
        let design = generate_design(
            space,
            &DesignSpec {
                kind: config.design,
                n_points: n_design.max(1),
                seed: rng.random(),
            },
        )?;

        let trial_seed = if scenario.deterministic { 0 } else { rng.random::<u32>() as u64 };
        let cutoff = scenario.limits.cutoff_s;
        let intensifier = match config.intensifier {
            IntensifierKind::OneShot => {
                if scenario.instances.len() > 1 {
                    log::warn!("one-shot intensification evaluates on the first instance only");
                }
                Intensifier::OneShot(OneShot::new(
                    scenario.instances.first().cloned(),
                    trial_seed,
                    scenario.budgets.map(|b| b.max),
                    cutoff,
                ))
            }
            IntensifierKind::Racing => {
                if scenario.instances.is_empty() {
                    log::warn!("no instances given; racing in single-instance mode");
                }
                if scenario.budgets.is_some() {
                    log::warn!("racing ignores budgets");
                }
                let state = RacingState::new(&scenario.instances, scenario.deterministic, config.max_seeds, &mut rng);
                Intensifier::Racing(Racing::new(state, cutoff))
            }
            IntensifierKind::Hyperband => {
                let b = scenario.budgets.ok_or_else(|| {
                    OptimizeError::Unsupported("Hyperband needs budgets {min, max, eta} in the scenario".into())
                })?;
                Intensifier::Hyperband(HyperbandRunner::new(b.eta, b.min, b.max, trial_seed, cutoff)?)
            }
        };

        let now = Instant::now();
        Ok(Self {
            scenario,
            config,
            scheme,
            rh: RunHistory::new(),
            intensifier,
            rng,
            design: design.into(),
            proposed: HashSet::new(),
            outstanding: HashSet::new(),
            model_turn: true,
            n_asked: 0,
            n_told: 0,
            early_crashes: 0,
            last_crash: None,
            exhausted: false,
            trajectory: Vec::new(),
            start: now,
            siblings: RunHistory::new(),
            last_sync: now,
            sync_interval: SYNC_INTERVAL,
            stop: Arc::new(AtomicBool::new(false)),
            on_incumbent: None,
            imputations: Vec::new(),
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn config(&self) -> &FacadeConfig {
        &self.config
    }

    pub fn run_history(&self) -> &RunHistory {
        &self.rh
    }

    pub fn intensifier(&self) -> &Intensifier {
        &self.intensifier
    }

    pub fn trajectory(&self) -> &[TrajectoryEntry] {
        &self.trajectory
    }

    /// Every imputation performed so far.
    pub fn imputations(&self) -> &[Imputation] {
        &self.imputations
    }

    /// Trials whose results have been told.
    pub fn n_trials(&self) -> usize {
        self.n_told
    }

    pub fn incumbent(&self) -> Option<(Configuration, f64)> {
        let id = self.intensifier.incumbent()?;
        let cost = self.intensifier.incumbent_cost(&self.rh)?;
        Some((self.rh.config(id)?.clone(), cost))
    }

    /// Flag that stops the run (checked between trials).
    pub fn stop_flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.stop)
    }

    pub fn set_stop_flag(&mut self, flag: Arc<AtomicBool>) {
        self.stop = flag;
    }

    pub fn set_sync_interval(&mut self, every: Duration) {
        self.sync_interval = every;
    }

    /// Called with every new trajectory entry.
    pub fn on_incumbent(&mut self, f: impl FnMut(&TrajectoryEntry) + Send + 'static) {
        self.on_incumbent = Some(Box::new(f));
    }

    /// Directory holding this run's files: `<output_dir>/run-<seed>`.
    pub fn run_dir(&self) -> Option<PathBuf> {
        self.scenario
            .output_dir
            .as_ref()
            .map(|d| d.join(format!("run-{}", self.scenario.seed)))
    }

    fn limits_reached(&self) -> bool {
        if self.exhausted || self.stop.load(Ordering::SeqCst) {
            return true;
        }
        if self.scenario.limits.max_trials.is_some_and(|m| self.n_asked >= m) {
            return true;
        }
        self.scenario
            .limits
            .wallclock_s
            .is_some_and(|w| self.start.elapsed().as_secs_f64() >= w)
    }

    /// The next trial to run.
    pub fn ask(&mut self) -> Result<Ask, OptimizeError> {
        if self.limits_reached() {
            return Ok(Ask::Exhausted);
        }
        for _ in 0..MAX_ASK_STEPS {
            match self.intensifier.ask(&self.rh) {
                Next::Request(r) => {
                    let key = r.key(&mut self.rh);
                    if self.rh.contains(&key) {
                        self.intensifier.process(&self.rh, &mut self.rng);
                        continue;
                    }
                    self.rh.add_trial(key.clone(), TrialResult::running(), now_epoch())?;
                    self.outstanding.insert(key);
                    self.n_asked += 1;
                    return Ok(Ask::Trial(r));
                }
                Next::Wait => {
                    if self.outstanding.is_empty() {
                        log::warn!("intensifier is waiting without outstanding trials; stopping");
                        self.exhausted = true;
                        return Ok(Ask::Exhausted);
                    }
                    return Ok(Ask::Wait);
                }
                Next::NeedChallenger => {
                    let Some(c) = self.next_challenger() else {
                        log::info!("no new configurations left to propose");
                        self.exhausted = true;
                        return Ok(Ask::Exhausted);
                    };
                    self.rh.add_config(&c);
                    self.intensifier.supply(c, &self.rh, &mut self.rng);
                    self.note_incumbent();
                }
            }
        }
        log::warn!("intensifier made no progress in {MAX_ASK_STEPS} steps; stopping");
        self.exhausted = true;
        Ok(Ask::Exhausted)
    }

    /// Records the result of a request handed out by [`Optimizer::ask`].
    pub fn tell(&mut self, request: &TrialRequest, result: TrialResult) -> Result<(), OptimizeError> {
        let key = request
            .existing_key(&self.rh)
            .ok_or_else(|| OptimizeError::UnknownRequest(format!("{:?}", request.config)))?;
        if !self.outstanding.remove(&key) {
            let completed = self.rh.get(&key).is_some_and(|r| r.result.status.is_complete());
            return Err(if completed {
                OptimizeError::DuplicateResult(key.to_string())
            } else {
                OptimizeError::UnknownRequest(key.to_string())
            });
        }
        self.record(key, result)
    }

    /// Injects a result that was not requested (e.g. from an earlier run).
    pub fn tell_external(&mut self, request: &TrialRequest, result: TrialResult) -> Result<(), OptimizeError> {
        let key = request.key(&mut self.rh);
        if self.rh.contains(&key) {
            return Err(OptimizeError::DuplicateResult(key.to_string()));
        }
        self.proposed.insert(request.config.clone());
        self.record(key, result)
    }

    fn normalize(&self, mut r: TrialResult) -> TrialResult {
        let cutoff = self.scenario.limits.cutoff_s;
        let objective = self.scenario.objective;
        let penalty = self.rh.penalty_ceiling(objective, cutoff);
        match r.status {
            Status::Crashed | Status::Memout => {
                r.cost = penalty;
                r.censored = false;
            }
            Status::Timeout => match (objective, cutoff) {
                (Objective::Runtime, Some(c)) => {
                    r.cost = c;
                    r.censored = true;
                }
                _ => {
                    r.cost = penalty;
                    r.censored = false;
                }
            },
            _ => r.censored = false,
        }
        r
    }

    fn record(&mut self, key: TrialKey, result: TrialResult) -> Result<(), OptimizeError> {
        match result.status {
            Status::Abort => {
                return Err(OptimizeError::TargetAborted(
                    self.last_crash.clone().unwrap_or_else(|| key.to_string()),
                ))
            }
            Status::Running => {
                return Err(OptimizeError::UnknownRequest(format!("{key} told as still running")));
            }
            _ => {}
        }
        let r = self.normalize(result);
        self.rh.add_trial(key, r, now_epoch())?;
        self.n_told += 1;
        if self.n_told <= CRASH_WINDOW && r.status == Status::Crashed {
            self.early_crashes += 1;
            if 2 * self.early_crashes > CRASH_WINDOW {
                return Err(OptimizeError::CrashRate {
                    crashed: self.early_crashes,
                    seen: self.n_told,
                    detail: self.last_crash.clone().unwrap_or_else(|| "unknown".into()),
                });
            }
        }
        self.intensifier.process(&self.rh, &mut self.rng);
        self.note_incumbent();
        Ok(())
    }

    fn note_incumbent(&mut self) {
        let Some(id) = self.intensifier.incumbent() else { return };
        let Some(cost) = self.intensifier.incumbent_cost(&self.rh) else { return };
        let Some(config) = self.rh.config(id).cloned() else { return };
        if self.trajectory.last().is_some_and(|e| e.incumbent_config == config) {
            return;
        }
        self.rh.set_incumbent(Some(id));
        let entry = TrajectoryEntry {
            elapsed: self.start.elapsed().as_secs_f64(),
            n_trials: self.n_told,
            incumbent_config: config,
            incumbent_cost: cost,
        };
        if let Some(f) = self.on_incumbent.as_mut() {
            f(&entry);
        }
        self.trajectory.push(entry);
    }

    fn next_challenger(&mut self) -> Option<Configuration> {
        if let Some(c) = self.design.pop_front() {
            self.proposed.insert(c.clone());
            return Some(c);
        }
        let use_model = !self.config.interleave_random || self.model_turn;
        self.model_turn = !self.model_turn;
        if use_model {
            if let Some(c) = self.model_challenger() {
                self.proposed.insert(c.clone());
                return Some(c);
            }
        }
        self.random_challenger()
    }

    fn random_challenger(&mut self) -> Option<Configuration> {
        if let Some(size) = self.scenario.space.finite_size() {
            if self.proposed.len() as u128 >= size {
                return None;
            }
        }
        for _ in 0..RANDOM_ATTEMPTS {
            let c = self.scenario.space.sample(&mut self.rng);
            if self.proposed.insert(c.clone()) {
                return Some(c);
            }
        }
        None
    }

    fn model_challenger(&mut self) -> Option<Configuration> {
        let fitted = match self.fit() {
            Ok(f) => f?,
            Err(e) => {
                log::debug!("surrogate unavailable: {e}");
                return None;
            }
        };
        let evaluated: Vec<Configuration> = {
            let mut seen = HashSet::new();
            self.rh
                .trials()
                .filter(|(_, r)| r.result.status.is_complete())
                .filter(|(k, _)| seen.insert(k.config_id))
                .filter_map(|(k, _)| self.rh.config(k.config_id).cloned())
                .collect()
        };
        let out = maximize_acquisition(
            &fitted.acquisition,
            &fitted.model,
            &self.scenario.space,
            self.scheme,
            &evaluated,
            MODEL_CANDIDATES,
            &self.config.maximizer,
            &mut self.rng,
        );
        match out {
            Ok(cands) => cands.into_iter().map(|s| s.config).find(|c| !self.proposed.contains(c)),
            Err(e) => {
                log::debug!("acquisition maximization failed: {e}");
                None
            }
        }
    }

    /// Fits the surrogate on everything observed so far (including sibling
    /// runs) and builds the acquisition function. `Ok(None)` when there is
    /// too little data.
    fn fit(&mut self) -> Result<Option<Fitted>, String> {
        let objective = self.scenario.objective;
        let cutoff = self.scenario.limits.cutoff_s;
        let merged;
        let source = if self.siblings.is_empty() {
            &self.rh
        } else {
            let mut m = self.rh.clone();
            m.merge(&self.siblings);
            merged = m;
            &merged
        };
        let crash_cost = source.penalty_ceiling(objective, cutoff);
        let data = match source.training_data(&self.scenario.space, self.scheme, crash_cost) {
            Ok(d) => d,
            Err(RunHistoryError::NoUsableData) => return Ok(None),
            Err(e) => return Err(e.to_string()),
        };
        if data.len() < 2 {
            return Ok(None);
        }

        let kind = self.config.acquisition;
        let log_y = kind == AcquisitionKind::LogEi;
        let min_y = data.y.iter().copied().fold(f64::INFINITY, f64::min);
        let offset = if !log_y || min_y > 0.0 { 0.0 } else { 1e-3 - min_y };
        let fwd = |v: f64| if log_y { (v + offset).ln() } else { v };
        let inv = |v: f64| if log_y { v.exp() - offset } else { v };
        let mut y: Vec<f64> = data.y.iter().map(|&v| fwd(v)).collect();

        let surrogate = self.config.surrogate;
        let seed: u64 = self.rng.random();
        if self.config.impute_censored && data.n_censored() > 0 {
            let mut td = data.clone();
            td.y = y.clone();
            let settings = ImputationSettings::with_ceiling(fwd(crash_cost));
            let fitted = impute_censored(&td, settings, |x, yy| {
                Model::fit(surrogate, x, yy, seed).map_err(|e| e.to_string())
            });
            match fitted {
                Ok(values) => {
                    let idx = (0..data.len()).filter(|&i| data.censored[i]);
                    for (i, v) in idx.zip(values) {
                        self.imputations.push(Imputation {
                            threshold: data.y[i],
                            value: inv(v).max(data.y[i]),
                        });
                        y[i] = v;
                    }
                }
                Err(e) => log::warn!("imputation failed, using thresholds: {e}"),
            }
        }
        let model = Model::fit(surrogate, &data.x, &y, seed).map_err(|e| e.to_string())?;

        let incumbent = self
            .intensifier
            .incumbent_cost(&self.rh)
            .filter(|_| self.intensifier.incumbent_budget().map(f64::to_bits) == data.budget.map(f64::to_bits));
        let f_orig = incumbent.unwrap_or(min_y);
        let f_star = if kind == AcquisitionKind::LogEi {
            (f_orig + offset).max(f64::MIN_POSITIVE)
        } else {
            fwd(f_orig)
        };
        let runtime_model: Option<Arc<dyn Surrogate + Send + Sync>> = if kind == AcquisitionKind::EiPerSec {
            let t: Vec<f64> = data.runtime.iter().map(|r| r.max(1e-6).ln()).collect();
            Some(Arc::new(Model::fit(surrogate, &data.x, &t, seed ^ 0x5eed).map_err(|e| e.to_string())?))
        } else {
            None
        };
        let acquisition = Acquisition::build(kind, Some(f_star), Some(self.config.lcb_beta), runtime_model)
            .map_err(|e| e.to_string())?;
        Ok(Some(Fitted { model, acquisition }))
    }

    /// Writes the run history and trajectory of this run.
    pub fn flush(&self) -> Result<(), OptimizeError> {
        let Some(dir) = self.run_dir() else { return Ok(()) };
        let digest = self.scenario.space.digest();
        write_history(&dir.join("runhistory.jsonl"), &self.rh, &digest)?;
        write_trajectory(&dir.join("trajectory.jsonl"), &self.trajectory, &digest)?;
        Ok(())
    }

    /// Flushes this run and re-reads the histories of sibling runs sharing
    /// the output directory.
    pub fn sync_siblings(&mut self) -> Result<(), OptimizeError> {
        self.last_sync = Instant::now();
        let (Some(out), Some(own)) = (self.scenario.output_dir.clone(), self.run_dir()) else {
            return Ok(());
        };
        self.flush()?;
        let mut merged = RunHistory::new();
        for path in sibling_histories(&out, &own) {
            match read_history(&path, &self.scenario.space) {
                Ok(f) => merged.merge(&f.history),
                Err(e) => log::debug!("skipping {}: {e}", path.display()),
            }
        }
        self.siblings = merged;
        Ok(())
    }

    /// Runs ask → evaluate → tell until a limit is hit, evaluating up to
    /// `workers` trials concurrently, then writes the output files.
    pub fn optimize(&mut self) -> Result<OptimizeResult, OptimizeError> {
        let mut pool = WorkerPool::new(self.scenario.target.clone(), self.scenario.workers)?;
        let outcome = self.drive(&mut pool);
        let cancelled = pool.shutdown();
        if !cancelled.is_empty() {
            log::info!("cancelled {} in-flight trials", cancelled.len());
        }
        self.flush()?;
        outcome?;
        self.result()
    }

    fn drive(&mut self, pool: &mut WorkerPool) -> Result<(), OptimizeError> {
        let mut ticket = 0u64;
        loop {
            if self.stop.load(Ordering::SeqCst) {
                return Err(OptimizeError::Interrupted);
            }
            while pool.in_flight() < pool.capacity() {
                match self.ask()? {
                    Ask::Trial(r) => {
                        pool.submit(ticket, r)?;
                        ticket += 1;
                    }
                    Ask::Wait | Ask::Exhausted => break,
                }
            }
            if pool.in_flight() == 0 {
                return if self.stop.load(Ordering::SeqCst) {
                    Err(OptimizeError::Interrupted)
                } else {
                    Ok(())
                };
            }
            if let Some(c) = pool.recv_timeout(Duration::from_millis(50)) {
                if c.outcome.is_cancelled() {
                    continue;
                }
                if let Some(d) = &c.outcome.detail {
                    log::debug!("trial failed: {d}");
                    self.last_crash = Some(d.clone());
                }
                self.tell(&c.request, c.outcome.result)?;
            }
            if self.scenario.output_dir.is_some() && self.last_sync.elapsed() >= self.sync_interval {
                self.sync_siblings()?;
            }
        }
    }

    pub fn result(&self) -> Result<OptimizeResult, OptimizeError> {
        let (incumbent, incumbent_cost) = self.incumbent().ok_or(OptimizeError::NoIncumbent)?;
        let dir = self.run_dir();
        Ok(OptimizeResult {
            incumbent,
            incumbent_cost,
            trajectory: self.trajectory.clone(),
            run_history_path: dir.as_ref().map(|d| d.join("runhistory.jsonl")),
            trajectory_path: dir.as_ref().map(|d| d.join("trajectory.jsonl")),
            n_trials: self.n_told,
        })
    }
}

fn sibling_histories(out: &Path, own: &Path) -> Vec<PathBuf> {
    let Ok(entries) = fs::read_dir(out) else { return Vec::new() };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_dir() && p != own)
        .map(|p| p.join("runhistory.jsonl"))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    paths
}
