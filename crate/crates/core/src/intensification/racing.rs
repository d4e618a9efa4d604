//! Aggressive racing of challengers against the incumbent over
//! (instance, seed) pairs.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{completed, slot_mean, Next, RequestQueue, TrialRequest, Verdict};
use crate::runhistory::{ConfigId, RunHistory, TrialKey};
use crate::space::Configuration;

/// Hard cap on the number of runs of any configuration.
pub const MAX_RUNS_CAP: usize = 2000;

/// One (instance, seed) pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Slot {
    pub instance: Option<String>,
    pub seed: u64,
}

/// Progress of the current challenger.
#[derive(Debug, Clone)]
pub struct Race {
    pub challenger: ConfigId,
    /// Slots assigned to the challenger, always a subset of the incumbent's.
    pub runs: Vec<Slot>,
    /// Nominal size of the next challenger batch (1, 2, 4, ...).
    pub next_batch: usize,
    /// Actual sizes of the batches issued so far.
    pub batches: Vec<usize>,
    issued: Vec<TrialKey>,
}

#[derive(Debug, Clone)]
pub struct RacingState {
    pub incumbent: Option<ConfigId>,
    pub incumbent_runs: Vec<Slot>,
    pub r_max: usize,
    slots: Vec<Slot>,
    pub race: Option<Race>,
}

/// Output of one racing step.
#[derive(Debug, Clone, PartialEq)]
pub struct RaceStep {
    pub requests: Vec<TrialRequest>,
    pub verdict: Verdict,
}

impl RaceStep {
    fn verdict(verdict: Verdict) -> Self {
        Self {
            requests: Vec::new(),
            verdict,
        }
    }
}

impl RacingState {
    /// Slots are generated per replication index: each replication visits
    /// every instance once in a shuffled order, with one seed per (instance,
    /// replication) shared by all configurations. Deterministic targets use
    /// one replication with seed 0.
    pub fn new(instances: &[String], deterministic: bool, max_seeds: usize, rng: &mut ChaCha8Rng) -> Self {
        let insts: Vec<Option<String>> = if instances.is_empty() {
            vec![None]
        } else {
            instances.iter().cloned().map(Some).collect()
        };
        let reps = if deterministic { 1 } else { max_seeds.max(1) };
        let r_max = (insts.len() * reps).min(MAX_RUNS_CAP);
        let mut slots = Vec::with_capacity(r_max);
        'outer: for _ in 0..reps {
            let mut order = insts.clone();
            order.shuffle(rng);
            for instance in order {
                if slots.len() >= r_max {
                    break 'outer;
                }
                let seed = if deterministic { 0 } else { rng.random::<u32>() as u64 };
                slots.push(Slot { instance, seed });
            }
        }
        Self {
            incumbent: None,
            incumbent_runs: Vec::new(),
            r_max,
            slots,
            race: None,
        }
    }

    fn key(id: ConfigId, slot: &Slot) -> TrialKey {
        TrialKey {
            config_id: id,
            instance: slot.instance.clone(),
            seed: slot.seed,
            budget: None,
        }
    }

    fn request(config: &Configuration, slot: &Slot, cutoff: Option<f64>) -> TrialRequest {
        TrialRequest {
            config: config.clone(),
            instance: slot.instance.clone(),
            seed: slot.seed,
            budget: None,
            cutoff,
        }
    }

    /// Incumbent slots that already hold a completed result.
    pub fn completed_incumbent_runs(&self, rh: &RunHistory) -> Vec<Slot> {
        let Some(inc) = self.incumbent else { return Vec::new() };
        self.incumbent_runs
            .iter()
            .filter(|s| completed(rh, &Self::key(inc, s)).is_some())
            .cloned()
            .collect()
    }

    /// Advances the race of `challenger`.
    ///
    /// Once every trial of the previous step has a result, the challenger's
    /// mean on its slots is compared with the incumbent's on the same slots:
    /// worse rejects; better with every incumbent slot covered promotes.
    /// Otherwise the incumbent gains one slot (up to `r_max`) and the
    /// challenger receives the next, doubled batch of incumbent slots. While
    /// results are outstanding the step returns `Continue` with no requests.
    pub fn racing_step(
        &mut self,
        rh: &RunHistory,
        challenger: ConfigId,
        cutoff: Option<f64>,
        rng: &mut ChaCha8Rng,
    ) -> RaceStep {
        let Some(config) = rh.config(challenger).cloned() else {
            return RaceStep::verdict(Verdict::Reject);
        };
        if self.race.as_ref().is_none_or(|r| r.challenger != challenger) {
            let runs = match self.incumbent {
                Some(_) => self
                    .incumbent_runs
                    .iter()
                    .filter(|s| completed(rh, &Self::key(challenger, s)).is_some())
                    .cloned()
                    .collect(),
                None => Vec::new(),
            };
            self.race = Some(Race {
                challenger,
                runs,
                next_batch: 1,
                batches: Vec::new(),
                issued: Vec::new(),
            });
        }
        let race = self.race.as_mut().expect("race was just set");
        if race.issued.iter().any(|k| completed(rh, k).is_none()) {
            return RaceStep::verdict(Verdict::Continue);
        }

        let Some(incumbent) = self.incumbent else {
            // the first configuration becomes incumbent after one run
            let slot = self.slots[0].clone();
            if completed(rh, &Self::key(challenger, &slot)).is_some() {
                self.incumbent = Some(challenger);
                self.incumbent_runs = vec![slot];
                self.race = None;
                return RaceStep::verdict(Verdict::Promote);
            }
            race.issued = vec![Self::key(challenger, &slot)];
            race.runs = vec![slot.clone()];
            race.batches.push(1);
            return RaceStep {
                requests: vec![Self::request(&config, &slot, cutoff)],
                verdict: Verdict::Continue,
            };
        };
        if incumbent == challenger {
            log::info!("challenger {challenger} is the incumbent; skipped");
            self.race = None;
            return RaceStep::verdict(Verdict::Reject);
        }

        let mut requests = Vec::new();
        loop {
            let race = self.race.as_mut().expect("race in progress");
            if !race.runs.is_empty() {
                let (Some(ch), Some(inc)) = (
                    slot_mean(rh, challenger, &race.runs, None),
                    slot_mean(rh, incumbent, &race.runs, None),
                ) else {
                    return RaceStep::verdict(Verdict::Continue);
                };
                if ch > inc {
                    self.race = None;
                    return RaceStep::verdict(Verdict::Reject);
                }
                if race.runs.len() == self.incumbent_runs.len() {
                    self.race = None;
                    if ch < inc {
                        self.incumbent = Some(challenger);
                        return RaceStep::verdict(Verdict::Promote);
                    }
                    // ties keep the earlier configuration
                    return RaceStep::verdict(Verdict::Reject);
                }
            }

            race.issued.clear();
            if self.incumbent_runs.len() < self.r_max {
                let slot = self.slots[self.incumbent_runs.len()].clone();
                self.incumbent_runs.push(slot.clone());
                let key = Self::key(incumbent, &slot);
                if completed(rh, &key).is_none() {
                    let inc_config = rh.config(incumbent).expect("incumbent is registered");
                    requests.push(Self::request(inc_config, &slot, cutoff));
                }
                race.issued.push(key);
            }
            let available: Vec<Slot> = self
                .incumbent_runs
                .iter()
                .filter(|s| !race.runs.contains(s))
                .cloned()
                .collect();
            let n = race.next_batch.min(available.len());
            for i in sample(rng, available.len(), n).into_iter() {
                let slot = available[i].clone();
                let key = Self::key(challenger, &slot);
                if completed(rh, &key).is_none() {
                    requests.push(Self::request(&config, &slot, cutoff));
                }
                race.issued.push(key);
                race.runs.push(slot);
            }
            race.batches.push(n);
            race.next_batch *= 2;
            if !requests.is_empty() || race.issued.iter().any(|k| completed(rh, k).is_none()) {
                return RaceStep {
                    requests,
                    verdict: Verdict::Continue,
                };
            }
            // everything needed was cached; compare right away
        }
    }
}

/// Racing as a request-emitting intensifier.
#[derive(Debug, Clone)]
pub struct Racing {
    pub state: RacingState,
    cutoff: Option<f64>,
    queue: RequestQueue,
}

impl Racing {
    pub fn new(state: RacingState, cutoff: Option<f64>) -> Self {
        Self {
            state,
            cutoff,
            queue: RequestQueue::default(),
        }
    }

    pub fn ask(&mut self) -> Next {
        if let Some(r) = self.queue.pop() {
            return Next::Request(r);
        }
        if self.state.race.is_some() {
            Next::Wait
        } else {
            Next::NeedChallenger
        }
    }

    pub fn supply(&mut self, config: Configuration, rh: &RunHistory, rng: &mut ChaCha8Rng) {
        let Some(id) = rh.config_id(&config) else {
            log::warn!("racing challenger was not registered in the run history");
            return;
        };
        self.step(rh, id, rng);
    }

    fn step(&mut self, rh: &RunHistory, id: ConfigId, rng: &mut ChaCha8Rng) -> bool {
        let step = self.state.racing_step(rh, id, self.cutoff, rng);
        for r in step.requests {
            self.queue.push(r);
        }
        step.verdict == Verdict::Promote
    }

    pub fn process(&mut self, rh: &RunHistory, rng: &mut ChaCha8Rng) -> bool {
        match self.state.race.as_ref() {
            Some(r) if self.queue.is_empty() => {
                let id = r.challenger;
                self.step(rh, id, rng)
            }
            _ => false,
        }
    }
}
