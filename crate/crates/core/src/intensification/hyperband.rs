//! Successive halving over a geometric budget ladder, and Hyperband's cycle
//! of brackets.

use super::{completed, IntensificationError, Next, RequestQueue, TrialRequest};
use crate::runhistory::{ConfigId, RunHistory, TrialKey};
use crate::space::Configuration;

const REL_TOL: f64 = 1e-9;

/// `n` configurations evaluated at `budget`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rung {
    pub n: usize,
    pub budget: f64,
}

/// Bracket `s` starts `n` configurations at `budget`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub s: usize,
    pub n: usize,
    pub budget: f64,
}

fn check(eta: f64, b_min: f64, b_max: f64) -> Result<(), IntensificationError> {
    if !(eta > 1.0) {
        return Err(IntensificationError::InvalidEta(eta));
    }
    if !(b_min > 0.0 && b_min <= b_max && b_max.is_finite()) {
        return Err(IntensificationError::InvalidBudgets { b_min, b_max });
    }
    Ok(())
}

/// Rungs of one successive-halving bracket. Budgets climb as
/// `b_min·η^k`, the last rung is always at `b_max`, and `max(1, ⌊n_k/η⌋)`
/// configurations survive to the next rung.
pub fn sh_schedule(n: usize, eta: f64, b_min: f64, b_max: f64) -> Result<Vec<Rung>, IntensificationError> {
    check(eta, b_min, b_max)?;
    if n < 1 {
        return Err(IntensificationError::NoConfigs);
    }
    let mut rungs = Vec::new();
    let mut n_k = n;
    let mut k = 0;
    loop {
        let b = b_min * eta.powi(k);
        if b >= b_max * (1.0 - REL_TOL) {
            rungs.push(Rung { n: n_k, budget: b_max });
            return Ok(rungs);
        }
        rungs.push(Rung { n: n_k, budget: b });
        n_k = ((n_k as f64 / eta + REL_TOL).floor() as usize).max(1);
        k += 1;
    }
}

/// Brackets `s = s_max, …, 0` with `s_max = ⌊log_η(b_max/b_min)⌋`,
/// `n_s = ⌈(s_max+1)/(s+1)·η^s⌉` and initial budget `b_max·η^{−s}`.
pub fn hyperband_plan(eta: f64, b_min: f64, b_max: f64) -> Result<Vec<Bracket>, IntensificationError> {
    check(eta, b_min, b_max)?;
    let s_max = ((b_max / b_min).ln() / eta.ln() + REL_TOL).floor() as usize;
    Ok((0..=s_max)
        .rev()
        .map(|s| Bracket {
            s,
            n: ((s_max + 1) as f64 / (s + 1) as f64 * eta.powi(s as i32) - REL_TOL).ceil() as usize,
            budget: b_max / eta.powi(s as i32),
        })
        .collect())
}

/// Hyperband as a request-emitting intensifier. Brackets cycle from the
/// most to the least aggressive; survivors are the cheapest configurations
/// at each rung with ties going to the earlier proposal.
#[derive(Debug, Clone)]
pub struct HyperbandRunner {
    eta: f64,
    b_max: f64,
    plan: Vec<Bracket>,
    bracket: usize,
    rungs: Vec<Rung>,
    rung: usize,
    members: Vec<Configuration>,
    attempts: usize,
    seed: u64,
    cutoff: Option<f64>,
    queue: RequestQueue,
    incumbent: Option<ConfigId>,
    incumbent_budget: Option<f64>,
    /// Sum of the budgets of all issued requests.
    pub consumed: f64,
    /// Number of finished brackets.
    pub finished_brackets: usize,
}

impl HyperbandRunner {
    pub fn new(eta: f64, b_min: f64, b_max: f64, seed: u64, cutoff: Option<f64>) -> Result<Self, IntensificationError> {
        let plan = hyperband_plan(eta, b_min, b_max)?;
        let rungs = sh_schedule(plan[0].n, eta, plan[0].budget, b_max)?;
        Ok(Self {
            eta,
            b_max,
            plan,
            bracket: 0,
            rungs,
            rung: 0,
            members: Vec::new(),
            attempts: 0,
            seed,
            cutoff,
            queue: RequestQueue::default(),
            incumbent: None,
            incumbent_budget: None,
            consumed: 0.0,
            finished_brackets: 0,
        })
    }

    pub fn b_max(&self) -> f64 {
        self.b_max
    }

    pub fn plan(&self) -> &[Bracket] {
        &self.plan
    }

    /// The bracket currently running.
    pub fn current_bracket(&self) -> Bracket {
        self.plan[self.bracket]
    }

    pub fn current_rungs(&self) -> &[Rung] {
        &self.rungs
    }

    pub fn incumbent(&self) -> Option<ConfigId> {
        self.incumbent
    }

    /// Budget the incumbent was selected at: `b_max` once any configuration
    /// has a full-budget result, before that the highest budget observed.
    pub fn incumbent_budget(&self) -> Option<f64> {
        self.incumbent_budget
    }

    fn budget(&self) -> f64 {
        self.rungs[self.rung].budget
    }

    fn key(&self, rh: &RunHistory, c: &Configuration) -> Option<TrialKey> {
        Some(TrialKey {
            config_id: rh.config_id(c)?,
            instance: None,
            seed: self.seed,
            budget: Some(self.budget()),
        })
    }

    fn enqueue(&mut self, rh: &RunHistory, c: &Configuration) {
        if self.key(rh, c).is_some_and(|k| rh.contains(&k)) {
            return;
        }
        self.consumed += self.budget();
        self.queue.push(TrialRequest {
            config: c.clone(),
            instance: None,
            seed: self.seed,
            budget: Some(self.budget()),
            cutoff: self.cutoff,
        });
    }

    fn filling(&self) -> bool {
        self.rung == 0 && self.members.len() < self.rungs[0].n && self.attempts < 20 * self.rungs[0].n
    }

    pub fn ask(&mut self) -> Next {
        if let Some(r) = self.queue.pop() {
            return Next::Request(r);
        }
        if self.filling() {
            Next::NeedChallenger
        } else {
            Next::Wait
        }
    }

    /// Adds a challenger to the first rung of the current bracket; repeats
    /// within the rung are ignored.
    pub fn supply(&mut self, config: Configuration, rh: &RunHistory) {
        self.attempts += 1;
        if !self.filling() || self.members.contains(&config) {
            return;
        }
        self.enqueue(rh, &config);
        self.members.push(config);
        self.advance(rh);
    }

    fn cost(&self, rh: &RunHistory, c: &Configuration) -> Option<f64> {
        let key = self.key(rh, c)?;
        completed(rh, &key).map(|r| r.result.cost)
    }

    fn advance(&mut self, rh: &RunHistory) {
        loop {
            if self.filling() || !self.queue.is_empty() {
                return;
            }
            let costs: Option<Vec<f64>> = self.members.iter().map(|c| self.cost(rh, c)).collect();
            let Some(costs) = costs else { return };
            if self.rung + 1 >= self.rungs.len() {
                self.finished_brackets += 1;
                self.bracket = (self.bracket + 1) % self.plan.len();
                let b = self.plan[self.bracket];
                self.rungs = sh_schedule(b.n, self.eta, b.budget, self.b_max).expect("plan is valid");
                self.rung = 0;
                self.members.clear();
                self.attempts = 0;
                return;
            }
            let mut order: Vec<usize> = (0..self.members.len()).collect();
            order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
            let keep = self.rungs[self.rung + 1].n.min(order.len());
            let survivors: Vec<Configuration> = order[..keep].iter().map(|&i| self.members[i].clone()).collect();
            self.rung += 1;
            self.members = survivors.clone();
            for c in &survivors {
                self.enqueue(rh, c);
            }
        }
    }

    pub fn process(&mut self, rh: &RunHistory) -> bool {
        self.advance(rh);
        let top = rh
            .trials()
            .filter(|(_, r)| r.result.status.is_complete())
            .filter_map(|(k, _)| k.budget)
            .fold(None, |acc: Option<f64>, b| Some(acc.map_or(b, |a| a.max(b))));
        let Some(budget) = top else { return false };
        let mut best: Option<(ConfigId, f64)> = None;
        for (id, _) in rh.configs() {
            if let Ok(c) = rh.aggregate_cost(id, None, Some(budget)) {
                if best.is_none_or(|(_, b)| c < b) {
                    best = Some((id, c));
                }
            }
        }
        let new = best.map(|(id, _)| id);
        let changed = new != self.incumbent;
        self.incumbent = new;
        self.incumbent_budget = new.map(|_| budget);
        changed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runhistory::TrialResult;
    use crate::space::Value;

    fn pairs(r: &[Rung]) -> Vec<(usize, f64)> {
        r.iter().map(|r| (r.n, r.budget)).collect()
    }

    #[test]
    fn schedule_nine_three() {
        assert_eq!(pairs(&sh_schedule(9, 3.0, 1.0, 9.0).unwrap()), vec![(9, 1.0), (3, 3.0), (1, 9.0)]);
    }

    #[test]
    fn sole_survivor_climbs_the_ladder() {
        assert_eq!(pairs(&sh_schedule(1, 3.0, 1.0, 9.0).unwrap()), vec![(1, 1.0), (1, 3.0), (1, 9.0)]);
    }

    #[test]
    fn degenerate_ladder() {
        assert_eq!(pairs(&sh_schedule(4, 2.0, 5.0, 5.0).unwrap()), vec![(4, 5.0)]);
    }

    #[test]
    fn schedule_errors() {
        assert!(sh_schedule(0, 3.0, 1.0, 9.0).is_err());
        assert!(sh_schedule(3, 1.0, 1.0, 9.0).is_err());
        assert!(sh_schedule(3, 3.0, 10.0, 9.0).is_err());
    }

    #[test]
    fn plan_three_one_nine() {
        let p: Vec<(usize, usize, f64)> = hyperband_plan(3.0, 1.0, 9.0)
            .unwrap()
            .iter()
            .map(|b| (b.s, b.n, b.budget))
            .collect();
        assert_eq!(p, vec![(2, 9, 1.0), (1, 5, 3.0), (0, 3, 9.0)]);
    }

    #[test]
    fn plan_edge_cases() {
        let p = hyperband_plan(3.0, 4.0, 4.0).unwrap();
        assert_eq!(p, vec![Bracket { s: 0, n: 1, budget: 4.0 }]);
        assert_eq!(hyperband_plan(2.0, 1.0, 8.0).unwrap()[0].s, 3);
        let p = hyperband_plan(3.0, 1.0, 27.0).unwrap();
        assert_eq!(p[0], Bracket { s: 3, n: 27, budget: 1.0 });
        for b in &p {
            let r = sh_schedule(b.n, 3.0, b.budget, 27.0).unwrap();
            assert_eq!(r.last().unwrap().budget, 27.0);
        }
    }

    #[test]
    fn runner_consumes_exactly_the_schedule() {
        let mut hb = HyperbandRunner::new(3.0, 1.0, 9.0, 0, None).unwrap();
        let mut rh = RunHistory::new();
        let mut next_x = 0;
        for bracket in hyperband_plan(3.0, 1.0, 9.0).unwrap() {
            let expected: f64 = sh_schedule(bracket.n, 3.0, bracket.budget, 9.0)
                .unwrap()
                .iter()
                .map(|r| r.n as f64 * r.budget)
                .sum();
            let before = hb.consumed;
            let done = hb.finished_brackets;
            while hb.finished_brackets == done {
                match hb.ask() {
                    Next::NeedChallenger => {
                        let c = Configuration::from_values([("x".to_string(), Value::Int(next_x))].into());
                        next_x += 1;
                        rh.add_config(&c);
                        hb.supply(c, &rh);
                    }
                    Next::Request(r) => {
                        let x = r.config.get("x").unwrap().as_i64().unwrap() as f64;
                        let key = r.key(&mut rh);
                        let cost = (x - 7.0).abs() / r.budget.unwrap();
                        rh.add_trial(key, TrialResult::success(cost, 0.0), 0.0).unwrap();
                        hb.process(&rh);
                    }
                    Next::Wait => panic!("nothing outstanding"),
                }
            }
            assert_eq!(hb.consumed - before, expected);
        }
        assert!(hb.incumbent().is_some());
    }

    #[test]
    fn incumbent_falls_back_to_highest_observed_budget() {
        let mut hb = HyperbandRunner::new(3.0, 1.0, 9.0, 0, None).unwrap();
        let mut rh = RunHistory::new();
        for x in 0..3 {
            let c = Configuration::from_values([("x".to_string(), Value::Int(x))].into());
            rh.add_config(&c);
            hb.supply(c, &rh);
        }
        for _ in 0..3 {
            let Next::Request(r) = hb.ask() else { panic!("expected a request") };
            let cost = 5.0 - r.config.get("x").unwrap().as_i64().unwrap() as f64;
            let key = r.key(&mut rh);
            rh.add_trial(key, TrialResult::success(cost, 0.0), 0.0).unwrap();
        }
        assert!(hb.process(&rh));
        assert_eq!(hb.incumbent_budget(), Some(1.0));
        assert_eq!(rh.config(hb.incumbent().unwrap()).unwrap().get("x"), Some(&Value::Int(2)));
    }
}
