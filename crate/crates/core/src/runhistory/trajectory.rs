use crate::space::Configuration;

/// One incumbent change.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEntry {
    /// Seconds since the optimizer started.
    pub elapsed: f64,
    /// Completed trials at the time of the change.
    pub n_trials: usize,
    pub incumbent_config: Configuration,
    pub incumbent_cost: f64,
}

impl TrajectoryEntry {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "elapsed": self.elapsed,
            "n_trials": self.n_trials,
            "incumbent_config": self.incumbent_config.to_json(),
            "incumbent_cost": self.incumbent_cost,
        })
    }
}
