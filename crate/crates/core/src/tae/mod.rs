//! Target algorithm evaluators: run one [`TrialRequest`] against an
//! in-process function or an external program and classify the outcome.
//!
//! Evaluators report raw outcomes. Crashed trials carry an infinite cost
//! and timeouts carry `censored = true`; the optimizer maps both onto the
//! scenario's objective (penalty ceiling or cutoff) when the result is told.

mod pool;
pub mod protocol;
mod subprocess;

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

pub use crate::intensification::TrialRequest;
use crate::runhistory::{Status, TrialResult};
pub use pool::{Completion, WorkerPool};
pub use protocol::{build_command, parse_result_line, ResultLine, ResultLineError};

/// Extra time a killed process group gets before it counts as a leak.
pub const KILL_GRACE_S: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaeError {
    #[error("subprocess target needs a non-empty command")]
    EmptyCommand,
    #[error("worker pool needs at least one worker")]
    ZeroCapacity,
    #[error("worker pool has been shut down")]
    ShutDown,
}

/// Value returned by an in-process target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionOutput {
    pub cost: f64,
    /// Measured wall time is used when absent.
    pub runtime: Option<f64>,
}

impl From<f64> for FunctionOutput {
    fn from(cost: f64) -> Self {
        Self { cost, runtime: None }
    }
}

impl From<(f64, f64)> for FunctionOutput {
    fn from((cost, runtime): (f64, f64)) -> Self {
        Self {
            cost,
            runtime: Some(runtime),
        }
    }
}

pub type TargetFn = Arc<dyn Fn(&TrialRequest) -> Result<FunctionOutput, String> + Send + Sync>;

#[derive(Debug, Clone, PartialEq)]
pub struct SubprocessSpec {
    pub command: Vec<String>,
    pub workdir: Option<PathBuf>,
    /// Added to (never replacing) the parent environment.
    pub env: Vec<(String, String)>,
}

#[derive(Clone)]
pub enum TargetSpec {
    Function(TargetFn),
    Subprocess(SubprocessSpec),
}

impl fmt::Debug for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetSpec::Function(_) => f.write_str("Function(..)"),
            TargetSpec::Subprocess(s) => f.debug_tuple("Subprocess").field(s).finish(),
        }
    }
}

impl TargetSpec {
    pub fn function<F>(f: F) -> Self
    where
        F: Fn(&TrialRequest) -> Result<FunctionOutput, String> + Send + Sync + 'static,
    {
        TargetSpec::Function(Arc::new(f))
    }

    pub fn subprocess<S: Into<String>>(command: impl IntoIterator<Item = S>) -> Result<Self, TaeError> {
        let command: Vec<String> = command.into_iter().map(Into::into).collect();
        if command.is_empty() || command[0].is_empty() {
            return Err(TaeError::EmptyCommand);
        }
        Ok(TargetSpec::Subprocess(SubprocessSpec {
            command,
            workdir: None,
            env: Vec::new(),
        }))
    }

    pub fn with_workdir(mut self, dir: impl Into<PathBuf>) -> Self {
        if let TargetSpec::Subprocess(s) = &mut self {
            s.workdir = Some(dir.into());
        }
        self
    }

    pub fn with_env(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        if let TargetSpec::Subprocess(s) = &mut self {
            s.env.push((key.into(), value.into()));
        }
        self
    }
}

/// A classified result plus a human-readable reason for failures.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub result: TrialResult,
    pub detail: Option<String>,
}

impl Outcome {
    pub(crate) fn crashed(runtime: f64, detail: impl Into<String>) -> Self {
        Self {
            result: TrialResult {
                cost: f64::INFINITY,
                runtime,
                status: Status::Crashed,
                censored: false,
            },
            detail: Some(detail.into()),
        }
    }

    pub(crate) fn cancelled() -> Self {
        Self::crashed(0.0, "cancelled")
    }

    pub(crate) fn timeout(cutoff: f64, runtime: f64) -> Self {
        Self {
            result: TrialResult {
                cost: cutoff,
                runtime,
                status: Status::Timeout,
                censored: true,
            },
            detail: None,
        }
    }

    pub fn is_cancelled(&self) -> bool {
        self.result.status == Status::Crashed && self.detail.as_deref() == Some("cancelled")
    }
}

/// Evaluates `req` (blocking).
pub fn evaluate(spec: &TargetSpec, req: &TrialRequest) -> Outcome {
    evaluate_cancellable(spec, req, &AtomicBool::new(false))
}

/// Like [`evaluate`], but a subprocess is killed as soon as `cancel` is set.
pub fn evaluate_cancellable(spec: &TargetSpec, req: &TrialRequest, cancel: &AtomicBool) -> Outcome {
    match spec {
        TargetSpec::Function(f) => evaluate_function(f, req),
        TargetSpec::Subprocess(s) => subprocess::run(s, req, cancel),
    }
}

fn evaluate_function(f: &TargetFn, req: &TrialRequest) -> Outcome {
    let start = Instant::now();
    let out = catch_unwind(AssertUnwindSafe(|| f(req)));
    let elapsed = start.elapsed().as_secs_f64();
    let out = match out {
        Ok(Ok(o)) => o,
        Ok(Err(msg)) => return Outcome::crashed(elapsed, msg),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "target panicked".into());
            return Outcome::crashed(elapsed, msg);
        }
    };
    if !out.cost.is_finite() {
        return Outcome::crashed(elapsed, format!("non-finite cost {}", out.cost));
    }
    let runtime = out.runtime.unwrap_or(elapsed);
    if let Some(c) = req.cutoff.filter(|c| *c > 0.0) {
        if runtime > c {
            return Outcome::timeout(c, c);
        }
    }
    Outcome {
        result: TrialResult::success(out.cost, runtime),
        detail: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Configuration, Value};

    fn req(cutoff: Option<f64>) -> TrialRequest {
        TrialRequest {
            config: Configuration::from_values([("x".to_string(), Value::Float(0.5))].into()),
            instance: None,
            seed: 0,
            budget: None,
            cutoff,
        }
    }

    #[test]
    fn function_success() {
        let spec = TargetSpec::function(|r| Ok(r.config.get_f64("x").unwrap().into()));
        let o = evaluate(&spec, &req(None));
        assert_eq!(o.result.status, Status::Success);
        assert_eq!(o.result.cost, 0.5);
    }

    #[test]
    fn function_error_and_panic_crash() {
        let err = TargetSpec::function(|_| Err("boom".into()));
        let o = evaluate(&err, &req(None));
        assert_eq!(o.result.status, Status::Crashed);
        assert_eq!(o.detail.as_deref(), Some("boom"));
        let panics = TargetSpec::function(|_| panic!("kaput"));
        let o = evaluate(&panics, &req(None));
        assert_eq!(o.result.status, Status::Crashed);
        assert_eq!(o.detail.as_deref(), Some("kaput"));
    }

    #[test]
    fn simulated_runtime_over_cutoff_times_out() {
        let spec = TargetSpec::function(|_| Ok((3.0, 3.0).into()));
        let o = evaluate(&spec, &req(Some(2.0)));
        assert_eq!(o.result.status, Status::Timeout);
        assert!(o.result.censored);
        assert_eq!(o.result.cost, 2.0);
    }

    #[test]
    fn empty_command_rejected() {
        assert_eq!(TargetSpec::subprocess(Vec::<String>::new()).unwrap_err(), TaeError::EmptyCommand);
    }
}
