//! Scenario files.
//!
//! ```json
//! {
//!   "facade": "SMAC4BB",
//!   "space": "branin.space.json",
//!   "target": {"type": "builtin", "name": "branin"},
//!   "limits": {"max_trials": 50, "wallclock_s": 600, "cutoff_s": null},
//!   "instances": [],
//!   "budgets": {"min": 1, "max": 27, "eta": 3},
//!   "deterministic": true,
//!   "seed": 0,
//!   "output_dir": "smbo-output/branin",
//!   "workers": 1,
//!   "objective": "quality"
//! }
//! ```
//!
//! `space`, relative subprocess commands and `target.workdir` resolve
//! against the scenario file's directory; `output_dir` against the current
//! directory. A subprocess target runs in the scenario directory unless
//! `target.workdir` says otherwise.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value as Json;
use thiserror::Error;

use super::FacadeKind;
use crate::benchmarks::{Benchmark, BenchmarkError};
use crate::runhistory::Objective;
use crate::space::{parse_space, ConfigurationSpace, SpaceError};
use crate::tae::{SubprocessSpec, TargetSpec};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Json { path: String, message: String },
    #[error("space file {path}: {source}")]
    Space {
        path: String,
        #[source]
        source: SpaceError,
    },
    #[error("bad override '{0}': expected key=value")]
    OverrideSyntax(String),
    #[error("unknown scenario key '{0}'")]
    UnknownKey(String),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Multi-fidelity budget range.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    pub min: f64,
    pub max: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
}

fn default_eta() -> f64 {
    3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Limits {
    pub max_trials: Option<usize>,
    pub wallclock_s: Option<f64>,
    /// Per-trial cutoff in seconds.
    pub cutoff_s: Option<f64>,
}

/// Everything an optimization run needs besides the facade.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub space: ConfigurationSpace,
    pub target: TargetSpec,
    pub objective: Objective,
    pub limits: Limits,
    pub instances: Vec<String>,
    pub budgets: Option<Budgets>,
    pub deterministic: bool,
    pub seed: u64,
    /// Where run files go; `None` keeps everything in memory.
    pub output_dir: Option<PathBuf>,
    pub workers: usize,
}

impl Scenario {
    /// A scenario with 100 trials, one worker and no output files.
    pub fn new(space: ConfigurationSpace, target: TargetSpec) -> Self {
        Self {
            space,
            target,
            objective: Objective::Quality,
            limits: Limits {
                max_trials: Some(100),
                ..Limits::default()
            },
            instances: Vec::new(),
            budgets: None,
            deterministic: false,
            seed: 0,
            output_dir: None,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.space.is_empty() {
            return bad("the configuration space has no parameters".into());
        }
        if self.limits.max_trials.is_none() && self.limits.wallclock_s.is_none() {
            return bad("set limits.max_trials or limits.wallclock_s".into());
        }
        if let Some(w) = self.limits.wallclock_s {
            if !(w > 0.0) {
                return bad(format!("limits.wallclock_s must be positive, got {w}"));
            }
        }
        if let Some(c) = self.limits.cutoff_s {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("limits.cutoff_s must be positive, got {c}"));
            }
        }
        if self.objective == Objective::Runtime && self.limits.cutoff_s.is_none() {
            return bad("runtime objectives need limits.cutoff_s".into());
        }
        if let Some(b) = self.budgets {
            if !(b.min > 0.0 && b.min < b.max && b.max.is_finite()) {
                return bad(format!("budgets need 0 < min < max, got min={}, max={}", b.min, b.max));
            }
            if !(b.eta > 1.0) {
                return bad(format!("budgets.eta must exceed 1, got {}", b.eta));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for i in &self.instances {
            if !seen.insert(i) {
                return bad(format!("duplicate instance '{i}'"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CommandDoc {
    Line(String),
    Argv(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum TargetDoc {
    Subprocess {
        command: CommandDoc,
        #[serde(default)]
        workdir: Option<PathBuf>,
        #[serde(default)]
        env: BTreeMap<String, String>,
    },
    Builtin {
        name: String,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LimitsDoc {
    max_trials: Option<usize>,
    wallclock_s: Option<f64>,
    cutoff_s: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    facade: FacadeKind,
    space: PathBuf,
    target: TargetDoc,
    #[serde(default)]
    limits: LimitsDoc,
    #[serde(default)]
    instances: Vec<String>,
    #[serde(default)]
    budgets: Option<Budgets>,
    #[serde(default)]
    deterministic: bool,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default = "one")]
    workers: usize,
    #[serde(default)]
    objective: Option<Objective>,
}

fn one() -> usize {
    1
}

/// Keys `--set` may touch.
const OVERRIDABLE: &[&str] = &[
    "facade",
    "space",
    "target.type",
    "target.command",
    "target.name",
    "target.workdir",
    "limits.max_trials",
    "limits.wallclock_s",
    "limits.cutoff_s",
    "instances",
    "budgets.min",
    "budgets.max",
    "budgets.eta",
    "deterministic",
    "seed",
    "output_dir",
    "workers",
    "objective",
];

/// Applies a `key=value` override. The value is read as JSON when it parses
/// as JSON and as a plain string otherwise.
pub fn apply_override(doc: &mut Json, spec: &str) -> Result<(), ScenarioError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| ScenarioError::OverrideSyntax(spec.to_string()))?;
    let key = key.trim();
    if !OVERRIDABLE.contains(&key) && !key.starts_with("target.env.") {
        return Err(ScenarioError::UnknownKey(key.to_string()));
    }
    let value = serde_json::from_str::<Json>(raw).unwrap_or_else(|_| Json::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| ScenarioError::Invalid(format!("'{key}' does not address an object")))?;
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Json::Object(Default::default()));
        if node.is_null() {
            *node = Json::Object(Default::default());
        }
    }
    node.as_object_mut()
        .ok_or_else(|| ScenarioError::Invalid(format!("'{key}' does not address an object")))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Reads a scenario file, applying `overrides` before interpretation.
pub fn load_scenario(path: &Path, overrides: &[String]) -> Result<(FacadeKind, Scenario), ScenarioError> {
    let text = read(path)?;
    let jerr = |message: String| ScenarioError::Json {
        path: path.display().to_string(),
        message,
    };
    let mut doc: Json = serde_json::from_str(&text).map_err(|e| jerr(e.to_string()))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let doc: ScenarioDoc = serde_json::from_value(doc).map_err(|e| jerr(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();

    let space_path = resolve(&base, &doc.space);
    let space = parse_space(&read(&space_path)?).map_err(|source| ScenarioError::Space {
        path: space_path.display().to_string(),
        source,
    })?;

    let (target, default_objective) = match doc.target {
        TargetDoc::Builtin { name } => {
            let b: Benchmark = name.parse()?;
            (b.target(), b.objective())
        }
        TargetDoc::Subprocess { command, workdir, env } => {
            let mut argv = match command {
                CommandDoc::Line(s) => s.split_whitespace().map(str::to_string).collect(),
                CommandDoc::Argv(v) => v,
            };
            if argv.is_empty() {
                return Err(ScenarioError::Invalid("target.command is empty".into()));
            }
            if argv[0].contains('/') {
                argv[0] = resolve(&base, Path::new(&argv[0])).display().to_string();
            }
            let workdir = Some(workdir.map_or_else(|| base.clone(), |w| resolve(&base, &w)))
                .filter(|w| !w.as_os_str().is_empty());
            let spec = SubprocessSpec {
                command: argv,
                workdir,
                env: env.into_iter().collect(),
            };
            (TargetSpec::Subprocess(spec), Objective::Quality)
        }
    };

    let scenario = Scenario {
        space,
        target,
        objective: doc.objective.unwrap_or(default_objective),
        limits: Limits {
            max_trials: doc.limits.max_trials,
            wallclock_s: doc.limits.wallclock_s,
            cutoff_s: doc.limits.cutoff_s,
        },
        instances: doc.instances,
        budgets: doc.budgets,
        deterministic: doc.deterministic,
        seed: doc.seed,
        output_dir: doc.output_dir,
        workers: doc.workers,
    };
    scenario.validate()?;
    Ok((doc.facade, scenario))
}
