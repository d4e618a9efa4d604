//! Deterministic synthetic targets, one per facade.
//!
//! Each benchmark ships a space file and a scenario file under
//! `benchmarks/` in the crate root; [`Benchmark::space`] parses the same
//! embedded space document.

use std::f64::consts::PI;
use std::str::FromStr;
use std::sync::LazyLock;

use thiserror::Error;

use crate::runhistory::Objective;
use crate::space::{parse_space, Configuration, ConfigurationSpace};
use crate::tae::{FunctionOutput, TargetSpec};

/// Simulated seconds per budget unit reported by the quality benchmarks.
pub const NOMINAL_RUNTIME: f64 = 1e-3;

pub const BRANIN_OPTIMUM: f64 = 0.397_887_357_729_738_2;

const MF_OPTIMUM_X: [f64; 6] = [0.15, 0.85, 0.2, 0.8, 0.1, 0.75];
const MF_DECOY: [f64; 6] = [0.8, 0.15, 0.9, 0.1, 0.7, 0.3];
const MF_BIAS: f64 = 0.1;
const MF_FREQ: f64 = 3.0;
pub const MF_B_MAX: f64 = 27.0;

const AC_THETA_STAR: [f64; 4] = [0.2, 0.8, 0.3, 0.65];
const AC_INSTANCES: usize = 20;

static CASH_SPACE: LazyLock<ConfigurationSpace> = LazyLock::new(|| Benchmark::CashSynth.space());

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchmarkError {
    #[error("unknown benchmark '{0}' (expected branin, cash-synth, mf-quadratic or ac-runtime)")]
    Unknown(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown instance '{0}'")]
    UnknownInstance(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Benchmark {
    Branin,
    CashSynth,
    MfQuadratic,
    AcRuntime,
}

impl FromStr for Benchmark {
    type Err = BenchmarkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "branin" => Ok(Benchmark::Branin),
            "cash-synth" => Ok(Benchmark::CashSynth),
            "mf-quadratic" => Ok(Benchmark::MfQuadratic),
            "ac-runtime" => Ok(Benchmark::AcRuntime),
            other => Err(BenchmarkError::Unknown(other.to_string())),
        }
    }
}

impl Benchmark {
    pub const ALL: [Benchmark; 4] = [
        Benchmark::Branin,
        Benchmark::CashSynth,
        Benchmark::MfQuadratic,
        Benchmark::AcRuntime,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Branin => "branin",
            Benchmark::CashSynth => "cash-synth",
            Benchmark::MfQuadratic => "mf-quadratic",
            Benchmark::AcRuntime => "ac-runtime",
        }
    }

    pub fn space_document(self) -> &'static str {
        match self {
            Benchmark::Branin => include_str!("../../benchmarks/branin.space.json"),
            Benchmark::CashSynth => include_str!("../../benchmarks/cash-synth.space.json"),
            Benchmark::MfQuadratic => include_str!("../../benchmarks/mf-quadratic.space.json"),
            Benchmark::AcRuntime => include_str!("../../benchmarks/ac-runtime.space.json"),
        }
    }

    pub fn scenario_document(self) -> &'static str {
        match self {
            Benchmark::Branin => include_str!("../../benchmarks/branin.scenario.json"),
            Benchmark::CashSynth => include_str!("../../benchmarks/cash-synth.scenario.json"),
            Benchmark::MfQuadratic => include_str!("../../benchmarks/mf-quadratic.scenario.json"),
            Benchmark::AcRuntime => include_str!("../../benchmarks/ac-runtime.scenario.json"),
        }
    }

    pub fn space(self) -> ConfigurationSpace {
        parse_space(self.space_document()).expect("bundled space parses")
    }

    pub fn objective(self) -> Objective {
        match self {
            Benchmark::AcRuntime => Objective::Runtime,
            _ => Objective::Quality,
        }
    }

    /// Known optimal cost, where it is analytic.
    pub fn optimum(self) -> Option<f64> {
        match self {
            Benchmark::Branin => Some(BRANIN_OPTIMUM),
            Benchmark::MfQuadratic => Some(0.0),
            _ => None,
        }
    }

    pub fn instances(self) -> Vec<String> {
        match self {
            Benchmark::AcRuntime => (0..AC_INSTANCES).map(|i| format!("i{i:02}")).collect(),
            _ => Vec::new(),
        }
    }

    /// Cost of `config`. `seed` never changes the value.
    pub fn evaluate(
        self,
        config: &Configuration,
        instance: Option<&str>,
        _seed: u64,
        budget: Option<f64>,
    ) -> Result<FunctionOutput, BenchmarkError> {
        let nominal = |cost: f64| FunctionOutput {
            cost,
            runtime: Some(NOMINAL_RUNTIME * budget.unwrap_or(1.0)),
        };
        match self {
            Benchmark::Branin => {
                let x = numeric(config, &["x1", "x2"])?;
                Ok(nominal(branin(x[0], x[1])))
            }
            Benchmark::CashSynth => Ok(nominal(cash_synth(&CASH_SPACE, config)?)),
            Benchmark::MfQuadratic => {
                let x = numeric(config, &["x0", "x1", "x2", "x3", "x4", "x5"])?;
                let b = budget.unwrap_or(MF_B_MAX).clamp(0.0, MF_B_MAX);
                Ok(nominal(mf_quadratic(&x, b)))
            }
            Benchmark::AcRuntime => {
                let theta = numeric(config, &["theta0", "theta1", "theta2", "theta3"])?;
                let name = instance.ok_or_else(|| BenchmarkError::UnknownInstance("none".into()))?;
                let i = parse_instance(name)?;
                let t = ac_runtime(&theta, i);
                Ok(FunctionOutput { cost: t, runtime: Some(t) })
            }
        }
    }

    /// In-process target handle.
    pub fn target(self) -> TargetSpec {
        TargetSpec::function(move |req| {
            self.evaluate(&req.config, req.instance.as_deref(), req.seed, req.budget)
                .map_err(|e| e.to_string())
        })
    }
}

fn numeric(config: &Configuration, names: &[&str]) -> Result<Vec<f64>, BenchmarkError> {
    names
        .iter()
        .map(|n| {
            config
                .get_f64(n)
                .ok_or_else(|| BenchmarkError::InvalidConfig(format!("missing numeric parameter '{n}'")))
        })
        .collect()
}

pub fn branin(x1: f64, x2: f64) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

fn unit(space: &ConfigurationSpace, config: &Configuration, name: &str) -> Result<f64, BenchmarkError> {
    let p = space.parameter(name).expect("bundled parameter");
    let v = config
        .get(name)
        .ok_or_else(|| BenchmarkError::InvalidConfig(format!("'{name}' must be active")))?;
    p.to_unit(v)
        .ok_or_else(|| BenchmarkError::InvalidConfig(format!("bad value '{v}' for '{name}'")))
}

fn quadratic(u: &[f64], centers: &[f64], weights: &[f64]) -> f64 {
    u.iter()
        .zip(centers)
        .zip(weights)
        .map(|((u, c), w)| w * (u - c).powi(2))
        .sum()
}

/// Two algorithm branches, each a weighted quadratic in the unit-scaled
/// coordinates of its own four parameters.
fn cash_synth(space: &ConfigurationSpace, config: &Configuration) -> Result<f64, BenchmarkError> {
    space
        .validate(config)
        .map_err(|e| BenchmarkError::InvalidConfig(e.to_string()))?;
    let algo = config.get("algo").and_then(|v| v.as_str()).unwrap_or_default();
    match algo {
        "linear" => {
            let u = [
                unit(space, config, "lin_alpha")?,
                unit(space, config, "lin_l1_ratio")?,
                unit(space, config, "lin_max_iter")?,
            ];
            let penalty = match config.get("lin_penalty").and_then(|v| v.as_str()) {
                Some("l1") => 0.0,
                Some("elasticnet") => 0.02,
                _ => 0.05,
            };
            Ok(0.15 + penalty + quadratic(&u, &[0.65, 0.2, 0.85], &[2.0, 1.0, 0.6]))
        }
        "boosting" => {
            let u = [
                unit(space, config, "gb_depth")?,
                unit(space, config, "gb_learning_rate")?,
                unit(space, config, "gb_subsample")?,
                unit(space, config, "gb_min_leaf")?,
            ];
            Ok(quadratic(&u, &[0.3, 0.55, 0.75, 0.4], &[2.5, 3.0, 1.2, 0.8]))
        }
        other => Err(BenchmarkError::InvalidConfig(format!("unknown algo '{other}'"))),
    }
}

/// Non-negative oscillation whose minima sit on a lattice through the decoy
/// point rather than the optimum.
fn mf_bias(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let s: f64 = x
        .iter()
        .zip(MF_DECOY)
        .map(|(x, c)| (2.0 * PI * MF_FREQ * (x - c)).cos())
        .sum();
    MF_BIAS * (1.0 - s / d)
}

/// `‖x − x*‖² + (1 − b/b_max)·g(x)`.
pub fn mf_quadratic(x: &[f64], budget: f64) -> f64 {
    let dist: f64 = x.iter().zip(MF_OPTIMUM_X).map(|(x, o)| (x - o).powi(2)).sum();
    dist + (1.0 - budget / MF_B_MAX) * mf_bias(x)
}

fn parse_instance(name: &str) -> Result<usize, BenchmarkError> {
    name.strip_prefix('i')
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|i| *i < AC_INSTANCES)
        .ok_or_else(|| BenchmarkError::UnknownInstance(name.to_string()))
}

fn ac_base(i: usize) -> f64 {
    0.05 * 2f64.powf((i % 5) as f64 / 2.0)
}

fn ac_optimum(i: usize) -> [f64; 4] {
    // fixed per-instance jitter in [-0.1, 0.1]
    let mut o = AC_THETA_STAR;
    for (j, v) in o.iter_mut().enumerate() {
        let phase = ((i * 7 + j * 3) % 11) as f64 / 10.0;
        *v += 0.2 * phase - 0.1;
    }
    o
}

/// Uncensored runtime of `theta` on instance `i`.
pub fn ac_runtime(theta: &[f64], i: usize) -> f64 {
    let o = ac_optimum(i);
    let dist = theta.iter().zip(o).map(|(t, o)| (t - o).powi(2)).sum::<f64>().sqrt();
    ac_base(i) * dist.exp()
}

/// Mean uncensored runtime of `config` over all instances.
pub fn ac_true_mean_runtime(config: &Configuration) -> Result<f64, BenchmarkError> {
    let theta = numeric(config, &["theta0", "theta1", "theta2", "theta3"])?;
    Ok((0..AC_INSTANCES).map(|i| ac_runtime(&theta, i)).sum::<f64>() / AC_INSTANCES as f64)
}
