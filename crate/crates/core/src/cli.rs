//! Command-line frontend.
//!
//! Exit codes: 0 success, 1 usage or internal error, 2 scenario, space or
//! history-file error, 3 target failure, 130 interrupted.

use std::collections::{BTreeMap, HashSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};

use clap::{ArgAction, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use crate::benchmarks::{Benchmark, BenchmarkError};
use crate::runhistory::{read_history, write_history, RunHistory, RunHistoryError, Status};
use crate::smbo::{load_scenario, make_facade, OptimizeError, Scenario, ScenarioError};
use crate::space::Configuration;
use crate::tae::{evaluate, protocol::format_number, TrialRequest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SCENARIO: i32 = 2;
pub const EXIT_TARGET: i32 = 3;
pub const EXIT_INTERRUPTED: i32 = 130;

#[derive(Debug, Parser)]
#[command(name = "smbo", version, about = "Sequential model-based algorithm configuration and hyperparameter optimization")]
struct Cli {
    /// More log output on stderr (repeatable); RUST_LOG overrides.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an optimization; trajectory entries are streamed to stdout as JSON Lines.
    Optimize {
        scenario: PathBuf,
        /// Scenario override, e.g. `limits.max_trials=5` (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Check that the scenario's target answers the wrapper protocol.
    ValidateTarget {
        scenario: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Number of round trips with random configurations.
        #[arg(long, default_value_t = 3)]
        trials: usize,
    },
    /// Print the best configuration recorded in a run-history file.
    ShowIncumbent {
        scenario: PathBuf,
        history: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Merge run-history files of the same space into one.
    MergeHistory {
        scenario: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Evaluate a bundled benchmark through the wrapper protocol.
    #[command(hide = true)]
    BenchmarkWrapper {
        name: String,
        #[arg(long, default_value = "none")]
        instance: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        budget: f64,
        #[arg(long, default_value_t = 0.0)]
        cutoff: f64,
        #[arg(long = "config", value_name = "NAME=VALUE")]
        config: Vec<String>,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    History(#[from] RunHistoryError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error("{0}")]
    Target(String),
    #[error("cannot write to stdout: {0}")]
    Stdout(#[from] std::io::Error),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Stdout(_) => EXIT_USAGE,
            CliError::Scenario(_) | CliError::History(_) => EXIT_SCENARIO,
            CliError::Benchmark(_) | CliError::Target(_) => EXIT_TARGET,
            CliError::Optimize(e) => match e {
                OptimizeError::Scenario(_)
                | OptimizeError::Unsupported(_)
                | OptimizeError::Design(_)
                | OptimizeError::History(_) => EXIT_SCENARIO,
                OptimizeError::Tae(_)
                | OptimizeError::TargetAborted(_)
                | OptimizeError::CrashRate { .. }
                | OptimizeError::NoIncumbent => EXIT_TARGET,
                OptimizeError::Interrupted => EXIT_INTERRUPTED,
                OptimizeError::Intensification(_)
                | OptimizeError::UnknownRequest(_)
                | OptimizeError::DuplicateResult(_) => EXIT_USAGE,
            },
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Optimize { scenario, overrides } => optimize(&scenario, &overrides),
        Command::ValidateTarget {
            scenario,
            overrides,
            trials,
        } => validate_target(&scenario, &overrides, trials),
        Command::ShowIncumbent {
            scenario,
            history,
            overrides,
        } => show_incumbent(&scenario, &history, &overrides),
        Command::MergeHistory {
            scenario,
            output,
            inputs,
            overrides,
        } => merge_history(&scenario, &output, &inputs, &overrides),
        Command::BenchmarkWrapper {
            name,
            instance,
            seed,
            budget,
            cutoff,
            config,
        } => benchmark_wrapper(&name, &instance, seed, budget, cutoff, &config),
    }
}

static INTERRUPT: OnceLock<Arc<AtomicBool>> = OnceLock::new();

extern "C" fn on_sigint(_: libc::c_int) {
    if let Some(flag) = INTERRUPT.get() {
        flag.store(true, Ordering::SeqCst);
    }
}

fn interrupt_flag() -> Arc<AtomicBool> {
    let flag = Arc::clone(INTERRUPT.get_or_init(|| Arc::new(AtomicBool::new(false))));
    let handler = on_sigint as extern "C" fn(libc::c_int);
    // SAFETY: the handler only performs an atomic store on an initialized flag.
    unsafe {
        libc::signal(libc::SIGINT, handler as libc::sighandler_t);
    }
    flag
}

fn optimize(path: &Path, overrides: &[String]) -> Result<(), CliError> {
    let (kind, scenario) = load_scenario(path, overrides)?;
    log::info!("{kind} on {}", path.display());
    let mut opt = make_facade(kind, scenario)?;
    opt.set_stop_flag(interrupt_flag());
    opt.on_incumbent(|entry| {
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{}", entry.to_json());
        let _ = out.flush();
    });
    let result = opt.optimize()?;
    eprintln!(
        "{} trials; incumbent cost {}: {}",
        result.n_trials,
        format_number(result.incumbent_cost),
        result.incumbent.to_json()
    );
    if let Some(p) = &result.run_history_path {
        eprintln!("run history: {}", p.display());
    }
    Ok(())
}

fn validate_target(path: &Path, overrides: &[String], trials: usize) -> Result<(), CliError> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let (_, scenario) = load_scenario(path, overrides)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut failed = 0;
    for i in 0..trials {
        let req = TrialRequest {
            config: scenario.space.sample(&mut rng),
            instance: scenario.instances.first().cloned(),
            seed: rng.random::<u32>() as u64,
            budget: scenario.budgets.map(|b| b.max),
            cutoff: scenario.limits.cutoff_s,
        };
        let outcome = evaluate(&scenario.target, &req);
        let r = &outcome.result;
        let ok = matches!(r.status, Status::Success | Status::Timeout);
        if ok {
            eprintln!(
                "round trip {}: {} cost={} runtime={}",
                i + 1,
                r.status,
                format_number(r.cost),
                format_number(r.runtime)
            );
        } else {
            failed += 1;
            eprintln!(
                "round trip {}: {} ({})",
                i + 1,
                r.status,
                outcome.detail.as_deref().unwrap_or("no detail")
            );
        }
    }
    if failed > 0 {
        println!("FAIL");
        return Err(CliError::Target(format!("{failed} of {trials} round trips failed")));
    }
    println!("PASS");
    Ok(())
}

fn read_for(scenario: &Scenario, path: &Path) -> Result<RunHistory, CliError> {
    Ok(read_history(path, &scenario.space)?.history)
}

/// Configuration with the most completed runs at the largest budget, ties
/// broken by lower mean cost.
fn best_recorded(rh: &RunHistory) -> Option<(Configuration, f64, usize, Option<f64>)> {
    let complete = || rh.trials().filter(|(_, r)| r.result.status.is_complete());
    let budget = complete().filter_map(|(k, _)| k.budget).fold(None, |acc: Option<f64>, b| {
        Some(acc.map_or(b, |a| a.max(b)))
    });
    let mut runs: BTreeMap<u32, HashSet<(Option<String>, u64)>> = BTreeMap::new();
    for (k, _) in complete().filter(|(k, _)| k.budget.map(f64::to_bits) == budget.map(f64::to_bits)) {
        runs.entry(k.config_id.0).or_default().insert((k.instance.clone(), k.seed));
    }
    let most = runs.values().map(HashSet::len).max()?;
    let mut best: Option<(Configuration, f64, usize, Option<f64>)> = None;
    for (id, _) in runs.iter().filter(|(_, r)| r.len() == most) {
        let id = crate::runhistory::ConfigId(*id);
        let Ok(cost) = rh.aggregate_cost(id, None, budget) else { continue };
        if best.as_ref().is_none_or(|b| cost < b.1) {
            best = Some((rh.config(id)?.clone(), cost, most, budget));
        }
    }
    best
}

fn show_incumbent(path: &Path, history: &Path, overrides: &[String]) -> Result<(), CliError> {
    let (_, scenario) = load_scenario(path, overrides)?;
    let rh = read_for(&scenario, history)?;
    let (config, cost, n_runs, budget) =
        best_recorded(&rh).ok_or_else(|| CliError::Target(format!("{} has no completed trials", history.display())))?;
    println!(
        "{}",
        json!({"config": config.to_json(), "cost": cost, "n_runs": n_runs, "budget": budget})
    );
    Ok(())
}

fn merge_history(path: &Path, output: &Path, inputs: &[PathBuf], overrides: &[String]) -> Result<(), CliError> {
    let (_, scenario) = load_scenario(path, overrides)?;
    let mut merged = RunHistory::new();
    for p in inputs {
        merged.merge(&read_for(&scenario, p)?);
    }
    write_history(output, &merged, &scenario.space.digest())?;
    eprintln!("{} trials from {} files -> {}", merged.len(), inputs.len(), output.display());
    Ok(())
}

fn benchmark_wrapper(
    name: &str,
    instance: &str,
    seed: u64,
    budget: f64,
    cutoff: f64,
    pairs: &[String],
) -> Result<(), CliError> {
    let bench: Benchmark = name.parse()?;
    let space = bench.space();
    let mut values = BTreeMap::new();
    for pair in pairs {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--config expects NAME=VALUE, got '{pair}'")))?;
        let p = space
            .parameter(k)
            .ok_or_else(|| CliError::Usage(format!("unknown parameter '{k}'")))?;
        let value = p
            .domain
            .parse_text(v)
            .ok_or_else(|| CliError::Usage(format!("invalid value '{v}' for '{k}'")))?;
        values.insert(k.to_string(), value);
    }
    let config = Configuration::from_values(values);
    space
        .validate(&config)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let instance = (instance != "none").then_some(instance);
    let budget = (budget > 0.0).then_some(budget);
    let out = bench.evaluate(&config, instance, seed, budget)?;
    let runtime = out.runtime.unwrap_or(0.0);
    let line = if cutoff > 0.0 && runtime > cutoff {
        format!(
            "RESULT: status=TIMEOUT; cost={}; runtime={}",
            format_number(cutoff),
            format_number(cutoff)
        )
    } else {
        format!(
            "RESULT: status=SUCCESS; cost={}; runtime={}",
            format_number(out.cost),
            format_number(runtime)
        )
    };
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{line}")?;
    stdout.flush()?;
    Ok(())
}
