//! Wire protocol between the optimizer and an external target.
//!
//! The target is called as
//!
//! ```text
//! <command...> --instance <name|none> --seed <int> --budget <num|0> --cutoff <num|0> \
//!     --config <name>=<value> ...
//! ```
//!
//! with one `--config` pair per active parameter, sorted by name. It reports
//! its outcome on stdout as
//!
//! ```text
//! RESULT: status=<SUCCESS|TIMEOUT|CRASHED|MEMOUT|ABORT>; cost=<float>; runtime=<float>
//! ```
//!
//! The last line starting with `RESULT:` is authoritative; `runtime` may be
//! omitted.

use std::sync::LazyLock;

use regex::Regex;

use super::TrialRequest;
use crate::runhistory::Status;

static RESULT_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^RESULT:\s*status\s*=\s*([A-Z]+)\s*;\s*cost\s*=\s*([^;\s]+)\s*(?:;\s*runtime\s*=\s*([^;\s]+)\s*)?;?\s*$")
        .expect("valid regex")
});

/// Renders a number in its shortest round-trip decimal form.
pub fn format_number(x: f64) -> String {
    format!("{x}")
}

/// Full argument vector for `req` (command tokens first).
pub fn build_command(command: &[String], req: &TrialRequest) -> Vec<String> {
    let mut argv: Vec<String> = command.to_vec();
    argv.push("--instance".into());
    argv.push(req.instance.clone().unwrap_or_else(|| "none".into()));
    argv.push("--seed".into());
    argv.push(req.seed.to_string());
    argv.push("--budget".into());
    argv.push(req.budget.map_or("0".into(), format_number));
    argv.push("--cutoff".into());
    argv.push(req.cutoff.map_or("0".into(), format_number));
    // BTreeMap iteration is already sorted by name
    for (name, value) in req.config.values() {
        argv.push("--config".into());
        argv.push(format!("{name}={value}"));
    }
    argv
}

/// Fields of a RESULT line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultLine {
    pub status: Status,
    pub cost: f64,
    pub runtime: Option<f64>,
}

/// Why stdout did not yield a result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResultLineError {
    Missing,
    Malformed(String),
}

/// Parses the last `RESULT:` line of `stdout`.
pub fn parse_result_line(stdout: &str) -> Result<ResultLine, ResultLineError> {
    let line = stdout
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with("RESULT:"))
        .ok_or(ResultLineError::Missing)?;
    let malformed = || ResultLineError::Malformed(line.to_string());
    let caps = RESULT_RE.captures(line).ok_or_else(malformed)?;
    let status = match &caps[1] {
        "RUNNING" => return Err(malformed()),
        s => Status::parse(s).ok_or_else(malformed)?,
    };
    let cost: f64 = caps[2].parse().map_err(|_| malformed())?;
    if !cost.is_finite() {
        return Err(malformed());
    }
    let runtime = match caps.get(3) {
        Some(m) => {
            let r: f64 = m.as_str().parse().map_err(|_| malformed())?;
            if !r.is_finite() || r < 0.0 {
                return Err(malformed());
            }
            Some(r)
        }
        None => None,
    };
    Ok(ResultLine { status, cost, runtime })
}
