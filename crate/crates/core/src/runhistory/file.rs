//! JSON Lines persistence.
//!
//! Both files start with a header object carrying the space digest:
//!
//! ```text
//! {"format":"runhistory","space_digest":"3f2a..."}
//! {"budget":null,"censored":false,"config":{"x":0.25},"config_id":0,"cost":1.5,"instance":null,"runtime":0.01,"seed":0,"status":"SUCCESS","walltime_end":1700000000.0}
//! ```

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde_json::{json, Value as Json};

use super::{ConfigId, RunHistory, RunHistoryError, Status, TrajectoryEntry, TrialKey, TrialResult};
use crate::space::ConfigurationSpace;

/// A run history read back from disk.
#[derive(Debug, Clone)]
pub struct HistoryFile {
    pub space_digest: String,
    pub history: RunHistory,
}

fn header(kind: &str, digest: &str) -> String {
    json!({"format": kind, "space_digest": digest}).to_string()
}

pub fn history_lines(rh: &RunHistory) -> Vec<String> {
    rh.trials()
        .filter(|(_, r)| r.result.status != Status::Running)
        .map(|(k, r)| {
            json!({
                "config_id": k.config_id.0,
                "config": rh.config(k.config_id).map(|c| c.to_json()).unwrap_or(Json::Null),
                "instance": k.instance,
                "seed": k.seed,
                "budget": k.budget,
                "cost": r.result.cost,
                "runtime": r.result.runtime,
                "status": r.result.status.as_str(),
                "censored": r.result.censored,
                "walltime_end": r.walltime_end,
            })
            .to_string()
        })
        .collect()
}

/// Writes the history atomically (temporary file + rename).
pub fn write_history(path: &Path, rh: &RunHistory, space_digest: &str) -> Result<(), RunHistoryError> {
    let mut out = header("runhistory", space_digest);
    out.push('\n');
    for line in history_lines(rh) {
        out.push_str(&line);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_trajectory(
    path: &Path,
    entries: &[TrajectoryEntry],
    space_digest: &str,
) -> Result<(), RunHistoryError> {
    let mut out = header("trajectory", space_digest);
    out.push('\n');
    for e in entries {
        out.push_str(&e.to_json().to_string());
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RunHistoryError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_header(
    path: &Path,
    lines: &mut impl Iterator<Item = std::io::Result<String>>,
) -> Result<String, RunHistoryError> {
    let perr = |line: usize, message: String| RunHistoryError::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let first = lines.next().ok_or_else(|| perr(1, "empty file, expected a header".into()))??;
    let h: Json = serde_json::from_str(&first).map_err(|e| perr(1, e.to_string()))?;
    h.get("space_digest")
        .and_then(Json::as_str)
        .map(str::to_string)
        .ok_or_else(|| perr(1, "header lacks \"space_digest\"".into()))
}

/// Reads a run-history file. Configurations are validated against `space`
/// and the header digest must match the space's digest.
pub fn read_history(path: &Path, space: &ConfigurationSpace) -> Result<HistoryFile, RunHistoryError> {
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let digest = read_header(path, &mut lines)?;
    let expected = space.digest();
    if digest != expected {
        return Err(RunHistoryError::DigestMismatch {
            expected,
            found: digest,
        });
    }
    let mut rh = RunHistory::new();
    let mut file_ids: std::collections::HashMap<u64, ConfigId> = Default::default();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let perr = |message: String| RunHistoryError::Parse {
            path: path.display().to_string(),
            line: lineno,
            message,
        };
        let v: Json = serde_json::from_str(&line).map_err(|e| perr(e.to_string()))?;
        let num = |k: &str| v.get(k).and_then(Json::as_f64).ok_or_else(|| perr(format!("missing number \"{k}\"")));
        let config_obj = v
            .get("config")
            .and_then(Json::as_object)
            .ok_or_else(|| perr("missing object \"config\"".into()))?;
        let config = space
            .configuration_from_json(config_obj)
            .map_err(|e| perr(e.to_string()))?;
        let id = rh.add_config(&config);
        if let Some(file_id) = v.get("config_id").and_then(Json::as_u64) {
            if let Some(prev) = file_ids.insert(file_id, id) {
                if prev != id {
                    return Err(perr(format!("config_id {file_id} maps to two configurations")));
                }
            }
        }
        let status_str = v.get("status").and_then(Json::as_str).unwrap_or("");
        let status = Status::parse(status_str).ok_or_else(|| perr(format!("unknown status '{status_str}'")))?;
        let key = TrialKey {
            config_id: id,
            instance: v.get("instance").and_then(Json::as_str).map(str::to_string),
            seed: v.get("seed").and_then(Json::as_u64).ok_or_else(|| perr("missing \"seed\"".into()))?,
            budget: v.get("budget").and_then(Json::as_f64),
        };
        let result = TrialResult {
            cost: num("cost")?,
            runtime: num("runtime")?,
            status,
            censored: v.get("censored").and_then(Json::as_bool).unwrap_or(false),
        };
        let walltime_end = v.get("walltime_end").and_then(Json::as_f64).unwrap_or(0.0);
        rh.add_trial(key, result, walltime_end)?;
    }
    Ok(HistoryFile {
        space_digest: digest,
        history: rh,
    })
}

/// Reads a trajectory file written by [`write_trajectory`].
pub fn read_trajectory(path: &Path, space: &ConfigurationSpace) -> Result<Vec<TrajectoryEntry>, RunHistoryError> {
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let digest = read_header(path, &mut lines)?;
    if digest != space.digest() {
        return Err(RunHistoryError::DigestMismatch {
            expected: space.digest(),
            found: digest,
        });
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let perr = |message: String| RunHistoryError::Parse {
            path: path.display().to_string(),
            line: i + 2,
            message,
        };
        let v: Json = serde_json::from_str(&line).map_err(|e| perr(e.to_string()))?;
        let config = v
            .get("incumbent_config")
            .and_then(Json::as_object)
            .ok_or_else(|| perr("missing \"incumbent_config\"".into()))
            .and_then(|o| space.configuration_from_json(o).map_err(|e| perr(e.to_string())))?;
        out.push(TrajectoryEntry {
            elapsed: v.get("elapsed").and_then(Json::as_f64).unwrap_or(0.0),
            n_trials: v.get("n_trials").and_then(Json::as_u64).unwrap_or(0) as usize,
            incumbent_config: config,
            incumbent_cost: v
                .get("incumbent_cost")
                .and_then(Json::as_f64)
                .ok_or_else(|| perr("missing \"incumbent_cost\"".into()))?,
        });
    }
    Ok(out)
}
