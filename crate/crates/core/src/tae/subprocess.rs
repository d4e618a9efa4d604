use std::io::Read;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::protocol::{build_command, parse_result_line, ResultLineError};
use super::{Outcome, SubprocessSpec, TrialRequest};
use crate::runhistory::{Status, TrialResult};

const POLL: Duration = Duration::from_millis(5);

fn kill_group(pgid: u32) {
    // SAFETY: killpg has no memory-safety preconditions; errors (e.g. the
    // group is already gone) are ignored.
    unsafe {
        libc::killpg(pgid as libc::pid_t, libc::SIGKILL);
    }
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

enum Stop {
    Exited(ExitStatus),
    Timeout,
    Cancelled,
    Failed(std::io::Error),
}

fn supervise(child: &mut Child, deadline: Option<Instant>, cancel: &AtomicBool) -> Stop {
    loop {
        match child.try_wait() {
            Ok(Some(st)) => return Stop::Exited(st),
            Ok(None) => {}
            Err(e) => return Stop::Failed(e),
        }
        if cancel.load(Ordering::SeqCst) {
            return Stop::Cancelled;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return Stop::Timeout;
        }
        thread::sleep(POLL);
    }
}

/// Runs the target in its own process group, killing the whole group at the
/// cutoff, on cancellation, and after the leader exits.
pub(super) fn run(spec: &SubprocessSpec, req: &TrialRequest, cancel: &AtomicBool) -> Outcome {
    let argv = build_command(&spec.command, req);
    let mut cmd = Command::new(&argv[0]);
    cmd.args(&argv[1..])
        .envs(spec.env.iter().map(|(k, v)| (k, v)))
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0);
    if let Some(dir) = &spec.workdir {
        cmd.current_dir(dir);
    }
    let start = Instant::now();
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => return Outcome::crashed(0.0, format!("cannot start {}: {e}", argv[0])),
    };
    let pgid = child.id();
    let stdout = drain(child.stdout.take());
    let stderr = drain(child.stderr.take());
    let cutoff = req.cutoff.filter(|c| *c > 0.0);
    let deadline = cutoff.map(|c| start + Duration::from_secs_f64(c));

    let stop = supervise(&mut child, deadline, cancel);
    kill_group(pgid);
    let _ = child.wait();
    let elapsed = start.elapsed().as_secs_f64();
    let out = stdout.join().unwrap_or_default();
    let err = stderr.join().unwrap_or_default();

    let status = match stop {
        Stop::Exited(st) => st,
        Stop::Timeout => return Outcome::timeout(cutoff.expect("deadline implies cutoff"), elapsed),
        Stop::Cancelled => return Outcome::cancelled(),
        Stop::Failed(e) => return Outcome::crashed(elapsed, format!("waiting for target: {e}")),
    };
    match parse_result_line(&out) {
        Ok(line) => Outcome {
            result: TrialResult {
                cost: line.cost,
                runtime: line.runtime.unwrap_or(elapsed),
                status: line.status,
                censored: line.status == Status::Timeout,
            },
            detail: None,
        },
        Err(ResultLineError::Malformed(l)) => Outcome::crashed(elapsed, format!("malformed result line: {l}")),
        Err(ResultLineError::Missing) => {
            let how = match (status.code(), status.signal()) {
                (Some(0), _) => "exited 0".to_string(),
                (Some(c), _) => format!("exited with status {c}"),
                (None, Some(s)) => format!("killed by signal {s}"),
                _ => "terminated".to_string(),
            };
            let tail: String = err.lines().last().unwrap_or("").chars().take(200).collect();
            Outcome::crashed(elapsed, format!("no result line; target {how}; stderr: {tail}"))
        }
    }
}
