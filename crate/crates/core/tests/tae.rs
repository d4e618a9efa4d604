use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use smbo::intensification::TrialRequest;
use smbo::runhistory::Status;
use smbo::space::{Configuration, Value};
use smbo::tae::{evaluate, TargetSpec, WorkerPool, KILL_GRACE_S};
use tempfile::TempDir;

fn script(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).unwrap();
    path
}

fn target(path: &Path) -> TargetSpec {
    TargetSpec::subprocess([path.to_string_lossy().into_owned()]).unwrap()
}

fn request(x: f64, cutoff: Option<f64>) -> TrialRequest {
    TrialRequest {
        config: Configuration::from_values(BTreeMap::from([("x".to_string(), Value::Float(x))])),
        instance: None,
        seed: 3,
        budget: None,
        cutoff,
    }
}

#[test]
fn result_line_is_parsed() {
    let dir = TempDir::new().unwrap();
    let p = script(&dir, "ok.sh", "echo noise\necho 'RESULT: status=SUCCESS; cost=0.42; runtime=1.5'");
    let o = evaluate(&target(&p), &request(0.5, None));
    assert_eq!(o.result.status, Status::Success);
    assert_eq!(o.result.cost, 0.42);
    assert_eq!(o.result.runtime, 1.5);
}

#[test]
fn missing_runtime_uses_wall_time() {
    let dir = TempDir::new().unwrap();
    let p = script(&dir, "ok.sh", "sleep 0.2\necho 'RESULT: status=SUCCESS; cost=1'");
    let o = evaluate(&target(&p), &request(0.5, None));
    assert_eq!(o.result.status, Status::Success);
    assert!(o.result.runtime >= 0.2 && o.result.runtime < 2.0, "{}", o.result.runtime);
}

#[test]
fn target_receives_the_argv_grammar() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("argv.txt");
    let p = script(
        &dir,
        "echo.sh",
        &format!("printf '%s\\n' \"$@\" > '{}'\necho 'RESULT: status=SUCCESS; cost=0; runtime=0'", log.display()),
    );
    evaluate(&target(&p), &request(0.25, Some(2.0)));
    let argv: Vec<String> = fs::read_to_string(&log).unwrap().lines().map(String::from).collect();
    assert_eq!(
        argv,
        ["--instance", "none", "--seed", "3", "--budget", "0", "--cutoff", "2", "--config", "x=0.25"]
    );
}

#[test]
fn sleeping_past_cutoff_times_out() {
    let dir = TempDir::new().unwrap();
    let p = script(&dir, "slow.sh", "sleep 10\necho 'RESULT: status=SUCCESS; cost=1; runtime=10'");
    let o = evaluate(&target(&p), &request(0.5, Some(1.0)));
    assert_eq!(o.result.status, Status::Timeout);
    assert!(o.result.censored);
    assert!((o.result.runtime - 1.0).abs() <= 0.2, "runtime {}", o.result.runtime);
}

fn is_gone(pid: u32) -> bool {
    match fs::read_to_string(format!("/proc/{pid}/stat")) {
        Err(_) => true,
        // a killed orphan may linger as a zombie until reaped
        Ok(stat) => stat.rsplit(')').next().is_some_and(|rest| rest.trim_start().starts_with('Z')),
    }
}

#[test]
fn cutoff_kills_the_whole_process_group() {
    let dir = TempDir::new().unwrap();
    let pidfile = dir.path().join("pid");
    let p = script(&dir, "fork.sh", &format!("sleep 30 &\necho $! > '{}'\nwait", pidfile.display()));
    let start = Instant::now();
    let o = evaluate(&target(&p), &request(0.5, Some(0.5)));
    assert_eq!(o.result.status, Status::Timeout);
    assert!(start.elapsed().as_secs_f64() <= 0.5 + KILL_GRACE_S);
    let pid: u32 = fs::read_to_string(&pidfile).unwrap().trim().parse().unwrap();
    let deadline = Instant::now() + Duration::from_secs_f64(KILL_GRACE_S);
    while !is_gone(pid) && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(20));
    }
    assert!(is_gone(pid), "grandchild {pid} survived the cutoff");
}

#[test]
fn missing_executable_crashes() {
    let o = evaluate(
        &TargetSpec::subprocess(["/nonexistent/target-binary"]).unwrap(),
        &request(0.5, None),
    );
    assert_eq!(o.result.status, Status::Crashed);
    assert!(o.detail.unwrap().contains("cannot start"));
}

#[test]
fn no_result_line_crashes() {
    let dir = TempDir::new().unwrap();
    let silent = script(&dir, "silent.sh", "echo working");
    let o = evaluate(&target(&silent), &request(0.5, None));
    assert_eq!(o.result.status, Status::Crashed);

    let failing = script(&dir, "fail.sh", "echo oops >&2\nexit 4");
    let o = evaluate(&target(&failing), &request(0.5, None));
    assert_eq!(o.result.status, Status::Crashed);
    let detail = o.detail.unwrap();
    assert!(detail.contains("status 4") && detail.contains("oops"), "{detail}");
}

#[test]
fn malformed_result_line_crashes() {
    let dir = TempDir::new().unwrap();
    let p = script(&dir, "bad.sh", "echo 'RESULT: status=SUCCESS; cost=abc'");
    let o = evaluate(&target(&p), &request(0.5, None));
    assert_eq!(o.result.status, Status::Crashed);
}

#[test]
fn environment_is_parent_plus_additions() {
    let dir = TempDir::new().unwrap();
    let dump = dir.path().join("env.txt");
    let p = script(
        &dir,
        "env.sh",
        &format!("env > '{}'\necho 'RESULT: status=SUCCESS; cost=0; runtime=0'", dump.display()),
    );
    let spec = target(&p).with_env("SMBO_TEST_EXTRA", "42");
    evaluate(&spec, &request(0.5, None));
    // variables the shell itself maintains
    let shell_owned = ["PWD", "OLDPWD", "SHLVL", "_"];
    let child: HashMap<String, String> = fs::read_to_string(&dump)
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .filter(|(k, _)| !shell_owned.contains(&k.as_str()))
        .collect();
    let mut expected: HashMap<String, String> = std::env::vars()
        .filter(|(k, v)| !shell_owned.contains(&k.as_str()) && !v.contains('\n'))
        .collect();
    expected.insert("SMBO_TEST_EXTRA".into(), "42".into());
    for (k, v) in &expected {
        assert_eq!(child.get(k), Some(v), "variable {k}");
    }
    for k in child.keys() {
        assert!(expected.contains_key(k) || std::env::var_os(k).is_some(), "unexpected variable {k}");
    }
}

#[test]
fn pool_runs_in_parallel() {
    let dir = TempDir::new().unwrap();
    let p = script(&dir, "sleep.sh", "sleep 1\necho 'RESULT: status=SUCCESS; cost=1; runtime=1'");
    let mut pool = WorkerPool::new(target(&p), 4).unwrap();
    let start = Instant::now();
    for t in 0..4 {
        pool.submit(t, request(t as f64, None)).unwrap();
    }
    let mut tickets: Vec<u64> = std::iter::from_fn(|| pool.recv()).map(|c| c.ticket).collect();
    assert!(start.elapsed() < Duration::from_secs(2), "{:?}", start.elapsed());
    tickets.sort();
    assert_eq!(tickets, [0, 1, 2, 3]);
}

#[test]
fn capacity_one_is_sequential_and_pairs_results() {
    let dir = TempDir::new().unwrap();
    let p = script(&dir, "echo.sh", "sleep 0.1\necho \"RESULT: status=SUCCESS; cost=${10#x=}; runtime=0\"");
    let mut pool = WorkerPool::new(target(&p), 1).unwrap();
    let start = Instant::now();
    for t in 0..3 {
        pool.submit(t, request(t as f64 + 0.5, None)).unwrap();
    }
    let done: Vec<_> = std::iter::from_fn(|| pool.recv()).collect();
    assert!(start.elapsed() >= Duration::from_millis(300));
    assert_eq!(done.iter().map(|c| c.ticket).collect::<Vec<_>>(), [0, 1, 2]);
    for c in done {
        assert_eq!(c.outcome.result.cost, c.request.config.get_f64("x").unwrap());
    }
}

#[test]
fn shutdown_reports_in_flight_trials_as_cancelled() {
    let dir = TempDir::new().unwrap();
    let p = script(&dir, "slow.sh", "sleep 30");
    let mut pool = WorkerPool::new(target(&p), 1).unwrap();
    pool.submit(0, request(0.5, None)).unwrap();
    pool.submit(1, request(0.6, None)).unwrap();
    std::thread::sleep(Duration::from_millis(200));
    let start = Instant::now();
    let rest = pool.shutdown();
    assert!(start.elapsed().as_secs_f64() < KILL_GRACE_S);
    assert_eq!(rest.len(), 2);
    for c in &rest {
        assert_eq!(c.outcome.result.status, Status::Crashed);
        assert!(c.outcome.is_cancelled());
    }
    assert!(pool.submit(2, request(0.7, None)).is_err());
}
