use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::{evaluate_cancellable, Outcome, TaeError, TargetSpec, TrialRequest};

struct Job {
    ticket: u64,
    request: TrialRequest,
}

/// A finished evaluation, paired with the ticket it was submitted under.
#[derive(Debug, Clone)]
pub struct Completion {
    pub ticket: u64,
    pub request: TrialRequest,
    pub outcome: Outcome,
}

/// Fixed set of worker threads evaluating requests concurrently. Results
/// arrive in completion order.
pub struct WorkerPool {
    jobs: Option<Sender<Job>>,
    done: Receiver<Completion>,
    cancel: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
    in_flight: usize,
    capacity: usize,
}

impl WorkerPool {
    pub fn new(spec: TargetSpec, capacity: usize) -> Result<Self, TaeError> {
        if capacity == 0 {
            return Err(TaeError::ZeroCapacity);
        }
        let (job_tx, job_rx) = mpsc::channel::<Job>();
        let (done_tx, done) = mpsc::channel();
        let job_rx = Arc::new(Mutex::new(job_rx));
        let cancel = Arc::new(AtomicBool::new(false));
        let spec = Arc::new(spec);
        let workers = (0..capacity)
            .map(|_| {
                let job_rx = Arc::clone(&job_rx);
                let done_tx: Sender<Completion> = done_tx.clone();
                let cancel = Arc::clone(&cancel);
                let spec = Arc::clone(&spec);
                thread::spawn(move || loop {
                    let job = match job_rx.lock() {
                        Ok(rx) => rx.recv(),
                        Err(_) => return,
                    };
                    let Ok(Job { ticket, request }) = job else { return };
                    let outcome = if cancel.load(Ordering::SeqCst) {
                        Outcome::cancelled()
                    } else {
                        let o = evaluate_cancellable(&spec, &request, &cancel);
                        if cancel.load(Ordering::SeqCst) {
                            Outcome::cancelled()
                        } else {
                            o
                        }
                    };
                    if done_tx.send(Completion { ticket, request, outcome }).is_err() {
                        return;
                    }
                })
            })
            .collect();
        Ok(Self {
            jobs: Some(job_tx),
            done,
            cancel,
            workers,
            in_flight: 0,
            capacity,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Submitted requests whose completion has not been received yet.
    pub fn in_flight(&self) -> usize {
        self.in_flight
    }

    pub fn submit(&mut self, ticket: u64, request: TrialRequest) -> Result<(), TaeError> {
        let tx = self.jobs.as_ref().ok_or(TaeError::ShutDown)?;
        tx.send(Job { ticket, request }).map_err(|_| TaeError::ShutDown)?;
        self.in_flight += 1;
        Ok(())
    }

    /// Blocks for the next completion; `None` when nothing is in flight.
    pub fn recv(&mut self) -> Option<Completion> {
        if self.in_flight == 0 {
            return None;
        }
        let c = self.done.recv().ok()?;
        self.in_flight -= 1;
        Some(c)
    }

    pub fn recv_timeout(&mut self, timeout: Duration) -> Option<Completion> {
        if self.in_flight == 0 {
            return None;
        }
        match self.done.recv_timeout(timeout) {
            Ok(c) => {
                self.in_flight -= 1;
                Some(c)
            }
            Err(RecvTimeoutError::Timeout | RecvTimeoutError::Disconnected) => None,
        }
    }

    /// Cancels everything still running or queued and returns the remaining
    /// completions; cancelled trials come back as crashed with detail
    /// "cancelled". Later submissions fail.
    pub fn shutdown(&mut self) -> Vec<Completion> {
        self.cancel.store(true, Ordering::SeqCst);
        self.jobs = None;
        let mut rest = Vec::with_capacity(self.in_flight);
        while let Some(c) = self.recv() {
            rest.push(c);
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
        rest
    }
}

impl Drop for WorkerPool {
    fn drop(&mut self) {
        self.shutdown();
    }
}
