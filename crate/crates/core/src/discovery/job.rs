//! Background discovery jobs: one worker thread per job, control requests
//! honoured at epoch boundaries, immutable snapshots for readers.

use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::continuous::{ContinuousLearner, EpochOutcome};
use super::{
    run_hybrid, run_pc, Algorithm, AlgoStatus, DiscoveryError, DiscoverySnapshot, HybridResult, JobConfig, LossRecord, Pdag,
    StatusSet, WeightMatrix,
};
use crate::dataset::MixedDataset;

/// Incremental change pushed to subscribers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JobEvent {
    Status { status: StatusSet },
    Pc { pc: Pdag },
    Hybrid { hybrid: HybridResult },
    Epoch { epoch: u32, loss: LossRecord, h: f64, edges: Vec<(String, String)>, matrix: WeightMatrix },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("job has already finished")]
    Finished(StatusSet),
    #[error("job did not acknowledge the request in time")]
    Timeout,
}

#[derive(Debug, Default)]
struct Control {
    pause: bool,
    stop: bool,
    paused: bool,
    finished: bool,
}

struct Shared {
    snapshot: Mutex<Arc<DiscoverySnapshot>>,
    /// `None` once the worker has exited.
    subscribers: Mutex<Option<Vec<Sender<JobEvent>>>>,
    control: Mutex<Control>,
    cv: Condvar,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Shared {
    /// Replaces the snapshot and fans out events under the snapshot lock so a
    /// concurrent subscriber sees either the old state plus every event or
    /// the new state.
    fn publish(&self, update: impl FnOnce(&mut DiscoverySnapshot), events: Vec<JobEvent>) {
        let mut snap = lock(&self.snapshot);
        let mut next = (**snap).clone();
        update(&mut next);
        *snap = Arc::new(next);
        if let Some(subs) = lock(&self.subscribers).as_mut() {
            subs.retain(|tx| events.iter().all(|e| tx.send(e.clone()).is_ok()));
        }
    }

    fn set_status(&self, algo: Algorithm, status: AlgoStatus) {
        let mut full = lock(&self.snapshot).status.clone();
        if full.get(algo) == &status {
            return;
        }
        full.set(algo, status.clone());
        self.publish(move |s| s.status.set(algo, status), vec![JobEvent::Status { status: full }]);
    }

    /// Blocks while paused. Returns `false` when the job should stop.
    fn checkpoint(&self, current: Algorithm) -> bool {
        let mut c = lock(&self.control);
        loop {
            if c.stop {
                return false;
            }
            if c.pause {
                if !c.paused {
                    c.paused = true;
                    self.set_status(current, AlgoStatus::Paused);
                    self.cv.notify_all();
                }
                c = self.cv.wait(c).unwrap_or_else(|e| e.into_inner());
                continue;
            }
            if c.paused {
                c.paused = false;
                self.set_status(current, AlgoStatus::Running);
                self.cv.notify_all();
            }
            return true;
        }
    }
}

pub struct Job {
    id: String,
    config: JobConfig,
    shared: Arc<Shared>,
    worker: Mutex<Option<JoinHandle<()>>>,
}

const ACK_TIMEOUT: Duration = Duration::from_secs(120);

impl Job {
    /// Validates the configuration and starts the worker thread.
    pub fn spawn(id: impl Into<String>, dataset: Arc<MixedDataset>, config: JobConfig) -> Result<Arc<Job>, DiscoveryError> {
        config.validate()?;
        for v in &config.variables {
            dataset.require(v)?;
        }
        let shared = Arc::new(Shared {
            snapshot: Mutex::new(Arc::new(DiscoverySnapshot::pending(config.variables.clone(), &config.algorithms))),
            subscribers: Mutex::new(Some(Vec::new())),
            control: Mutex::new(Control::default()),
            cv: Condvar::new(),
        });
        let job = Arc::new(Job { id: id.into(), config: config.clone(), shared: shared.clone(), worker: Mutex::new(None) });
        let handle = std::thread::Builder::new()
            .name(format!("discovery-{}", job.id))
            .spawn(move || {
                worker(&shared, &dataset, &config);
                *lock(&shared.subscribers) = None;
                let mut c = lock(&shared.control);
                c.finished = true;
                c.paused = false;
                shared.cv.notify_all();
            })
            .map_err(|e| DiscoveryError::Config(format!("cannot start worker: {e}")))?;
        *lock(&job.worker) = Some(handle);
        Ok(job)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &JobConfig {
        &self.config
    }

    pub fn snapshot(&self) -> Arc<DiscoverySnapshot> {
        lock(&self.shared.snapshot).clone()
    }

    /// Current snapshot plus a stream of every later event. The stream ends
    /// when the worker exits.
    pub fn subscribe(&self) -> (Arc<DiscoverySnapshot>, Receiver<JobEvent>) {
        let snap = lock(&self.shared.snapshot);
        let (tx, rx) = channel();
        if let Some(subs) = lock(&self.shared.subscribers).as_mut() {
            subs.push(tx);
        }
        (snap.clone(), rx)
    }

    pub fn is_finished(&self) -> bool {
        lock(&self.shared.control).finished
    }

    fn request(&self, set: impl FnOnce(&mut Control), done: impl Fn(&Control) -> bool) -> Result<Arc<DiscoverySnapshot>, ControlError> {
        let mut c = lock(&self.shared.control);
        if c.finished {
            drop(c);
            return Err(ControlError::Finished(self.snapshot().status.clone()));
        }
        set(&mut c);
        self.shared.cv.notify_all();
        let (c, timeout) = self
            .shared
            .cv
            .wait_timeout_while(c, ACK_TIMEOUT, |c| !(done(c) || c.finished))
            .unwrap_or_else(|e| e.into_inner());
        drop(c);
        if timeout.timed_out() {
            return Err(ControlError::Timeout);
        }
        Ok(self.snapshot())
    }

    /// Returns once the worker has parked at an epoch boundary.
    pub fn pause(&self) -> Result<Arc<DiscoverySnapshot>, ControlError> {
        self.request(|c| c.pause = true, |c| c.paused)
    }

    pub fn resume(&self) -> Result<Arc<DiscoverySnapshot>, ControlError> {
        self.request(|c| c.pause = false, |c| !c.paused)
    }

    /// Finalises the current state as the result and waits for the worker.
    pub fn stop(&self) -> Result<Arc<DiscoverySnapshot>, ControlError> {
        self.request(|c| c.stop = true, |c| c.finished)
    }

    /// Blocks until the worker exits.
    pub fn wait(&self) -> Arc<DiscoverySnapshot> {
        if let Some(h) = lock(&self.worker).take() {
            let _ = h.join();
        }
        self.snapshot()
    }
}

fn worker(shared: &Shared, ds: &MixedDataset, config: &JobConfig) {
    let wants = |a| config.algorithms.contains(&a);
    let stop_rest = |shared: &Shared| {
        let status = lock(&shared.snapshot).status.clone();
        for a in [Algorithm::Pc, Algorithm::Hybrid, Algorithm::Continuous] {
            if !status.get(a).is_terminal() {
                shared.set_status(a, AlgoStatus::Stopped);
            }
        }
    };
    if wants(Algorithm::Pc) {
        if !shared.checkpoint(Algorithm::Pc) {
            return stop_rest(shared);
        }
        shared.set_status(Algorithm::Pc, AlgoStatus::Running);
        match run_pc(ds, &config.variables, config.ci_alpha) {
            Ok(p) => {
                let event = JobEvent::Pc { pc: p.clone() };
                shared.publish(|s| s.pc = Some(p), vec![event]);
                shared.set_status(Algorithm::Pc, AlgoStatus::Done);
            }
            Err(e) => shared.set_status(Algorithm::Pc, AlgoStatus::Failed(e.to_string())),
        }
    }
    if wants(Algorithm::Hybrid) {
        if !shared.checkpoint(Algorithm::Hybrid) {
            return stop_rest(shared);
        }
        shared.set_status(Algorithm::Hybrid, AlgoStatus::Running);
        match run_hybrid(ds, &config.variables, config.ci_alpha, &config.hybrid) {
            Ok(h) => {
                let event = JobEvent::Hybrid { hybrid: h.clone() };
                shared.publish(|s| s.hybrid = Some(h), vec![event]);
                shared.set_status(Algorithm::Hybrid, AlgoStatus::Done);
            }
            Err(e) => shared.set_status(Algorithm::Hybrid, AlgoStatus::Failed(e.to_string())),
        }
    }
    if !wants(Algorithm::Continuous) {
        return;
    }
    let mut learner = match ContinuousLearner::new(ds, &config.variables, config.continuous.clone(), config.rng_seed) {
        Ok(l) => l,
        Err(e) => return shared.set_status(Algorithm::Continuous, AlgoStatus::Failed(e.to_string())),
    };
    let initial = learner.result();
    shared.publish(|s| s.continuous = Some(initial), Vec::new());
    loop {
        if !shared.checkpoint(Algorithm::Continuous) {
            return stop_rest(shared);
        }
        if learner.epoch() >= config.continuous.max_epochs {
            return shared.set_status(Algorithm::Continuous, AlgoStatus::Done);
        }
        shared.set_status(Algorithm::Continuous, AlgoStatus::Running);
        let outcome = learner.step();
        let result = learner.result();
        if let EpochOutcome::Failed(msg) = outcome {
            shared.publish(|s| s.continuous = Some(result), Vec::new());
            return shared.set_status(Algorithm::Continuous, AlgoStatus::Failed(msg));
        }
        let loss = *result.losses.last().expect("epoch recorded");
        let event = JobEvent::Epoch {
            epoch: result.epoch,
            loss,
            h: result.h,
            edges: result.edges.clone(),
            matrix: result.matrix.clone(),
        };
        shared.publish(|s| s.continuous = Some(result), vec![event]);
    }
}
