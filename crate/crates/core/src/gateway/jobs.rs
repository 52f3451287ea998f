use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender, TrySendError};
use std::sync::{Arc, Mutex};
use std::thread;

use serde::{Deserialize, Serialize};

use super::{ApiError, Store};
use crate::session::{Clock, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobKind {
    Plan,
    Mugs,
    DemoBuild,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_final(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobRecord {
    pub schema_version: u32,
    pub id: String,
    pub kind: JobKind,
    pub status: JobStatus,
    pub project_id: String,
    pub created_at: u64,
    #[serde(default)]
    pub started_at: Option<u64>,
    #[serde(default)]
    pub finished_at: Option<u64>,
    /// Inline result, or a reference such as `{"demo_id": ...}`.
    #[serde(default)]
    pub result: Option<serde_json::Value>,
    #[serde(default)]
    pub error: Option<ApiError>,
}

pub type Work = Box<dyn FnOnce() -> Result<serde_json::Value, ApiError> + Send>;

struct Job {
    record: JobRecord,
    work: Work,
}

/// Fixed pool of worker threads fed by a bounded queue.
pub struct JobQueue {
    sender: SyncSender<Job>,
    store: Arc<Store>,
    clock: Arc<dyn Clock>,
}

impl JobQueue {
    pub fn new(store: Arc<Store>, clock: Arc<dyn Clock>, workers: usize, backlog: usize) -> JobQueue {
        let (sender, receiver) = sync_channel::<Job>(backlog);
        let receiver = Arc::new(Mutex::new(receiver));
        for n in 0..workers {
            let (receiver, store, clock) = (receiver.clone(), store.clone(), clock.clone());
            thread::Builder::new()
                .name(format!("planspace-job-{n}"))
                .spawn(move || worker(&receiver, &store, clock.as_ref()))
                .expect("spawning job worker");
        }
        JobQueue { sender, store, clock }
    }

    /// Records a QUEUED job and hands it to the pool.
    pub fn submit(&self, kind: JobKind, project_id: &str, work: Work) -> Result<JobRecord, ApiError> {
        let now = self.clock.now_ms();
        let record = self.store.insert("jobs", "job", |id| JobRecord {
            schema_version: SCHEMA_VERSION,
            id: id.to_string(),
            kind,
            status: JobStatus::Queued,
            project_id: project_id.to_string(),
            created_at: now,
            started_at: None,
            finished_at: None,
            result: None,
            error: None,
        })?;
        match self.sender.try_send(Job { record: record.clone(), work }) {
            Ok(()) => Ok(record),
            Err(TrySendError::Full(job)) | Err(TrySendError::Disconnected(job)) => {
                let err = ApiError::new(503, "BACKLOG_FULL", "job queue is full, retry later");
                self.finish(job.record, Err(err.clone()))?;
                Err(err)
            }
        }
    }

    /// Records a job that needs no work, e.g. a reused demo build.
    pub fn completed(&self, kind: JobKind, project_id: &str, result: serde_json::Value) -> Result<JobRecord, ApiError> {
        let now = self.clock.now_ms();
        Ok(self.store.insert("jobs", "job", |id| JobRecord {
            schema_version: SCHEMA_VERSION,
            id: id.to_string(),
            kind,
            status: JobStatus::Done,
            project_id: project_id.to_string(),
            created_at: now,
            started_at: Some(now),
            finished_at: Some(now),
            result: Some(result),
            error: None,
        })?)
    }

    fn finish(&self, record: JobRecord, outcome: Result<serde_json::Value, ApiError>) -> Result<(), ApiError> {
        finish(&self.store, self.clock.as_ref(), record, outcome).map_err(Into::into)
    }
}

fn finish(
    store: &Store,
    clock: &dyn Clock,
    mut record: JobRecord,
    outcome: Result<serde_json::Value, ApiError>,
) -> Result<(), super::GatewayError> {
    record.finished_at = Some(clock.now_ms());
    match outcome {
        Ok(v) => {
            record.status = JobStatus::Done;
            record.result = Some(v);
        }
        Err(e) => {
            record.status = JobStatus::Failed;
            record.error = Some(e);
        }
    }
    store.put("jobs", &record.id.clone(), &record)
}

fn worker(receiver: &Mutex<Receiver<Job>>, store: &Store, clock: &dyn Clock) {
    loop {
        let job = {
            let rx = receiver.lock().unwrap_or_else(|e| e.into_inner());
            match rx.recv() {
                Ok(job) => job,
                Err(_) => return,
            }
        };
        let Job { mut record, work } = job;
        record.status = JobStatus::Running;
        record.started_at = Some(clock.now_ms());
        let _ = store.put("jobs", &record.id.clone(), &record);
        let outcome = catch_unwind(AssertUnwindSafe(work))
            .unwrap_or_else(|_| Err(ApiError::new(500, "INTERNAL", "job panicked")));
        let _ = finish(store, clock, record, outcome);
    }
}
