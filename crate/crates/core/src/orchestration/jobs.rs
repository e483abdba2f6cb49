use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Mutex, RwLock};
use std::thread;
use std::time::{Duration, Instant};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::Config;
use super::provider::StructureProvider;
use super::session::Session;
use super::{OrchestrationError, Phase};
use crate::grafting::{
    enumerate_variants, external_score, rank_models, splice, ChainBounds, ChimericModel, GraftSpec, ScoreReport,
    DEFAULT_RANK_KEY,
};
use crate::structure_io::Structure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Grafting,
    Dynamics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }

    pub fn can_become(self, to: JobState) -> bool {
        matches!(
            (self, to),
            (JobState::Queued, JobState::Running)
                | (JobState::Running, JobState::Done)
                | (JobState::Running, JobState::Failed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub session_id: String,
    pub kind: JobKind,
    pub state: JobState,
    /// Fraction of variants evaluated.
    pub progress: f64,
    pub total: usize,
    pub completed: usize,
    /// Models in completion order.
    pub model_ids: Vec<String>,
    /// Models by ascending composite score, filled when the job finishes.
    pub ranked_model_ids: Vec<String>,
    pub error: Option<String>,
    pub warnings: Vec<String>,
}

impl Job {
    fn new(id: String, session_id: String, kind: JobKind, total: usize) -> Self {
        Self {
            id,
            session_id,
            kind,
            state: JobState::Queued,
            progress: 0.0,
            total,
            completed: 0,
            model_ids: Vec::new(),
            ranked_model_ids: Vec::new(),
            error: None,
            warnings: Vec::new(),
        }
    }

    pub fn transition(&mut self, to: JobState) -> Result<(), OrchestrationError> {
        if !self.state.can_become(to) {
            return Err(OrchestrationError::InvalidJobTransition { from: self.state, to });
        }
        self.state = to;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StoredModel {
    pub model: ChimericModel,
    pub report: ScoreReport,
    pub session_id: String,
    pub job_id: String,
}

struct Task {
    job_id: String,
    scaffold: Arc<Structure>,
    insert: Arc<Structure>,
    specs: Vec<GraftSpec>,
}

struct SessionSlot {
    session: Mutex<Session>,
    queue: Mutex<Option<Sender<Task>>>,
}

struct Inner {
    provider: Arc<dyn StructureProvider>,
    config: Config,
    pool: rayon::ThreadPool,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
    jobs: RwLock<HashMap<String, Arc<Mutex<Job>>>>,
    models: RwLock<HashMap<String, Arc<StoredModel>>>,
    next_job: AtomicU64,
}

/// Sessions, their FIFO job queues and produced models.
///
/// Mutations of one session are serialized by its lock; each session has one
/// worker thread that runs its graft jobs in submission order, evaluating the
/// variants of a job in parallel.
#[derive(Clone)]
pub struct SessionManager {
    inner: Arc<Inner>,
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl SessionManager {
    pub fn new(provider: Arc<dyn StructureProvider>, config: Config) -> Self {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.job_threads.max(1))
            .thread_name(|i| format!("graft-{i}"))
            .build()
            .expect("thread pool");
        Self {
            inner: Arc::new(Inner {
                provider,
                config,
                pool,
                sessions: RwLock::new(HashMap::new()),
                jobs: RwLock::new(HashMap::new()),
                models: RwLock::new(HashMap::new()),
                next_job: AtomicU64::new(1),
            }),
        }
    }

    pub fn config(&self) -> &Config {
        &self.inner.config
    }

    pub fn provider(&self) -> &dyn StructureProvider {
        self.inner.provider.as_ref()
    }

    fn insert_session(&self, session: Session) -> String {
        let id = session.id.clone();
        let slot = Arc::new(SessionSlot {
            session: Mutex::new(session),
            queue: Mutex::new(None),
        });
        self.inner
            .sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id.clone(), slot);
        id
    }

    fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, OrchestrationError> {
        self.inner
            .sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| OrchestrationError::UnknownSession(id.to_string()))
    }

    pub fn create_session(&self, scaffold: (&str, char), insert: (&str, char)) -> Result<String, OrchestrationError> {
        let session = Session::create(self.provider(), scaffold, insert)?;
        Ok(self.insert_session(session))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .inner
            .sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }

    /// Runs `f` with exclusive access to the session.
    pub fn with_session<R>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Session) -> Result<R, OrchestrationError>,
    ) -> Result<R, OrchestrationError> {
        let slot = self.slot(id)?;
        let mut s = lock(&slot.session);
        f(&mut s)
    }

    /// A copy of the session's current state.
    pub fn snapshot(&self, id: &str) -> Result<Session, OrchestrationError> {
        self.with_session(id, |s| Ok(s.clone()))
    }

    pub fn save_session(&self, id: &str) -> Result<Vec<u8>, OrchestrationError> {
        self.with_session(id, |s| Ok(s.save()))
    }

    pub fn load_session(&self, bytes: &[u8]) -> Result<String, OrchestrationError> {
        let session = Session::load(bytes, self.provider())?;
        Ok(self.insert_session(session))
    }

    /// Queues a graft job over the boundary variants of `base` (the session's
    /// confirmed pairings when `None`). Jobs of one session run in FIFO order.
    pub fn submit_graft_job(
        &self,
        session_id: &str,
        base: Option<GraftSpec>,
        window: Option<usize>,
    ) -> Result<Job, OrchestrationError> {
        let slot = self.slot(session_id)?;
        let window = window.unwrap_or(self.inner.config.variant_window);
        let job = {
            let mut s = lock(&slot.session);
            if s.phase != Phase::P6 {
                return Err(OrchestrationError::GateUnsatisfied(format!(
                    "grafting runs in {}, session is in {}",
                    Phase::P6,
                    s.phase
                )));
            }
            let base = match base {
                Some(b) if b.pairs.is_empty() => return Err(OrchestrationError::EmptySpecs),
                Some(b) => b,
                None => s.graft_spec()?,
            };
            let bounds = ChainBounds::for_structures(&s.scaffold.structure, &s.insert.structure, &base)?;
            let specs = enumerate_variants(&base, window, &bounds)?;
            if specs.is_empty() {
                return Err(OrchestrationError::EmptySpecs);
            }
            let n = self.inner.next_job.fetch_add(1, Ordering::Relaxed);
            let job = Job::new(
                format!("job-{n}"),
                session_id.to_string(),
                JobKind::Grafting,
                specs.len(),
            );
            s.record_job(&job.id, base);
            self.inner
                .jobs
                .write()
                .unwrap_or_else(|e| e.into_inner())
                .insert(job.id.clone(), Arc::new(Mutex::new(job.clone())));
            let task = Task {
                job_id: job.id.clone(),
                scaffold: s.scaffold.structure.clone(),
                insert: s.insert.structure.clone(),
                specs,
            };
            self.enqueue(session_id, &slot, task);
            job
        };
        Ok(job)
    }

    fn enqueue(&self, session_id: &str, slot: &Arc<SessionSlot>, task: Task) {
        let mut q = lock(&slot.queue);
        let sender = q.get_or_insert_with(|| {
            let (tx, rx) = mpsc::channel::<Task>();
            let this = self.clone();
            let sid = session_id.to_string();
            thread::Builder::new()
                .name(format!("session-{sid}"))
                .spawn(move || {
                    for task in rx {
                        this.run_task(&sid, task);
                    }
                })
                .expect("spawn session worker");
            tx
        });
        sender.send(task).expect("session worker alive");
    }

    fn job_handle(&self, id: &str) -> Result<Arc<Mutex<Job>>, OrchestrationError> {
        self.inner
            .jobs
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| OrchestrationError::UnknownJob(id.to_string()))
    }

    fn run_task(&self, session_id: &str, task: Task) {
        let Ok(handle) = self.job_handle(&task.job_id) else {
            return;
        };
        if lock(&handle).transition(JobState::Running).is_err() {
            return;
        }
        let adapter = self.inner.config.adapter.clone();
        let errors: Mutex<Vec<String>> = Mutex::new(Vec::new());
        let produced: Mutex<Vec<ChimericModel>> = Mutex::new(Vec::new());
        self.inner.pool.install(|| {
            task.specs.par_iter().enumerate().for_each(|(k, spec)| {
                let outcome = splice(&task.scaffold, &task.insert, spec).map(|mut m| {
                    m.id = format!("{}-{:04}", task.job_id, k + 1);
                    let report = m.apply_surrogate();
                    if let Some(cfg) = &adapter {
                        if let Err(e) = external_score(&mut m, cfg) {
                            warn!("{}: external scoring failed: {e}", m.id);
                            lock(&errors).push(format!("{}: {e}", m.id));
                        }
                    }
                    (m, report)
                });
                let mut job = lock(&handle);
                match outcome {
                    Ok((m, report)) => {
                        self.inner.models.write().unwrap_or_else(|e| e.into_inner()).insert(
                            m.id.clone(),
                            Arc::new(StoredModel {
                                model: m.clone(),
                                report,
                                session_id: session_id.to_string(),
                                job_id: task.job_id.clone(),
                            }),
                        );
                        job.model_ids.push(m.id.clone());
                        lock(&produced).push(m);
                    }
                    Err(e) => lock(&errors).push(format!("{}: {e}", spec.label())),
                }
                job.completed += 1;
                job.progress = job.completed as f64 / job.total.max(1) as f64;
            })
        });

        let mut models = produced.into_inner().unwrap_or_else(|e| e.into_inner());
        models.sort_by(|a, b| a.id.cmp(&b.id));
        let ranked: Vec<String> = rank_models(&models, DEFAULT_RANK_KEY)
            .map(|r| r.iter().map(|m| m.id.clone()).collect())
            .unwrap_or_default();
        let errors = errors.into_inner().unwrap_or_else(|e| e.into_inner());
        {
            let mut job = lock(&handle);
            job.ranked_model_ids = ranked.clone();
            job.warnings = errors.iter().take(20).cloned().collect();
            if models.is_empty() {
                job.error = Some(errors.first().cloned().unwrap_or_else(|| "no models produced".into()));
                let _ = job.transition(JobState::Failed);
            } else {
                let _ = job.transition(JobState::Done);
            }
        }
        if let Ok(slot) = self.slot(session_id) {
            lock(&slot.session).record_models(ranked);
        }
    }

    pub fn job(&self, id: &str) -> Result<Job, OrchestrationError> {
        let handle = self.job_handle(id)?;
        let job = lock(&handle).clone();
        Ok(job)
    }

    /// Polls until the job reaches a terminal state or `timeout` passes.
    pub fn wait_for_job(&self, id: &str, timeout: Duration) -> Result<Job, OrchestrationError> {
        let start = Instant::now();
        loop {
            let job = self.job(id)?;
            if job.state.is_terminal() || start.elapsed() >= timeout {
                return Ok(job);
            }
            thread::sleep(Duration::from_millis(5));
        }
    }

    pub fn model(&self, id: &str) -> Result<Arc<StoredModel>, OrchestrationError> {
        self.inner
            .models
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| OrchestrationError::UnknownModel(id.to_string()))
    }
}
