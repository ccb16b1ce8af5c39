use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use tokio::sync::Notify;

use prolonet::compile::TreeSpec;
use prolonet::run::{run_seed, SeedSummary};
use prolonet::train::{Agent, EpisodeMetrics, TrainEvent};
use prolonet::RunConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

/// One reward-curve point. `index` is the position in the job's stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub index: usize,
    pub seed: u64,
    pub episode: usize,
    pub reward: f64,
    pub length: usize,
    pub loss: f64,
    pub growth_events: usize,
    pub diagnostic: Option<f64>,
}

#[derive(Default)]
struct Progress {
    points: Vec<MetricPoint>,
    summaries: Vec<SeedSummary>,
    agents: Vec<(u64, Agent)>,
    error: Option<String>,
}

pub struct Job {
    pub id: u64,
    pub config: RunConfig,
    tree: Option<TreeSpec>,
    out: Option<PathBuf>,
    state: Mutex<(JobState, Progress)>,
    changed: Notify,
}

/// Copy of a job's status taken under its lock.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JobSnapshot {
    pub id: u64,
    pub state: JobState,
    pub points: usize,
    pub summaries: Vec<SeedSummary>,
    pub error: Option<String>,
}

impl Job {
    fn lock(&self) -> MutexGuard<'_, (JobState, Progress)> {
        // a poisoned lock only means a training thread panicked; the data is still readable
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn state(&self) -> JobState {
        self.lock().0
    }

    fn advance(&self, next: JobState) {
        let mut guard = self.lock();
        // states only move forward
        if next > guard.0 {
            guard.0 = next;
        }
        drop(guard);
        self.changed.notify_waiters();
    }

    pub fn snapshot(&self) -> JobSnapshot {
        let guard = self.lock();
        JobSnapshot {
            id: self.id,
            state: guard.0,
            points: guard.1.points.len(),
            summaries: guard.1.summaries.clone(),
            error: guard.1.error.clone(),
        }
    }

    /// Points at or after `since`, and the job state at the same instant.
    pub fn points_since(&self, since: usize) -> (JobState, Vec<MetricPoint>) {
        let guard = self.lock();
        let from = since.min(guard.1.points.len());
        (guard.0, guard.1.points[from..].to_vec())
    }

    /// Resolves on the next state change or new point. Must be created
    /// before checking for new data so that no wake-up is lost.
    pub fn changed(&self) -> tokio::sync::futures::Notified<'_> {
        self.changed.notified()
    }

    /// The trained agent for `seed`, or for the first seed.
    pub fn agent(&self, seed: Option<u64>) -> Option<(u64, Agent)> {
        let guard = self.lock();
        let agents = &guard.1.agents;
        match seed {
            Some(s) => agents.iter().find(|(k, _)| *k == s).cloned(),
            None => agents.first().cloned(),
        }
    }

    fn push(&self, seed: u64, m: &EpisodeMetrics) {
        let mut guard = self.lock();
        let index = guard.1.points.len();
        guard.1.points.push(MetricPoint {
            index,
            seed,
            episode: m.episode,
            reward: m.reward,
            length: m.length,
            loss: m.loss,
            growth_events: m.growth_events,
            diagnostic: m.diagnostic,
        });
        drop(guard);
        self.changed.notify_waiters();
    }

    /// Trains every seed in order on the calling thread.
    pub fn execute(&self) {
        self.advance(JobState::Running);
        for &seed in &self.config.seeds {
            let run = run_seed(
                &self.config,
                self.tree.as_ref(),
                seed,
                self.out.as_deref(),
                |event| {
                    if let TrainEvent::Episode(m) = event {
                        self.push(seed, m);
                    }
                    true
                },
            );
            match run {
                Ok(run) => {
                    let mut guard = self.lock();
                    guard.1.summaries.push(run.summary);
                    guard.1.agents.push((seed, run.agent));
                }
                Err(e) => {
                    self.fail(format!("seed {seed}: {e}"));
                    return;
                }
            }
        }
        self.advance(JobState::Done);
    }

    pub fn fail(&self, message: String) {
        self.lock().1.error = Some(message);
        self.advance(JobState::Failed);
    }
}

#[derive(Default)]
pub struct JobStore {
    jobs: Mutex<HashMap<u64, Arc<Job>>>,
    next_id: Mutex<u64>,
}

impl JobStore {
    pub fn create(
        &self,
        config: RunConfig,
        tree: Option<TreeSpec>,
        out_root: Option<&std::path::Path>,
    ) -> Arc<Job> {
        let id = {
            let mut next = self.next_id.lock().unwrap_or_else(|p| p.into_inner());
            *next += 1;
            *next
        };
        let job = Arc::new(Job {
            id,
            config,
            tree,
            out: out_root.map(|r| r.join(format!("job-{id}"))),
            state: Mutex::new((JobState::Queued, Progress::default())),
            changed: Notify::new(),
        });
        self.jobs
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(id, job.clone());
        job
    }

    pub fn get(&self, id: u64) -> Option<Arc<Job>> {
        self.jobs
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .get(&id)
            .cloned()
    }
}
