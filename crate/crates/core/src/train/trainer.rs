use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{run_episode, ActionMode, Domain, Environment, EpisodeOutcome, TraceRow};
use crate::error::Result;
use crate::model::ProLoNet;
use crate::train::agent::{loki_schedule, Agent};
use crate::train::checkpoint::{checkpoint_episodes, Checkpoint, CheckpointLabel, CheckpointMeta};
use crate::train::config::TrainerConfig;
use crate::train::divergence::{divergence, DivergenceRecord};
use crate::train::metrics::{EpisodeMetrics, GrowthRecord};
use crate::train::trajectory::samples_from;

/// Episodes in the running mean that decides whether a domain is solved.
pub const SOLVE_WINDOW: usize = 100;

const STREAM_ENV: u64 = 1;
const STREAM_UPDATES: u64 = 2;
const STREAM_PROBES: u64 = 3;
/// Offset separating a stream's action-sampling seeds from its reset seeds.
const ACTION_OFFSET: u64 = 1 << 32;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent seed for item `index` of random stream `stream`.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(stream)) ^ index)
}

pub enum TrainEvent<'a> {
    Episode(&'a EpisodeMetrics),
    Growth(&'a GrowthRecord),
    Checkpoint(&'a Checkpoint),
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub metrics: Vec<EpisodeMetrics>,
    pub growth: Vec<GrowthRecord>,
    pub divergence: Vec<DivergenceRecord>,
    /// Episode count at which the running mean first met the solve threshold.
    pub solved_at: Option<usize>,
    /// Training ended before the budget because the caller or the solve
    /// condition asked for it.
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn rewards(&self) -> Vec<f64> {
        self.metrics.iter().map(|m| m.reward).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub episodes: usize,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub mean_length: f64,
    /// Mean of the per-episode diagnostic (wildfire: drone-to-fire distance).
    pub mean_diagnostic: Option<f64>,
    pub rewards: Vec<f64>,
}

/// Plays `episodes` episodes without learning. Episode `k` uses
/// environment and action seeds derived from `seed` and `k`.
pub fn evaluate(
    agent: &Agent,
    domain: Domain,
    episodes: usize,
    seed: u64,
    mode: ActionMode,
) -> Result<Evaluation> {
    let mut env = domain.make_env();
    let mut rewards = Vec::with_capacity(episodes);
    let mut lengths = Vec::with_capacity(episodes);
    let mut diagnostics = Vec::new();
    for k in 0..episodes as u64 {
        let out = play(agent, env.as_mut(), seed, STREAM_PROBES, k, mode, None)?;
        rewards.push(out.reward);
        lengths.push(out.length as f64);
        diagnostics.extend(out.diagnostic);
    }
    Ok(Evaluation {
        episodes,
        mean_reward: crate::math::mean(&rewards),
        std_reward: crate::math::std_dev(&rewards),
        mean_length: crate::math::mean(&lengths),
        mean_diagnostic: (!diagnostics.is_empty()).then(|| crate::math::mean(&diagnostics)),
        rewards,
    })
}

/// Plays one episode of `agent` with seeds drawn from `stream` at `index`.
pub fn play(
    agent: &Agent,
    env: &mut dyn Environment,
    seed: u64,
    stream: u64,
    index: u64,
    mode: ActionMode,
    trace: Option<&mut Vec<TraceRow>>,
) -> Result<EpisodeOutcome> {
    let env_seed = derive_seed(seed, stream, index);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream | ACTION_OFFSET, index));
    run_episode(
        env,
        env_seed,
        |_, obs| agent.decide(obs, mode, &mut rng),
        trace,
    )
}

/// Runs the collect/update/grow loop for one agent on one domain.
pub struct Trainer {
    config: TrainerConfig,
    domain: Domain,
    agent: Agent,
    seed: u64,
    envs: Vec<Box<dyn Environment>>,
    episode: usize,
    update_rng: ChaCha8Rng,
    init_actor: Option<ProLoNet>,
    recent: VecDeque<f64>,
}

impl Trainer {
    pub fn new(mut agent: Agent, domain: Domain, config: TrainerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        agent.set_growth_config(config.growth_config());
        let envs = (0..config.workers).map(|_| domain.make_env()).collect();
        let init_actor = agent.actor_prolonet().cloned();
        Ok(Self {
            domain,
            seed,
            envs,
            episode: 0,
            update_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_UPDATES, 0)),
            init_actor,
            recent: VecDeque::with_capacity(SOLVE_WINDOW),
            agent,
            config,
        })
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn into_agent(self) -> Agent {
        self.agent
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    /// Training episodes completed so far.
    pub fn episode(&self) -> usize {
        self.episode
    }

    /// The acting network as it was when training started.
    pub fn initial_actor(&self) -> Option<&ProLoNet> {
        self.init_actor.as_ref()
    }

    /// Snapshot of the current agent, or `None` for agents without networks.
    pub fn checkpoint(&self, label: CheckpointLabel) -> Option<Checkpoint> {
        Some(Checkpoint {
            meta: CheckpointMeta {
                label,
                episode: self.episode,
            },
            actor: self.agent.actor()?,
            deep_actor: self.agent.deep_actor().cloned(),
            critic: self.agent.critic().cloned(),
            optimizer: self.agent.optimizer().clone(),
        })
    }

    /// Collects `count` episodes starting at the current episode index,
    /// in parallel when there is more than one.
    fn collect(&mut self, count: usize) -> Vec<Result<EpisodeOutcome>> {
        let agent = &self.agent;
        let (seed, first) = (self.seed, self.episode as u64);
        let envs = &mut self.envs[..count];
        if count == 1 {
            return vec![play(
                agent,
                envs[0].as_mut(),
                seed,
                STREAM_ENV,
                first,
                ActionMode::Sample,
                None,
            )];
        }
        std::thread::scope(|scope| {
            let handles: Vec<_> = envs
                .iter_mut()
                .enumerate()
                .map(|(w, env)| {
                    scope.spawn(move || {
                        play(
                            agent,
                            env.as_mut(),
                            seed,
                            STREAM_ENV,
                            first + w as u64,
                            ActionMode::Sample,
                            None,
                        )
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("episode worker panicked"))
                .collect()
        })
    }

    fn probe(&self, agent: &Agent) -> Result<f64> {
        let mut env = self.domain.make_env();
        let mut total = 0.0;
        for k in 0..self.config.rollback_probes as u64 {
            let index = (self.episode as u64) << 8 | k;
            total += play(
                agent,
                env.as_mut(),
                self.seed,
                STREAM_PROBES,
                index,
                ActionMode::Sample,
                None,
            )?
            .reward;
        }
        Ok(total / self.config.rollback_probes as f64)
    }

    fn solved(&self) -> bool {
        match self.domain.solve_threshold() {
            Some(t) => {
                self.recent.len() == SOLVE_WINDOW
                    && self.recent.iter().sum::<f64>() / SOLVE_WINDOW as f64 >= t
            }
            None => false,
        }
    }

    /// Trains for up to `episodes` more episodes. `on_event` sees every
    /// metric row, growth event and checkpoint as it happens and may return
    /// `false` to stop after the current update.
    pub fn train<F>(&mut self, episodes: usize, mut on_event: F) -> Result<TrainReport>
    where
        F: FnMut(TrainEvent<'_>) -> bool,
    {
        let mut report = TrainReport::default();
        let start = self.episode;
        let end = start + episodes;
        let mut pending: Vec<(f64, usize)> = checkpoint_episodes(episodes)
            .into_iter()
            .map(|(f, e)| (f, start + e))
            .collect();
        if let Some(init) = &self.init_actor {
            // the starting point against itself, exactly zero by construction
            let d = divergence(init, init)?;
            report.divergence.push(DivergenceRecord {
                checkpoint: "0".into(),
                episode: start,
                mse_weights: d.mse_weights,
                mse_comparators: d.mse_comparators,
                mse_leaves: d.mse_leaves,
            });
        }
        let mut keep_going = true;
        while self.episode < end && keep_going {
            let count = self.config.workers.min(end - self.episode);
            let outcomes = self.collect(count);
            let mode = loki_schedule(self.episode, self.config.loki_n);

            let mut trajectories = Vec::new();
            let mut rows = Vec::with_capacity(count);
            for (w, outcome) in outcomes.into_iter().enumerate() {
                let index = self.episode + w;
                match outcome {
                    Ok(out) => {
                        rows.push(EpisodeMetrics {
                            episode: index,
                            reward: out.reward,
                            length: out.length,
                            loss: 0.0,
                            growth_events: 0,
                            mode,
                            rolled_back: false,
                            diagnostic: out.diagnostic,
                            error: None,
                        });
                        trajectories.extend(out.trajectories);
                    }
                    Err(e) => rows.push(EpisodeMetrics {
                        episode: index,
                        reward: 0.0,
                        length: 0,
                        loss: 0.0,
                        growth_events: 0,
                        mode,
                        rolled_back: false,
                        diagnostic: None,
                        error: Some(e.to_string()),
                    }),
                }
            }
            for t in &mut trajectories {
                if let (true, Some(last)) = (self.config.bootstrap_truncated, &t.final_state) {
                    t.tail_value = self.agent.state_value(last)?;
                }
                t.compute_returns_advantages(self.config.discount)?;
            }
            trajectories.retain(|t| !t.is_empty());

            let mut growth = Vec::new();
            let mut rolled_back = false;
            let mut loss = 0.0;
            if self.agent.learns() && !trajectories.is_empty() {
                let mut samples = samples_from(&trajectories);
                let before = if self.config.rollback {
                    Some((
                        self.agent.clone(),
                        self.update_rng.clone(),
                        self.probe(&self.agent)?,
                    ))
                } else {
                    None
                };
                let stats =
                    self.agent
                        .update(&mut samples, mode, &self.config, &mut self.update_rng)?;
                loss = stats.loss;
                if let Some((snapshot, rng, reward_before)) = before {
                    let reward_after = self.probe(&self.agent)?;
                    if reward_after
                        < reward_before - self.config.rollback_tolerance * reward_before.abs()
                    {
                        self.agent = snapshot;
                        self.update_rng = rng;
                        rolled_back = true;
                    }
                }
                if !rolled_back && self.config.growth {
                    growth = self.agent.grow();
                }
            }
            self.episode += count;

            let last = rows.len() - 1;
            rows[last].loss = loss;
            rows[last].growth_events = growth.len();
            rows[last].rolled_back = rolled_back;
            for row in rows {
                if row.error.is_none() {
                    if self.recent.len() == SOLVE_WINDOW {
                        self.recent.pop_front();
                    }
                    self.recent.push_back(row.reward);
                }
                keep_going &= on_event(TrainEvent::Episode(&row));
                report.metrics.push(row);
            }
            for event in growth {
                let record = GrowthRecord {
                    episode: self.episode - 1,
                    leaf_id: event.leaf_id,
                    shallow_entropy: event.shallow_entropy,
                    child_entropies: event.child_entropies,
                    epsilon: event.epsilon,
                };
                keep_going &= on_event(TrainEvent::Growth(&record));
                report.growth.push(record);
            }

            let mut labels = Vec::new();
            while pending.first().is_some_and(|&(_, e)| e <= self.episode) {
                labels.push(CheckpointLabel::Fraction(pending.remove(0).0));
            }
            if report.solved_at.is_none() && self.solved() {
                report.solved_at = Some(self.episode);
                labels.push(CheckpointLabel::Solved);
                if self.config.stop_when_solved {
                    keep_going = false;
                }
            }
            for label in labels {
                let Some(cp) = self.checkpoint(label) else {
                    continue;
                };
                if let (Some(init), Some(current)) = (&self.init_actor, cp.actor.as_prolonet()) {
                    let d = divergence(init, current)?;
                    report.divergence.push(DivergenceRecord {
                        checkpoint: label.name(),
                        episode: self.episode,
                        mse_weights: d.mse_weights,
                        mse_comparators: d.mse_comparators,
                        mse_leaves: d.mse_leaves,
                    });
                }
                keep_going &= on_event(TrainEvent::Checkpoint(&cp));
            }
        }
        report.stopped_early = self.episode < end;
        Ok(report)
    }
}
