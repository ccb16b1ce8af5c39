//! One experiment: a domain, an agent, an optional rule tree and trainer
//! settings, repeated over seeds. The command line and the HTTP service
//! both drive training through [`run_seed`], so the same configuration and
//! seed give the same curve from either.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{
    build_agent_with_mistakes, check_tree_domain, parse_domain_tree, AgentKind,
};
use crate::compile::{tree_from_json, TreeSpec, TreeSpecDoc};
use crate::envs::{ActionMode, Domain, TraceRow};
use crate::error::{Error, Result};
use crate::train::{
    derive_seed, evaluate, play, write_divergence_csv, Agent, Evaluation, MetricsWriter,
    TrainEvent, TrainReport, Trainer, TrainerConfig,
};

const STREAM_EVAL: u64 = 4;
const STREAM_TRACE: u64 = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: Domain,
    pub agent: AgentKind,
    /// `.tree` DSL file or treespec-v1 JSON; the domain's built-in tree when
    /// neither this nor `tree_spec` is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<PathBuf>,
    /// Inline treespec-v1 document. Wins over `tree`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree_spec: Option<TreeSpecDoc>,
    pub seeds: Vec<u64>,
    pub episodes: usize,
    pub mistake_rate: f64,
    /// Episodes in the evaluations before and after training.
    pub eval_episodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub trainer: TrainerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: Domain::Cartpole,
            agent: AgentKind::ProlonetInit,
            tree: None,
            tree_spec: None,
            // five runs per configuration
            seeds: (0..5).collect(),
            episodes: 1000,
            mistake_rate: 0.0,
            eval_episodes: 20,
            out: None,
            trainer: TrainerConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.seeds.is_empty() {
            problems.push("at least one seed is required".to_string());
        }
        if !(0.0..=0.5).contains(&self.mistake_rate) {
            problems.push("mistake_rate must lie in [0, 0.5]".into());
        }
        if self.eval_episodes == 0 {
            problems.push("eval_episodes must be at least 1".into());
        }
        if let Err(Error::Config(msg)) = self.trainer.validate() {
            problems.push(msg);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn from_text(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Ok(serde_json::from_str(text)?)
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The rule tree this run starts from, checked against the domain.
    pub fn resolve_tree(&self) -> Result<Option<TreeSpec>> {
        let spec = if let Some(doc) = &self.tree_spec {
            doc.to_spec().map_err(Error::InvalidTree)?
        } else if let Some(path) = &self.tree {
            load_tree(path, self.domain)?
        } else {
            return Ok(None);
        };
        check_tree_domain(&spec, self.domain)?;
        Ok(Some(spec))
    }

    pub fn build_agent(&self, tree: Option<&TreeSpec>, seed: u64) -> Result<Agent> {
        build_agent_with_mistakes(self.agent, self.domain, tree, seed, self.mistake_rate)
    }
}

/// Reads a tree file: treespec-v1 JSON for `.json`, the DSL otherwise.
pub fn load_tree(path: &Path, domain: Domain) -> Result<TreeSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        tree_from_json(&text)
    } else {
        parse_domain_tree(domain, &text)
    }
}

/// Seed of the evaluation episodes for a training seed.
pub fn eval_seed(seed: u64) -> u64 {
    derive_seed(seed, STREAM_EVAL, 0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub episodes_run: usize,
    pub initial: Evaluation,
    /// Absent when no training episode ran.
    pub trained: Option<Evaluation>,
    /// Mean training-episode reward, or the initial evaluation's mean
    /// reward when no training episode ran.
    pub mean_reward: f64,
    pub solved_at: Option<usize>,
    pub growth_events: usize,
}

/// Everything one seed produced.
pub struct SeedRun {
    pub summary: SeedSummary,
    pub report: TrainReport,
    pub agent: Agent,
}

/// Builds, evaluates, trains and re-evaluates one seed. With `out`, writes
/// metrics, checkpoints, divergence and a summary under `out/seed-<seed>`.
/// `on_event` may return `false` to stop training early.
pub fn run_seed<F>(
    config: &RunConfig,
    tree: Option<&TreeSpec>,
    seed: u64,
    out: Option<&Path>,
    mut on_event: F,
) -> Result<SeedRun>
where
    F: FnMut(TrainEvent<'_>) -> bool,
{
    config.validate()?;
    let agent = config.build_agent(tree, seed)?;
    let initial = evaluate(
        &agent,
        config.domain,
        config.eval_episodes,
        eval_seed(seed),
        ActionMode::Sample,
    )?;

    let dir = out.map(|o| o.join(format!("seed-{seed}")));
    let mut writer = match &dir {
        Some(d) => {
            let w = MetricsWriter::create(d)?;
            if let Some(actor) = agent.actor() {
                write_file(&d.join("initial_actor.json"), &actor.to_json()?)?;
            }
            Some(w)
        }
        None => None,
    };

    let mut trainer = Trainer::new(agent, config.domain, config.trainer.clone(), seed)?;
    let mut failure = None;
    let report = trainer.train(config.episodes, |event| {
        let written = match (&mut writer, &event, &dir) {
            (Some(w), TrainEvent::Episode(m), _) => w.episode(m),
            (Some(w), TrainEvent::Growth(g), _) => w.growth(g),
            (Some(_), TrainEvent::Checkpoint(cp), Some(d)) => cp.save(d).map(|_| ()),
            _ => Ok(()),
        };
        if let Err(e) = written {
            failure = Some(e);
            return false;
        }
        on_event(event)
    })?;
    if let Some(e) = failure {
        return Err(e);
    }

    let agent = trainer.into_agent();
    let trained = if report.metrics.is_empty() {
        None
    } else {
        Some(evaluate(
            &agent,
            config.domain,
            config.eval_episodes,
            eval_seed(seed),
            ActionMode::Sample,
        )?)
    };
    let rewards = report.rewards();
    let mean_reward = if rewards.is_empty() {
        initial.mean_reward
    } else {
        rewards.iter().sum::<f64>() / rewards.len() as f64
    };
    let summary = SeedSummary {
        seed,
        episodes_run: report.metrics.len(),
        initial,
        trained,
        mean_reward,
        solved_at: report.solved_at,
        growth_events: report.growth.len(),
    };
    if let (Some(w), Some(d)) = (&mut writer, &dir) {
        w.flush()?;
        if !report.divergence.is_empty() {
            write_divergence_csv(&d.join("divergence.csv"), &report.divergence)?;
        }
        write_file(
            &d.join("summary.json"),
            &serde_json::to_string_pretty(&summary)?,
        )?;
    }
    Ok(SeedRun {
        summary,
        report,
        agent,
    })
}

/// Plays one greedy episode and returns its per-step positions.
pub fn render_trace(agent: &Agent, domain: Domain, seed: u64) -> Result<Vec<TraceRow>> {
    let mut env = domain.make_env();
    let mut rows = Vec::new();
    play(
        agent,
        env.as_mut(),
        seed,
        STREAM_TRACE,
        0,
        ActionMode::Greedy,
        Some(&mut rows),
    )?;
    Ok(rows)
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
