use serde::{Deserialize, Serialize};

use crate::envs::Environment;
use crate::error::Result;
use crate::train::{Decision, Trajectory, Transition};

/// How an agent turns its action distribution into an action.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionMode {
    #[default]
    Sample,
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: usize,
    pub label: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug)]
pub struct EpisodeOutcome {
    /// One trajectory per agent, in agent order.
    pub trajectories: Vec<Trajectory>,
    /// Cumulative reward, averaged over agents.
    pub reward: f64,
    pub length: usize,
    /// Mean of the environment's per-step diagnostic, when it has one.
    pub diagnostic: Option<f64>,
}

/// Plays one episode. `policy(agent, observation)` is called for every agent
/// on its own observation each step; with several agents this evaluates one
/// shared policy independently per agent.
pub fn run_episode<F>(
    env: &mut dyn Environment,
    seed: u64,
    mut policy: F,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<EpisodeOutcome>
where
    F: FnMut(usize, &[f64]) -> Result<Decision>,
{
    let agents = env.agent_count();
    let mut observations = env.reset(seed);
    let mut trajectories = vec![Trajectory::default(); agents];
    let mut totals = vec![0.0; agents];
    let mut diagnostics = Vec::new();
    let record = |env: &dyn Environment, step: usize, trace: &mut Option<&mut Vec<TraceRow>>| {
        if let Some(rows) = trace.as_deref_mut() {
            rows.extend(env.trace().into_iter().map(|(label, x, y)| TraceRow {
                step,
                label,
                x,
                y,
            }));
        }
    };
    record(env, 0, &mut trace);
    let mut length = 0;
    loop {
        let decisions: Vec<Decision> = observations
            .iter()
            .enumerate()
            .map(|(agent, obs)| policy(agent, obs))
            .collect::<Result<_>>()?;
        let actions: Vec<usize> = decisions.iter().map(|d| d.action).collect();
        let step = env.step(&actions)?;
        length += 1;
        if let Some(d) = env.diagnostic() {
            diagnostics.push(d);
        }
        record(env, length, &mut trace);
        for (agent, (decision, obs)) in decisions.into_iter().zip(observations).enumerate() {
            let reward = step.rewards[agent];
            totals[agent] += reward;
            trajectories[agent].push(Transition {
                state: obs,
                action: decision.action,
                action_probs: decision.probs,
                reward,
                value_estimate: decision.value,
            });
        }
        observations = step.observations;
        if step.done {
            if step.truncated {
                for (traj, obs) in trajectories.iter_mut().zip(&observations) {
                    traj.final_state = Some(obs.clone());
                }
            }
            break;
        }
    }
    Ok(EpisodeOutcome {
        trajectories,
        reward: crate::math::mean(&totals),
        length,
        diagnostic: (!diagnostics.is_empty()).then(|| crate::math::mean(&diagnostics)),
    })
}
