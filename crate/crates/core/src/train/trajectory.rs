use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What an agent chose in one state, recorded at behavior time.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub action: usize,
    pub probs: Vec<f64>,
    /// Baseline for the advantage: the critic's outputs averaged under `probs`.
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    /// Behavior policy's distribution when the action was taken.
    pub action_probs: Vec<f64>,
    pub reward: f64,
    pub value_estimate: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    /// Observation after the last step when the episode was cut off by a
    /// step limit; its value estimate seeds the returns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_state: Option<Vec<f64>>,
    /// Value credited after the last step (0 for terminal endings).
    #[serde(default)]
    pub tail_value: f64,
    #[serde(default)]
    pub returns: Vec<f64>,
    #[serde(default)]
    pub advantages: Vec<f64>,
}

impl Trajectory {
    pub fn push(&mut self, t: Transition) {
        self.transitions.push(t);
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    /// Fills `returns[t] = sum_k gamma^(k-t) r_k + gamma^(n-t) tail_value` and
    /// `advantages[t] = returns[t] - value_estimate[t]`.
    pub fn compute_returns_advantages(&mut self, gamma: f64) -> Result<()> {
        if self.transitions.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        let n = self.transitions.len();
        self.returns = vec![0.0; n];
        let mut acc = self.tail_value;
        for t in (0..n).rev() {
            acc = self.transitions[t].reward + gamma * acc;
            self.returns[t] = acc;
        }
        self.advantages = self
            .returns
            .iter()
            .zip(&self.transitions)
            .map(|(r, t)| r - t.value_estimate)
            .collect();
        Ok(())
    }
}

/// One flattened training example.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub state: Vec<f64>,
    pub action: usize,
    pub old_probs: Vec<f64>,
    pub ret: f64,
    pub reward: f64,
    pub advantage: f64,
}

/// Flattens trajectories (which must have returns computed) into samples.
pub fn samples_from(trajectories: &[Trajectory]) -> Vec<Sample> {
    trajectories
        .iter()
        .flat_map(|traj| {
            traj.transitions
                .iter()
                .enumerate()
                .map(move |(i, t)| Sample {
                    state: t.state.clone(),
                    action: t.action,
                    old_probs: t.action_probs.clone(),
                    ret: traj.returns[i],
                    reward: t.reward,
                    advantage: traj.advantages[i],
                })
        })
        .collect()
}

/// Rescales advantages to zero mean and unit variance in place.
pub fn normalize_advantages(samples: &mut [Sample]) {
    if samples.len() < 2 {
        return;
    }
    let adv: Vec<f64> = samples.iter().map(|s| s.advantage).collect();
    let m = crate::math::mean(&adv);
    let sd = crate::math::std_dev(&adv);
    for s in samples {
        s.advantage = (s.advantage - m) / (sd + 1e-8);
    }
}
