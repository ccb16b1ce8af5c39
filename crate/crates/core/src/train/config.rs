use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{ChildAggregation, GrowthConfig, DEFAULT_EPSILON};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    #[default]
    #[serde(alias = "clip")]
    PpoClip,
    #[serde(alias = "kl")]
    PpoKlScaled,
}

impl std::str::FromStr for LossVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clip" | "ppo_clip" => Ok(LossVariant::PpoClip),
            "kl" | "ppo_kl_scaled" => Ok(LossVariant::PpoKlScaled),
            other => Err(Error::Config(format!("unknown loss variant {other:?}"))),
        }
    }
}

/// What the critic regresses onto.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticTarget {
    /// Discounted return-to-go.
    #[default]
    Return,
    /// Immediate reward only.
    Reward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub learning_rate: f64,
    pub discount: f64,
    pub ppo_clip: f64,
    pub epochs_per_episode: usize,
    /// Upper bound on minibatch size; each minibatch is
    /// `min(collected samples, batch_cap)`.
    pub batch_cap: usize,
    pub loss_variant: LossVariant,
    /// Episodes of heuristic imitation before switching to RL. 0 disables.
    pub loki_n: usize,
    pub rollback: bool,
    pub rollback_probes: usize,
    /// Relative drop in probe reward that triggers a rollback.
    pub rollback_tolerance: f64,
    /// Train the deeper shadow network and deepen when it is more decisive.
    pub growth: bool,
    pub epsilon_growth: f64,
    pub growth_aggregation: ChildAggregation,
    pub critic_target: CriticTarget,
    /// Credit the critic's value of the final state to episodes cut off by
    /// a step limit instead of treating the cut as terminal.
    pub bootstrap_truncated: bool,
    pub normalize_advantages: bool,
    /// Episodes collected concurrently and pooled into each update.
    pub workers: usize,
    /// End training once the domain's solve threshold is met.
    pub stop_when_solved: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            discount: 0.99,
            ppo_clip: 0.2,
            epochs_per_episode: 4,
            batch_cap: 64,
            loss_variant: LossVariant::PpoClip,
            loki_n: 0,
            rollback: false,
            rollback_probes: 5,
            rollback_tolerance: 0.05,
            growth: true,
            epsilon_growth: DEFAULT_EPSILON,
            growth_aggregation: ChildAggregation::Mean,
            critic_target: CriticTarget::Return,
            bootstrap_truncated: true,
            normalize_advantages: true,
            workers: 1,
            stop_when_solved: false,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        // zero is allowed: it freezes every parameter
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            problems.push("learning_rate must be finite and non-negative".to_string());
        }
        if !(0.0..=1.0).contains(&self.discount) {
            problems.push("discount must lie in [0, 1]".into());
        }
        if !(self.ppo_clip > 0.0 && self.ppo_clip < 1.0) {
            problems.push("ppo_clip must lie in (0, 1)".into());
        }
        if self.epochs_per_episode == 0 {
            problems.push("epochs_per_episode must be at least 1".into());
        }
        if self.batch_cap == 0 {
            problems.push("batch_cap must be at least 1".into());
        }
        if self.workers == 0 {
            problems.push("workers must be at least 1".into());
        }
        if self.rollback && self.rollback_probes == 0 {
            problems.push("rollback_probes must be at least 1".into());
        }
        if self.rollback_tolerance.is_nan() || self.rollback_tolerance < 0.0 {
            problems.push("rollback_tolerance must be non-negative".into());
        }
        if self.epsilon_growth.is_nan() {
            problems.push("epsilon_growth must be a number".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn growth_config(&self) -> GrowthConfig {
        GrowthConfig {
            epsilon: self.epsilon_growth,
            aggregation: self.growth_aggregation,
        }
    }
}
