//! Built-in episodic environments behind one interface.

mod cartpole;
mod runner;
mod wildfire;

pub use cartpole::{CartPole, CartPoleParams, CartPoleState};
pub use runner::{run_episode, ActionMode, EpisodeOutcome, TraceRow};
pub use wildfire::{Direction, Fire, Wildfire, WildfireParams, WildfireState};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Result of one environment step, one entry per agent.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvStep {
    pub observations: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub done: bool,
    /// The episode was cut off by its step limit rather than ending in a
    /// terminal state.
    pub truncated: bool,
}

pub trait Environment: Send {
    fn observation_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn agent_count(&self) -> usize;

    /// Starts a new episode; returns one observation per agent.
    fn reset(&mut self, seed: u64) -> Vec<Vec<f64>>;

    /// Advances one step with one action per agent.
    fn step(&mut self, actions: &[usize]) -> Result<EnvStep>;

    /// Positions of interest for external plotting, as `(label, x, y)`.
    fn trace(&self) -> Vec<(String, f64, f64)> {
        Vec::new()
    }

    /// Domain-specific per-step diagnostic (mean fire distance for wildfire).
    fn diagnostic(&self) -> Option<f64> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Cartpole,
    Wildfire,
}

impl Domain {
    pub const ALL: [Domain; 2] = [Domain::Cartpole, Domain::Wildfire];

    pub fn name(self) -> &'static str {
        match self {
            Domain::Cartpole => "cartpole",
            Domain::Wildfire => "wildfire",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name() == name)
    }

    pub fn feature_names(self) -> Vec<String> {
        let names: &[&str] = match self {
            Domain::Cartpole => &["x_position", "x_velocity", "pole_angle", "pole_velocity"],
            Domain::Wildfire => &[
                "fire1_north",
                "fire1_west",
                "fire2_north",
                "fire2_west",
                "closest_to_fire1",
                "closest_to_fire2",
            ],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn action_names(self) -> Vec<String> {
        let names: &[&str] = match self {
            Domain::Cartpole => &["left", "right"],
            Domain::Wildfire => &["north", "east", "south", "west"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn observation_dim(self) -> usize {
        self.feature_names().len()
    }

    pub fn action_dim(self) -> usize {
        self.action_names().len()
    }

    pub fn make_env(self) -> Box<dyn Environment> {
        match self {
            Domain::Cartpole => Box::new(CartPole::default()),
            Domain::Wildfire => Box::new(Wildfire::default()),
        }
    }

    /// Running-mean reward over 100 episodes that counts as solved.
    pub fn solve_threshold(self) -> Option<f64> {
        match self {
            Domain::Cartpole => Some(475.0),
            Domain::Wildfire => None,
        }
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::from_name(s)
            .ok_or_else(|| format!("unknown domain {s:?} (expected cartpole or wildfire)"))
    }
}
