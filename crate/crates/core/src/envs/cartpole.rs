use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envs::{EnvStep, Environment};
use crate::error::{Error, Result};

/// Classic cart-pole constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CartPoleParams {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    /// Half the pole's length.
    pub half_length: f64,
    pub force: f64,
    pub dt: f64,
    pub x_limit: f64,
    pub angle_limit: f64,
    pub max_steps: usize,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_length: 0.5,
            force: 10.0,
            dt: 0.02,
            x_limit: 2.4,
            angle_limit: 12.0 * 2.0 * std::f64::consts::PI / 360.0,
            max_steps: 500,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl CartPoleState {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.x, self.x_dot, self.theta, self.theta_dot]
    }
}

impl CartPoleParams {
    /// One explicit-Euler step. Action 0 pushes left, 1 pushes right.
    pub fn integrate(&self, s: CartPoleState, action: usize) -> CartPoleState {
        let force = if action == 1 { self.force } else { -self.force };
        let total_mass = self.cart_mass + self.pole_mass;
        let pole_moment = self.pole_mass * self.half_length;
        let (sin, cos) = s.theta.sin_cos();
        let temp = (force + pole_moment * s.theta_dot * s.theta_dot * sin) / total_mass;
        let theta_acc = (self.gravity * sin - cos * temp)
            / (self.half_length * (4.0 / 3.0 - self.pole_mass * cos * cos / total_mass));
        let x_acc = temp - pole_moment * theta_acc * cos / total_mass;
        CartPoleState {
            x: s.x + self.dt * s.x_dot,
            x_dot: s.x_dot + self.dt * x_acc,
            theta: s.theta + self.dt * s.theta_dot,
            theta_dot: s.theta_dot + self.dt * theta_acc,
        }
    }

    pub fn out_of_bounds(&self, s: &CartPoleState) -> bool {
        s.x.abs() > self.x_limit || s.theta.abs() > self.angle_limit
    }
}

/// Balance an inverted pendulum on a cart. Reward +1 per step, so the
/// episode return equals its length.
#[derive(Clone, Debug)]
pub struct CartPole {
    params: CartPoleParams,
    state: CartPoleState,
    steps: usize,
}

impl Default for CartPole {
    fn default() -> Self {
        Self::new(CartPoleParams::default())
    }
}

impl CartPole {
    pub fn new(params: CartPoleParams) -> Self {
        Self {
            params,
            state: CartPoleState::default(),
            steps: 0,
        }
    }

    pub fn state(&self) -> CartPoleState {
        self.state
    }

    pub fn set_state(&mut self, state: CartPoleState) {
        self.state = state;
        self.steps = 0;
    }

    pub fn params(&self) -> &CartPoleParams {
        &self.params
    }
}

impl Environment for CartPole {
    fn observation_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn agent_count(&self) -> usize {
        1
    }

    fn reset(&mut self, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || rng.random_range(-0.05..0.05);
        self.state = CartPoleState {
            x: draw(),
            x_dot: draw(),
            theta: draw(),
            theta_dot: draw(),
        };
        self.steps = 0;
        vec![self.state.to_vec()]
    }

    fn step(&mut self, actions: &[usize]) -> Result<EnvStep> {
        let &[action] = actions else {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: actions.len(),
            });
        };
        if action >= 2 {
            return Err(Error::InvalidAction { action, limit: 2 });
        }
        self.state = self.params.integrate(self.state, action);
        self.steps += 1;
        let failed = self.params.out_of_bounds(&self.state);
        let done = failed || self.steps >= self.params.max_steps;
        Ok(EnvStep {
            observations: vec![self.state.to_vec()],
            rewards: vec![1.0],
            done,
            truncated: done && !failed,
        })
    }

    fn trace(&self) -> Vec<(String, f64, f64)> {
        vec![("cart".into(), self.state.x, self.state.theta)]
    }
}
