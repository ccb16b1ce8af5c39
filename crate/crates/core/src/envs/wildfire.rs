use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::envs::{EnvStep, Environment};
use crate::error::{Error, Result};

/// Drone move commands, in action-index order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Unit offset with x growing east and y growing north.
    pub fn offset(self) -> (f64, f64) {
        match self {
            Direction::North => (0.0, 1.0),
            Direction::East => (1.0, 0.0),
            Direction::South => (0.0, -1.0),
            Direction::West => (-1.0, 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WildfireParams {
    pub grid: f64,
    pub drone_stride: f64,
    pub episode_steps: usize,
    pub min_fire_speed: f64,
    pub max_fire_speed: f64,
    /// Standard deviation of the per-step Gaussian jitter on fire motion.
    pub jitter_std: f64,
}

impl Default for WildfireParams {
    fn default() -> Self {
        Self {
            grid: 500.0,
            drone_stride: 5.0,
            episode_steps: 300,
            min_fire_speed: 0.5,
            max_fire_speed: 2.0,
            // variance 0.25
            jitter_std: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Fire {
    pub position: (f64, f64),
    pub velocity: (f64, f64),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WildfireState {
    pub fires: [Fire; 2],
    pub drones: [(f64, f64); 2],
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

impl WildfireState {
    /// Index of the drone nearest to `fire`; ties go to the lower index.
    pub fn nearest_drone(&self, fire: usize) -> usize {
        let f = self.fires[fire].position;
        if distance(self.drones[1], f) < distance(self.drones[0], f) {
            1
        } else {
            0
        }
    }

    pub fn nearest_distance(&self, fire: usize) -> f64 {
        let f = self.fires[fire].position;
        self.drones
            .iter()
            .map(|&d| distance(d, f))
            .fold(f64::INFINITY, f64::min)
    }

    /// `[north(F1), west(F1), north(F2), west(F2), closest(F1), closest(F2)]`
    /// for one drone. Offsets are fire minus drone, positive toward north and
    /// west, divided by the grid size.
    pub fn observation(&self, drone: usize, grid: f64) -> Vec<f64> {
        let d = self.drones[drone];
        let mut obs = Vec::with_capacity(6);
        for fire in &self.fires {
            obs.push((fire.position.1 - d.1) / grid);
            obs.push((d.0 - fire.position.0) / grid);
        }
        for fire in 0..2 {
            obs.push(if self.nearest_drone(fire) == drone {
                1.0
            } else {
                0.0
            });
        }
        obs
    }

    /// Shared team reward: minus the summed nearest-drone distances, per grid size.
    pub fn team_reward(&self, grid: f64) -> f64 {
        -(self.nearest_distance(0) + self.nearest_distance(1)) / grid
    }
}

/// Two drones track two drifting fire centroids on a square grid. The drones
/// share no information beyond their own observations.
#[derive(Clone, Debug)]
pub struct Wildfire {
    params: WildfireParams,
    state: WildfireState,
    rng: ChaCha8Rng,
    steps: usize,
}

impl Default for Wildfire {
    fn default() -> Self {
        Self::new(WildfireParams::default())
    }
}

impl Wildfire {
    pub fn new(params: WildfireParams) -> Self {
        Self {
            params,
            state: WildfireState::default(),
            rng: ChaCha8Rng::seed_from_u64(0),
            steps: 0,
        }
    }

    pub fn state(&self) -> &WildfireState {
        &self.state
    }

    pub fn set_state(&mut self, state: WildfireState) {
        self.state = state;
        self.steps = 0;
    }

    pub fn params(&self) -> &WildfireParams {
        &self.params
    }

    fn observations(&self) -> Vec<Vec<f64>> {
        (0..2)
            .map(|d| self.state.observation(d, self.params.grid))
            .collect()
    }

    fn advance_fire(&mut self, i: usize) {
        let g = self.params.grid;
        let jitter = Normal::new(0.0, self.params.jitter_std.max(0.0)).expect("finite std");
        let (jx, jy) = if self.params.jitter_std > 0.0 {
            (jitter.sample(&mut self.rng), jitter.sample(&mut self.rng))
        } else {
            (0.0, 0.0)
        };
        let fire = &mut self.state.fires[i];
        let reflect = |p: f64, v: &mut f64| {
            if p < 0.0 {
                *v = -*v;
                (-p).min(g)
            } else if p > g {
                *v = -*v;
                (2.0 * g - p).max(0.0)
            } else {
                p
            }
        };
        let (mut vx, mut vy) = fire.velocity;
        let x = reflect(fire.position.0 + vx + jx, &mut vx);
        let y = reflect(fire.position.1 + vy + jy, &mut vy);
        fire.position = (x, y);
        fire.velocity = (vx, vy);
    }
}

impl Environment for Wildfire {
    fn observation_dim(&self) -> usize {
        6
    }

    fn action_dim(&self) -> usize {
        4
    }

    fn agent_count(&self) -> usize {
        2
    }

    fn reset(&mut self, seed: u64) -> Vec<Vec<f64>> {
        let p = self.params;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let rng = &mut self.rng;
        let mut fires = [Fire::default(); 2];
        for fire in &mut fires {
            let position = (rng.random_range(0.0..p.grid), rng.random_range(0.0..p.grid));
            let heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let speed = rng.random_range(p.min_fire_speed..=p.max_fire_speed);
            *fire = Fire {
                position,
                velocity: (speed * heading.cos(), speed * heading.sin()),
            };
        }
        let drones = [
            (rng.random_range(0.0..p.grid), rng.random_range(0.0..p.grid)),
            (rng.random_range(0.0..p.grid), rng.random_range(0.0..p.grid)),
        ];
        self.state = WildfireState { fires, drones };
        self.steps = 0;
        self.observations()
    }

    fn step(&mut self, actions: &[usize]) -> Result<EnvStep> {
        if actions.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: actions.len(),
            });
        }
        let moves: Vec<Direction> = actions
            .iter()
            .map(|&a| {
                Direction::from_index(a).ok_or(Error::InvalidAction {
                    action: a,
                    limit: 4,
                })
            })
            .collect::<Result<_>>()?;
        let (g, stride) = (self.params.grid, self.params.drone_stride);
        for (drone, dir) in self.state.drones.iter_mut().zip(moves) {
            let (dx, dy) = dir.offset();
            drone.0 = (drone.0 + stride * dx).clamp(0.0, g);
            drone.1 = (drone.1 + stride * dy).clamp(0.0, g);
        }
        self.advance_fire(0);
        self.advance_fire(1);
        self.steps += 1;
        let reward = self.state.team_reward(g);
        Ok(EnvStep {
            observations: self.observations(),
            rewards: vec![reward, reward],
            done: self.steps >= self.params.episode_steps,
            truncated: self.steps >= self.params.episode_steps,
        })
    }

    fn trace(&self) -> Vec<(String, f64, f64)> {
        let s = &self.state;
        vec![
            ("fire1".into(), s.fires[0].position.0, s.fires[0].position.1),
            ("fire2".into(), s.fires[1].position.0, s.fires[1].position.1),
            ("drone1".into(), s.drones[0].0, s.drones[0].1),
            ("drone2".into(), s.drones[1].0, s.drones[1].1),
        ]
    }

    fn diagnostic(&self) -> Option<f64> {
        Some(0.5 * (self.state.nearest_distance(0) + self.state.nearest_distance(1)))
    }
}
