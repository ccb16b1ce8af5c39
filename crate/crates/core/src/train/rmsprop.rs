use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};

pub const RMSPROP_DECAY: f64 = 0.99;
pub const RMSPROP_EPS: f64 = 1e-8;

/// RMSProp with per-parameter running squared-gradient averages:
/// `v = 0.99 v + 0.01 g^2`, `theta -= lr g / (sqrt(v) + 1e-8)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    pub square_avg: Vec<f64>,
}

impl RmsProp {
    pub fn new(num_params: usize) -> Self {
        Self {
            square_avg: vec![0.0; num_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], learning_rate: f64) -> Result<()> {
        check_dim(self.square_avg.len(), params.len())?;
        check_dim(params.len(), grads.len())?;
        for ((p, v), g) in params.iter_mut().zip(&mut self.square_avg).zip(grads) {
            *v = RMSPROP_DECAY * *v + (1.0 - RMSPROP_DECAY) * g * g;
            *p -= learning_rate * g / (v.sqrt() + RMSPROP_EPS);
        }
        Ok(())
    }
}
