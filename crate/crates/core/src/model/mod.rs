//! Differentiable policy models: the soft decision-tree network and a plain
//! feed-forward baseline, both with hand-written reverse-mode gradients.

mod mlp;
mod prolonet;
mod serial;
mod tape;

pub use mlp::{Dense, MlpPolicy};
pub use prolonet::{DecisionNode, ForwardOutput, Leaf, PathStep, Polarity, ProLoNet};
pub use serial::{MLP_FORMAT, PROLONET_FORMAT};
pub use tape::GradientTape;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Either model family behind one interface. The raw output is the
/// pre-softmax vector in both cases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Network {
    ProLoNet(ProLoNet),
    Mlp(MlpPolicy),
}

impl Network {
    pub fn input_dim(&self) -> usize {
        match self {
            Network::ProLoNet(n) => n.input_dim(),
            Network::Mlp(n) => n.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Network::ProLoNet(n) => n.output_dim(),
            Network::Mlp(n) => n.output_dim(),
        }
    }

    pub fn forward_raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Network::ProLoNet(n) => n.forward_raw(x),
            Network::Mlp(n) => n.forward(x),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardOutput> {
        let raw = self.forward_raw(x)?;
        let probs = crate::math::softmax(&raw);
        Ok(ForwardOutput { raw, probs })
    }

    pub fn accumulate_backward(
        &self,
        x: &[f64],
        upstream: &[f64],
        tape: &mut GradientTape,
    ) -> Result<()> {
        match self {
            Network::ProLoNet(n) => n.accumulate_backward(x, upstream, tape),
            Network::Mlp(n) => n.accumulate_backward(x, upstream, tape),
        }
    }

    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<GradientTape> {
        let mut tape = GradientTape::zeros(self.num_params());
        self.accumulate_backward(x, upstream, &mut tape)?;
        Ok(tape)
    }

    pub fn num_params(&self) -> usize {
        match self {
            Network::ProLoNet(n) => n.num_params(),
            Network::Mlp(n) => n.num_params(),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            Network::ProLoNet(n) => n.params(),
            Network::Mlp(n) => n.params(),
        }
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        match self {
            Network::ProLoNet(n) => n.set_params(values),
            Network::Mlp(n) => n.set_params(values),
        }
    }

    pub fn apply_update(&mut self, deltas: &[f64]) -> Result<()> {
        match self {
            Network::ProLoNet(n) => n.apply_update(deltas),
            Network::Mlp(n) => n.apply_update(deltas),
        }
    }

    pub fn as_prolonet(&self) -> Option<&ProLoNet> {
        match self {
            Network::ProLoNet(n) => Some(n),
            Network::Mlp(_) => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serial::network_from_json(text)
    }
}

impl From<ProLoNet> for Network {
    fn from(n: ProLoNet) -> Self {
        Network::ProLoNet(n)
    }
}

impl From<MlpPolicy> for Network {
    fn from(n: MlpPolicy) -> Self {
        Network::Mlp(n)
    }
}
