use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::tape::GradientTape;

/// Fully connected layer, weights stored row-major as `[output][input]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub input_dim: usize,
    pub output_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            output_dim,
            weights: vec![0.0; input_dim * output_dim],
            bias: vec![0.0; output_dim],
        }
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization for weights and bias.
    pub fn random<R: Rng + ?Sized>(input_dim: usize, output_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input_dim as f64).sqrt();
        let mut layer = Self::zeros(input_dim, output_dim);
        for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
            *w = rng.random_range(-bound..bound);
        }
        layer
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.output_dim)
            .map(|o| {
                let row = &self.weights[o * self.input_dim..(o + 1) * self.input_dim];
                self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Affine layers with ReLU between them; the last layer is linear.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpPolicy {
    layers: Vec<Dense>,
}

impl MlpPolicy {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        let mlp = Self { layers };
        mlp.validate()?;
        Ok(mlp)
    }

    /// Random network with the given layer widths, e.g. `[4, 4, 4, 2]`.
    pub fn random<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidModel(
                "an MLP needs at least two widths".into(),
            ));
        }
        Self::new(
            widths
                .windows(2)
                .map(|w| Dense::random(w[0], w[1], rng))
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidModel(
                "an MLP needs at least one layer".into(),
            ));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.input_dim == 0 || layer.output_dim == 0 {
                return Err(Error::InvalidModel(format!(
                    "layer {i} has a zero dimension"
                )));
            }
            if layer.weights.len() != layer.input_dim * layer.output_dim
                || layer.bias.len() != layer.output_dim
            {
                return Err(Error::InvalidModel(format!(
                    "layer {i} has inconsistent shapes"
                )));
            }
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].output_dim != pair[1].input_dim {
                return Err(Error::InvalidModel(format!(
                    "layer {} outputs {} values but layer {} expects {}",
                    i,
                    pair[0].output_dim,
                    i + 1,
                    pair[1].input_dim
                )));
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    /// `(input, output)` of each layer.
    pub fn shape(&self) -> Vec<(usize, usize)> {
        self.layers
            .iter()
            .map(|l| (l.input_dim, l.output_dim))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), x.len())?;
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.apply(&h);
            if i < last {
                h.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        Ok(h)
    }

    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<GradientTape> {
        let mut tape = GradientTape::zeros(self.num_params());
        self.accumulate_backward(x, upstream, &mut tape)?;
        Ok(tape)
    }

    pub fn accumulate_backward(
        &self,
        x: &[f64],
        upstream: &[f64],
        tape: &mut GradientTape,
    ) -> Result<()> {
        check_dim(self.input_dim(), x.len())?;
        check_dim(self.output_dim(), upstream.len())?;
        check_dim(self.num_params(), tape.len())?;
        // inputs to each layer, post-activation
        let last = self.layers.len() - 1;
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer.apply(&h);
            inputs.push(h);
            h = if i < last {
                next.into_iter().map(|v| v.max(0.0)).collect()
            } else {
                next
            };
        }

        let offsets = self.layer_offsets();
        let grads = tape.as_mut_slice();
        let mut delta = upstream.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &inputs[i];
            let off = offsets[i];
            for o in 0..layer.output_dim {
                let row = off + o * layer.input_dim;
                for (j, v) in input.iter().enumerate() {
                    grads[row + j] += delta[o] * v;
                }
                grads[off + layer.weights.len() + o] += delta[o];
            }
            if i == 0 {
                break;
            }
            let mut prev = vec![0.0; layer.input_dim];
            for (o, d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.input_dim..(o + 1) * layer.input_dim];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            // ReLU gate of the previous layer; `input` is its rectified output
            for (p, v) in prev.iter_mut().zip(input) {
                if *v <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
        Ok(())
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.layers
            .iter()
            .map(|l| {
                let o = acc;
                acc += l.num_params();
                o
            })
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::num_params).sum()
    }

    /// Per layer: weights (row-major) then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        check_dim(self.num_params(), values.len())?;
        let mut rest = values;
        for l in &mut self.layers {
            let (w, r) = rest.split_at(l.weights.len());
            l.weights.copy_from_slice(w);
            let (b, r) = r.split_at(l.bias.len());
            l.bias.copy_from_slice(b);
            rest = r;
        }
        Ok(())
    }

    pub fn apply_update(&mut self, deltas: &[f64]) -> Result<()> {
        check_dim(self.num_params(), deltas.len())?;
        let mut p = self.params();
        for (v, d) in p.iter_mut().zip(deltas) {
            *v += d;
        }
        self.set_params(&p)
    }
}
