use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::math::{dot, sigmoid, softmax, SIGMOID_CLAMP};
use crate::model::tape::GradientTape;

/// One soft rule: `sigmoid(alpha * (weights . x - comparator))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionNode {
    pub weights: Vec<f64>,
    pub comparator: f64,
    /// Throttle on the node's confidence; learnable.
    pub alpha: f64,
}

impl DecisionNode {
    pub fn new(weights: Vec<f64>, comparator: f64) -> Self {
        Self {
            weights,
            comparator,
            alpha: 1.0,
        }
    }

    fn pre_activation(&self, x: &[f64]) -> f64 {
        self.alpha * (dot(&self.weights, x) - self.comparator)
    }

    /// Probability that the rule holds for `x`.
    pub fn activation(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.weights.len(), x.len())?;
        Ok(sigmoid(self.pre_activation(x)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    True,
    False,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStep {
    pub node: usize,
    pub polarity: Polarity,
}

impl PathStep {
    pub fn new(node: usize, polarity: Polarity) -> Self {
        Self { node, polarity }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub action_weights: Vec<f64>,
    /// Ancestor checks in root-to-leaf order.
    pub path: Vec<PathStep>,
}

/// Output of a forward pass: the path-weighted leaf sum and its softmax.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    pub raw: Vec<f64>,
    pub probs: Vec<f64>,
}

/// A propositional-logic network: decision nodes become sigmoid-gated linear
/// checks and leaves become action weights mixed by path probability.
#[derive(Clone, Debug, PartialEq)]
pub struct ProLoNet {
    nodes: Vec<DecisionNode>,
    leaves: Vec<Leaf>,
    input_dim: usize,
    output_dim: usize,
}

impl ProLoNet {
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        nodes: Vec<DecisionNode>,
        leaves: Vec<Leaf>,
    ) -> Result<Self> {
        let net = Self {
            nodes,
            leaves,
            input_dim,
            output_dim,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidModel("dimensions must be positive".into()));
        }
        if self.leaves.is_empty() {
            return Err(Error::InvalidModel(
                "a network needs at least one leaf".into(),
            ));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.weights.len() != self.input_dim {
                return Err(Error::InvalidModel(format!(
                    "node {i} has {} weights, expected {}",
                    node.weights.len(),
                    self.input_dim
                )));
            }
            if !node.alpha.is_finite()
                || !node.comparator.is_finite()
                || node.weights.iter().any(|w| !w.is_finite())
            {
                return Err(Error::InvalidModel(format!(
                    "node {i} has non-finite parameters"
                )));
            }
        }
        for (i, leaf) in self.leaves.iter().enumerate() {
            if leaf.action_weights.len() != self.output_dim {
                return Err(Error::InvalidModel(format!(
                    "leaf {i} has {} action weights, expected {}",
                    leaf.action_weights.len(),
                    self.output_dim
                )));
            }
            if leaf.action_weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "leaf {i} has non-finite weights"
                )));
            }
            let mut prev: Option<usize> = None;
            for step in &leaf.path {
                if step.node >= self.nodes.len() {
                    return Err(Error::InvalidModel(format!(
                        "leaf {i} references missing node {}",
                        step.node
                    )));
                }
                if prev.is_some_and(|p| step.node <= p) {
                    return Err(Error::InvalidModel(format!(
                        "leaf {i} path node ids must be strictly increasing"
                    )));
                }
                prev = Some(step.node);
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Human-readable size, e.g. `1 node, 2 leaves`.
    pub fn size_summary(&self) -> String {
        let (n, m) = (self.nodes.len(), self.leaves.len());
        format!(
            "{n} {}, {m} {}",
            if n == 1 { "node" } else { "nodes" },
            if m == 1 { "leaf" } else { "leaves" }
        )
    }

    pub fn nodes(&self) -> &[DecisionNode] {
        &self.nodes
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    /// Mutable access to node parameters. Dimensions must be preserved.
    pub fn node_mut(&mut self, id: usize) -> &mut DecisionNode {
        &mut self.nodes[id]
    }

    /// Mutable access to a leaf's action weights.
    pub fn leaf_weights_mut(&mut self, id: usize) -> &mut [f64] {
        &mut self.leaves[id].action_weights
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        for node in &mut self.nodes {
            node.alpha = alpha;
        }
    }

    /// Decision probability of every node for `x`.
    pub fn activations(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim, x.len())?;
        Ok(self
            .nodes
            .iter()
            .map(|n| sigmoid(n.pre_activation(x)))
            .collect())
    }

    fn path_weight(leaf: &Leaf, sigmas: &[f64]) -> f64 {
        leaf.path.iter().fold(1.0, |z, step| match step.polarity {
            Polarity::True => z * sigmas[step.node],
            Polarity::False => z * (1.0 - sigmas[step.node]),
        })
    }

    /// Probability mass routed to each leaf.
    pub fn path_weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        let sigmas = self.activations(x)?;
        Ok(self
            .leaves
            .iter()
            .map(|l| Self::path_weight(l, &sigmas))
            .collect())
    }

    pub fn forward_raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        let sigmas = self.activations(x)?;
        let mut out = vec![0.0; self.output_dim];
        for leaf in &self.leaves {
            let z = Self::path_weight(leaf, &sigmas);
            for (o, l) in out.iter_mut().zip(&leaf.action_weights) {
                *o += z * l;
            }
        }
        Ok(out)
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardOutput> {
        let raw = self.forward_raw(x)?;
        let probs = softmax(&raw);
        Ok(ForwardOutput { raw, probs })
    }

    /// Gradient of a scalar loss with respect to every parameter, given the
    /// loss gradient `upstream` with respect to the raw leaf sum.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<GradientTape> {
        let mut tape = GradientTape::zeros(self.num_params());
        self.accumulate_backward(x, upstream, &mut tape)?;
        Ok(tape)
    }

    /// Adds this sample's gradient into `tape`.
    pub fn accumulate_backward(
        &self,
        x: &[f64],
        upstream: &[f64],
        tape: &mut GradientTape,
    ) -> Result<()> {
        check_dim(self.input_dim, x.len())?;
        check_dim(self.output_dim, upstream.len())?;
        check_dim(self.num_params(), tape.len())?;
        let pre: Vec<f64> = self.nodes.iter().map(|n| n.pre_activation(x)).collect();
        let sigmas: Vec<f64> = pre.iter().map(|&p| sigmoid(p)).collect();
        let mut d_sigma = vec![0.0; self.nodes.len()];

        let leaf_base = self.leaf_offset();
        let grads = tape.as_mut_slice();
        let mut factors: Vec<f64> = Vec::new();
        let mut suffix: Vec<f64> = Vec::new();
        for (i, leaf) in self.leaves.iter().enumerate() {
            factors.clear();
            factors.extend(leaf.path.iter().map(|s| match s.polarity {
                Polarity::True => sigmas[s.node],
                Polarity::False => 1.0 - sigmas[s.node],
            }));
            let z: f64 = factors.iter().product();
            let offset = leaf_base + i * self.output_dim;
            for (k, u) in upstream.iter().enumerate() {
                grads[offset + k] += z * u;
            }
            let dz = dot(upstream, &leaf.action_weights);
            if dz == 0.0 || factors.is_empty() {
                continue;
            }
            // product of all factors except position j, via prefix/suffix products
            suffix.clear();
            suffix.resize(factors.len() + 1, 1.0);
            for j in (0..factors.len()).rev() {
                suffix[j] = suffix[j + 1] * factors[j];
            }
            let mut prefix = 1.0;
            for (j, step) in leaf.path.iter().enumerate() {
                let others = prefix * suffix[j + 1];
                let sign = match step.polarity {
                    Polarity::True => 1.0,
                    Polarity::False => -1.0,
                };
                d_sigma[step.node] += dz * sign * others;
                prefix *= factors[j];
            }
        }

        let stride = self.node_stride();
        for (n, node) in self.nodes.iter().enumerate() {
            if d_sigma[n] == 0.0 || pre[n].abs() > SIGMOID_CLAMP {
                continue;
            }
            let d_pre = d_sigma[n] * sigmas[n] * (1.0 - sigmas[n]);
            let offset = n * stride;
            for (j, xj) in x.iter().enumerate() {
                grads[offset + j] += d_pre * node.alpha * xj;
            }
            grads[offset + self.input_dim] -= d_pre * node.alpha;
            grads[offset + self.input_dim + 1] += d_pre * (dot(&node.weights, x) - node.comparator);
        }
        Ok(())
    }

    fn node_stride(&self) -> usize {
        self.input_dim + 2
    }

    fn leaf_offset(&self) -> usize {
        self.nodes.len() * self.node_stride()
    }

    /// Flat offset of node `id`'s first weight; comparator and alpha follow the weights.
    pub fn node_param_offset(&self, id: usize) -> usize {
        id * self.node_stride()
    }

    /// Flat offset of leaf `id`'s first action weight.
    pub fn leaf_param_offset(&self, id: usize) -> usize {
        self.leaf_offset() + id * self.output_dim
    }

    pub fn num_params(&self) -> usize {
        self.leaf_offset() + self.leaves.len() * self.output_dim
    }

    /// Parameters in a stable order: per node `[weights.., comparator, alpha]`,
    /// then per leaf `[action_weights..]`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for node in &self.nodes {
            out.extend_from_slice(&node.weights);
            out.push(node.comparator);
            out.push(node.alpha);
        }
        for leaf in &self.leaves {
            out.extend_from_slice(&leaf.action_weights);
        }
        out
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        check_dim(self.num_params(), values.len())?;
        let mut it = values.iter().copied();
        for node in &mut self.nodes {
            for w in &mut node.weights {
                *w = it.next().unwrap_or_default();
            }
            node.comparator = it.next().unwrap_or_default();
            node.alpha = it.next().unwrap_or_default();
        }
        for leaf in &mut self.leaves {
            for w in &mut leaf.action_weights {
                *w = it.next().unwrap_or_default();
            }
        }
        Ok(())
    }

    /// Adds `deltas` to the parameters in `params()` order.
    pub fn apply_update(&mut self, deltas: &[f64]) -> Result<()> {
        check_dim(self.num_params(), deltas.len())?;
        let mut params = self.params();
        for (p, d) in params.iter_mut().zip(deltas) {
            *p += d;
        }
        self.set_params(&params)
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;

    pub(crate) fn example_one() -> ProLoNet {
        ProLoNet::new(
            4,
            2,
            vec![DecisionNode::new(vec![1.0, 0.0, 0.0, 0.0], 0.0)],
            vec![
                Leaf {
                    action_weights: vec![1.0, 0.0],
                    path: vec![PathStep::new(0, Polarity::True)],
                },
                Leaf {
                    action_weights: vec![0.0, 1.0],
                    path: vec![PathStep::new(0, Polarity::False)],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn node_activation_matches_worked_example() {
        let node = DecisionNode::new(vec![1.0, 0.0, 0.0, 0.0], 0.0);
        let d = node.activation(&[2.0, 1.0, 0.0, 3.0]).unwrap();
        assert!((d - 0.8808).abs() < 1e-3);
    }

    #[test]
    fn comparator_at_dot_product_gives_half() {
        let x = [0.3, -1.2, 4.0];
        let w = vec![0.7, 2.0, -0.1];
        let c = dot(&w, &x);
        for alpha in [-3.0, 0.0, 1.0, 42.0] {
            let node = DecisionNode {
                weights: w.clone(),
                comparator: c,
                alpha,
            };
            assert_eq!(node.activation(&x).unwrap(), 0.5);
        }
    }

    #[test]
    fn zero_throttle_is_uniform() {
        let node = DecisionNode {
            weights: vec![1.0, 0.0, 0.0, 0.0],
            comparator: 0.0,
            alpha: 0.0,
        };
        assert_eq!(node.activation(&[2.0, 1.0, 0.0, 3.0]).unwrap(), 0.5);
    }

    #[test]
    fn activation_rejects_wrong_dimension() {
        let node = DecisionNode::new(vec![1.0, 0.0], 0.0);
        assert!(matches!(
            node.activation(&[1.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn forward_matches_worked_example() {
        let out = example_one().forward(&[2.0, 1.0, 0.0, 3.0]).unwrap();
        assert!((out.raw[0] - 0.8808).abs() < 1e-3);
        assert!((out.raw[1] - 0.1192).abs() < 1e-3);
        assert!((out.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_leaf_with_empty_path_returns_its_weights() {
        let net = ProLoNet::new(
            3,
            3,
            vec![],
            vec![Leaf {
                action_weights: vec![0.25, -2.0, 7.5],
                path: vec![],
            }],
        )
        .unwrap();
        assert_eq!(
            net.forward_raw(&[1.0, 2.0, 3.0]).unwrap(),
            vec![0.25, -2.0, 7.5]
        );
    }

    #[test]
    fn zero_alpha_gives_zero_comparator_gradient() {
        let mut net = example_one();
        net.set_alpha(0.0);
        let tape = net.backward(&[2.0, 1.0, 0.0, 3.0], &[1.0, 0.0]).unwrap();
        assert_eq!(tape.as_slice()[net.node_param_offset(0) + 4], 0.0);
    }

    #[test]
    fn leaf_gradient_is_path_weight_times_upstream() {
        let net = example_one();
        let x = [2.0, 1.0, 0.0, 3.0];
        let upstream = [0.3, -1.7];
        let z = net.path_weights(&x).unwrap();
        let tape = net.backward(&x, &upstream).unwrap();
        for (i, zi) in z.iter().enumerate() {
            let off = net.leaf_param_offset(i);
            for k in 0..2 {
                assert!((tape.as_slice()[off + k] - zi * upstream[k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn params_round_trip_is_exact() {
        let mut net = example_one();
        let mut p = net.params();
        for (i, v) in p.iter_mut().enumerate() {
            *v += i as f64 * 0.125;
        }
        net.set_params(&p).unwrap();
        assert_eq!(net.params(), p);
    }

    #[test]
    fn rejects_bad_paths() {
        let err = ProLoNet::new(
            1,
            1,
            vec![
                DecisionNode::new(vec![1.0], 0.0),
                DecisionNode::new(vec![1.0], 0.0),
            ],
            vec![Leaf {
                action_weights: vec![1.0],
                path: vec![
                    PathStep::new(1, Polarity::True),
                    PathStep::new(0, Polarity::True),
                ],
            }],
        );
        assert!(matches!(err, Err(Error::InvalidModel(_))));
    }
}
