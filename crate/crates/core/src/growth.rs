//! Entropy-gated dynamic deepening.
//!
//! A [`GrowthPair`] keeps the acting (shallow) network together with a
//! shadow copy one level deeper: every shallow leaf is replaced in the deep
//! network by a frontier decision node with two leaves. Both are trained on
//! the same experience. When a shallow leaf is less decisive than the two
//! deep leaves standing in for it, the shallow network adopts the deep
//! node and leaves and the deep network grows a fresh frontier below them.
//!
//! Layout of the deep network, for a shallow net with `n` nodes and `m`
//! leaves: nodes `0..n` mirror the shallow nodes, node `n + j` is the
//! frontier node of shallow leaf `j`, and deep leaves `j` / `m + j` are its
//! TRUE / FALSE children.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compile::random::{random_leaf_weights, random_node};
use crate::error::{Error, Result};
use crate::math::{entropy, softmax};
use crate::model::{DecisionNode, Leaf, PathStep, Polarity, ProLoNet};

pub const DEFAULT_EPSILON: f64 = 0.1;

/// How the two deep child entropies are combined before the comparison.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChildAggregation {
    #[default]
    Mean,
    Sum,
}

impl ChildAggregation {
    pub fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            ChildAggregation::Mean => 0.5 * (a + b),
            ChildAggregation::Sum => a + b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthConfig {
    pub epsilon: f64,
    pub aggregation: ChildAggregation,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            aggregation: ChildAggregation::Mean,
        }
    }
}

/// Deep-network positions that stand in for one shallow leaf.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontierSlot {
    pub node: usize,
    pub true_leaf: usize,
    pub false_leaf: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeepenEvent {
    pub leaf_id: usize,
    pub shallow_entropy: f64,
    pub child_entropies: [f64; 2],
    pub epsilon: f64,
}

/// Leaves whose weights already form a probability vector are read as one;
/// anything else goes through a softmax first.
pub fn leaf_distribution(action_weights: &[f64]) -> Vec<f64> {
    let total: f64 = action_weights.iter().sum();
    if action_weights.iter().all(|&w| w >= 0.0) && (total - 1.0).abs() <= 1e-6 {
        action_weights.to_vec()
    } else {
        softmax(action_weights)
    }
}

/// Entropy (nats) of the leaf's action distribution.
pub fn leaf_entropy(leaf: &Leaf) -> f64 {
    entropy(&leaf_distribution(&leaf.action_weights))
}

#[derive(Clone, Copy, Debug)]
enum Source {
    Shallow(usize),
    Deep(usize),
    Fresh,
}

struct Plan {
    nodes: Vec<Source>,
    leaves: Vec<(Vec<PathStep>, Source)>,
}

struct Frontier {
    node: Source,
    true_leaf: Source,
    false_leaf: Source,
}

/// Canonical deep layout over a shallow structure.
fn deep_plan(
    shallow_paths: &[Vec<PathStep>],
    mirror: Vec<Source>,
    frontier: Vec<Frontier>,
) -> (Plan, Vec<FrontierSlot>) {
    let n = mirror.len();
    let m = shallow_paths.len();
    let mut nodes = mirror;
    let mut true_leaves = Vec::with_capacity(m);
    let mut false_leaves = Vec::with_capacity(m);
    let mut slots = Vec::with_capacity(m);
    for (j, (path, f)) in shallow_paths.iter().zip(frontier).enumerate() {
        nodes.push(f.node);
        let mut tp = path.clone();
        tp.push(PathStep::new(n + j, Polarity::True));
        let mut fp = path.clone();
        fp.push(PathStep::new(n + j, Polarity::False));
        true_leaves.push((tp, f.true_leaf));
        false_leaves.push((fp, f.false_leaf));
        slots.push(FrontierSlot {
            node: n + j,
            true_leaf: j,
            false_leaf: m + j,
        });
    }
    true_leaves.extend(false_leaves);
    (
        Plan {
            nodes,
            leaves: true_leaves,
        },
        slots,
    )
}

fn fresh_frontier(count: usize) -> Vec<Frontier> {
    (0..count)
        .map(|_| Frontier {
            node: Source::Fresh,
            true_leaf: Source::Fresh,
            false_leaf: Source::Fresh,
        })
        .collect()
}

impl Plan {
    fn realize(
        &self,
        shallow: &ProLoNet,
        deep: Option<&ProLoNet>,
        rng: &mut ChaCha8Rng,
    ) -> Result<ProLoNet> {
        let (input_dim, output_dim) = (shallow.input_dim(), shallow.output_dim());
        let pick = |src: Source| -> (&ProLoNet, usize) {
            match src {
                Source::Shallow(i) => (shallow, i),
                Source::Deep(i) => (deep.expect("deep source without deep network"), i),
                Source::Fresh => unreachable!(),
            }
        };
        let nodes: Vec<DecisionNode> = self
            .nodes
            .iter()
            .map(|&src| match src {
                Source::Fresh => random_node(input_dim, rng),
                _ => {
                    let (net, i) = pick(src);
                    net.nodes()[i].clone()
                }
            })
            .collect();
        let leaves: Vec<Leaf> = self
            .leaves
            .iter()
            .map(|(path, src)| Leaf {
                action_weights: match *src {
                    Source::Fresh => random_leaf_weights(output_dim, rng),
                    _ => {
                        let (net, i) = pick(*src);
                        net.leaves()[i].action_weights.clone()
                    }
                },
                path: path.clone(),
            })
            .collect();
        ProLoNet::new(input_dim, output_dim, nodes, leaves)
    }

    /// Carries per-parameter state (e.g. optimizer moments) through the same
    /// structural edit. Fresh parameters start from zero.
    fn migrate(
        &self,
        shallow: &ProLoNet,
        deep: &ProLoNet,
        s_state: &[f64],
        d_state: &[f64],
    ) -> Vec<f64> {
        let stride = shallow.input_dim() + 2;
        let out_dim = shallow.output_dim();
        let mut out = Vec::with_capacity(self.nodes.len() * stride + self.leaves.len() * out_dim);
        for &src in &self.nodes {
            match src {
                Source::Shallow(i) => {
                    let o = shallow.node_param_offset(i);
                    out.extend_from_slice(&s_state[o..o + stride]);
                }
                Source::Deep(i) => {
                    let o = deep.node_param_offset(i);
                    out.extend_from_slice(&d_state[o..o + stride]);
                }
                Source::Fresh => out.extend(std::iter::repeat_n(0.0, stride)),
            }
        }
        for (_, src) in &self.leaves {
            match *src {
                Source::Shallow(i) => {
                    let o = shallow.leaf_param_offset(i);
                    out.extend_from_slice(&s_state[o..o + out_dim]);
                }
                Source::Deep(i) => {
                    let o = deep.leaf_param_offset(i);
                    out.extend_from_slice(&d_state[o..o + out_dim]);
                }
                Source::Fresh => out.extend(std::iter::repeat_n(0.0, out_dim)),
            }
        }
        out
    }
}

/// The acting network and its one-level-deeper shadow.
#[derive(Clone, Debug)]
pub struct GrowthPair {
    shallow: ProLoNet,
    deep: ProLoNet,
    leaf_map: Vec<FrontierSlot>,
    config: GrowthConfig,
    rng: ChaCha8Rng,
}

impl GrowthPair {
    pub fn new(shallow: ProLoNet, config: GrowthConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let paths: Vec<Vec<PathStep>> = shallow.leaves().iter().map(|l| l.path.clone()).collect();
        let mirror = (0..shallow.nodes().len()).map(Source::Shallow).collect();
        let (plan, leaf_map) = deep_plan(&paths, mirror, fresh_frontier(paths.len()));
        let deep = plan.realize(&shallow, None, &mut rng)?;
        Ok(Self {
            shallow,
            deep,
            leaf_map,
            config,
            rng,
        })
    }

    pub fn shallow(&self) -> &ProLoNet {
        &self.shallow
    }

    pub fn deep(&self) -> &ProLoNet {
        &self.deep
    }

    /// Parameter edits only; the structure is owned by the pair.
    pub fn shallow_mut(&mut self) -> &mut ProLoNet {
        &mut self.shallow
    }

    pub fn deep_mut(&mut self) -> &mut ProLoNet {
        &mut self.deep
    }

    pub fn leaf_map(&self) -> &[FrontierSlot] {
        &self.leaf_map
    }

    pub fn config(&self) -> &GrowthConfig {
        &self.config
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.config.epsilon = epsilon;
    }

    pub fn set_aggregation(&mut self, aggregation: ChildAggregation) {
        self.config.aggregation = aggregation;
    }

    fn child_entropies(&self, leaf: usize) -> [f64; 2] {
        let slot = self.leaf_map[leaf];
        [
            leaf_entropy(&self.deep.leaves()[slot.true_leaf]),
            leaf_entropy(&self.deep.leaves()[slot.false_leaf]),
        ]
    }

    /// Whether shallow leaf `leaf` currently meets the deepening condition.
    pub fn should_deepen(&self, leaf: usize) -> Option<DeepenEvent> {
        let h = leaf_entropy(&self.shallow.leaves()[leaf]);
        let children = self.child_entropies(leaf);
        let threshold =
            self.config.aggregation.combine(children[0], children[1]) + self.config.epsilon;
        (h > threshold).then_some(DeepenEvent {
            leaf_id: leaf,
            shallow_entropy: h,
            child_entropies: children,
            epsilon: self.config.epsilon,
        })
    }

    /// Checks every shallow leaf once and deepens where the deep children
    /// are more decisive. Returns the deepened leaves.
    pub fn maybe_deepen(&mut self) -> Vec<DeepenEvent> {
        self.maybe_deepen_with_state(None)
    }

    /// As [`maybe_deepen`](Self::maybe_deepen), also rewriting per-parameter
    /// state vectors laid out like the shallow and deep networks.
    pub fn maybe_deepen_with_state(
        &mut self,
        mut state: Option<(&mut Vec<f64>, &mut Vec<f64>)>,
    ) -> Vec<DeepenEvent> {
        let mut events = Vec::new();
        for leaf in 0..self.shallow.leaves().len() {
            if let Some(event) = self.should_deepen(leaf) {
                let reborrowed = state.as_mut().map(|(s, d)| (&mut **s, &mut **d));
                self.deepen_at(leaf, reborrowed)
                    .expect("deepening preserves network validity");
                events.push(event);
            }
        }
        events
    }

    /// Replaces shallow leaf `leaf` with the deep frontier node and its two
    /// leaves, then regrows a fresh frontier below them in the deep network.
    pub fn deepen_at(
        &mut self,
        leaf: usize,
        state: Option<(&mut Vec<f64>, &mut Vec<f64>)>,
    ) -> Result<()> {
        let m = self.shallow.leaves().len();
        if leaf >= m {
            return Err(Error::IndexOutOfRange {
                kind: "leaf",
                index: leaf,
                limit: m,
            });
        }
        let n = self.shallow.nodes().len();
        let slot = self.leaf_map[leaf];

        let mut s_nodes: Vec<Source> = (0..n).map(Source::Shallow).collect();
        s_nodes.push(Source::Deep(slot.node));
        let base_path = self.shallow.leaves()[leaf].path.clone();
        let mut s_leaves: Vec<(Vec<PathStep>, Source)> = self
            .shallow
            .leaves()
            .iter()
            .enumerate()
            .map(|(j, l)| (l.path.clone(), Source::Shallow(j)))
            .collect();
        let mut tp = base_path.clone();
        tp.push(PathStep::new(n, Polarity::True));
        s_leaves[leaf] = (tp, Source::Deep(slot.true_leaf));
        let mut fp = base_path;
        fp.push(PathStep::new(n, Polarity::False));
        s_leaves.push((fp, Source::Deep(slot.false_leaf)));
        let shallow_plan = Plan {
            nodes: s_nodes,
            leaves: s_leaves,
        };

        let mut mirror: Vec<Source> = (0..n).map(Source::Deep).collect();
        mirror.push(Source::Deep(slot.node));
        let paths: Vec<Vec<PathStep>> =
            shallow_plan.leaves.iter().map(|(p, _)| p.clone()).collect();
        let frontier = (0..m + 1)
            .map(|j| {
                if j == leaf || j == m {
                    Frontier {
                        node: Source::Fresh,
                        true_leaf: Source::Fresh,
                        false_leaf: Source::Fresh,
                    }
                } else {
                    let s = self.leaf_map[j];
                    Frontier {
                        node: Source::Deep(s.node),
                        true_leaf: Source::Deep(s.true_leaf),
                        false_leaf: Source::Deep(s.false_leaf),
                    }
                }
            })
            .collect();
        let (deep_plan, leaf_map) = deep_plan(&paths, mirror, frontier);

        if let Some((s_state, d_state)) = state {
            let new_s = shallow_plan.migrate(&self.shallow, &self.deep, s_state, d_state);
            let new_d = deep_plan.migrate(&self.shallow, &self.deep, s_state, d_state);
            *s_state = new_s;
            *d_state = new_d;
        }
        let shallow = shallow_plan.realize(&self.shallow, Some(&self.deep), &mut self.rng)?;
        let deep = deep_plan.realize(&self.shallow, Some(&self.deep), &mut self.rng)?;
        self.shallow = shallow;
        self.deep = deep;
        self.leaf_map = leaf_map;
        Ok(())
    }

    /// Structural isomorphism between `deep` and shallow-plus-frontier,
    /// ignoring parameter values.
    pub fn is_synchronized(&self) -> bool {
        let (n, m) = (self.shallow.nodes().len(), self.shallow.leaves().len());
        if self.deep.nodes().len() != n + m
            || self.deep.leaves().len() != 2 * m
            || self.leaf_map.len() != m
            || self.deep.input_dim() != self.shallow.input_dim()
            || self.deep.output_dim() != self.shallow.output_dim()
        {
            return false;
        }
        self.shallow.leaves().iter().enumerate().all(|(j, leaf)| {
            let slot = self.leaf_map[j];
            if slot.node != n + j || slot.true_leaf != j || slot.false_leaf != m + j {
                return false;
            }
            let check = |deep_leaf: usize, polarity| {
                let p = &self.deep.leaves()[deep_leaf].path;
                p.len() == leaf.path.len() + 1
                    && p[..leaf.path.len()] == leaf.path[..]
                    && p[leaf.path.len()] == PathStep::new(slot.node, polarity)
            };
            check(slot.true_leaf, Polarity::True) && check(slot.false_leaf, Polarity::False)
        })
    }
}
