use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::compile::ast::{Check, RuleNode, TreeSpec};
use crate::compile::compiler::compile_tree;
use crate::error::{Error, Result};
use crate::model::{DecisionNode, ProLoNet};

/// Random full binary tree shape with `checks` internal nodes: start from a
/// single action and split a uniformly chosen leaf `checks` times.
fn random_shape<R: Rng + ?Sized>(
    checks: usize,
    input_dim: usize,
    output_dim: usize,
    rng: &mut R,
) -> RuleNode {
    fn split_nth(node: &mut RuleNode, n: &mut usize, replacement: &mut Option<RuleNode>) {
        match node {
            RuleNode::Action(_) => {
                if *n == 0 {
                    if let Some(r) = replacement.take() {
                        *node = r;
                    }
                } else {
                    *n -= 1;
                }
            }
            RuleNode::Check(c) => {
                split_nth(&mut c.if_true, n, replacement);
                if replacement.is_some() {
                    split_nth(&mut c.if_false, n, replacement);
                }
            }
        }
    }
    let mut root = RuleNode::Action(rng.random_range(0..output_dim));
    for _ in 0..checks {
        let target = rng.random_range(0..root.leaf_count());
        let check = Check::simple(
            rng.random_range(0..input_dim),
            rng.random_range(-1.0..1.0),
            RuleNode::Action(rng.random_range(0..output_dim)),
            RuleNode::Action(rng.random_range(0..output_dim)),
        );
        let mut replacement = Some(RuleNode::Check(check));
        let mut n = target;
        split_nth(&mut root, &mut n, &mut replacement);
    }
    root
}

/// Random rule tree over generic feature/action names (`f0..`, `a0..`).
/// Checks use single unit-weight features with thresholds in (-1, 1).
pub fn random_tree_spec<R: Rng + ?Sized>(
    checks: usize,
    input_dim: usize,
    output_dim: usize,
    rng: &mut R,
) -> TreeSpec {
    TreeSpec {
        root: random_shape(checks, input_dim, output_dim, rng),
        feature_names: (0..input_dim).map(|i| format!("f{i}")).collect(),
        action_names: (0..output_dim).map(|i| format!("a{i}")).collect(),
    }
}

/// Randomly initialized network on a random full binary tree with `nodes`
/// decision nodes (and `nodes + 1` leaves). Node weights and comparators are
/// uniform in (-1, 1), leaf weights uniform in (0, 1), alpha = 1.
pub fn random_prolonet(
    nodes: usize,
    input_dim: usize,
    output_dim: usize,
    seed: u64,
) -> Result<ProLoNet> {
    if input_dim == 0 || output_dim == 0 {
        return Err(Error::Config(
            "random network dimensions must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = random_tree_spec(nodes, input_dim, output_dim, &mut rng);
    let mut net = compile_tree(&spec, input_dim, output_dim)?;
    randomize(&mut net, &mut rng);
    Ok(net)
}

pub(crate) fn random_node<R: Rng + ?Sized>(input_dim: usize, rng: &mut R) -> DecisionNode {
    DecisionNode::new(
        (0..input_dim)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
        rng.random_range(-1.0..1.0),
    )
}

pub(crate) fn random_leaf_weights<R: Rng + ?Sized>(output_dim: usize, rng: &mut R) -> Vec<f64> {
    (0..output_dim)
        .map(|_| rng.random_range(0.0..1.0))
        .collect()
}

fn randomize<R: Rng + ?Sized>(net: &mut ProLoNet, rng: &mut R) {
    for i in 0..net.nodes().len() {
        *net.node_mut(i) = random_node(net.input_dim(), rng);
    }
    for i in 0..net.leaves().len() {
        let w = random_leaf_weights(net.output_dim(), rng);
        net.leaf_weights_mut(i).copy_from_slice(&w);
    }
}
