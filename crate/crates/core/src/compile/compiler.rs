use crate::compile::ast::{Comparison, RuleNode, TreeSpec};
use crate::error::{Error, Result};
use crate::model::{DecisionNode, Leaf, PathStep, Polarity, ProLoNet};

/// Compiles a rule tree into network parameters.
///
/// Checks become decision nodes (numbered in pre-order, so path ids increase
/// from root to leaf) with the check's feature weights, its comparison value
/// as comparator and `alpha = 1`. `<` checks are stored negated so that every
/// node means "weighted input exceeds comparator". Actions become one-hot
/// leaves carrying the polarity of each ancestor check.
pub fn compile_tree(spec: &TreeSpec, input_dim: usize, output_dim: usize) -> Result<ProLoNet> {
    let problems = spec.problems();
    if !problems.is_empty() {
        return Err(Error::InvalidTree(problems));
    }
    let mut nodes = Vec::with_capacity(spec.check_count());
    let mut leaves = Vec::with_capacity(spec.leaf_count());
    let mut path = Vec::new();
    emit(
        &spec.root,
        input_dim,
        output_dim,
        &mut nodes,
        &mut leaves,
        &mut path,
    )?;
    ProLoNet::new(input_dim, output_dim, nodes, leaves)
}

fn emit(
    node: &RuleNode,
    input_dim: usize,
    output_dim: usize,
    nodes: &mut Vec<DecisionNode>,
    leaves: &mut Vec<Leaf>,
    path: &mut Vec<PathStep>,
) -> Result<()> {
    match node {
        RuleNode::Action(a) => {
            if *a >= output_dim {
                return Err(Error::IndexOutOfRange {
                    kind: "action",
                    index: *a,
                    limit: output_dim,
                });
            }
            let mut action_weights = vec![0.0; output_dim];
            action_weights[*a] = 1.0;
            leaves.push(Leaf {
                action_weights,
                path: path.clone(),
            });
        }
        RuleNode::Check(check) => {
            let sign = match check.comparison {
                Comparison::Greater => 1.0,
                Comparison::Less => -1.0,
            };
            let mut weights = vec![0.0; input_dim];
            for term in &check.terms {
                if term.feature >= input_dim {
                    return Err(Error::IndexOutOfRange {
                        kind: "feature",
                        index: term.feature,
                        limit: input_dim,
                    });
                }
                weights[term.feature] += sign * term.weight;
            }
            let id = nodes.len();
            nodes.push(DecisionNode::new(weights, sign * check.value));
            for (child, polarity) in [
                (&check.if_true, Polarity::True),
                (&check.if_false, Polarity::False),
            ] {
                path.push(PathStep::new(id, polarity));
                emit(child, input_dim, output_dim, nodes, leaves, path)?;
                path.pop();
            }
        }
    }
    Ok(())
}
