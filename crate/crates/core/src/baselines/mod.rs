//! Reference agents: tree-initialized and random ProLoNets, the MLP
//! baseline, the crisp heuristic and the imitation-then-RL MLP.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compile::{
    compile_tree, inject_mistakes, parse_tree_with, random_prolonet, MistakeConfig, TreeSpec,
};
use crate::envs::Domain;
use crate::error::{Error, Result};
use crate::growth::{GrowthConfig, GrowthPair};
use crate::model::{MlpPolicy, Network};
use crate::train::trainer::derive_seed;
use crate::train::{Agent, Policy};

const CARTPOLE_TREE: &str = include_str!("../../trees/cartpole.tree");
const WILDFIRE_TREE: &str = include_str!("../../trees/wildfire.tree");

const STREAM_INIT: u64 = 0x11;
const STREAM_GROWTH: u64 = 0x12;
const STREAM_MISTAKES: u64 = 0x13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    /// ProLoNet compiled from a rule tree.
    #[serde(alias = "prolonet")]
    ProlonetInit,
    /// ProLoNet with the same node count, randomly initialized.
    #[serde(alias = "random")]
    ProlonetRandom,
    Mlp,
    /// Crisp traversal of the rule tree; never learns.
    Heuristic,
    /// MLP that imitates the rule tree before switching to RL.
    Loki,
}

impl AgentKind {
    pub const ALL: [AgentKind; 5] = [
        AgentKind::ProlonetInit,
        AgentKind::ProlonetRandom,
        AgentKind::Mlp,
        AgentKind::Heuristic,
        AgentKind::Loki,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::ProlonetInit => "prolonet-init",
            AgentKind::ProlonetRandom => "prolonet-random",
            AgentKind::Mlp => "mlp",
            AgentKind::Heuristic => "heuristic",
            AgentKind::Loki => "loki",
        }
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prolonet" | "prolonet-init" => Ok(AgentKind::ProlonetInit),
            "random" | "prolonet-random" => Ok(AgentKind::ProlonetRandom),
            "mlp" => Ok(AgentKind::Mlp),
            "heuristic" => Ok(AgentKind::Heuristic),
            "loki" => Ok(AgentKind::Loki),
            other => Err(Error::Config(format!("unknown agent kind {other:?}"))),
        }
    }
}

/// Source text of the built-in rule tree for a domain.
pub fn default_tree_source(domain: Domain) -> &'static str {
    match domain {
        Domain::Cartpole => CARTPOLE_TREE,
        Domain::Wildfire => WILDFIRE_TREE,
    }
}

/// The built-in rule tree for a domain.
pub fn default_tree(domain: Domain) -> TreeSpec {
    parse_domain_tree(domain, default_tree_source(domain)).expect("built-in trees are valid")
}

/// Parses a rule tree against a domain's feature and action vocabulary.
pub fn parse_domain_tree(domain: Domain, text: &str) -> Result<TreeSpec> {
    Ok(parse_tree_with(
        text,
        &domain.feature_names(),
        &domain.action_names(),
    )?)
}

/// Checks that a tree speaks the domain's vocabulary, in order.
pub fn check_tree_domain(tree: &TreeSpec, domain: Domain) -> Result<()> {
    let mut problems = Vec::new();
    if tree.feature_names != domain.feature_names() {
        problems.push(format!(
            "features must be {}",
            domain.feature_names().join(", ")
        ));
    }
    if tree.action_names != domain.action_names() {
        problems.push(format!(
            "actions must be {}",
            domain.action_names().join(", ")
        ));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidTree(problems))
    }
}

/// Crisp root-to-leaf decision of the rule tree.
pub fn heuristic_act(tree: &TreeSpec, state: &[f64]) -> Result<usize> {
    tree.decide(state)
}

/// MLP layer widths: two hidden layers as wide as the input.
pub fn mlp_widths(domain: Domain) -> Vec<usize> {
    let (i, o) = (domain.observation_dim(), domain.action_dim());
    vec![i, i, i, o]
}

pub fn build_agent(
    kind: AgentKind,
    domain: Domain,
    tree: Option<&TreeSpec>,
    seed: u64,
) -> Result<Agent> {
    build_agent_with_mistakes(kind, domain, tree, seed, 0.0)
}

/// As [`build_agent`], additionally negating parts of a tree-initialized
/// network at `mistake_rate`. Without a tree the domain's built-in one is
/// used. Every random choice derives from `seed`.
pub fn build_agent_with_mistakes(
    kind: AgentKind,
    domain: Domain,
    tree: Option<&TreeSpec>,
    seed: u64,
    mistake_rate: f64,
) -> Result<Agent> {
    let tree = match tree {
        Some(t) => {
            check_tree_domain(t, domain)?;
            t.clone()
        }
        None => default_tree(domain),
    };
    let (input, output) = (domain.observation_dim(), domain.action_dim());
    let growing = |net| -> Result<Policy> {
        Ok(Policy::Growing(GrowthPair::new(
            net,
            GrowthConfig::default(),
            derive_seed(seed, STREAM_GROWTH, 0),
        )?))
    };
    let mlp = || -> Result<Network> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_INIT, 0));
        Ok(Network::Mlp(MlpPolicy::random(
            &mlp_widths(domain),
            &mut rng,
        )?))
    };
    Ok(match kind {
        AgentKind::ProlonetInit => {
            let mut net = compile_tree(&tree, input, output)?;
            if mistake_rate > 0.0 {
                let cfg = MistakeConfig::new(mistake_rate, derive_seed(seed, STREAM_MISTAKES, 0))?;
                net = inject_mistakes(&net, &cfg);
            }
            Agent::new(kind, growing(net)?, None)
        }
        AgentKind::ProlonetRandom => {
            let net = random_prolonet(
                tree.check_count(),
                input,
                output,
                derive_seed(seed, STREAM_INIT, 0),
            )?;
            Agent::new(kind, growing(net)?, None)
        }
        AgentKind::Mlp => Agent::new(kind, Policy::Network(mlp()?), None),
        AgentKind::Heuristic => Agent::new(kind, Policy::Heuristic(tree), None),
        AgentKind::Loki => Agent::new(kind, Policy::Network(mlp()?), Some(tree)),
    })
}
