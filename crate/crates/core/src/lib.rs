//! Differentiable decision-tree policies ("ProLoNets") that start from a
//! human-authored rule tree, are trained with actor-critic policy gradients
//! and can grow deeper while they learn.
//!
//! ```
//! use prolonet::compile::{compile_tree, parse_tree};
//!
//! let tree = parse_tree("features: a, b\nactions: go, stop\nif a > 0 then go else stop").unwrap();
//! let net = compile_tree(&tree, 2, 2).unwrap();
//! let out = net.forward(&[2.0, 1.0]).unwrap();
//! assert!(out.probs[0] > out.probs[1]);
//! ```

pub mod baselines;
pub mod compile;
pub mod envs;
pub mod error;
pub mod growth;
pub mod math;
pub mod model;
pub mod run;
pub mod train;

pub use baselines::{build_agent, AgentKind};
pub use envs::Domain;
pub use error::{Error, Result};
pub use model::{Network, ProLoNet};
pub use run::RunConfig;
