//! Rule trees: the text and JSON formats, compilation into network
//! parameters, and controlled corruption for ablations.

pub mod ast;
pub mod compiler;
pub mod dsl;
pub mod mistakes;
pub mod random;
pub mod treespec_json;

pub use ast::{Check, Comparison, RuleNode, Term, TreeSpec};
pub use compiler::compile_tree;
pub use dsl::{parse_tree, parse_tree_with, ParseError};
pub use mistakes::{inject_mistakes, inject_mistakes_with_report, MistakeConfig, MistakeReport};
pub use random::{random_prolonet, random_tree_spec};
pub use treespec_json::{tree_from_json, tree_to_json, TreeSpecDoc, TREESPEC_FORMAT};
