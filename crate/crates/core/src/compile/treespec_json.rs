//! `treespec-v1`: the JSON form of a decision-tree policy exchanged with the
//! policy-builder UI.
//!
//! ```json
//! {"format": "treespec-v1", "domain": "cartpole",
//!  "root": {"check": {"terms": [{"feature": "x_position", "weight": 1.0}],
//!                     "op": ">", "value": 0.0,
//!                     "then": {"action": "left"}, "else": {"action": "right"}}}}
//! ```
//!
//! `features`/`actions` may be given explicitly; otherwise they come from the
//! named domain. Names, not indices, identify features and actions.

use serde::{Deserialize, Serialize};

use crate::compile::ast::{Check, Comparison, RuleNode, Term, TreeSpec};
use crate::envs::Domain;
use crate::error::{Error, Result};

pub const TREESPEC_FORMAT: &str = "treespec-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSpecDoc {
    pub format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<Vec<String>>,
    pub root: RuleDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RuleDoc {
    #[serde(rename = "check")]
    Check(CheckDoc),
    #[serde(rename = "action")]
    Action(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermDoc {
    pub feature: String,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckDoc {
    pub terms: Vec<TermDoc>,
    pub op: String,
    pub value: f64,
    #[serde(rename = "then", default)]
    pub if_true: Option<Box<RuleDoc>>,
    #[serde(rename = "else", default)]
    pub if_false: Option<Box<RuleDoc>>,
}

impl TreeSpecDoc {
    pub fn from_spec(spec: &TreeSpec) -> Self {
        Self {
            format: TREESPEC_FORMAT.into(),
            domain: None,
            features: Some(spec.feature_names.clone()),
            actions: Some(spec.action_names.clone()),
            root: rule_doc(spec, &spec.root),
        }
    }

    /// Resolves names against the vocabulary and collects every problem
    /// with its node location.
    pub fn to_spec(&self) -> std::result::Result<TreeSpec, Vec<String>> {
        let mut problems = Vec::new();
        if self.format != TREESPEC_FORMAT {
            problems.push(format!(
                "format must be {TREESPEC_FORMAT:?}, found {:?}",
                self.format
            ));
        }
        let domain = match self.domain.as_deref() {
            Some(name) => match Domain::from_name(name) {
                Some(d) => Some(d),
                None => {
                    problems.push(format!("unknown domain {name:?}"));
                    None
                }
            },
            None => None,
        };
        let features = self
            .features
            .clone()
            .or_else(|| domain.map(|d| d.feature_names()));
        let actions = self
            .actions
            .clone()
            .or_else(|| domain.map(|d| d.action_names()));
        let (Some(features), Some(actions)) = (features, actions) else {
            problems.push("features and actions must be given or implied by a domain".into());
            return Err(problems);
        };
        let root = resolve(&self.root, "root", &features, &actions, &mut problems);
        if !problems.is_empty() {
            return Err(problems);
        }
        let spec = TreeSpec {
            root: root.expect("resolved without problems"),
            feature_names: features,
            action_names: actions,
        };
        let structural = spec.problems();
        if structural.is_empty() {
            Ok(spec)
        } else {
            Err(structural)
        }
    }
}

fn rule_doc(spec: &TreeSpec, node: &RuleNode) -> RuleDoc {
    match node {
        RuleNode::Action(a) => RuleDoc::Action(spec.action_names[*a].clone()),
        RuleNode::Check(c) => RuleDoc::Check(CheckDoc {
            terms: c
                .terms
                .iter()
                .map(|t| TermDoc {
                    feature: spec.feature_names[t.feature].clone(),
                    weight: t.weight,
                })
                .collect(),
            op: c.comparison.symbol().into(),
            value: c.value,
            if_true: Some(Box::new(rule_doc(spec, &c.if_true))),
            if_false: Some(Box::new(rule_doc(spec, &c.if_false))),
        }),
    }
}

fn resolve(
    doc: &RuleDoc,
    at: &str,
    features: &[String],
    actions: &[String],
    problems: &mut Vec<String>,
) -> Option<RuleNode> {
    match doc {
        RuleDoc::Action(name) => match actions.iter().position(|a| a == name) {
            Some(i) => Some(RuleNode::Action(i)),
            None => {
                problems.push(format!("{at}: unknown action {name:?}"));
                None
            }
        },
        RuleDoc::Check(c) => {
            let mut ok = true;
            if c.terms.is_empty() {
                problems.push(format!("{at}: check has no features"));
                ok = false;
            }
            let mut terms = Vec::with_capacity(c.terms.len());
            for t in &c.terms {
                match features.iter().position(|f| *f == t.feature) {
                    Some(feature) => terms.push(Term {
                        feature,
                        weight: t.weight,
                    }),
                    None => {
                        problems.push(format!("{at}: unknown feature {:?}", t.feature));
                        ok = false;
                    }
                }
            }
            let comparison = match c.op.as_str() {
                ">" => Some(Comparison::Greater),
                "<" => Some(Comparison::Less),
                other => {
                    problems.push(format!(
                        "{at}: operator must be \">\" or \"<\", found {other:?}"
                    ));
                    None
                }
            };
            let mut branch = |child: &Option<Box<RuleDoc>>, label: &str| match child {
                Some(node) => resolve(node, &format!("{at}.{label}"), features, actions, problems),
                None => {
                    problems.push(format!("{at}.{label}: missing branch"));
                    None
                }
            };
            let if_true = branch(&c.if_true, "then");
            let if_false = branch(&c.if_false, "else");
            match (ok, comparison, if_true, if_false) {
                (true, Some(comparison), Some(t), Some(f)) => Some(RuleNode::Check(Check {
                    terms,
                    comparison,
                    value: c.value,
                    if_true: Box::new(t),
                    if_false: Box::new(f),
                })),
                _ => None,
            }
        }
    }
}

pub fn tree_from_json(text: &str) -> Result<TreeSpec> {
    let doc: TreeSpecDoc = serde_json::from_str(text)?;
    doc.to_spec().map_err(Error::InvalidTree)
}

pub fn tree_to_json(spec: &TreeSpec) -> Result<String> {
    Ok(serde_json::to_string_pretty(&TreeSpecDoc::from_spec(spec))?)
}
