use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparison {
    Greater,
    Less,
}

impl Comparison {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Greater => ">",
            Comparison::Less => "<",
        }
    }
}

/// One weighted feature in a check's left-hand side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub feature: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub terms: Vec<Term>,
    pub comparison: Comparison,
    pub value: f64,
    pub if_true: Box<RuleNode>,
    pub if_false: Box<RuleNode>,
}

impl Check {
    /// Single unit-weight feature compared with `>`.
    pub fn simple(feature: usize, value: f64, if_true: RuleNode, if_false: RuleNode) -> Self {
        Self {
            terms: vec![Term {
                feature,
                weight: 1.0,
            }],
            comparison: Comparison::Greater,
            value,
            if_true: Box::new(if_true),
            if_false: Box::new(if_false),
        }
    }

    pub fn weighted_sum(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.weight * x[t.feature]).sum()
    }

    /// Crisp truth value of the check.
    pub fn holds(&self, x: &[f64]) -> bool {
        let s = self.weighted_sum(x);
        match self.comparison {
            Comparison::Greater => s > self.value,
            Comparison::Less => s < self.value,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RuleNode {
    Check(Check),
    Action(usize),
}

impl RuleNode {
    pub fn check_count(&self) -> usize {
        match self {
            RuleNode::Check(c) => 1 + c.if_true.check_count() + c.if_false.check_count(),
            RuleNode::Action(_) => 0,
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            RuleNode::Check(c) => c.if_true.leaf_count() + c.if_false.leaf_count(),
            RuleNode::Action(_) => 1,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            RuleNode::Check(c) => 1 + c.if_true.depth().max(c.if_false.depth()),
            RuleNode::Action(_) => 0,
        }
    }
}

/// A human-authored decision-tree policy with named features and actions.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeSpec {
    pub root: RuleNode,
    pub feature_names: Vec<String>,
    pub action_names: Vec<String>,
}

impl TreeSpec {
    pub fn new(
        root: RuleNode,
        feature_names: Vec<String>,
        action_names: Vec<String>,
    ) -> Result<Self> {
        let spec = Self {
            root,
            feature_names,
            action_names,
        };
        let problems = spec.problems();
        if problems.is_empty() {
            Ok(spec)
        } else {
            Err(Error::InvalidTree(problems))
        }
    }

    /// Every structural problem, each prefixed with the node's location
    /// (`root`, `root.then`, `root.else.then`, ...). Empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.feature_names.is_empty() {
            out.push("feature list is empty".to_string());
        }
        if self.action_names.is_empty() {
            out.push("action list is empty".to_string());
        }
        for (kind, names) in [
            ("feature", &self.feature_names),
            ("action", &self.action_names),
        ] {
            for (i, n) in names.iter().enumerate() {
                if names[..i].contains(n) {
                    out.push(format!("duplicate {kind} name {n:?}"));
                }
            }
        }
        self.node_problems(&self.root, "root", &mut out);
        out
    }

    fn node_problems(&self, node: &RuleNode, at: &str, out: &mut Vec<String>) {
        match node {
            RuleNode::Action(a) => {
                if *a >= self.action_names.len() {
                    out.push(format!(
                        "{at}: action index {a} out of range ({} actions)",
                        self.action_names.len()
                    ));
                }
            }
            RuleNode::Check(c) => {
                if c.terms.is_empty() {
                    out.push(format!("{at}: check has no features"));
                }
                for t in &c.terms {
                    if t.feature >= self.feature_names.len() {
                        out.push(format!(
                            "{at}: feature index {} out of range ({} features)",
                            t.feature,
                            self.feature_names.len()
                        ));
                    }
                    if !t.weight.is_finite() {
                        out.push(format!("{at}: feature weight must be finite"));
                    }
                }
                if !c.value.is_finite() {
                    out.push(format!("{at}: comparison value must be finite"));
                }
                self.node_problems(&c.if_true, &format!("{at}.then"), out);
                self.node_problems(&c.if_false, &format!("{at}.else"), out);
            }
        }
    }

    pub fn check_count(&self) -> usize {
        self.root.check_count()
    }

    pub fn leaf_count(&self) -> usize {
        self.root.leaf_count()
    }

    /// Crisp root-to-leaf traversal.
    pub fn decide(&self, x: &[f64]) -> Result<usize> {
        crate::error::check_dim(self.feature_names.len(), x.len())?;
        let mut node = &self.root;
        loop {
            match node {
                RuleNode::Action(a) => return Ok(*a),
                RuleNode::Check(c) => {
                    node = if c.holds(x) { &c.if_true } else { &c.if_false };
                }
            }
        }
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.action_names.iter().position(|n| n == name)
    }

    /// Renders the tree in the textual rule language, headers included.
    pub fn to_dsl(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "features: {}", self.feature_names.join(", "));
        let _ = writeln!(out, "actions: {}", self.action_names.join(", "));
        self.write_rule(&self.root, 0, &mut out);
        out.push('\n');
        out
    }

    fn write_rule(&self, node: &RuleNode, indent: usize, out: &mut String) {
        match node {
            RuleNode::Action(a) => {
                let _ = write!(out, "do {}", self.action_names[*a]);
            }
            RuleNode::Check(c) => {
                out.push_str("if ");
                for (i, t) in c.terms.iter().enumerate() {
                    let name = &self.feature_names[t.feature];
                    let (sep, w) = match (i, t.weight < 0.0) {
                        (0, _) => ("", t.weight),
                        (_, true) => (" - ", -t.weight),
                        (_, false) => (" + ", t.weight),
                    };
                    out.push_str(sep);
                    if w == 1.0 {
                        out.push_str(name);
                    } else {
                        let _ = write!(out, "{w:?}*{name}");
                    }
                }
                let _ = write!(out, " {} {:?}", c.comparison.symbol(), c.value);
                for (kw, child) in [("then", &c.if_true), ("else", &c.if_false)] {
                    let _ = write!(out, "\n{:width$}{kw} ", "", width = indent + 2);
                    match child.as_ref() {
                        RuleNode::Check(_) => {
                            out.push('(');
                            self.write_rule(child, indent + 4, out);
                            out.push(')');
                        }
                        RuleNode::Action(_) => self.write_rule(child, indent + 2, out),
                    }
                }
            }
        }
    }
}
