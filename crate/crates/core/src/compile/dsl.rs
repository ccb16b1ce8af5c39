//! Text format for decision-tree policies (`.tree` files).
//!
//! ```text
//! # comments run to the end of the line
//! features: x_position, x_velocity, pole_angle, pole_velocity
//! actions: left, right
//! if x_position > 0 then left
//! else (if 10*pole_angle + pole_velocity < 0 then left else right)
//! ```
//!
//! A rule is `if <sum> (>|<) <number> then <branch> else <branch>` or
//! `do <action>`. A branch is a bare action name, `do <action>`, a nested
//! `if`, or a parenthesized rule. A sum is one or more terms joined by `+`
//! or `-`, each term an optional `<number>*` coefficient and a feature name.
//! Line breaks carry no meaning.

use std::fmt;

use crate::compile::ast::{Check, Comparison, RuleNode, Term, TreeSpec};

type Names = Vec<String>;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Gt,
    Lt,
    LParen,
    RParen,
    Star,
    Plus,
    Minus,
    Colon,
    Comma,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Number(n) => write!(f, "number {n}"),
            Tok::Gt => f.write_str("'>'"),
            Tok::Lt => f.write_str("'<'"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::Star => f.write_str("'*'"),
            Tok::Plus => f.write_str("'+'"),
            Tok::Minus => f.write_str("'-'"),
            Tok::Colon => f.write_str("':'"),
            Tok::Comma => f.write_str("','"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

const KEYWORDS: [&str; 4] = ["if", "then", "else", "do"];

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let single = match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
                continue;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '>' => Some(Tok::Gt),
            '<' => Some(Tok::Lt),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '*' => Some(Tok::Star),
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            ':' => Some(Tok::Colon),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Spanned {
                tok,
                line,
                column: col,
            });
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Spanned {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: start_line,
                column: start_col,
            });
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let literal: String = chars[start..i].iter().collect();
            col += i - start;
            let value: f64 = literal.parse().map_err(|_| ParseError {
                line: start_line,
                column: start_col,
                message: format!("malformed number {literal:?}"),
            })?;
            out.push(Spanned {
                tok: Tok::Number(value),
                line: start_line,
                column: start_col,
            });
            continue;
        }
        return Err(ParseError {
            line,
            column: col,
            message: format!("unexpected character {c:?}"),
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    features: Vec<String>,
    actions: Vec<String>,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: String) -> ParseError {
        let t = self.peek();
        ParseError {
            line: t.line,
            column: t.column,
            message,
        }
    }

    fn expected(&self, what: &str) -> ParseError {
        self.error_here(format!("expected {what}, found {}", self.peek().tok))
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.at_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.expected(&format!("'{kw}'")))
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek().tok == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.expected(what))
        }
    }

    /// Optional `features:` and `actions:` lines, in either order.
    fn header(&mut self) -> Result<(Option<Names>, Option<Names>), ParseError> {
        let (mut features, mut actions) = (None, None);
        loop {
            let is_header = matches!(self.peek_at(1), Tok::Colon);
            let slot = match &self.peek().tok {
                Tok::Ident(s) if is_header && s == "features" => &mut features,
                Tok::Ident(s) if is_header && s == "actions" => &mut actions,
                _ => break,
            };
            if slot.is_some() {
                return Err(self.error_here("duplicate header".into()));
            }
            self.bump();
            self.bump();
            let mut names = vec![self.name("name")?];
            while self.peek().tok == Tok::Comma {
                self.bump();
                names.push(self.name("name")?);
            }
            *slot = Some(names);
        }
        Ok((features, actions))
    }

    fn name(&mut self, what: &str) -> Result<String, ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.expected(what)),
        }
    }

    fn action(&mut self) -> Result<RuleNode, ParseError> {
        let at = self.peek().clone();
        let name = self.name("action name")?;
        match self.actions.iter().position(|a| *a == name) {
            Some(i) => Ok(RuleNode::Action(i)),
            None => Err(ParseError {
                line: at.line,
                column: at.column,
                message: format!("unknown action {name:?}"),
            }),
        }
    }

    fn rule(&mut self) -> Result<RuleNode, ParseError> {
        if self.at_keyword("if") {
            self.bump();
            return self.check();
        }
        if self.at_keyword("do") {
            self.bump();
            return self.action();
        }
        if self.peek().tok == Tok::LParen {
            self.bump();
            let inner = self.rule()?;
            self.expect(Tok::RParen, "')'")?;
            return Ok(inner);
        }
        if matches!(&self.peek().tok, Tok::Ident(s) if !KEYWORDS.contains(&s.as_str())) {
            return self.action();
        }
        Err(self.expected("'if', 'do', '(' or an action name"))
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let negative = match self.peek().tok {
            Tok::Minus => {
                self.bump();
                true
            }
            Tok::Plus => {
                self.bump();
                false
            }
            _ => false,
        };
        match self.peek().tok {
            Tok::Number(v) => {
                self.bump();
                Ok(if negative { -v } else { v })
            }
            _ => Err(self.expected("number")),
        }
    }

    fn term(&mut self, sign: f64) -> Result<Term, ParseError> {
        let mut weight = sign;
        if self.peek().tok == Tok::Minus {
            self.bump();
            weight = -weight;
        }
        if let Tok::Number(v) = self.peek().tok {
            self.bump();
            self.expect(Tok::Star, "'*' after coefficient")?;
            weight *= v;
        }
        let at = self.peek().clone();
        let name = self.name("feature name")?;
        let feature = self
            .features
            .iter()
            .position(|f| *f == name)
            .ok_or_else(|| ParseError {
                line: at.line,
                column: at.column,
                message: format!("unknown feature {name:?}"),
            })?;
        Ok(Term { feature, weight })
    }

    fn check(&mut self) -> Result<RuleNode, ParseError> {
        let mut terms = vec![self.term(1.0)?];
        loop {
            let sign = match self.peek().tok {
                Tok::Plus => 1.0,
                Tok::Minus => -1.0,
                _ => break,
            };
            self.bump();
            terms.push(self.term(sign)?);
        }
        let comparison = match self.peek().tok {
            Tok::Gt => Comparison::Greater,
            Tok::Lt => Comparison::Less,
            _ => return Err(self.expected("'>' or '<'")),
        };
        self.bump();
        let value = self.number()?;
        self.expect_keyword("then")?;
        let if_true = self.rule()?;
        self.expect_keyword("else")?;
        let if_false = self.rule()?;
        Ok(RuleNode::Check(Check {
            terms,
            comparison,
            value,
            if_true: Box::new(if_true),
            if_false: Box::new(if_false),
        }))
    }
}

fn parse_impl(
    text: &str,
    features: Option<&[String]>,
    actions: Option<&[String]>,
) -> Result<TreeSpec, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        features: Vec::new(),
        actions: Vec::new(),
    };
    let (hf, ha) = p.header()?;
    let resolve =
        |header: Option<Vec<String>>, given: Option<&[String]>, what: &str| match (header, given) {
            (Some(h), Some(g)) if h != g => Err(ParseError {
                line: 1,
                column: 1,
                message: format!("{what} header does not match the supplied {what}"),
            }),
            (Some(h), _) => Ok(h),
            (None, Some(g)) => Ok(g.to_vec()),
            (None, None) => Err(ParseError {
                line: 1,
                column: 1,
                message: format!("missing '{what}:' header"),
            }),
        };
    p.features = resolve(hf, features, "features")?;
    p.actions = resolve(ha, actions, "actions")?;
    let root = p.rule()?;
    if p.peek().tok != Tok::Eof {
        return Err(p.expected("end of input"));
    }
    let spec = TreeSpec {
        root,
        feature_names: p.features,
        action_names: p.actions,
    };
    let problems = spec.problems();
    if let Some(first) = problems.first() {
        return Err(ParseError {
            line: 1,
            column: 1,
            message: first.clone(),
        });
    }
    Ok(spec)
}

/// Parses a tree whose source declares its `features:` and `actions:` headers.
pub fn parse_tree(text: &str) -> Result<TreeSpec, ParseError> {
    parse_impl(text, None, None)
}

/// Parses a tree against a known vocabulary. Headers, if present, must match it.
pub fn parse_tree_with(
    text: &str,
    features: &[String],
    actions: &[String],
) -> Result<TreeSpec, ParseError> {
    parse_impl(text, Some(features), Some(actions))
}
