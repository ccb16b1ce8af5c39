use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde_json::Value;

use prolonet::train::LossVariant;
use prolonet::{AgentKind, Domain, RunConfig};

/// Flags shared by the commands that train.
#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// TOML or JSON run configuration. Values in the file override flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub domain: Option<Domain>,
    /// prolonet-init, prolonet-random, mlp, heuristic or loki.
    #[arg(long)]
    pub agent: Option<AgentKind>,
    /// Rule tree (`.tree` DSL or treespec-v1 `.json`); defaults to the domain's built-in tree.
    #[arg(long)]
    pub tree: Option<PathBuf>,
    /// Comma-separated training seeds.
    #[arg(long, value_delimiter = ',', conflicts_with = "seed")]
    pub seeds: Option<Vec<u64>>,
    /// Single training seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Fraction of weights, comparators and leaves to sign-flip before training.
    #[arg(long)]
    pub mistake_rate: Option<f64>,
    /// clip or kl.
    #[arg(long)]
    pub loss: Option<LossVariant>,
    /// Episodes of imitation before policy-gradient training (loki agents).
    #[arg(long)]
    pub loki_n: Option<usize>,
    /// Undo updates that lower the probe reward.
    #[arg(long)]
    pub rollback: bool,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Stop a seed once the domain's solve threshold is met.
    #[arg(long)]
    pub stop_when_solved: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Overlays `top` onto `base`, recursing into tables.
fn merge(base: Value, top: Value) -> Value {
    match (base, top) {
        (Value::Object(mut b), Value::Object(t)) => {
            for (k, v) in t {
                let merged = match b.remove(&k) {
                    Some(old) => merge(old, v),
                    None => v,
                };
                b.insert(k, merged);
            }
            Value::Object(b)
        }
        (_, top) => top,
    }
}

fn read_value(path: &Path) -> Result<Value> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = if text.trim_start().starts_with('{') {
        serde_json::from_str(&text)?
    } else {
        toml::from_str(&text)?
    };
    if !value.is_object() {
        bail!("{} must hold a table of settings", path.display());
    }
    Ok(value)
}

impl RunArgs {
    pub fn to_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(d) = self.domain {
            cfg.domain = d;
        }
        if let Some(a) = self.agent {
            cfg.agent = a;
        }
        cfg.tree = self.tree.clone();
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(e) = self.episodes {
            cfg.episodes = e;
        }
        if let Some(r) = self.mistake_rate {
            cfg.mistake_rate = r;
        }
        if let Some(l) = self.loss {
            cfg.trainer.loss_variant = l;
        }
        if let Some(n) = self.loki_n {
            cfg.trainer.loki_n = n;
        }
        if let Some(lr) = self.learning_rate {
            cfg.trainer.learning_rate = lr;
        }
        cfg.trainer.rollback |= self.rollback;
        cfg.trainer.stop_when_solved |= self.stop_when_solved;
        cfg.out = self.out.clone();

        if let Some(path) = &self.config {
            let mut file = read_value(path)?;
            // tree paths in a config file are relative to that file
            if let Some(Value::String(tree)) = file.get("tree") {
                let tree = PathBuf::from(tree);
                if tree.is_relative() {
                    let base = path.parent().unwrap_or(Path::new("."));
                    file["tree"] = Value::String(base.join(tree).to_string_lossy().into_owned());
                }
            }
            let merged = merge(serde_json::to_value(&cfg)?, file);
            cfg =
                serde_json::from_value(merged).with_context(|| format!("in {}", path.display()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
