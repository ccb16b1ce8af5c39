//! On-disk checkpoints: a directory holding the acting network in its
//! model format (`actor.json`), the critic and deep shadow when present,
//! optimizer state and a small metadata file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Network, ProLoNet};
use crate::train::agent::OptimizerState;

pub const CHECKPOINT_FRACTIONS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointLabel {
    Fraction(f64),
    Solved,
}

impl CheckpointLabel {
    /// `0.25`, `0.5`, ... or `solved`.
    pub fn name(&self) -> String {
        match self {
            CheckpointLabel::Fraction(f) => format!("{f}"),
            CheckpointLabel::Solved => "solved".into(),
        }
    }

    pub fn dir_name(&self) -> String {
        match self {
            CheckpointLabel::Fraction(f) => format!("checkpoint-{}", (f * 100.0).round() as u32),
            CheckpointLabel::Solved => "checkpoint-solved".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub label: CheckpointLabel,
    /// Episodes completed when the checkpoint was taken.
    pub episode: usize,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub actor: Network,
    pub deep_actor: Option<ProLoNet>,
    pub critic: Option<Network>,
    pub optimizer: OptimizerState,
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

fn read(path: PathBuf) -> Result<String> {
    fs::read_to_string(&path).map_err(|e| Error::io(path, e))
}

impl Checkpoint {
    /// Writes into `parent/<label dir>` and returns that directory.
    pub fn save(&self, parent: &Path) -> Result<PathBuf> {
        let dir = parent.join(self.meta.label.dir_name());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write(dir.join("actor.json"), &self.actor.to_json()?)?;
        if let Some(deep) = &self.deep_actor {
            write(dir.join("deep_actor.json"), &deep.to_json()?)?;
        }
        if let Some(critic) = &self.critic {
            write(dir.join("critic.json"), &critic.to_json()?)?;
        }
        write(
            dir.join("optimizer.json"),
            &serde_json::to_string(&self.optimizer)?,
        )?;
        write(
            dir.join("meta.json"),
            &serde_json::to_string_pretty(&self.meta)?,
        )?;
        Ok(dir)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let optional = |name: &str| -> Result<Option<String>> {
            let p = dir.join(name);
            if p.exists() {
                read(p).map(Some)
            } else {
                Ok(None)
            }
        };
        Ok(Self {
            meta: serde_json::from_str(&read(dir.join("meta.json"))?)?,
            actor: Network::from_json(&read(dir.join("actor.json"))?)?,
            deep_actor: optional("deep_actor.json")?
                .map(|t| ProLoNet::from_json(&t))
                .transpose()?,
            critic: optional("critic.json")?
                .map(|t| Network::from_json(&t))
                .transpose()?,
            optimizer: serde_json::from_str(&read(dir.join("optimizer.json"))?)?,
        })
    }
}

/// Checkpoint subdirectories of `dir`, ordered by the episode they were
/// taken at.
pub fn list_checkpoints(dir: &Path) -> Result<Vec<(CheckpointMeta, PathBuf)>> {
    let mut out = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let meta = path.join("meta.json");
        if path.is_dir() && meta.exists() {
            let meta: CheckpointMeta = serde_json::from_str(&read(meta)?)?;
            out.push((meta, path));
        }
    }
    out.sort_by(|a, b| a.0.episode.cmp(&b.0.episode).then_with(|| a.1.cmp(&b.1)));
    Ok(out)
}

/// Episode counts at which each fractional checkpoint falls for a budget.
pub fn checkpoint_episodes(budget: usize) -> Vec<(f64, usize)> {
    CHECKPOINT_FRACTIONS
        .iter()
        .map(|&f| (f, ((budget as f64) * f).ceil() as usize))
        .filter(|&(_, e)| e > 0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_points() {
        assert_eq!(
            checkpoint_episodes(10),
            vec![(0.25, 3), (0.5, 5), (0.75, 8), (1.0, 10)]
        );
        assert!(checkpoint_episodes(0).is_empty());
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let net = crate::compile::random_prolonet(2, 3, 2, 4).unwrap();
        let cp = Checkpoint {
            meta: CheckpointMeta {
                label: CheckpointLabel::Fraction(0.5),
                episode: 12,
            },
            actor: Network::ProLoNet(net.clone()),
            deep_actor: None,
            critic: Some(Network::ProLoNet(net)),
            optimizer: OptimizerState::default(),
        };
        let path = cp.save(dir.path()).unwrap();
        assert!(path.ends_with("checkpoint-50"));
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.actor, cp.actor);
        assert_eq!(back.meta, cp.meta);
        assert_eq!(list_checkpoints(dir.path()).unwrap().len(), 1);
    }
}
