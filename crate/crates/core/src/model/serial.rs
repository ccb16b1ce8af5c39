use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DecisionNode, Dense, Leaf, MlpPolicy, Network, ProLoNet};

pub const PROLONET_FORMAT: &str = "prolonet-v1";
pub const MLP_FORMAT: &str = "mlp-v1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProLoNetDoc {
    format: String,
    input_dim: usize,
    output_dim: usize,
    nodes: Vec<DecisionNode>,
    leaves: Vec<Leaf>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MlpDoc {
    format: String,
    layers: Vec<Dense>,
}

impl Serialize for ProLoNet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ProLoNetDoc {
            format: PROLONET_FORMAT.into(),
            input_dim: self.input_dim(),
            output_dim: self.output_dim(),
            nodes: self.nodes().to_vec(),
            leaves: self.leaves().to_vec(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProLoNet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = ProLoNetDoc::deserialize(d)?;
        if doc.format != PROLONET_FORMAT {
            return Err(serde::de::Error::custom(format!(
                "expected format {PROLONET_FORMAT:?}, found {:?}",
                doc.format
            )));
        }
        ProLoNet::new(doc.input_dim, doc.output_dim, doc.nodes, doc.leaves)
            .map_err(serde::de::Error::custom)
    }
}

impl Serialize for MlpPolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MlpDoc {
            format: MLP_FORMAT.into(),
            layers: self.layers().to_vec(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MlpPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = MlpDoc::deserialize(d)?;
        if doc.format != MLP_FORMAT {
            return Err(serde::de::Error::custom(format!(
                "expected format {MLP_FORMAT:?}, found {:?}",
                doc.format
            )));
        }
        MlpPolicy::new(doc.layers).map_err(serde::de::Error::custom)
    }
}

impl ProLoNet {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub(crate) fn network_from_json(text: &str) -> Result<Network> {
    #[derive(Deserialize)]
    struct Probe {
        format: Option<String>,
    }
    let probe: Probe = serde_json::from_str(text)?;
    match probe.format.as_deref() {
        Some(PROLONET_FORMAT) => Ok(Network::ProLoNet(serde_json::from_str(text)?)),
        Some(MLP_FORMAT) => Ok(Network::Mlp(serde_json::from_str(text)?)),
        other => Err(Error::Format {
            expected: PROLONET_FORMAT,
            found: other.unwrap_or("<missing>").to_string(),
        }),
    }
}
