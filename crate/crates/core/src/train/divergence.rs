use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::ProLoNet;

/// Mean squared parameter drift from the initialization, per category.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRecord {
    /// `0.25`, `0.5`, `0.75`, `1.0` or `solved`.
    pub checkpoint: String,
    pub episode: usize,
    pub mse_weights: f64,
    pub mse_comparators: f64,
    pub mse_leaves: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Divergence {
    pub mse_weights: f64,
    pub mse_comparators: f64,
    pub mse_leaves: f64,
}

fn mse<'a>(pairs: impl Iterator<Item = (&'a f64, &'a f64)>) -> f64 {
    let (mut total, mut count) = (0.0, 0usize);
    for (a, b) in pairs {
        total += (a - b) * (a - b);
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Compares the nodes and leaves present in `init` with the same ids in
/// `current`. Nodes and leaves added later by growth are ignored.
pub fn divergence(init: &ProLoNet, current: &ProLoNet) -> Result<Divergence> {
    check_dim(init.input_dim(), current.input_dim())?;
    check_dim(init.output_dim(), current.output_dim())?;
    let (n, m) = (init.nodes().len(), init.leaves().len());
    if current.nodes().len() < n || current.leaves().len() < m {
        return Err(Error::InvalidModel(format!(
            "checkpoint has {} nodes and {} leaves, fewer than the initialization's {n} and {m}",
            current.nodes().len(),
            current.leaves().len()
        )));
    }
    let nodes = init.nodes().iter().zip(current.nodes());
    let leaves = init.leaves().iter().zip(current.leaves());
    Ok(Divergence {
        mse_weights: mse(nodes
            .clone()
            .flat_map(|(a, b)| a.weights.iter().zip(&b.weights))),
        mse_comparators: mse(nodes.map(|(a, b)| (&a.comparator, &b.comparator))),
        mse_leaves: mse(leaves.flat_map(|(a, b)| a.action_weights.iter().zip(&b.action_weights))),
    })
}

pub fn write_divergence_csv(path: &Path, records: &[DivergenceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_divergence_csv(path: &Path) -> Result<Vec<DivergenceRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
