use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::ProLoNet;

/// Random sign flips applied to a compiled network to simulate a flawed
/// initialization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MistakeConfig {
    rate: f64,
    seed: u64,
}

impl MistakeConfig {
    pub fn new(rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..=0.5).contains(&rate) {
            return Err(Error::Config(format!(
                "mistake rate {rate} must lie in [0, 0.5]"
            )));
        }
        Ok(Self { rate, seed })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Most items a category of `size` may have negated: `ceil(2 * rate * size)`.
    pub fn cap(&self, size: usize) -> usize {
        ((2.0 * self.rate * size as f64) - 1e-9).ceil().max(0.0) as usize
    }
}

/// Which items were negated, per category.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MistakeReport {
    pub weight_vectors: Vec<usize>,
    pub comparators: Vec<usize>,
    pub leaves: Vec<usize>,
}

/// Bernoulli(rate) per item; if a draw exceeds the cap, a uniform subset of
/// `cap` of the drawn items is kept.
fn draw<R: Rng>(rng: &mut R, size: usize, cfg: &MistakeConfig) -> Vec<usize> {
    let mut hits: Vec<usize> = (0..size).filter(|_| rng.random_bool(cfg.rate)).collect();
    let cap = cfg.cap(size);
    if hits.len() > cap {
        let mut keep: Vec<usize> = sample(rng, hits.len(), cap)
            .into_iter()
            .map(|i| hits[i])
            .collect();
        keep.sort_unstable();
        hits = keep;
    }
    hits
}

pub fn inject_mistakes_with_report(
    net: &ProLoNet,
    cfg: &MistakeConfig,
) -> (ProLoNet, MistakeReport) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_nodes = net.nodes().len();
    let report = MistakeReport {
        weight_vectors: draw(&mut rng, n_nodes, cfg),
        comparators: draw(&mut rng, n_nodes, cfg),
        leaves: draw(&mut rng, net.leaves().len(), cfg),
    };
    let mut out = net.clone();
    for &i in &report.weight_vectors {
        out.node_mut(i).weights.iter_mut().for_each(|w| *w = -*w);
    }
    for &i in &report.comparators {
        let node = out.node_mut(i);
        node.comparator = -node.comparator;
    }
    for &i in &report.leaves {
        out.leaf_weights_mut(i).iter_mut().for_each(|w| *w = -*w);
    }
    (out, report)
}

/// Negates node weight vectors, comparators and leaf vectors at random.
pub fn inject_mistakes(net: &ProLoNet, cfg: &MistakeConfig) -> ProLoNet {
    inject_mistakes_with_report(net, cfg).0
}
