use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::train::agent::UpdateMode;

/// One training episode's outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub reward: f64,
    pub length: usize,
    /// Mean actor loss of the update that followed; 0 without an update.
    pub loss: f64,
    /// Leaves deepened after this episode's update.
    pub growth_events: usize,
    pub mode: UpdateMode,
    pub rolled_back: bool,
    /// Environment-specific per-step diagnostic, averaged over the episode.
    pub diagnostic: Option<f64>,
    pub error: Option<String>,
}

/// A deepening event tagged with the episode that triggered it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRecord {
    pub episode: usize,
    pub leaf_id: usize,
    pub shallow_entropy: f64,
    pub child_entropies: [f64; 2],
    pub epsilon: f64,
}

/// Row shape of `metrics.csv`.
#[derive(Serialize, Deserialize)]
struct CsvRow {
    episode: usize,
    reward: f64,
    length: usize,
    loss: f64,
    growth_events: usize,
}

/// Streams metrics to `metrics.csv`, `metrics.jsonl` and `growth.jsonl`
/// inside a directory.
pub struct MetricsWriter {
    dir: PathBuf,
    csv: csv::Writer<File>,
    jsonl: BufWriter<File>,
    growth: BufWriter<File>,
}

fn create(path: PathBuf) -> Result<BufWriter<File>> {
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

impl MetricsWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            csv: csv::Writer::from_path(dir.join("metrics.csv"))?,
            jsonl: create(dir.join("metrics.jsonl"))?,
            growth: create(dir.join("growth.jsonl"))?,
        })
    }

    pub fn episode(&mut self, m: &EpisodeMetrics) -> Result<()> {
        self.csv.serialize(CsvRow {
            episode: m.episode,
            reward: m.reward,
            length: m.length,
            loss: m.loss,
            growth_events: m.growth_events,
        })?;
        serde_json::to_writer(&mut self.jsonl, m)?;
        self.jsonl
            .write_all(b"\n")
            .map_err(|e| Error::io(self.dir.join("metrics.jsonl"), e))
    }

    pub fn growth(&mut self, g: &GrowthRecord) -> Result<()> {
        serde_json::to_writer(&mut self.growth, g)?;
        self.growth
            .write_all(b"\n")
            .map_err(|e| Error::io(self.dir.join("growth.jsonl"), e))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.csv
            .flush()
            .map_err(|e| Error::io(self.dir.join("metrics.csv"), e))?;
        self.jsonl
            .flush()
            .map_err(|e| Error::io(self.dir.join("metrics.jsonl"), e))?;
        self.growth
            .flush()
            .map_err(|e| Error::io(self.dir.join("growth.jsonl"), e))
    }
}

/// Reads the per-episode rewards back from a `metrics.csv`.
pub fn read_reward_curve(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows: Vec<CsvRow> = r.deserialize().collect::<std::result::Result<_, _>>()?;
    Ok(rows.into_iter().map(|row| row.reward).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_and_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = MetricsWriter::create(dir.path()).unwrap();
        for (i, r) in [10.0, 12.5].into_iter().enumerate() {
            w.episode(&EpisodeMetrics {
                episode: i,
                reward: r,
                length: 10,
                loss: 0.1,
                growth_events: 0,
                mode: UpdateMode::Rl,
                rolled_back: false,
                diagnostic: None,
                error: None,
            })
            .unwrap();
        }
        w.flush().unwrap();
        assert_eq!(
            read_reward_curve(&dir.path().join("metrics.csv")).unwrap(),
            vec![10.0, 12.5]
        );
        let jsonl = std::fs::read_to_string(dir.path().join("metrics.jsonl")).unwrap();
        assert_eq!(jsonl.lines().count(), 2);
    }
}
