//! Failure discovery: run the nominal plan over seeded episodes, keep the
//! state where the failure detector stopped execution.
//!
//! Datasets are JSON lines. The first line is a [`DatasetHeader`] carrying
//! the task and the config hash; every following line is one
//! [`FailureRecord`].

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{self, FailureKind, Observation, TaskConfig, TaskKind, WorldState};
use crate::skills::{self, Outcome};

/// Failures collected per task unless told otherwise.
pub const DEFAULT_FAILURE_TARGET: usize = 100;

/// First seed of the held-out evaluation episodes, disjoint from training.
pub const HELD_OUT_SEED_BASE: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    /// True state, latent variables included.
    pub world_state: WorldState,
    pub observation: Observation,
    pub failure_kind: FailureKind,
    /// 1-based index of the controller that was executing.
    pub plan_skill_index: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub task: TaskKind,
    pub config_hash: String,
    pub first_seed: u64,
    pub episodes_run: u64,
    pub nominal_successes: u64,
    pub records: usize,
}

const FORMAT: &str = "rechain-failures-v1";

#[derive(Debug, Clone, PartialEq)]
pub struct FailureDataset {
    pub header: DatasetHeader,
    pub records: Vec<FailureRecord>,
}

impl FailureDataset {
    pub fn task(&self) -> TaskKind {
        self.header.task
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Nominal success rate over the episodes that produced this dataset.
    pub fn nominal_rate(&self) -> f64 {
        if self.header.episodes_run == 0 {
            return 0.0;
        }
        self.header.nominal_successes as f64 / self.header.episodes_run as f64
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Loads a dataset and checks it was produced under `cfg`.
    pub fn load(path: &Path, cfg: &TaskConfig) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingDataset {
                path: path.to_path_buf(),
            },
            _ => Error::Io(e),
        })?;
        let mut lines = BufReader::new(file).lines();
        let first = lines.next().ok_or(Error::Dataset {
            line: 1,
            reason: "missing header".into(),
        })??;
        let header: DatasetHeader = serde_json::from_str(&first).map_err(|e| Error::Dataset {
            line: 1,
            reason: e.to_string(),
        })?;
        if header.format != FORMAT {
            return Err(Error::Dataset {
                line: 1,
                reason: format!("unknown format '{}'", header.format),
            });
        }
        let expected = cfg.hash();
        if header.config_hash != expected {
            return Err(Error::ConfigMismatch {
                expected,
                found: header.config_hash,
            });
        }
        let mut records = Vec::with_capacity(header.records);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: FailureRecord = serde_json::from_str(&line).map_err(|e| Error::Dataset {
                line: i + 2,
                reason: e.to_string(),
            })?;
            records.push(r);
        }
        if records.len() != header.records {
            return Err(Error::Dataset {
                line: records.len() + 1,
                reason: format!(
                    "header declares {} records, found {}",
                    header.records,
                    records.len()
                ),
            });
        }
        Ok(Self { header, records })
    }
}

/// Runs the nominal plan on seeds `first_seed..first_seed + episodes`,
/// stopping early once `target` failures are found.
pub fn discover_failures(
    cfg: &TaskConfig,
    episodes: u64,
    first_seed: u64,
    target: Option<usize>,
) -> Result<FailureDataset> {
    if episodes == 0 {
        return Err(Error::Config("episodes must be positive".into()));
    }
    let mut records = Vec::new();
    let mut successes = 0;
    let mut run = 0;
    for seed in first_seed..first_seed + episodes {
        if target.is_some_and(|t| records.len() >= t) {
            break;
        }
        let (state, _) = sim::reset(cfg, seed)?;
        let trace = skills::execute_suffix(cfg, &state, 1)?;
        run += 1;
        match trace.outcome {
            Outcome::Goal => successes += 1,
            Outcome::Failure => records.extend(trace.failure_record),
            Outcome::Timeout => {}
        }
    }
    let header = DatasetHeader {
        format: FORMAT.to_string(),
        task: cfg.task,
        config_hash: cfg.hash(),
        first_seed,
        episodes_run: run,
        nominal_successes: successes,
        records: records.len(),
    };
    Ok(FailureDataset { header, records })
}

/// Per-episode nominal outcomes over a seed range.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NominalStats {
    pub episodes: u64,
    pub goals: u64,
    pub failures: u64,
    pub timeouts: u64,
}

impl NominalStats {
    pub fn success_rate(&self) -> f64 {
        self.goals as f64 / self.episodes.max(1) as f64
    }
}

pub fn nominal_stats(cfg: &TaskConfig, seeds: std::ops::Range<u64>) -> Result<NominalStats> {
    let mut st = NominalStats::default();
    for seed in seeds {
        let (state, _) = sim::reset(cfg, seed)?;
        st.episodes += 1;
        match skills::simulate_suffix(cfg, &state, 1)?.outcome {
            Outcome::Goal => st.goals += 1,
            Outcome::Failure => st.failures += 1,
            Outcome::Timeout => st.timeouts += 1,
        }
    }
    Ok(st)
}

/// Restores the stored true state and checks that it regenerates the stored
/// observation bit for bit.
pub fn reset_to_failure(
    cfg: &TaskConfig,
    record: &FailureRecord,
) -> Result<(WorldState, Observation)> {
    let obs = sim::observe(cfg, &record.world_state);
    if obs != record.observation {
        return Err(Error::ReplayMismatch { seed: record.seed });
    }
    Ok((record.world_state.clone(), obs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_round_trip() {
        let cfg = TaskConfig::new(TaskKind::Shelf2D);
        let ds = discover_failures(&cfg, 60, 0, Some(5)).unwrap();
        assert!(!ds.is_empty());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.jsonl");
        ds.save(&path).unwrap();
        let back = FailureDataset::load(&path, &cfg).unwrap();
        assert_eq!(back, ds);
        let (s, o) = reset_to_failure(&cfg, &back.records[0]).unwrap();
        assert_eq!(o, back.records[0].observation);
        assert_eq!(s, back.records[0].world_state);
    }

    #[test]
    fn load_rejects_other_geometry() {
        let cfg = TaskConfig::new(TaskKind::PickPlace2D);
        let ds = discover_failures(&cfg, 20, 0, Some(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.jsonl");
        ds.save(&path).unwrap();
        let mut other = cfg.clone();
        other.pick_place.wall_margin = 0.0;
        assert!(matches!(
            FailureDataset::load(&path, &other),
            Err(Error::ConfigMismatch { .. })
        ));
        assert!(matches!(
            FailureDataset::load(&dir.path().join("none.jsonl"), &cfg),
            Err(Error::MissingDataset { .. })
        ));
    }
}
