//! Line-oriented manifest artifacts: candidate pools, ranked selections,
//! and per-tile score records.
//!
//! All manifests are UTF-8 JSONL, one object per line. Pool manifests are
//! canonicalized on read: records sorted by `tile_id`, duplicates rejected.
//! Every deterministic tie-break downstream depends on that order.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One candidate tile in the unlabelled pool.
///
/// `artifact_paths` maps a role ("probmap", "dropout_stack", "features",
/// "gt") to a path, relative to the artifact root unless absolute. Roles
/// absent from the map resolve to the conventional `<tile_id>.<role>.alf`.
/// `positive` is optional label metadata consumed by the unlimited baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRecord {
    pub tile_id: String,
    pub source_image_id: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub artifact_paths: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive: Option<bool>,
}

/// The candidate pool: unique tile ids in canonical (lexicographic) order.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolManifest {
    records: Vec<PoolRecord>,
}

impl PoolManifest {
    pub fn new(mut records: Vec<PoolRecord>) -> Result<Self> {
        records.sort_by(|a, b| a.tile_id.cmp(&b.tile_id));
        for pair in records.windows(2) {
            if pair[0].tile_id == pair[1].tile_id {
                return Err(Error::Validation(format!(
                    "duplicate tile_id {:?} in pool manifest",
                    pair[0].tile_id
                )));
            }
        }
        Ok(Self { records })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        let mut seen: HashSet<String> = HashSet::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: PoolRecord = serde_json::from_str(line)
                .map_err(|e| Error::manifest(path, idx + 1, e.to_string()))?;
            if !seen.insert(record.tile_id.clone()) {
                return Err(Error::manifest(
                    path,
                    idx + 1,
                    format!("duplicate tile_id {:?}", record.tile_id),
                ));
            }
            records.push(record);
        }
        records.sort_by(|a, b| a.tile_id.cmp(&b.tile_id));
        Ok(Self { records })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_jsonl(path, &self.records)
    }

    pub fn records(&self) -> &[PoolRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, tile_id: &str) -> bool {
        self.get(tile_id).is_some()
    }

    pub fn get(&self, tile_id: &str) -> Option<&PoolRecord> {
        self.records
            .binary_search_by(|r| r.tile_id.as_str().cmp(tile_id))
            .ok()
            .map(|i| &self.records[i])
    }
}

/// Selection strategy provenance carried by a [`SelectionManifest`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Uncertainty,
    Coreset,
    Unlimited,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Strategy::Random => "random",
            Strategy::Uncertainty => "uncertainty",
            Strategy::Coreset => "coreset",
            Strategy::Unlimited => "unlimited",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEntry {
    pub rank: u64,
    pub tile_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct SelectionHeader {
    strategy: Strategy,
    budget: u64,
}

/// A ranked, budgeted selection. On disk: a header line carrying strategy
/// and budget, then one entry per line, sorted by rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionManifest {
    pub strategy: Strategy,
    pub budget: u64,
    entries: Vec<SelectionEntry>,
}

impl SelectionManifest {
    pub fn new(strategy: Strategy, budget: u64, entries: Vec<SelectionEntry>) -> Result<Self> {
        if strategy != Strategy::Unlimited && entries.len() as u64 > budget {
            return Err(Error::Validation(format!(
                "selection has {} entries, exceeding budget {budget}",
                entries.len()
            )));
        }
        for (i, entry) in entries.iter().enumerate() {
            let expected = i as u64 + 1;
            if entry.rank != expected {
                return Err(Error::Validation(format!(
                    "entry rank {} at position {i}; ranks must be contiguous 1..len",
                    entry.rank
                )));
            }
            if let Some(score) = entry.score {
                if !score.is_finite() {
                    return Err(Error::Validation(format!(
                        "non-finite score for tile {:?}",
                        entry.tile_id
                    )));
                }
            }
        }
        Ok(Self {
            strategy,
            budget,
            entries,
        })
    }

    /// Builds a selection from ranked `(tile_id, score)` pairs, assigning
    /// contiguous ranks in the given order.
    pub fn from_ranked(
        strategy: Strategy,
        budget: u64,
        ranked: impl IntoIterator<Item = (String, Option<f64>)>,
    ) -> Result<Self> {
        let entries = ranked
            .into_iter()
            .enumerate()
            .map(|(i, (tile_id, score))| SelectionEntry {
                rank: i as u64 + 1,
                tile_id,
                score,
            })
            .collect();
        Self::new(strategy, budget, entries)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (idx, header_line) = lines
            .next()
            .ok_or_else(|| Error::manifest(path, 1, "empty selection manifest"))?;
        let header: SelectionHeader = serde_json::from_str(header_line)
            .map_err(|e| Error::manifest(path, idx + 1, e.to_string()))?;
        let mut entries = Vec::new();
        for (idx, line) in lines {
            let entry: SelectionEntry = serde_json::from_str(line)
                .map_err(|e| Error::manifest(path, idx + 1, e.to_string()))?;
            entries.push(entry);
        }
        Self::new(header.strategy, header.budget, entries)
            .map_err(|e| Error::manifest(path, 1, e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let header = SelectionHeader {
            strategy: self.strategy,
            budget: self.budget,
        };
        let io_err = |e: std::io::Error| Error::io(path, e);
        serde_json::to_writer(&mut w, &header).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(io_err)?;
        for entry in &self.entries {
            serde_json::to_writer(&mut w, entry).map_err(|e| Error::io(path, e.into()))?;
            w.write_all(b"\n").map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn entries(&self) -> &[SelectionEntry] {
        &self.entries
    }

    pub fn tile_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.tile_id.as_str())
    }

    /// Checks that every selected tile exists in `pool`.
    pub fn validate_against(&self, pool: &PoolManifest) -> Result<()> {
        for entry in &self.entries {
            if !pool.contains(&entry.tile_id) {
                return Err(Error::Validation(format!(
                    "selected tile {:?} not present in pool manifest",
                    entry.tile_id
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut w, record).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(line)
            .map_err(|e| Error::manifest(path, idx + 1, e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}
