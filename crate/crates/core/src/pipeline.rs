//! End-to-end selection pipeline (pre-score, pre-select, strategy, budget)
//! plus baseline dataset mixing and multi-round bookkeeping.
//!
//! A run owns its output directory (guarded by a `.lock` file) and writes
//! every intermediate artifact: `prescores.jsonl`, `candidates.jsonl`,
//! strategy score files, the final `selection.jsonl`, and `run_meta.json`
//! describing the resolved configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::array::ArrayContainer;
use crate::config::RunConfig;
use crate::coreset::{kcenter_greedy, robust_kcenter, Point, PointSet};
use crate::error::{Error, Result};
use crate::manifest::{PoolManifest, PoolRecord, SelectionEntry, SelectionManifest, Strategy};
use crate::pooler::{pool_features, read_feature_matrix, write_feature_matrix, FeatureVector};
use crate::sampling::sample_indices;
use crate::scorer::{
    dropout_variance, mean_response, preselect, rank_by_uncertainty, write_scores, DropoutStack,
    ScoreRecord,
};

pub const ROLE_PROBMAP: &str = "probmap";
pub const ROLE_DROPOUT: &str = "dropout_stack";
pub const ROLE_FEATURES: &str = "features";
pub const ROLE_GT: &str = "gt";

/// Environment variable consulted for the artifact root when neither a CLI
/// flag nor a config key provides one.
pub const ARTIFACT_ROOT_ENV: &str = "ALCTL_ARTIFACT_ROOT";

/// Resolves per-tile artifact files under a root directory. Explicit paths
/// in the pool record win (absolute paths used as-is, relative joined to
/// the root); otherwise the conventional `<tile_id>.<role>.alf` applies.
#[derive(Debug, Clone)]
pub struct ArtifactStore {
    root: PathBuf,
}

impl ArtifactStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, record: &PoolRecord, role: &str) -> PathBuf {
        match record.artifact_paths.get(role) {
            Some(p) => {
                let p = Path::new(p);
                if p.is_absolute() {
                    p.to_path_buf()
                } else {
                    self.root.join(p)
                }
            }
            None => self.root.join(format!("{}.{role}.alf", record.tile_id)),
        }
    }

    /// Resolves `role` for every record; a missing file anywhere fails the
    /// whole call with the complete list of affected tiles.
    pub fn require_all<'a>(
        &self,
        records: impl IntoIterator<Item = &'a PoolRecord>,
        role: &str,
    ) -> Result<Vec<PathBuf>> {
        let mut paths = Vec::new();
        let mut missing = Vec::new();
        for record in records {
            let path = self.path_for(record, role);
            if path.is_file() {
                paths.push(path);
            } else {
                missing.push(record.tile_id.clone());
            }
        }
        if missing.is_empty() {
            Ok(paths)
        } else {
            Err(Error::MissingArtifacts { tile_ids: missing })
        }
    }
}

/// Exclusive ownership of a run directory for the duration of a pipeline
/// call; concurrent runs must use distinct directories.
struct LockGuard {
    path: PathBuf,
}

impl LockGuard {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut file) => {
                let _ = writeln!(file, "pid {}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::Validation(format!(
                    "run directory {} is locked; if no run is active remove {}",
                    dir.display(),
                    path.display()
                )))
            }
            Err(e) => Err(Error::io(path, e)),
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    /// Precomputed pooled features as (matrix, row sidecar) paths; when set
    /// the coreset strategy looks vectors up here instead of pooling
    /// per-tile feature maps.
    pub feature_matrix: Option<(PathBuf, PathBuf)>,
    /// Already-labelled tiles: excluded from candidacy and, for coreset,
    /// seeded as initial centers.
    pub labelled: Vec<String>,
}

/// Resolved configuration and pool statistics emitted as `run_meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub strategy: Strategy,
    pub budget: u64,
    pub preselect_fraction: f64,
    pub dropout_passes: u32,
    pub pool_grid: u32,
    pub tile_size: u32,
    pub outlier_budget: u64,
    pub seed: Option<u64>,
    pub positive_ratio: f64,
    pub pool_size: usize,
    pub available: usize,
    pub candidates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covering_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outliers: Vec<String>,
}

/// Uniform sample without replacement over the canonical (ascending
/// tile_id) candidate order; output is in draw order.
pub fn select_random(candidates: &[String], budget: usize, seed: u64) -> Result<Vec<String>> {
    let mut ids = candidates.to_vec();
    ids.sort();
    if ids.windows(2).any(|p| p[0] == p[1]) {
        return Err(Error::Validation(
            "duplicate tile_id among candidates".to_string(),
        ));
    }
    let picks = sample_indices(ids.len(), budget, seed)?;
    Ok(picks.into_iter().map(|i| ids[i].clone()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMix {
    /// All positives (ascending tile_id) followed by sampled negatives in
    /// draw order.
    pub tiles: Vec<String>,
    pub requested_negatives: usize,
    pub sampled_negatives: usize,
}

/// All positives plus `round(|positives| * (1 - r) / r)` seeded-sampled
/// negatives; when the negative pool is smaller, takes all of it (callers
/// should surface a warning via the returned counts).
pub fn build_training_mix(
    positives: &[String],
    negatives: &[String],
    positive_ratio: f64,
    seed: u64,
) -> Result<TrainingMix> {
    if positives.is_empty() {
        return Err(Error::Validation("no positive tiles".to_string()));
    }
    if !(positive_ratio > 0.0 && positive_ratio <= 1.0) {
        return Err(Error::Validation(format!(
            "positive_ratio {positive_ratio} outside (0, 1]"
        )));
    }
    let mut tiles = positives.to_vec();
    tiles.sort();
    if tiles.windows(2).any(|p| p[0] == p[1]) {
        return Err(Error::Validation("duplicate positive tile_id".to_string()));
    }
    let requested =
        (positives.len() as f64 * (1.0 - positive_ratio) / positive_ratio).round() as usize;
    let mut sorted_negatives = negatives.to_vec();
    sorted_negatives.sort();
    let take = requested.min(sorted_negatives.len());
    let picks = sample_indices(sorted_negatives.len(), take, seed)?;
    tiles.extend(picks.into_iter().map(|i| sorted_negatives[i].clone()));
    Ok(TrainingMix {
        tiles,
        requested_negatives: requested,
        sampled_negatives: take,
    })
}

/// Runs the full selection pipeline into `out_dir` and returns the written
/// selection.
pub fn run_pipeline(
    config: &RunConfig,
    pool: &PoolManifest,
    store: &ArtifactStore,
    out_dir: &Path,
    opts: &PipelineOptions,
) -> Result<SelectionManifest> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let _lock = LockGuard::acquire(out_dir)?;

    for id in &opts.labelled {
        if !pool.contains(id) {
            return Err(Error::Validation(format!(
                "labelled tile {id:?} not present in pool manifest"
            )));
        }
    }
    let labelled: BTreeSet<&str> = opts.labelled.iter().map(String::as_str).collect();
    let available: Vec<&PoolRecord> = pool
        .records()
        .iter()
        .filter(|r| !labelled.contains(r.tile_id.as_str()))
        .collect();
    if available.is_empty() {
        return Err(Error::PoolExhausted(
            "no unlabelled tiles left in pool".to_string(),
        ));
    }

    let mut meta = RunMeta {
        strategy: config.strategy,
        budget: config.budget,
        preselect_fraction: config.preselect_fraction,
        dropout_passes: config.dropout_passes,
        pool_grid: config.pool_grid,
        tile_size: config.tile_size,
        outlier_budget: config.outlier_budget,
        seed: config.seed,
        positive_ratio: config.positive_ratio,
        pool_size: pool.len(),
        available: available.len(),
        candidates: 0,
        covering_radius: None,
        outliers: Vec::new(),
    };

    let selection = if config.strategy == Strategy::Unlimited {
        meta.candidates = available.len();
        select_unlimited(config, &available)?
    } else {
        let paths = store.require_all(available.iter().copied(), ROLE_PROBMAP)?;
        let mut prescores = Vec::with_capacity(available.len());
        for (record, path) in available.iter().zip(&paths) {
            let map = ArrayContainer::load(path)?;
            prescores.push(ScoreRecord {
                tile_id: record.tile_id.clone(),
                score: mean_response(&map)?,
            });
        }
        write_scores(&out_dir.join("prescores.jsonl"), &prescores)?;
        let candidates = preselect(&prescores, config.preselect_fraction)?;
        write_scores(&out_dir.join("candidates.jsonl"), &candidates)?;
        meta.candidates = candidates.len();
        if config.budget as usize > candidates.len() {
            return Err(Error::Budget(format!(
                "budget {} exceeds the {} pre-selected candidates",
                config.budget,
                candidates.len()
            )));
        }
        match config.strategy {
            Strategy::Random => {
                let ids: Vec<String> = candidates.iter().map(|c| c.tile_id.clone()).collect();
                let seed = config.seed.expect("validated: random requires a seed");
                let chosen = select_random(&ids, config.budget as usize, seed)?;
                SelectionManifest::from_ranked(
                    Strategy::Random,
                    config.budget,
                    chosen.into_iter().map(|id| (id, None)),
                )?
            }
            Strategy::Uncertainty => {
                let records: Vec<&PoolRecord> = candidates
                    .iter()
                    .map(|c| pool.get(&c.tile_id).expect("candidate came from pool"))
                    .collect();
                let stack_paths = store.require_all(records.iter().copied(), ROLE_DROPOUT)?;
                let mut scores = Vec::with_capacity(records.len());
                for (record, path) in records.iter().zip(&stack_paths) {
                    let maps = ArrayContainer::load(path)?;
                    let stack = DropoutStack::new(record.tile_id.clone(), maps)?;
                    if stack.passes() != config.dropout_passes {
                        return Err(Error::Validation(format!(
                            "dropout stack for {:?} has {} passes, config expects {}",
                            record.tile_id,
                            stack.passes(),
                            config.dropout_passes
                        )));
                    }
                    scores.push(ScoreRecord {
                        tile_id: record.tile_id.clone(),
                        score: dropout_variance(&stack),
                    });
                }
                scores.sort_by(|a, b| a.tile_id.cmp(&b.tile_id));
                write_scores(&out_dir.join("uncertainty.jsonl"), &scores)?;
                rank_by_uncertainty(&scores, config.budget as usize)?
            }
            Strategy::Coreset => {
                let candidate_ids: BTreeSet<&str> =
                    candidates.iter().map(|c| c.tile_id.as_str()).collect();
                let mut needed: BTreeSet<&str> = candidate_ids.clone();
                needed.extend(labelled.iter().copied());
                let vectors = gather_features(config, pool, store, out_dir, opts, &needed)?;
                let mut points = Vec::with_capacity(vectors.len());
                let mut seeds = Vec::new();
                for (i, (id, vector)) in vectors.into_iter().enumerate() {
                    if labelled.contains(id.as_str()) {
                        seeds.push(i);
                    }
                    points.push(Point {
                        tile_id: id,
                        vector,
                    });
                }
                let ps = PointSet::new(points, seeds)?;
                let result = if config.outlier_budget == 0 {
                    kcenter_greedy(&ps, config.budget as usize)?
                } else {
                    robust_kcenter(&ps, config.budget as usize, config.outlier_budget as usize)?
                };
                meta.covering_radius = Some(result.covering_radius);
                meta.outliers = result.outliers.clone();
                SelectionManifest::from_ranked(
                    Strategy::Coreset,
                    config.budget,
                    result
                        .selected
                        .into_iter()
                        .zip(result.scores)
                        .map(|(id, s)| (id, Some(s))),
                )?
            }
            Strategy::Unlimited => unreachable!("handled above"),
        }
    };

    selection.validate_against(pool)?;
    selection.write(&out_dir.join("selection.jsonl"))?;
    write_run_meta(&meta, &out_dir.join("run_meta.json"))?;
    Ok(selection)
}

/// Loads (or pools) feature vectors for `needed`, in ascending tile_id
/// order. Computed vectors are also written to `features.alf` +
/// `feature_rows.jsonl` in the run directory.
fn gather_features(
    config: &RunConfig,
    pool: &PoolManifest,
    store: &ArtifactStore,
    out_dir: &Path,
    opts: &PipelineOptions,
    needed: &BTreeSet<&str>,
) -> Result<Vec<(String, Vec<f64>)>> {
    match &opts.feature_matrix {
        Some((matrix, rows)) => {
            let all = read_feature_matrix(matrix, rows)?;
            let mut by_id: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for v in all {
                if by_id.insert(v.tile_id.clone(), v.values).is_some() {
                    return Err(Error::Validation(format!(
                        "duplicate tile_id {:?} in feature matrix sidecar",
                        v.tile_id
                    )));
                }
            }
            let missing: Vec<String> = needed
                .iter()
                .filter(|id| !by_id.contains_key(**id))
                .map(|id| id.to_string())
                .collect();
            if !missing.is_empty() {
                return Err(Error::MissingArtifacts { tile_ids: missing });
            }
            Ok(needed
                .iter()
                .map(|id| (id.to_string(), by_id.remove(*id).expect("checked")))
                .collect())
        }
        None => {
            let records: Vec<&PoolRecord> = needed
                .iter()
                .map(|id| pool.get(id).expect("ids drawn from pool"))
                .collect();
            let paths = store.require_all(records.iter().copied(), ROLE_FEATURES)?;
            let mut pooled = Vec::with_capacity(records.len());
            for (record, path) in records.iter().zip(&paths) {
                let map = ArrayContainer::load(path)?;
                pooled.push(pool_features(&record.tile_id, &map, config.pool_grid)?);
            }
            write_feature_matrix(
                &pooled,
                &out_dir.join("features.alf"),
                &out_dir.join("feature_rows.jsonl"),
            )?;
            Ok(pooled
                .into_iter()
                .map(|FeatureVector { tile_id, values }| (tile_id, values))
                .collect())
        }
    }
}

fn select_unlimited(config: &RunConfig, available: &[&PoolRecord]) -> Result<SelectionManifest> {
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for record in available {
        match record.positive {
            Some(true) => positives.push(record.tile_id.clone()),
            Some(false) => negatives.push(record.tile_id.clone()),
            None => {
                return Err(Error::Validation(format!(
                    "tile {:?} lacks the positive flag required by the unlimited baseline",
                    record.tile_id
                )))
            }
        }
    }
    let seed = match config.seed {
        Some(s) => s,
        None if config.positive_ratio == 1.0 => 0,
        None => {
            return Err(Error::Validation(
                "unlimited baseline with positive_ratio < 1 requires a seed".to_string(),
            ))
        }
    };
    let mix = build_training_mix(&positives, &negatives, config.positive_ratio, seed)?;
    SelectionManifest::from_ranked(
        Strategy::Unlimited,
        mix.tiles.len() as u64,
        mix.tiles.into_iter().map(|id| (id, None)),
    )
}

fn write_run_meta(meta: &RunMeta, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, meta)
        .map_err(|e| Error::format(path, format!("cannot serialize run meta: {e}")))?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_run_meta(path: &Path) -> Result<RunMeta> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, format!("invalid run meta: {e}")))
}

/// One completed selection round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: u64,
    pub strategy: Strategy,
    pub budget: u64,
    pub selected: Vec<SelectionEntry>,
    /// Every tile labelled up to and including this round, ascending.
    pub cumulative_labelled: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<String>,
}

pub fn validate_history(history: &[RoundRecord]) -> Result<()> {
    let mut previous: Option<&RoundRecord> = None;
    for (i, record) in history.iter().enumerate() {
        if record.round_index != i as u64 {
            return Err(Error::Validation(format!(
                "round history index {} at position {i}",
                record.round_index
            )));
        }
        let labelled: BTreeSet<&str> = record
            .cumulative_labelled
            .iter()
            .map(String::as_str)
            .collect();
        if labelled.len() != record.cumulative_labelled.len() {
            return Err(Error::Validation(format!(
                "round {} repeats a labelled tile",
                record.round_index
            )));
        }
        if let Some(prev) = previous {
            let before: BTreeSet<&str> = prev
                .cumulative_labelled
                .iter()
                .map(String::as_str)
                .collect();
            if !before.is_subset(&labelled) || before.len() >= labelled.len() {
                return Err(Error::Validation(format!(
                    "cumulative labelled set must strictly grow at round {}",
                    record.round_index
                )));
            }
            for entry in &record.selected {
                if before.contains(entry.tile_id.as_str()) {
                    return Err(Error::Validation(format!(
                        "tile {:?} selected twice across rounds",
                        entry.tile_id
                    )));
                }
            }
        }
        previous = Some(record);
    }
    Ok(())
}

pub fn write_rounds(history: &[RoundRecord], path: &Path) -> Result<()> {
    crate::manifest::write_jsonl(path, history)
}

pub fn read_rounds(path: &Path) -> Result<Vec<RoundRecord>> {
    let history: Vec<RoundRecord> = crate::manifest::read_jsonl(path)?;
    validate_history(&history)?;
    Ok(history)
}

/// Runs one selection round on the tiles not yet labelled, appending to the
/// given history. The round's pipeline artifacts land in `round_dir`.
pub fn run_round(
    history: &[RoundRecord],
    config: &RunConfig,
    pool: &PoolManifest,
    store: &ArtifactStore,
    round_dir: &Path,
    opts: &PipelineOptions,
) -> Result<RoundRecord> {
    validate_history(history)?;
    let mut labelled: BTreeSet<String> = history
        .last()
        .map(|r| r.cumulative_labelled.iter().cloned().collect())
        .unwrap_or_default();
    labelled.extend(opts.labelled.iter().cloned());

    let remaining = pool
        .records()
        .iter()
        .filter(|r| !labelled.contains(&r.tile_id))
        .count();
    if config.strategy != Strategy::Unlimited && config.budget as usize > remaining {
        return Err(Error::PoolExhausted(format!(
            "{remaining} unlabelled tiles remain, budget {}",
            config.budget
        )));
    }

    let round_opts = PipelineOptions {
        feature_matrix: opts.feature_matrix.clone(),
        labelled: labelled.iter().cloned().collect(),
    };
    let selection = run_pipeline(config, pool, store, round_dir, &round_opts)?;
    labelled.extend(selection.tile_ids().map(str::to_string));
    Ok(RoundRecord {
        round_index: history.len() as u64,
        strategy: selection.strategy,
        budget: selection.budget,
        selected: selection.entries().to_vec(),
        cumulative_labelled: labelled.into_iter().collect(),
        eval: None,
    })
}
