//! Per-tile scoring: mean segmentation response for cheap pre-selection,
//! and the spread of stochastic dropout predictions as an uncertainty
//! estimate.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::array::ArrayContainer;
use crate::error::{Error, Result};
use crate::manifest::{self, SelectionManifest, Strategy};

/// A (tile, score) pair. Scores are finite and non-negative: mean response
/// lies in [0, 1], dropout variance in [0, 0.25].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub tile_id: String,
    pub score: f64,
}

pub fn write_scores(path: &Path, scores: &[ScoreRecord]) -> Result<()> {
    manifest::write_jsonl(path, scores)
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRecord>> {
    let scores: Vec<ScoreRecord> = manifest::read_jsonl(path)?;
    for s in &scores {
        if !s.score.is_finite() || s.score < 0.0 {
            return Err(Error::Validation(format!(
                "score for tile {:?} must be finite and non-negative, got {}",
                s.tile_id, s.score
            )));
        }
    }
    Ok(scores)
}

fn probability_values(map: &ArrayContainer) -> Result<&[f32]> {
    let values = map
        .as_f32()
        .ok_or_else(|| Error::Validation("probability map must have dtype F32".to_string()))?;
    for &v in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Validation(format!(
                "probability map value {v} outside [0, 1]"
            )));
        }
    }
    Ok(values)
}

/// Arithmetic mean of a single-channel probability map over all pixels.
pub fn mean_response(map: &ArrayContainer) -> Result<f64> {
    if map.channels() != 1 {
        return Err(Error::Validation(format!(
            "mean_response expects a single-channel map, got {} channels",
            map.channels()
        )));
    }
    let values = probability_values(map)?;
    let sum: f64 = values.iter().map(|&v| v as f64).sum();
    Ok(sum / values.len() as f64)
}

/// Keeps the top max(1, floor(fraction * n)) records by descending score,
/// ties broken by ascending tile id. Output order is (score desc, id asc).
pub fn preselect(scores: &[ScoreRecord], fraction: f64) -> Result<Vec<ScoreRecord>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Validation(format!(
            "preselect fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let ranked = rank_scores(scores)?;
    let keep = ((fraction * ranked.len() as f64).floor() as usize).max(1);
    Ok(ranked.into_iter().take(keep).collect())
}

fn rank_scores(scores: &[ScoreRecord]) -> Result<Vec<ScoreRecord>> {
    if scores.is_empty() {
        return Err(Error::Validation("no scores to rank".to_string()));
    }
    for s in scores {
        if !s.score.is_finite() || s.score < 0.0 {
            return Err(Error::Validation(format!(
                "score for tile {:?} must be finite and non-negative, got {}",
                s.tile_id, s.score
            )));
        }
    }
    let mut ids: Vec<&str> = scores.iter().map(|s| s.tile_id.as_str()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|p| p[0] == p[1]) {
        return Err(Error::Validation("duplicate tile_id in scores".to_string()));
    }
    let mut ranked = scores.to_vec();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.tile_id.cmp(&b.tile_id))
    });
    Ok(ranked)
}

/// K stochastic predictions for one tile, stored as channels.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutStack {
    tile_id: String,
    maps: ArrayContainer,
}

impl DropoutStack {
    /// Requires at least two F32 prediction channels with values in [0, 1].
    pub fn new(tile_id: impl Into<String>, maps: ArrayContainer) -> Result<Self> {
        if maps.channels() < 2 {
            return Err(Error::Validation(format!(
                "dropout stack needs at least 2 prediction channels, got {}",
                maps.channels()
            )));
        }
        probability_values(&maps)?;
        Ok(Self {
            tile_id: tile_id.into(),
            maps,
        })
    }

    pub fn tile_id(&self) -> &str {
        &self.tile_id
    }

    pub fn passes(&self) -> u32 {
        self.maps.channels()
    }
}

/// Mean over pixels of the per-pixel population variance across the K
/// prediction channels.
pub fn dropout_variance(stack: &DropoutStack) -> f64 {
    let values = stack.maps.as_f32().expect("validated at construction");
    let k = stack.maps.channels() as usize;
    let pixels = stack.maps.pixels();
    let mut total = 0.0f64;
    for p in 0..pixels {
        let chunk = &values[p * k..(p + 1) * k];
        let mut sum = 0.0f64;
        let mut sumsq = 0.0f64;
        for &v in chunk {
            let v = v as f64;
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / k as f64;
        // Population variance; rounding can push it a hair below zero.
        total += (sumsq / k as f64 - mean * mean).max(0.0);
    }
    total / pixels as f64
}

/// Top-`budget` records by descending score as a ranked selection manifest.
pub fn rank_by_uncertainty(scores: &[ScoreRecord], budget: usize) -> Result<SelectionManifest> {
    if budget == 0 {
        return Err(Error::Budget("budget must be positive".to_string()));
    }
    if budget > scores.len() {
        return Err(Error::Budget(format!(
            "budget {budget} exceeds {} scored tiles",
            scores.len()
        )));
    }
    let ranked = rank_scores(scores)?;
    SelectionManifest::from_ranked(
        Strategy::Uncertainty,
        budget as u64,
        ranked
            .into_iter()
            .take(budget)
            .map(|s| (s.tile_id, Some(s.score))),
    )
}
