//! Run configuration: defaults, TOML file parsing, and layered resolution
//! (CLI flags over file values over built-in defaults).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::Strategy;
use crate::pooler::DEFAULT_POOL_GRID;
use crate::tiler::DEFAULT_TILE_SIZE;

pub const DEFAULT_PRESELECT_FRACTION: f64 = 0.05;
pub const DEFAULT_DROPOUT_PASSES: u32 = 10;
pub const DEFAULT_OUTLIER_BUDGET: u64 = 0;
pub const DEFAULT_POSITIVE_RATIO: f64 = 0.9;

/// Fully resolved run parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub strategy: Strategy,
    pub budget: u64,
    pub preselect_fraction: f64,
    pub dropout_passes: u32,
    pub pool_grid: u32,
    pub tile_size: u32,
    pub outlier_budget: u64,
    pub seed: Option<u64>,
    pub positive_ratio: f64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strategy != Strategy::Unlimited && self.budget == 0 {
            return Err(Error::Validation("budget must be positive".to_string()));
        }
        if !(self.preselect_fraction > 0.0 && self.preselect_fraction <= 1.0) {
            return Err(Error::Validation(format!(
                "preselect_fraction {} outside (0, 1]",
                self.preselect_fraction
            )));
        }
        if self.dropout_passes < 2 {
            return Err(Error::Validation(
                "dropout_passes must be at least 2".to_string(),
            ));
        }
        if self.pool_grid == 0 {
            return Err(Error::Validation("pool_grid must be positive".to_string()));
        }
        if self.tile_size == 0 {
            return Err(Error::Validation("tile_size must be positive".to_string()));
        }
        if !(self.positive_ratio > 0.0 && self.positive_ratio <= 1.0) {
            return Err(Error::Validation(format!(
                "positive_ratio {} outside (0, 1]",
                self.positive_ratio
            )));
        }
        if self.strategy == Strategy::Random && self.seed.is_none() {
            return Err(Error::Validation(
                "strategy 'random' requires a seed".to_string(),
            ));
        }
        Ok(())
    }
}

/// Config-file / flag shape: every field optional so layers can be merged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub strategy: Option<Strategy>,
    pub budget: Option<u64>,
    pub preselect_fraction: Option<f64>,
    pub dropout_passes: Option<u32>,
    pub pool_grid: Option<u32>,
    pub tile_size: Option<u32>,
    pub outlier_budget: Option<u64>,
    pub seed: Option<u64>,
    pub positive_ratio: Option<f64>,
    pub artifact_root: Option<PathBuf>,
}

impl PartialConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format(path, format!("invalid config: {e}")))
    }

    /// Values in `self` win over `lower`.
    pub fn over(self, lower: PartialConfig) -> PartialConfig {
        PartialConfig {
            strategy: self.strategy.or(lower.strategy),
            budget: self.budget.or(lower.budget),
            preselect_fraction: self.preselect_fraction.or(lower.preselect_fraction),
            dropout_passes: self.dropout_passes.or(lower.dropout_passes),
            pool_grid: self.pool_grid.or(lower.pool_grid),
            tile_size: self.tile_size.or(lower.tile_size),
            outlier_budget: self.outlier_budget.or(lower.outlier_budget),
            seed: self.seed.or(lower.seed),
            positive_ratio: self.positive_ratio.or(lower.positive_ratio),
            artifact_root: self.artifact_root.or(lower.artifact_root),
        }
    }

    /// Fills defaults and validates. `strategy` must be present; `budget`
    /// must be present for every strategy except unlimited.
    pub fn resolve(self) -> Result<RunConfig> {
        let strategy = self
            .strategy
            .ok_or_else(|| Error::Validation("no strategy specified".to_string()))?;
        let budget = match self.budget {
            Some(b) => b,
            None if strategy == Strategy::Unlimited => 0,
            None => {
                return Err(Error::Validation("no budget specified".to_string()));
            }
        };
        let config = RunConfig {
            strategy,
            budget,
            preselect_fraction: self
                .preselect_fraction
                .unwrap_or(DEFAULT_PRESELECT_FRACTION),
            dropout_passes: self.dropout_passes.unwrap_or(DEFAULT_DROPOUT_PASSES),
            pool_grid: self.pool_grid.unwrap_or(DEFAULT_POOL_GRID),
            tile_size: self.tile_size.unwrap_or(DEFAULT_TILE_SIZE),
            outlier_budget: self.outlier_budget.unwrap_or(DEFAULT_OUTLIER_BUDGET),
            seed: self.seed,
            positive_ratio: self.positive_ratio.unwrap_or(DEFAULT_POSITIVE_RATIO),
        };
        config.validate()?;
        Ok(config)
    }
}
