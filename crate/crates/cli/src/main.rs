//! `alctl` — budgeted tile selection for segmentation labelling.
//!
//! Orchestrates the full loop: tile rasters into a pool, pre-score by mean
//! response, score candidates (MC-dropout variance or pooled features),
//! select under a budget, evaluate probability maps against ground truth,
//! and compare runs. Configuration comes from a TOML file; every key can
//! be overridden by a flag, and the artifact root falls back to
//! `ALCTL_ARTIFACT_ROOT`.
//!
//! Exit codes: 0 success, 2 validation error, 3 missing artifacts,
//! 4 budget/pool errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use alcore::config::PartialConfig;
use alcore::evaluator::{
    compare_reports, default_thresholds, pr_curve, read_report, render_comparison, write_pr_csv,
    write_report,
};
use alcore::manifest::{PoolManifest, PoolRecord, Strategy};
use alcore::pipeline::{
    read_rounds, run_pipeline, run_round, write_rounds, ArtifactStore, PipelineOptions,
    ARTIFACT_ROOT_ENV, ROLE_DROPOUT, ROLE_FEATURES, ROLE_GT, ROLE_PROBMAP,
};
use alcore::pooler::{pool_features, write_feature_matrix};
use alcore::scorer::{
    dropout_variance, mean_response, read_scores, write_scores, DropoutStack, ScoreRecord,
};
use alcore::tiler::{build_tile_grid, grids_to_manifest, RasterMeta, DEFAULT_TILE_SIZE};
use alcore::{ArrayContainer, Error, Result};

#[derive(Parser)]
#[command(
    name = "alctl",
    version,
    about = "Budgeted tile selection for labelling pipelines"
)]
struct Cli {
    /// TOML config file; flags override its keys.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Artifact root (overrides the config file and ALCTL_ARTIFACT_ROOT).
    #[arg(long, global = true, value_name = "DIR")]
    artifact_root: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

/// One flag per config key; unset flags defer to the config file, then to
/// the built-in defaults.
#[derive(Args, Default)]
struct Overrides {
    /// random | uncertainty | coreset | unlimited
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    preselect_fraction: Option<f64>,
    #[arg(long)]
    dropout_passes: Option<u32>,
    #[arg(long)]
    pool_grid: Option<u32>,
    #[arg(long)]
    tile_size: Option<u32>,
    #[arg(long)]
    outlier_budget: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    positive_ratio: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Expand raster extents (JSONL of image_id/height/width) into a pool manifest.
    Tile {
        #[arg(long, value_name = "JSONL")]
        rasters: PathBuf,
        #[arg(long, value_name = "JSONL")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Mean-response scores for every pool tile.
    Prescore {
        #[arg(long, value_name = "JSONL")]
        pool: PathBuf,
        #[arg(long, value_name = "JSONL")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// MC-dropout variance scores from per-tile prediction stacks.
    ScoreUncertainty {
        #[arg(long, value_name = "JSONL")]
        pool: PathBuf,
        /// Score file restricting which tiles are scored (default: whole pool).
        #[arg(long, value_name = "JSONL")]
        candidates: Option<PathBuf>,
        #[arg(long, value_name = "JSONL")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Pool per-tile feature maps into one vector matrix.
    PoolFeatures {
        #[arg(long, value_name = "JSONL")]
        pool: PathBuf,
        /// Score file restricting which tiles are pooled (default: whole pool).
        #[arg(long, value_name = "JSONL")]
        candidates: Option<PathBuf>,
        #[arg(long, value_name = "ALF")]
        matrix_out: PathBuf,
        #[arg(long, value_name = "JSONL")]
        rows_out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run one budgeted selection: prescore, pre-select, apply the strategy.
    Select {
        #[arg(long, value_name = "JSONL")]
        pool: PathBuf,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        /// Precomputed feature matrix (skips per-tile pooling for coreset).
        #[arg(long, value_name = "ALF", requires = "feature_rows")]
        feature_matrix: Option<PathBuf>,
        #[arg(long, value_name = "JSONL", requires = "feature_matrix")]
        feature_rows: Option<PathBuf>,
        /// File of already-labelled tile ids (one per line) seeding coreset.
        #[arg(long, value_name = "FILE")]
        labelled: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Sweep thresholds over probability maps vs ground truth.
    Evaluate {
        #[arg(long, value_name = "JSONL")]
        pool: PathBuf,
        #[arg(long, value_name = "JSON")]
        out: PathBuf,
        /// Also write the PR curve as CSV.
        #[arg(long, value_name = "CSV")]
        csv: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compare two evaluation reports at their operating points.
    Report {
        #[arg(long, value_name = "JSON")]
        baseline: PathBuf,
        #[arg(long, value_name = "JSON")]
        candidate: PathBuf,
        /// Also write both curves into one CSV.
        #[arg(long, value_name = "CSV")]
        csv: Option<PathBuf>,
    },
    /// Run the next selection round and append it to a history file.
    Round {
        #[arg(long, value_name = "JSONL")]
        pool: PathBuf,
        /// Round history; created if absent, extended otherwise.
        #[arg(long, value_name = "JSONL")]
        history: PathBuf,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        #[arg(long, value_name = "ALF", requires = "feature_rows")]
        feature_matrix: Option<PathBuf>,
        #[arg(long, value_name = "JSONL", requires = "feature_matrix")]
        feature_rows: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        labelled: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Validation(_)
        | Error::Format { .. }
        | Error::Manifest { .. }
        | Error::Geometry(_)
        | Error::Dimension(_) => 2,
        Error::MissingArtifacts { .. } => 3,
        Error::Budget(_) | Error::PoolExhausted(_) => 4,
        Error::Io { .. } => 1,
    }
}

fn parse_strategy(s: &str) -> Result<Strategy> {
    match s {
        "random" => Ok(Strategy::Random),
        "uncertainty" => Ok(Strategy::Uncertainty),
        "coreset" => Ok(Strategy::Coreset),
        "unlimited" => Ok(Strategy::Unlimited),
        other => Err(Error::Validation(format!(
            "unknown strategy '{other}' (expected random, uncertainty, coreset, or unlimited)"
        ))),
    }
}

/// Flag > config file > defaults, with the artifact root additionally
/// falling back to the environment.
struct Layered {
    merged: PartialConfig,
    artifact_root: Option<PathBuf>,
}

fn layer(config_path: Option<&Path>, root_flag: Option<PathBuf>, o: &Overrides) -> Result<Layered> {
    let file = match config_path {
        Some(p) => PartialConfig::from_toml_file(p)?,
        None => PartialConfig::default(),
    };
    let flags = PartialConfig {
        strategy: o.strategy.as_deref().map(parse_strategy).transpose()?,
        budget: o.budget,
        preselect_fraction: o.preselect_fraction,
        dropout_passes: o.dropout_passes,
        pool_grid: o.pool_grid,
        tile_size: o.tile_size,
        outlier_budget: o.outlier_budget,
        seed: o.seed,
        positive_ratio: o.positive_ratio,
        artifact_root: None,
    };
    let merged = flags.over(file);
    let artifact_root = root_flag
        .or_else(|| merged.artifact_root.clone())
        .or_else(|| std::env::var_os(ARTIFACT_ROOT_ENV).map(PathBuf::from));
    Ok(Layered {
        merged,
        artifact_root,
    })
}

impl Layered {
    fn store(&self) -> Result<ArtifactStore> {
        match &self.artifact_root {
            Some(root) => Ok(ArtifactStore::new(root)),
            None => Err(Error::Validation(format!(
                "no artifact root configured (pass --artifact-root, set artifact_root in the \
                 config file, or export {ARTIFACT_ROOT_ENV})"
            ))),
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config_path = cli.config.as_deref();
    match cli.command {
        Command::Tile {
            rasters,
            out,
            overrides,
        } => {
            let layered = layer(config_path, cli.artifact_root, &overrides)?;
            let tile_size = layered.merged.tile_size.unwrap_or(DEFAULT_TILE_SIZE);
            cmd_tile(&rasters, &out, tile_size)
        }
        Command::Prescore {
            pool,
            out,
            overrides,
        } => {
            let layered = layer(config_path, cli.artifact_root, &overrides)?;
            cmd_prescore(&pool, &out, &layered.store()?)
        }
        Command::ScoreUncertainty {
            pool,
            candidates,
            out,
            overrides,
        } => {
            let layered = layer(config_path, cli.artifact_root, &overrides)?;
            let passes = layered
                .merged
                .dropout_passes
                .unwrap_or(alcore::config::DEFAULT_DROPOUT_PASSES);
            cmd_score_uncertainty(
                &pool,
                candidates.as_deref(),
                &out,
                &layered.store()?,
                passes,
            )
        }
        Command::PoolFeatures {
            pool,
            candidates,
            matrix_out,
            rows_out,
            overrides,
        } => {
            let layered = layer(config_path, cli.artifact_root, &overrides)?;
            let grid = layered
                .merged
                .pool_grid
                .unwrap_or(alcore::pooler::DEFAULT_POOL_GRID);
            cmd_pool_features(
                &pool,
                candidates.as_deref(),
                &matrix_out,
                &rows_out,
                &layered.store()?,
                grid,
            )
        }
        Command::Select {
            pool,
            out_dir,
            feature_matrix,
            feature_rows,
            labelled,
            overrides,
        } => {
            let layered = layer(config_path, cli.artifact_root, &overrides)?;
            let config = layered.merged.clone().resolve()?;
            let opts = PipelineOptions {
                feature_matrix: feature_matrix.zip(feature_rows),
                labelled: read_labelled(labelled.as_deref())?,
            };
            let pool = PoolManifest::read(&pool)?;
            let selection = run_pipeline(&config, &pool, &layered.store()?, &out_dir, &opts)?;
            println!(
                "selected {} tile(s) with strategy {} -> {}",
                selection.entries().len(),
                selection.strategy,
                out_dir.join("selection.jsonl").display()
            );
            Ok(())
        }
        Command::Evaluate {
            pool,
            out,
            csv,
            overrides,
        } => {
            let layered = layer(config_path, cli.artifact_root, &overrides)?;
            cmd_evaluate(&pool, &out, csv.as_deref(), &layered.store()?)
        }
        Command::Report {
            baseline,
            candidate,
            csv,
        } => cmd_report(&baseline, &candidate, csv.as_deref()),
        Command::Round {
            pool,
            history,
            out_dir,
            feature_matrix,
            feature_rows,
            labelled,
            overrides,
        } => {
            let layered = layer(config_path, cli.artifact_root, &overrides)?;
            let config = layered.merged.clone().resolve()?;
            let opts = PipelineOptions {
                feature_matrix: feature_matrix.zip(feature_rows),
                labelled: read_labelled(labelled.as_deref())?,
            };
            cmd_round(&pool, &history, &out_dir, &config, &layered.store()?, &opts)
        }
    }
}

fn read_labelled(path: Option<&Path>) -> Result<Vec<String>> {
    let Some(path) = path else {
        return Ok(Vec::new());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn cmd_tile(rasters: &Path, out: &Path, tile_size: u32) -> Result<()> {
    let text = std::fs::read_to_string(rasters).map_err(|e| Error::Io {
        path: rasters.to_path_buf(),
        source: e,
    })?;
    let mut grids = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let meta: RasterMeta = serde_json::from_str(line).map_err(|e| Error::Manifest {
            path: rasters.to_path_buf(),
            line: idx + 1,
            reason: e.to_string(),
        })?;
        grids.push(build_tile_grid(&meta, tile_size)?);
    }
    let pool = grids_to_manifest(&grids)?;
    pool.write(out)?;
    println!(
        "tiled {} raster(s) into {} tile(s) -> {}",
        grids.len(),
        pool.len(),
        out.display()
    );
    Ok(())
}

/// Pool records to operate on: the candidate score file when given
/// (validated against the pool), else the whole pool.
fn target_records<'a>(
    pool: &'a PoolManifest,
    candidates: Option<&Path>,
) -> Result<Vec<&'a PoolRecord>> {
    match candidates {
        None => Ok(pool.records().iter().collect()),
        Some(path) => {
            let scores = read_scores(path)?;
            let mut records = Vec::with_capacity(scores.len());
            for s in &scores {
                let record = pool.get(&s.tile_id).ok_or_else(|| {
                    Error::Validation(format!(
                        "candidate tile '{}' is not in the pool manifest",
                        s.tile_id
                    ))
                })?;
                records.push(record);
            }
            records.sort_by(|a, b| a.tile_id.cmp(&b.tile_id));
            Ok(records)
        }
    }
}

fn cmd_prescore(pool: &Path, out: &Path, store: &ArtifactStore) -> Result<()> {
    let pool = PoolManifest::read(pool)?;
    let paths = store.require_all(pool.records(), ROLE_PROBMAP)?;
    let mut scores = Vec::with_capacity(paths.len());
    for (record, path) in pool.records().iter().zip(&paths) {
        let map = ArrayContainer::load(path)?;
        scores.push(ScoreRecord {
            tile_id: record.tile_id.clone(),
            score: mean_response(&map)?,
        });
    }
    write_scores(out, &scores)?;
    println!("scored {} tile(s) -> {}", scores.len(), out.display());
    Ok(())
}

fn cmd_score_uncertainty(
    pool: &Path,
    candidates: Option<&Path>,
    out: &Path,
    store: &ArtifactStore,
    expected_passes: u32,
) -> Result<()> {
    let pool = PoolManifest::read(pool)?;
    let records = target_records(&pool, candidates)?;
    let paths = store.require_all(records.iter().copied(), ROLE_DROPOUT)?;
    let mut scores = Vec::with_capacity(paths.len());
    for (record, path) in records.iter().zip(&paths) {
        let stack = DropoutStack::new(record.tile_id.clone(), ArrayContainer::load(path)?)?;
        if stack.passes() != expected_passes {
            return Err(Error::Validation(format!(
                "dropout stack for '{}' has {} passes, config expects {}",
                record.tile_id,
                stack.passes(),
                expected_passes
            )));
        }
        scores.push(ScoreRecord {
            tile_id: record.tile_id.clone(),
            score: dropout_variance(&stack),
        });
    }
    write_scores(out, &scores)?;
    println!("scored {} stack(s) -> {}", scores.len(), out.display());
    Ok(())
}

fn cmd_pool_features(
    pool: &Path,
    candidates: Option<&Path>,
    matrix_out: &Path,
    rows_out: &Path,
    store: &ArtifactStore,
    grid: u32,
) -> Result<()> {
    let pool = PoolManifest::read(pool)?;
    let records = target_records(&pool, candidates)?;
    let paths = store.require_all(records.iter().copied(), ROLE_FEATURES)?;
    let mut vectors = Vec::with_capacity(paths.len());
    for (record, path) in records.iter().zip(&paths) {
        let map = ArrayContainer::load(path)?;
        vectors.push(pool_features(&record.tile_id, &map, grid)?);
    }
    write_feature_matrix(&vectors, matrix_out, rows_out)?;
    println!(
        "pooled {} tile(s) into {} ({} rows -> {})",
        vectors.len(),
        matrix_out.display(),
        vectors.len(),
        rows_out.display()
    );
    Ok(())
}

fn cmd_evaluate(pool: &Path, out: &Path, csv: Option<&Path>, store: &ArtifactStore) -> Result<()> {
    let pool = PoolManifest::read(pool)?;
    let prob_paths = store.require_all(pool.records(), ROLE_PROBMAP)?;
    let gt_paths = store.require_all(pool.records(), ROLE_GT)?;
    let mut probs = BTreeMap::new();
    let mut gts = BTreeMap::new();
    for (record, (pp, gp)) in pool.records().iter().zip(prob_paths.iter().zip(&gt_paths)) {
        probs.insert(record.tile_id.clone(), ArrayContainer::load(pp)?);
        gts.insert(record.tile_id.clone(), ArrayContainer::load(gp)?);
    }
    let report = pr_curve(&probs, &gts, &default_thresholds())?;
    write_report(&report, out)?;
    if let Some(csv_path) = csv {
        write_pr_csv(&report, csv_path)?;
    }
    let op = &report.operating;
    println!(
        "evaluated {} tile(s): best F1 {:.4} at threshold {:.2} (precision {:.4}, recall {:.4}) -> {}",
        report.tile_ids.len(),
        op.f1,
        op.threshold,
        op.precision,
        op.recall,
        out.display()
    );
    Ok(())
}

fn cmd_report(baseline: &Path, candidate: &Path, csv: Option<&Path>) -> Result<()> {
    let baseline = read_report(baseline)?;
    let candidate = read_report(candidate)?;
    let comparison = compare_reports(&baseline, &candidate)?;
    print!("{}", render_comparison(&comparison));
    if let Some(csv_path) = csv {
        alcore::evaluator::write_comparison_csv(&baseline, &candidate, csv_path)?;
    }
    Ok(())
}

fn cmd_round(
    pool: &Path,
    history_path: &Path,
    out_dir: &Path,
    config: &alcore::RunConfig,
    store: &ArtifactStore,
    opts: &PipelineOptions,
) -> Result<()> {
    let pool = PoolManifest::read(pool)?;
    let history = if history_path.exists() {
        read_rounds(history_path)?
    } else {
        Vec::new()
    };
    let record = run_round(&history, config, &pool, store, out_dir, opts)?;
    println!(
        "round {}: selected {} tile(s), {} labelled so far -> {}",
        record.round_index,
        record.selected.len(),
        record.cumulative_labelled.len(),
        history_path.display()
    );
    let mut history = history;
    history.push(record);
    write_rounds(&history, history_path)?;
    Ok(())
}
