//! Model-agnostic active-learning selection engine for tiled raster
//! imagery.
//!
//! The library operates purely on file artifacts produced by an external
//! segmentation model: per-tile probability maps, dropout prediction
//! stacks, decoder feature maps, and ground-truth instance maps, all in the
//! ALF1 array format (see [`array`]). On top of those it implements
//!
//! * tiling of large rasters into fixed-size windows ([`tiler`]),
//! * mean-response pre-selection and MC-dropout uncertainty scoring
//!   ([`scorer`]),
//! * max-then-average feature pooling ([`pooler`]),
//! * greedy and robust k-center core-set selection ([`coreset`]),
//! * connected-component detection metrics with PR sweeps ([`evaluator`]),
//! * and the budgeted selection pipeline with multi-round bookkeeping
//!   ([`pipeline`]).
//!
//! Every selection is deterministic: ties break on ascending tile_id, and
//! randomized strategies draw from a pinned seeded generator ([`sampling`]).

pub mod array;
pub mod config;
pub mod coreset;
pub mod error;
pub mod evaluator;
pub mod manifest;
pub mod pipeline;
pub mod pooler;
pub mod sampling;
pub mod scorer;
pub mod tiler;

pub use array::{ArrayContainer, Dtype};
pub use config::{PartialConfig, RunConfig};
pub use coreset::{CoresetResult, Point, PointSet};
pub use error::{Error, Result};
pub use evaluator::{EvalReport, MatchCounts, PRPoint};
pub use manifest::{PoolManifest, PoolRecord, SelectionEntry, SelectionManifest, Strategy};
pub use pipeline::{ArtifactStore, PipelineOptions, RoundRecord, RunMeta, TrainingMix};
pub use pooler::FeatureVector;
pub use scorer::{DropoutStack, ScoreRecord};
pub use tiler::{RasterMeta, TileGrid, TileRef};
