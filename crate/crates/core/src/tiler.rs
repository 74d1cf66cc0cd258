//! Fixed-size tile windows over large raster extents.
//!
//! Offsets along each axis step by the tile size; the final window is
//! clamped inward so it abuts the raster edge, overlapping its neighbour
//! instead of padding past the extent. Every pixel is covered.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{PoolManifest, PoolRecord};

pub const DEFAULT_TILE_SIZE: u32 = 512;

/// Extent of one source raster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RasterMeta {
    pub image_id: String,
    pub height: u32,
    pub width: u32,
}

/// One tile window. `x`/`y` are pixel offsets of the top-left corner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileRef {
    pub tile_id: String,
    pub image_id: String,
    pub x: u32,
    pub y: u32,
    pub size: u32,
}

/// All tile windows of one raster, in (y, x) scan order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileGrid {
    pub raster: RasterMeta,
    pub tile_size: u32,
    pub tiles: Vec<TileRef>,
}

fn axis_offsets(extent: u32, size: u32) -> Vec<u32> {
    let count = extent.div_ceil(size);
    (0..count).map(|i| (i * size).min(extent - size)).collect()
}

/// Splits `raster` into `tile_size` x `tile_size` windows.
///
/// Column count is ceil(width / tile_size) and likewise for rows; the last
/// offset on each axis is extent - tile_size.
pub fn build_tile_grid(raster: &RasterMeta, tile_size: u32) -> Result<TileGrid> {
    if tile_size == 0 {
        return Err(Error::Geometry("tile_size must be positive".to_string()));
    }
    if raster.height < tile_size || raster.width < tile_size {
        return Err(Error::Geometry(format!(
            "raster {:?} is {}x{}, smaller than tile size {tile_size}",
            raster.image_id, raster.height, raster.width
        )));
    }
    let ys = axis_offsets(raster.height, tile_size);
    let xs = axis_offsets(raster.width, tile_size);
    let mut tiles = Vec::with_capacity(ys.len() * xs.len());
    for &y in &ys {
        for &x in &xs {
            tiles.push(TileRef {
                tile_id: format!("{}_{}_{}", raster.image_id, y, x),
                image_id: raster.image_id.clone(),
                x,
                y,
                size: tile_size,
            });
        }
    }
    Ok(TileGrid {
        raster: raster.clone(),
        tile_size,
        tiles,
    })
}

/// Flattens tile grids into a canonical pool manifest for downstream
/// scoring. Artifact paths are left to the conventional per-role layout.
pub fn grids_to_manifest(grids: &[TileGrid]) -> Result<PoolManifest> {
    let records = grids
        .iter()
        .flat_map(|g| g.tiles.iter())
        .map(|t| PoolRecord {
            tile_id: t.tile_id.clone(),
            source_image_id: t.image_id.clone(),
            artifact_paths: BTreeMap::new(),
            positive: None,
        })
        .collect();
    PoolManifest::new(records)
}
