//! Max-then-average pooling of decoder feature maps into fixed-length
//! descriptor vectors.
//!
//! The spatial plane is partitioned into a G x G grid of cells with
//! boundaries floor(i*H/G) (and likewise for columns), the maximum is taken
//! within each cell, and the per-channel output is the mean of the G*G
//! maxima. With the default G = 8 a 128x128x128 map compresses to a
//! 128-vector.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::array::ArrayContainer;
use crate::error::{Error, Result};
use crate::manifest;

pub const DEFAULT_POOL_GRID: u32 = 8;

/// Fixed-length descriptor for one tile; length equals the channel count
/// of the source feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub tile_id: String,
    pub values: Vec<f64>,
}

/// Pools `map` (F32, H x W x C) down to one value per channel.
pub fn pool_features(tile_id: &str, map: &ArrayContainer, grid: u32) -> Result<FeatureVector> {
    if grid == 0 {
        return Err(Error::Geometry("pooling grid must be positive".to_string()));
    }
    let (h, w, c) = (map.height(), map.width(), map.channels());
    if h < grid || w < grid {
        return Err(Error::Geometry(format!(
            "feature map {h}x{w} smaller than pooling grid {grid}"
        )));
    }
    let values = map
        .as_f32()
        .ok_or_else(|| Error::Validation("feature map must have dtype F32".to_string()))?;
    for &v in values {
        if !v.is_finite() {
            return Err(Error::Validation(format!(
                "feature map contains non-finite value {v}"
            )));
        }
    }

    let g = grid as usize;
    let (h, w, c) = (h as usize, w as usize, c as usize);
    let row_bound = |i: usize| i * h / g;
    let col_bound = |j: usize| j * w / g;

    let mut out = vec![0.0f64; c];
    for ch in 0..c {
        let mut sum = 0.0f64;
        for gy in 0..g {
            for gx in 0..g {
                let mut cell_max = f32::NEG_INFINITY;
                for r in row_bound(gy)..row_bound(gy + 1) {
                    for col in col_bound(gx)..col_bound(gx + 1) {
                        let v = values[(r * w + col) * c + ch];
                        if v > cell_max {
                            cell_max = v;
                        }
                    }
                }
                sum += cell_max as f64;
            }
        }
        out[ch] = sum / (g * g) as f64;
    }
    Ok(FeatureVector {
        tile_id: tile_id.to_string(),
        values: out,
    })
}

/// Sidecar record mapping a feature-matrix row to its tile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowRecord {
    pub row: u64,
    pub tile_id: String,
}

/// Writes pooled vectors as an N x C x 1 F32 array plus a row->tile sidecar.
/// Rows follow the order of `vectors`; callers pass canonical tile order.
pub fn write_feature_matrix(
    vectors: &[FeatureVector],
    matrix_path: &Path,
    rows_path: &Path,
) -> Result<()> {
    if vectors.is_empty() {
        return Err(Error::Validation("no feature vectors to write".to_string()));
    }
    let dim = vectors[0].values.len();
    let mut flat = Vec::with_capacity(vectors.len() * dim);
    let mut rows = Vec::with_capacity(vectors.len());
    for (i, v) in vectors.iter().enumerate() {
        if v.values.len() != dim {
            return Err(Error::Dimension(format!(
                "feature vector for {:?} has length {}, expected {dim}",
                v.tile_id,
                v.values.len()
            )));
        }
        flat.extend(v.values.iter().map(|&x| x as f32));
        rows.push(RowRecord {
            row: i as u64,
            tile_id: v.tile_id.clone(),
        });
    }
    let matrix = ArrayContainer::from_f32(vectors.len() as u32, dim as u32, 1, flat)?;
    matrix.store(matrix_path)?;
    manifest::write_jsonl(rows_path, &rows)
}

/// Reads a feature matrix and its sidecar back into per-tile vectors.
pub fn read_feature_matrix(matrix_path: &Path, rows_path: &Path) -> Result<Vec<FeatureVector>> {
    let matrix = ArrayContainer::load(matrix_path)?;
    if matrix.channels() != 1 {
        return Err(Error::Format {
            path: matrix_path.to_path_buf(),
            reason: format!(
                "feature matrix must be N x C x 1, got {} channels",
                matrix.channels()
            ),
        });
    }
    let values = matrix.as_f32().ok_or_else(|| Error::Format {
        path: matrix_path.to_path_buf(),
        reason: "feature matrix must have dtype F32".to_string(),
    })?;
    let rows: Vec<RowRecord> = manifest::read_jsonl(rows_path)?;
    let n = matrix.height() as usize;
    let dim = matrix.width() as usize;
    if rows.len() != n {
        return Err(Error::Validation(format!(
            "row sidecar lists {} tiles but matrix has {n} rows",
            rows.len()
        )));
    }
    let mut out = Vec::with_capacity(n);
    for rec in &rows {
        let row = rec.row as usize;
        if row >= n {
            return Err(Error::Validation(format!(
                "row index {row} out of range for {n}-row matrix"
            )));
        }
        out.push(FeatureVector {
            tile_id: rec.tile_id.clone(),
            values: values[row * dim..(row + 1) * dim]
                .iter()
                .map(|&v| v as f64)
                .collect(),
        });
    }
    Ok(out)
}
