//! Shared generators for the selection-engine benchmarks.

use alcore::coreset::{Point, PointSet};
use alcore::evaluator::Mask;
use alcore::sampling::{seeded_rng, uniform_index, ChaCha8Rng};
use alcore::ArrayContainer;

pub fn unit_f32(rng: &mut ChaCha8Rng) -> f32 {
    uniform_index(rng, 257) as f32 / 256.0
}

/// `n` points in `dims` dimensions, loosely clustered so farthest-first
/// has real structure to chew on.
pub fn clustered_points(n: usize, dims: usize, clusters: usize, seed: u64) -> PointSet {
    let mut rng = seeded_rng(seed);
    let points = (0..n)
        .map(|i| Point {
            tile_id: format!("t{i:06}"),
            vector: (0..dims)
                .map(|_| (i % clusters) as f64 * 10.0 + uniform_index(&mut rng, 513) as f64 / 256.0)
                .collect(),
        })
        .collect();
    PointSet::new(points, []).unwrap()
}

pub fn random_map(height: u32, width: u32, channels: u32, seed: u64) -> ArrayContainer {
    let mut rng = seeded_rng(seed);
    let values = (0..(height * width * channels) as usize)
        .map(|_| unit_f32(&mut rng))
        .collect();
    ArrayContainer::from_f32(height, width, channels, values).unwrap()
}

pub fn random_mask(height: u32, width: u32, fill_quarters: u64, seed: u64) -> Mask {
    let mut rng = seeded_rng(seed);
    let bits = (0..(height * width) as usize)
        .map(|_| uniform_index(&mut rng, 4) < fill_quarters)
        .collect();
    Mask {
        height,
        width,
        bits,
    }
}
