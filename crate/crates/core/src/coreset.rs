//! Core-set selection in feature space: greedy k-center (farthest-first)
//! and a robust variant that may ignore a fixed number of outliers.
//!
//! The greedy solver is the classical 2-approximation. The robust solver
//! binary-searches a candidate radius set (distances realized by the greedy
//! solution, plus all pairwise distances on instances of at most
//! [`PAIRWISE_LIMIT`] points) and checks feasibility with a greedy covering
//! pass that may discard up to `outlier_budget` points. Whenever the plain
//! greedy solution (with its farthest `outlier_budget` points dropped) has a
//! smaller radius, that solution is returned instead; with
//! `outlier_budget = 0` this guarantees the robust result never loses to
//! plain greedy.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// Instances above this size skip the all-pairs candidate radii.
pub const PAIRWISE_LIMIT: usize = 2_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub tile_id: String,
    pub vector: Vec<f64>,
}

/// Candidate pool in feature space; `labelled` marks indices that already
/// act as centers and are never re-selected.
#[derive(Debug, Clone)]
pub struct PointSet {
    points: Vec<Point>,
    labelled: BTreeSet<usize>,
}

impl PointSet {
    pub fn new(points: Vec<Point>, labelled: impl IntoIterator<Item = usize>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Validation("point set is empty".to_string()));
        }
        let dim = points[0].vector.len();
        for p in &points {
            if p.vector.len() != dim {
                return Err(Error::Dimension(format!(
                    "vector for {:?} has length {}, expected {dim}",
                    p.tile_id,
                    p.vector.len()
                )));
            }
            if p.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "vector for {:?} contains a non-finite value",
                    p.tile_id
                )));
            }
        }
        let mut ids: Vec<&str> = points.iter().map(|p| p.tile_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(pair) = ids.windows(2).find(|p| p[0] == p[1]) {
            return Err(Error::Validation(format!(
                "duplicate tile_id {:?} in point set",
                pair[0]
            )));
        }
        let labelled: BTreeSet<usize> = labelled.into_iter().collect();
        if let Some(&ix) = labelled.iter().next_back() {
            if ix >= points.len() {
                return Err(Error::Validation(format!(
                    "labelled index {ix} out of range for {} points",
                    points.len()
                )));
            }
        }
        Ok(Self { points, labelled })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn labelled(&self) -> &BTreeSet<usize> {
        &self.labelled
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn unlabelled_count(&self) -> usize {
        self.points.len() - self.labelled.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoresetResult {
    /// Selected tile ids in selection order; disjoint from the labelled set.
    pub selected: Vec<String>,
    /// Distance to the center set at each point's selection time (distance
    /// to the dataset centroid for an unseeded first center).
    pub scores: Vec<f64>,
    /// Max over non-outlier points of distance to the nearest center.
    pub covering_radius: f64,
    /// Points ignored by the robust solver; empty in plain greedy mode.
    pub outliers: Vec<String>,
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "vector lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(dist(a, b))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Farthest-first traversal. Seeds (labelled points) act as initial centers;
/// without seeds the first center is the point closest to the dataset
/// centroid. All ties break by ascending tile_id.
pub fn kcenter_greedy(points: &PointSet, k: usize) -> Result<CoresetResult> {
    let (result, _) = greedy_with_mindist(points, k)?;
    Ok(result)
}

/// Max over all points of the distance to the nearest listed center.
pub fn kcenter_cost(points: &PointSet, centers: &[String]) -> Result<f64> {
    if centers.is_empty() {
        return Err(Error::Validation("center list is empty".to_string()));
    }
    let by_id: BTreeMap<&str, usize> = points
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.tile_id.as_str(), i))
        .collect();
    let mut center_ix = Vec::with_capacity(centers.len());
    for id in centers {
        match by_id.get(id.as_str()) {
            Some(&i) => center_ix.push(i),
            None => return Err(Error::Validation(format!("unknown center tile_id {id:?}"))),
        }
    }
    let mut worst = 0.0f64;
    for p in &points.points {
        let mut best = f64::INFINITY;
        for &c in &center_ix {
            let d = dist(&p.vector, &points.points[c].vector);
            if d < best {
                best = d;
            }
        }
        if best > worst {
            worst = best;
        }
    }
    Ok(worst)
}

fn greedy_with_mindist(ps: &PointSet, k: usize) -> Result<(CoresetResult, Vec<f64>)> {
    if k == 0 {
        return Err(Error::Validation("k must be positive".to_string()));
    }
    let unlabelled = ps.unlabelled_count();
    if k > unlabelled {
        return Err(Error::Budget(format!(
            "k = {k} exceeds the {unlabelled} unlabelled points"
        )));
    }
    let pts = &ps.points;
    let n = pts.len();
    let mut mindist = vec![f64::INFINITY; n];
    let mut is_center = vec![false; n];
    for &s in &ps.labelled {
        is_center[s] = true;
    }
    for &s in &ps.labelled {
        for i in 0..n {
            let d = dist(&pts[i].vector, &pts[s].vector);
            if d < mindist[i] {
                mindist[i] = d;
            }
        }
    }

    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut scores: Vec<f64> = Vec::with_capacity(k);

    if ps.labelled.is_empty() {
        let dim = pts[0].vector.len();
        let mut centroid = vec![0.0f64; dim];
        for p in pts {
            for (c, v) in centroid.iter_mut().zip(&p.vector) {
                *c += v;
            }
        }
        for c in &mut centroid {
            *c /= n as f64;
        }
        let mut best = 0usize;
        let mut best_d = dist(&pts[0].vector, &centroid);
        for (i, p) in pts.iter().enumerate().skip(1) {
            let d = dist(&p.vector, &centroid);
            if d < best_d || (d == best_d && p.tile_id < pts[best].tile_id) {
                best = i;
                best_d = d;
            }
        }
        is_center[best] = true;
        selected.push(best);
        scores.push(best_d);
        for i in 0..n {
            let d = dist(&pts[i].vector, &pts[best].vector);
            if d < mindist[i] {
                mindist[i] = d;
            }
        }
    }

    while selected.len() < k {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if is_center[i] {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => {
                    mindist[i] > mindist[b]
                        || (mindist[i] == mindist[b] && pts[i].tile_id < pts[b].tile_id)
                }
            };
            if better {
                best = Some(i);
            }
        }
        let ix = best.expect("k <= unlabelled count leaves a candidate");
        is_center[ix] = true;
        selected.push(ix);
        scores.push(mindist[ix]);
        for i in 0..n {
            let d = dist(&pts[i].vector, &pts[ix].vector);
            if d < mindist[i] {
                mindist[i] = d;
            }
        }
    }

    let covering_radius = mindist.iter().copied().fold(0.0f64, f64::max);
    let result = CoresetResult {
        selected: selected.iter().map(|&i| pts[i].tile_id.clone()).collect(),
        scores,
        covering_radius,
        outliers: Vec::new(),
    };
    Ok((result, mindist))
}

struct Cover {
    centers: Vec<usize>,
    uncovered: Vec<usize>,
}

/// Greedy covering feasibility check at radius `r`: up to k picks, each
/// maximizing newly covered points (ties by ascending tile_id); feasible if
/// the picks leave at most `outlier_budget` points uncovered.
fn try_cover(ps: &PointSet, k: usize, outlier_budget: usize, r: f64) -> Option<Cover> {
    let pts = &ps.points;
    let n = pts.len();
    let mut covered = vec![false; n];
    let mut picked = vec![false; n];
    for &s in &ps.labelled {
        picked[s] = true;
        for i in 0..n {
            if dist(&pts[i].vector, &pts[s].vector) <= r {
                covered[i] = true;
            }
        }
    }
    let mut centers = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(usize, usize)> = None; // (count, index)
        for i in 0..n {
            if picked[i] || ps.labelled.contains(&i) {
                continue;
            }
            let count = (0..n)
                .filter(|&j| !covered[j] && dist(&pts[i].vector, &pts[j].vector) <= r)
                .count();
            let better = match best {
                None => true,
                Some((bc, bi)) => count > bc || (count == bc && pts[i].tile_id < pts[bi].tile_id),
            };
            if better {
                best = Some((count, i));
            }
        }
        match best {
            Some((0, _)) | None => break, // everything coverable is covered
            Some((_, ix)) => {
                picked[ix] = true;
                centers.push(ix);
                for j in 0..n {
                    if dist(&pts[ix].vector, &pts[j].vector) <= r {
                        covered[j] = true;
                    }
                }
            }
        }
    }
    let uncovered: Vec<usize> = (0..n).filter(|&i| !covered[i]).collect();
    if uncovered.len() <= outlier_budget {
        Some(Cover { centers, uncovered })
    } else {
        None
    }
}

/// Recomputes each pick's distance to the center set in effect when it was
/// chosen (seeds plus earlier picks; centroid distance for an unseeded
/// first pick).
fn selection_scores(ps: &PointSet, selected: &[usize]) -> Vec<f64> {
    let pts = &ps.points;
    let n = pts.len();
    let mut scores = Vec::with_capacity(selected.len());
    let mut centers: Vec<usize> = ps.labelled.iter().copied().collect();
    for (step, &ix) in selected.iter().enumerate() {
        if step == 0 && centers.is_empty() {
            let dim = pts[0].vector.len();
            let mut centroid = vec![0.0f64; dim];
            for p in pts {
                for (c, v) in centroid.iter_mut().zip(&p.vector) {
                    *c += v;
                }
            }
            for c in &mut centroid {
                *c /= n as f64;
            }
            scores.push(dist(&pts[ix].vector, &centroid));
        } else {
            let d = centers
                .iter()
                .map(|&c| dist(&pts[ix].vector, &pts[c].vector))
                .fold(f64::INFINITY, f64::min);
            scores.push(d);
        }
        centers.push(ix);
    }
    scores
}

fn realized_radius(ps: &PointSet, centers: &[usize], outliers: &BTreeSet<usize>) -> f64 {
    let pts = &ps.points;
    let mut all_centers: Vec<usize> = ps.labelled.iter().copied().collect();
    all_centers.extend_from_slice(centers);
    let mut worst = 0.0f64;
    for (i, p) in pts.iter().enumerate() {
        if outliers.contains(&i) {
            continue;
        }
        let d = all_centers
            .iter()
            .map(|&c| dist(&p.vector, &pts[c].vector))
            .fold(f64::INFINITY, f64::min);
        if d > worst {
            worst = d;
        }
    }
    worst
}

/// k-center tolerating up to `outlier_budget` uncovered points.
pub fn robust_kcenter(points: &PointSet, k: usize, outlier_budget: usize) -> Result<CoresetResult> {
    if k == 0 {
        return Err(Error::Validation("k must be positive".to_string()));
    }
    let unlabelled = points.unlabelled_count();
    if k + outlier_budget > unlabelled {
        return Err(Error::Validation(format!(
            "k + outlier_budget = {} exceeds the {unlabelled} unlabelled points",
            k + outlier_budget
        )));
    }
    let (greedy, greedy_mindist) = greedy_with_mindist(points, k)?;
    let pts = points.points();
    let n = pts.len();

    let mut radii: Vec<f64> = vec![0.0];
    radii.extend(greedy_mindist.iter().copied());
    if n <= PAIRWISE_LIMIT {
        for i in 0..n {
            for j in (i + 1)..n {
                radii.push(dist(&pts[i].vector, &pts[j].vector));
            }
        }
    }
    radii.sort_by(f64::total_cmp);
    radii.dedup();

    let robust = if try_cover(points, k, outlier_budget, *radii.last().unwrap()).is_some() {
        let mut lo = 0usize;
        let mut hi = radii.len() - 1;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if try_cover(points, k, outlier_budget, radii[mid]).is_some() {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        try_cover(points, k, outlier_budget, radii[lo])
    } else {
        None
    };

    let robust_result = robust.map(|cover| {
        let mut centers = cover.centers;
        let outlier_set: BTreeSet<usize> = cover.uncovered.iter().copied().collect();
        pad_farthest_first(points, &mut centers, k);
        let scores = selection_scores(points, &centers);
        let covering_radius = realized_radius(points, &centers, &outlier_set);
        let mut outliers: Vec<String> = outlier_set
            .iter()
            .map(|&i| pts[i].tile_id.clone())
            .collect();
        outliers.sort();
        CoresetResult {
            selected: centers.iter().map(|&i| pts[i].tile_id.clone()).collect(),
            scores,
            covering_radius,
            outliers,
        }
    });

    // Plain greedy with its farthest outlier_budget points dropped; the
    // better of the two radii wins, which also pins the outlier_budget = 0
    // postcondition (never worse than plain greedy).
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        greedy_mindist[b]
            .total_cmp(&greedy_mindist[a])
            .then_with(|| pts[a].tile_id.cmp(&pts[b].tile_id))
    });
    let dropped: BTreeSet<usize> = order.into_iter().take(outlier_budget).collect();
    let fallback_radius = greedy_mindist
        .iter()
        .enumerate()
        .filter(|(i, _)| !dropped.contains(i))
        .map(|(_, &d)| d)
        .fold(0.0f64, f64::max);

    match robust_result {
        Some(r) if r.covering_radius <= fallback_radius => Ok(r),
        _ => {
            let mut outliers: Vec<String> =
                dropped.iter().map(|&i| pts[i].tile_id.clone()).collect();
            outliers.sort();
            Ok(CoresetResult {
                selected: greedy.selected,
                scores: greedy.scores,
                covering_radius: fallback_radius,
                outliers,
            })
        }
    }
}

/// Extends `centers` to k picks by farthest-first among unpicked,
/// unlabelled points (used when the covering pass needs fewer centers).
fn pad_farthest_first(ps: &PointSet, centers: &mut Vec<usize>, k: usize) {
    let pts = ps.points();
    let n = pts.len();
    let mut is_center = vec![false; n];
    for &s in ps.labelled() {
        is_center[s] = true;
    }
    for &c in centers.iter() {
        is_center[c] = true;
    }
    let mut mindist = vec![f64::INFINITY; n];
    for i in 0..n {
        for &c in ps.labelled().iter().chain(centers.iter()) {
            let d = dist(&pts[i].vector, &pts[c].vector);
            if d < mindist[i] {
                mindist[i] = d;
            }
        }
    }
    while centers.len() < k {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if is_center[i] {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => {
                    mindist[i] > mindist[b]
                        || (mindist[i] == mindist[b] && pts[i].tile_id < pts[b].tile_id)
                }
            };
            if better {
                best = Some(i);
            }
        }
        let ix = best.expect("k + outlier_budget <= unlabelled leaves candidates");
        is_center[ix] = true;
        centers.push(ix);
        for i in 0..n {
            let d = dist(&pts[i].vector, &pts[ix].vector);
            if d < mindist[i] {
                mindist[i] = d;
            }
        }
    }
}
