//! Detection metrics over probability maps and ground-truth instance maps:
//! threshold binarization, 8-connected component extraction, instance-level
//! matching, and PR-curve sweeps with a best-F1 operating point.
//!
//! Matching is instance-level, not pixel-level: a ground-truth instance
//! counts as detected when at least one of its pixels is predicted positive,
//! and a predicted component that overlaps no instance at all is a false
//! positive.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::array::{ArrayContainer, Dtype};
use crate::error::{Error, Result};

/// Binary mask over an H x W plane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub height: u32,
    pub width: u32,
    pub bits: Vec<bool>,
}

/// Prediction components labelled 1..count in first-encounter row-major
/// order; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub height: u32,
    pub width: u32,
    pub labels: Vec<u32>,
    pub count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: u64,
    pub r#fn: u64,
    pub fp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PRPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: MatchCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Sorted tile ids the report was computed over; comparisons require
    /// identical sets.
    pub tile_ids: Vec<String>,
    pub curve: Vec<PRPoint>,
    pub operating: PRPoint,
}

/// The default sweep: 0.01, 0.02, ..., 0.99.
pub fn default_thresholds() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

fn probability_map(map: &ArrayContainer) -> Result<&[f32]> {
    if map.channels() != 1 {
        return Err(Error::Validation(format!(
            "probability map must have 1 channel, got {}",
            map.channels()
        )));
    }
    let values = map
        .as_f32()
        .ok_or_else(|| Error::Validation("probability map must have dtype F32".to_string()))?;
    for &v in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Validation(format!(
                "probability value {v} outside [0, 1]"
            )));
        }
    }
    Ok(values)
}

/// Pixel positive iff value >= threshold; threshold must lie strictly
/// inside (0, 1).
pub fn binarize(map: &ArrayContainer, threshold: f64) -> Result<Mask> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Validation(format!(
            "threshold {threshold} outside (0, 1)"
        )));
    }
    let values = probability_map(map)?;
    Ok(Mask {
        height: map.height(),
        width: map.width(),
        bits: values.iter().map(|&v| v as f64 >= threshold).collect(),
    })
}

/// 8-connected component labelling via union-find over pixel indices.
pub fn connected_components(mask: &Mask) -> LabelMap {
    let h = mask.height as usize;
    let w = mask.width as usize;
    let mut parent: Vec<u32> = (0..(h * w) as u32).collect();

    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    fn union(parent: &mut [u32], a: u32, b: u32) {
        let ra = find(parent, a);
        let rb = find(parent, b);
        if ra != rb {
            parent[rb as usize] = ra;
        }
    }

    for r in 0..h {
        for c in 0..w {
            let ix = r * w + c;
            if !mask.bits[ix] {
                continue;
            }
            // Neighbours already visited in row-major order.
            if c > 0 && mask.bits[ix - 1] {
                union(&mut parent, ix as u32, (ix - 1) as u32);
            }
            if r > 0 {
                let up = ix - w;
                if mask.bits[up] {
                    union(&mut parent, ix as u32, up as u32);
                }
                if c > 0 && mask.bits[up - 1] {
                    union(&mut parent, ix as u32, (up - 1) as u32);
                }
                if c + 1 < w && mask.bits[up + 1] {
                    union(&mut parent, ix as u32, (up + 1) as u32);
                }
            }
        }
    }

    let mut labels = vec![0u32; h * w];
    let mut relabel: BTreeMap<u32, u32> = BTreeMap::new();
    let mut next = 0u32;
    for (ix, label) in labels.iter_mut().enumerate() {
        if !mask.bits[ix] {
            continue;
        }
        let root = find(&mut parent, ix as u32);
        *label = *relabel.entry(root).or_insert_with(|| {
            next += 1;
            next
        });
    }
    LabelMap {
        height: mask.height,
        width: mask.width,
        labels,
        count: next,
    }
}

/// Instance-level matching: a gt instance is a TP when any of its pixels is
/// predicted positive; a predicted component overlapping no instance is an
/// FP. One component may validate several instances; an instance overlapped
/// by several components still counts once.
pub fn match_detections(pred: &LabelMap, gt: &ArrayContainer) -> Result<MatchCounts> {
    if gt.dtype() != Dtype::U32 || gt.channels() != 1 {
        return Err(Error::Validation(
            "instance map must be U32 with 1 channel".to_string(),
        ));
    }
    if gt.height() != pred.height || gt.width() != pred.width {
        return Err(Error::Validation(format!(
            "prediction {}x{} and ground truth {}x{} differ in size",
            pred.height,
            pred.width,
            gt.height(),
            gt.width()
        )));
    }
    let gt_values = gt.as_u32().expect("dtype checked above");
    let mut instance_hit: BTreeMap<u32, bool> = BTreeMap::new();
    let mut component_hit = vec![false; pred.count as usize + 1];
    for (ix, &g) in gt_values.iter().enumerate() {
        let p = pred.labels[ix];
        if g > 0 {
            let hit = instance_hit.entry(g).or_insert(false);
            if p > 0 {
                *hit = true;
                component_hit[p as usize] = true;
            }
        }
    }
    let tp = instance_hit.values().filter(|&&h| h).count() as u64;
    let missed = instance_hit.len() as u64 - tp;
    let fp = (1..=pred.count as usize)
        .filter(|&c| !component_hit[c])
        .count() as u64;
    Ok(MatchCounts {
        tp,
        r#fn: missed,
        fp,
    })
}

/// Precision/recall default to 1.0 on an empty denominator (correct empty
/// scene); F1 is 0.0 when precision + recall = 0.
pub fn precision_recall_f1(counts: MatchCounts) -> (f64, f64, f64) {
    let precision = if counts.tp + counts.fp == 0 {
        1.0
    } else {
        counts.tp as f64 / (counts.tp + counts.fp) as f64
    };
    let recall = if counts.tp + counts.r#fn == 0 {
        1.0
    } else {
        counts.tp as f64 / (counts.tp + counts.r#fn) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Sweeps thresholds over per-tile probability/instance map pairs keyed by
/// tile_id, aggregating counts across tiles at each threshold. The
/// operating point is the max-F1 curve point, ties to the lower threshold.
pub fn pr_curve(
    probs: &BTreeMap<String, ArrayContainer>,
    gts: &BTreeMap<String, ArrayContainer>,
    thresholds: &[f64],
) -> Result<EvalReport> {
    if probs.is_empty() {
        return Err(Error::Validation("no tiles to evaluate".to_string()));
    }
    let prob_ids: Vec<&String> = probs.keys().collect();
    let gt_ids: Vec<&String> = gts.keys().collect();
    if prob_ids != gt_ids {
        let missing: Vec<&str> = probs
            .keys()
            .filter(|k| !gts.contains_key(*k))
            .chain(gts.keys().filter(|k| !probs.contains_key(*k)))
            .map(|s| s.as_str())
            .collect();
        return Err(Error::Validation(format!(
            "prediction and ground-truth tile sets differ: {missing:?}"
        )));
    }
    if thresholds.is_empty() {
        return Err(Error::Validation("threshold list is empty".to_string()));
    }
    if thresholds.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::Validation(
            "thresholds must be strictly ascending".to_string(),
        ));
    }

    let mut curve = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let mut total = MatchCounts {
            tp: 0,
            r#fn: 0,
            fp: 0,
        };
        for (tile_id, prob) in probs {
            let mask = binarize(prob, t)?;
            let components = connected_components(&mask);
            let counts = match_detections(&components, &gts[tile_id])?;
            total.tp += counts.tp;
            total.r#fn += counts.r#fn;
            total.fp += counts.fp;
        }
        let (precision, recall, f1) = precision_recall_f1(total);
        curve.push(PRPoint {
            threshold: t,
            precision,
            recall,
            f1,
            counts: total,
        });
    }
    let operating = *curve
        .iter()
        .max_by(|a, b| {
            a.f1.total_cmp(&b.f1)
                .then(b.threshold.total_cmp(&a.threshold))
        })
        .expect("curve non-empty");
    Ok(EvalReport {
        tile_ids: probs.keys().cloned().collect(),
        curve,
        operating,
    })
}

pub fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, report)
        .map_err(|e| Error::format(path, format!("cannot serialize report: {e}")))?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let report: EvalReport = serde_json::from_str(&data)
        .map_err(|e| Error::format(path, format!("cannot parse report: {e}")))?;
    if report.curve.is_empty() {
        return Err(Error::format(path, "report curve is empty".to_string()));
    }
    Ok(report)
}

pub fn write_pr_csv(report: &EvalReport, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "threshold,precision,recall,f1,tp,fp,fn").map_err(|e| Error::io(path, e))?;
    for p in &report.curve {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            p.threshold, p.precision, p.recall, p.f1, p.counts.tp, p.counts.fp, p.counts.r#fn
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Side-by-side deltas of two reports at their own operating thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportComparison {
    pub baseline: PRPoint,
    pub candidate: PRPoint,
    pub delta_precision: f64,
    pub delta_recall: f64,
    pub delta_f1: f64,
}

pub fn compare_reports(baseline: &EvalReport, candidate: &EvalReport) -> Result<ReportComparison> {
    if baseline.tile_ids != candidate.tile_ids {
        return Err(Error::Validation(
            "reports cover different tile sets".to_string(),
        ));
    }
    Ok(ReportComparison {
        baseline: baseline.operating,
        candidate: candidate.operating,
        delta_precision: candidate.operating.precision - baseline.operating.precision,
        delta_recall: candidate.operating.recall - baseline.operating.recall,
        delta_f1: candidate.operating.f1 - baseline.operating.f1,
    })
}

/// Formats a metric delta as a signed percentage-point gain, e.g. "+8.0%".
pub fn format_gain(delta: f64) -> String {
    format!("{:+.1}%", delta * 100.0)
}

pub fn render_comparison(cmp: &ReportComparison) -> String {
    let mut out = String::new();
    out.push_str("metric     baseline  candidate  gain\n");
    for (name, a, b, d) in [
        (
            "precision",
            cmp.baseline.precision,
            cmp.candidate.precision,
            cmp.delta_precision,
        ),
        (
            "recall   ",
            cmp.baseline.recall,
            cmp.candidate.recall,
            cmp.delta_recall,
        ),
        ("f1       ", cmp.baseline.f1, cmp.candidate.f1, cmp.delta_f1),
    ] {
        out.push_str(&format!("{name}  {a:>8.4}  {b:>9.4}  {}\n", format_gain(d)));
    }
    out.push_str(&format!(
        "operating thresholds: baseline {}, candidate {}\n",
        cmp.baseline.threshold, cmp.candidate.threshold
    ));
    out
}

/// Writes both curves into one CSV tagged by a leading `report` column.
pub fn write_comparison_csv(
    baseline: &EvalReport,
    candidate: &EvalReport,
    path: &Path,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "report,threshold,precision,recall,f1,tp,fp,fn").map_err(|e| Error::io(path, e))?;
    for (tag, report) in [("baseline", baseline), ("candidate", candidate)] {
        for p in &report.curve {
            writeln!(
                w,
                "{tag},{},{},{},{},{},{},{}",
                p.threshold, p.precision, p.recall, p.f1, p.counts.tp, p.counts.fp, p.counts.r#fn
            )
            .map_err(|e| Error::io(path, e))?;
        }
    }
    Ok(())
}
