//! Large-pool behaviour: manifest loading and score-level pre-selection
//! at the record counts a full-scene tiling produces.

use std::collections::BTreeMap;
use std::io::Write;

use alcore::manifest::{PoolManifest, PoolRecord};
use alcore::sampling::sample_indices;
use alcore::scorer::{preselect, ScoreRecord};

#[test]
fn four_hundred_thousand_record_manifest_loads_in_canonical_order() {
    let n = 400_000;
    let mut records: Vec<PoolRecord> = (0..n)
        .map(|i| PoolRecord {
            tile_id: format!("scene{:02}_{:06}", i % 37, i),
            source_image_id: format!("scene{:02}", i % 37),
            artifact_paths: BTreeMap::new(),
            positive: None,
        })
        .collect();

    // Write the file in a scrambled order; reading must restore the
    // canonical one.
    let perm = sample_indices(n, n, 99).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pool.jsonl");
    {
        let mut out = std::io::BufWriter::new(std::fs::File::create(&path).unwrap());
        for &i in &perm {
            serde_json::to_writer(&mut out, &records[i]).unwrap();
            out.write_all(b"\n").unwrap();
        }
    }

    let pool = PoolManifest::read(&path).unwrap();
    assert_eq!(pool.records().len(), n);
    for pair in pool.records().windows(2) {
        assert!(pair[0].tile_id < pair[1].tile_id);
    }
    records.sort_by(|a, b| a.tile_id.cmp(&b.tile_id));
    assert_eq!(pool.records(), &records[..]);
}

#[test]
fn preselect_keeps_the_top_twenty_thousand_of_four_hundred_thousand() {
    let n = 400_000usize;
    let scores: Vec<ScoreRecord> = (0..n)
        .map(|i| ScoreRecord {
            tile_id: format!("t{i:06}"),
            score: ((i * 7919) % 400_001) as f64 / 400_001.0,
        })
        .collect();
    let kept = preselect(&scores, 0.05).unwrap();
    assert_eq!(kept.len(), 20_000);
    for pair in kept.windows(2) {
        assert!(pair[0].score >= pair[1].score);
    }
    // Everything kept outranks everything dropped.
    let floor = kept.last().unwrap().score;
    let better = scores.iter().filter(|s| s.score > floor).count();
    assert!(better <= 20_000);
    let max = scores.iter().map(|s| s.score).fold(f64::MIN, f64::max);
    assert_eq!(kept[0].score, max);
}
