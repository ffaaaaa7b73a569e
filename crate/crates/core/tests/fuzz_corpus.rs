//! Replays the checked-in fuzz corpus through the same entry points and
//! invariants as the fuzz targets, so they stay exercised on stable.

use std::path::PathBuf;

use sepsa::checkpoint::Checkpoint;
use sepsa::data::{decode_idx_images, decode_idx_labels, encode_idx_images, encode_idx_labels, parse_csv};
use sepsa::harness::{parse_config, parse_metrics_jsonl};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn oks(results: Vec<(String, bool)>) -> Vec<String> {
    results.into_iter().filter(|(_, ok)| *ok).map(|(n, _)| n).collect()
}

#[test]
fn parse_csv_seeds() {
    let r = seeds("parse_csv")
        .into_iter()
        .map(|(name, data)| {
            let target = if name.starts_with("diabetes") { "Y" } else { "y" };
            (name, parse_csv(data.as_slice(), "seed", &[target]).is_ok())
        })
        .collect();
    assert_eq!(oks(r), ["diabetes_head.csv", "small.csv"]);
}

#[test]
fn idx_seeds() {
    let r = seeds("idx_images")
        .into_iter()
        .map(|(name, data)| {
            let ok = decode_idx_images(&data).map(|im| assert!(data.starts_with(&encode_idx_images(&im)))).is_ok();
            (name, ok)
        })
        .collect();
    assert_eq!(oks(r), ["empty.idx", "two_2x2.idx"]);
    let r = seeds("idx_labels")
        .into_iter()
        .map(|(name, data)| {
            let ok = decode_idx_labels(&data).map(|l| assert!(data.starts_with(&encode_idx_labels(&l)))).is_ok();
            (name, ok)
        })
        .collect();
    assert_eq!(oks(r), ["three.idx"]);
}

#[test]
fn config_seeds() {
    let r = seeds("parse_config")
        .into_iter()
        .map(|(name, data)| (name, parse_config(std::str::from_utf8(&data).unwrap()).is_ok()))
        .collect();
    assert_eq!(oks(r), ["decaying.cfg", "energy.cfg"]);
}

#[test]
fn checkpoint_seeds() {
    let r = seeds("checkpoint_decode")
        .into_iter()
        .map(|(name, data)| {
            let ok = Checkpoint::decode(&data).map(|ck| assert_eq!(ck.encode(), data)).is_ok();
            (name, ok)
        })
        .collect();
    assert_eq!(oks(r), ["rls_small.ckpt"]);
}

#[test]
fn metrics_seeds() {
    for (name, data) in seeds("metrics_jsonl") {
        let recs = parse_metrics_jsonl(std::str::from_utf8(&data).unwrap()).unwrap();
        let want = if name.starts_with("torn") { 1 } else { 3 };
        assert_eq!(recs.len(), want, "{name}");
    }
}
