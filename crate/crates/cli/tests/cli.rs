mod common;

use common::{bin, scratch, small_pipeline, sqnet};
use sqnet_retrieval::RetrievalIndex;

fn code(args: &[&str]) -> i32 {
    let data = scratch("cli_codes");
    bin().env("SQNET_DATA_DIR", &data).args(args).output().unwrap().status.code().unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["toygen", "--colour", "3"]), 2);
    assert_eq!(code(&["train", "--stage", "4"]), 2);
    assert_eq!(code(&["query", "--sketch", "x.png", "--method", "knn"]), 2);
    assert_eq!(code(&["sweep", "--param", "beta"]), 2);
    assert_eq!(code(&[]), 2);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn runtime_failures_exit_with_one() {
    assert_eq!(code(&["variants"]), 1);
    assert_eq!(code(&["query", "--sketch", "missing.png"]), 1);
    assert_eq!(code(&["train", "--stage", "2"]), 1);
    assert_eq!(code(&["toygen", "--classes", "1"]), 1);
}

#[test]
fn query_against_empty_index_prints_empty_list() {
    let data = scratch("cli_empty");
    let dir = data.join("index");
    RetrievalIndex::from_features(Vec::new(), 8, 64, Vec::new()).unwrap().save(&dir).unwrap();
    let sketch = data.join("blank.png");
    sqnet_core::RasterImage::white(40, 40).save_png(&sketch).unwrap();
    let out = sqnet(&data, &["query", "--sketch", sketch.to_str().unwrap()]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "[]");
}

#[test]
fn toygen_writes_manifest_and_pngs() {
    let out = scratch("cli_toygen");
    let data = scratch("cli_toygen_unused");
    sqnet(
        &data,
        &["toygen", "--classes", "2", "--colors", "2", "--per-class", "3", "--seed", "1", "--out", out.to_str().unwrap()],
    );
    let cat = sqnet_core::Catalog::load(&out.join("manifest.tsv")).unwrap();
    assert_eq!(cat.len(), 6);
    for it in &cat.items {
        assert!(out.join(&it.image_path).exists());
    }
    assert!(!data.join("manifest.tsv").exists());
}

#[test]
fn single_image_sketchify_and_augment() {
    let data = scratch("cli_single");
    sqnet(&data, &["toygen", "--classes", "2", "--colors", "2", "--per-class", "1"]);
    let photo = data.join("photos/000000.png");
    let sk = data.join("one_sketch.png");
    let aug = data.join("one_aug.png");
    sqnet(&data, &["sketchify", "--input", photo.to_str().unwrap(), "--output", sk.to_str().unwrap()]);
    sqnet(&data, &["augment", "--input", sk.to_str().unwrap(), "--output", aug.to_str().unwrap(), "--seed", "3"]);
    let s = sqnet_core::RasterImage::load(&sk).unwrap();
    assert!(s.distinct_colors().len() <= 11);
    assert!(sqnet_core::RasterImage::load(&aug).is_ok());
}

#[test]
fn full_pipeline_produces_reports() {
    let data = scratch("cli_pipeline");
    small_pipeline(&data);
    let index = RetrievalIndex::load(&data.join("index")).unwrap();
    assert!(index.manifest().with_baselines);
    assert!(!index.is_empty());
    for log in ["stage1", "stage2", "stage3_alpha0.1"] {
        assert!(data.join(format!("models/{log}.jsonl")).exists());
    }
    assert!(data.join("models/stage3_alpha0.1.sqnm").exists());

    let sketch = data.join(format!("sketches/{:06}.png", index.ids()[0]));
    let out = sqnet(&data, &["query", "--sketch", sketch.to_str().unwrap(), "--topk", "5", "--method", "baseline1", "--gamma", "0.4"]);
    let hits: Vec<serde_json::Value> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(hits.len(), 5.min(index.len()));
    for (i, h) in hits.iter().enumerate() {
        assert_eq!(h["rank"], i + 1);
        assert_eq!(h["thumbnail_url"], format!("/api/items/{}/thumbnail", h["id"]));
        assert!(h["class_label"].is_u64() && h["score"].is_f64());
    }

    let out = sqnet(&data, &["eval", "--method", "baseline2", "--omega", "0.2"]);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["index_size"], index.len());
    assert!(data.join("reports/eval_baseline2_omega0.2.json").exists());
    assert!(data.join("reports/recall_baseline2_omega0.2.svg").exists());

    let out = sqnet(&data, &["sweep", "--param", "gamma"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 6);
    assert!(data.join("reports/sweep_baseline1_gamma.jsonl").exists());

    // only alpha = 0.1 was trained; the other grid values are skipped
    let out = sqnet(&data, &["sweep", "--param", "alpha"]);
    let rows: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["value"], 0.1);
    assert!(data.join("reports/sweep_qnet_alpha.svg").exists());
}
