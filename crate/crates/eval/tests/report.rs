use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqnet_core::colorfeat::{ColorHistogram, HistLayout};
use sqnet_eval::{evaluate, sweep_fusion, sweep_from_reports, QueryRecord, SweepParam, GAMMA_GRID};
use sqnet_retrieval::{IndexedItem, Method, PhotoFeatures, QueryFeatures, QueryHistograms, RetrievalIndex};

fn unit(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

struct Fixture {
    entries: Vec<(IndexedItem, PhotoFeatures)>,
    queries: Vec<QueryRecord>,
    features: Vec<QueryFeatures>,
}

/// Every third photo is also queried, by a noisy copy of its embedding.
fn fixture(seed: u64, with_hist: bool) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let template = if with_hist { Some(hist_pair()) } else { None };
    let mut entries = Vec::new();
    let mut queries = Vec::new();
    let mut features = Vec::new();
    for id in 0..60u64 {
        let class = (id % 4) as u32;
        let v = unit(&mut rng);
        let f = PhotoFeatures {
            qnet: v.clone(),
            shape: template.as_ref().map(|_| unit(&mut rng)),
            grid: template.as_ref().map(|t| t.0.clone()),
            foreground: template.as_ref().map(|t| t.1.clone()),
        };
        entries.push((
            IndexedItem {
                id,
                class_label: class,
                image_path: String::new(),
            },
            f.clone(),
        ));
        if id % 3 == 0 {
            let noisy: Vec<f64> = v.iter().map(|x| x + rng.random_range(-0.3..0.3)).collect();
            let n = noisy.iter().map(|x| x * x).sum::<f64>().sqrt();
            queries.push(QueryRecord {
                sketch_id: id,
                groundtruth_id: id,
                class_label: class,
            });
            features.push(QueryFeatures {
                qnet: noisy.iter().map(|x| x / n).collect(),
                shape: f.shape.clone(),
                hist: template.as_ref().map(|t| QueryHistograms {
                    grid: t.0.clone(),
                    stroke: t.1.clone(),
                }),
                blank: false,
            });
        }
    }
    Fixture {
        entries,
        queries,
        features,
    }
}

fn hist_pair() -> (ColorHistogram, ColorHistogram) {
    let mut g = vec![0u64; HistLayout::Grid2x2.len()];
    g[3] = 5;
    g[200] = 2;
    let mut s = vec![0u64; HistLayout::Single.len()];
    s[7] = 4;
    (
        ColorHistogram::from_counts(HistLayout::Grid2x2, g).unwrap(),
        ColorHistogram::from_counts(HistLayout::Single, s).unwrap(),
    )
}

fn index(f: &Fixture) -> RetrievalIndex {
    RetrievalIndex::from_features(f.entries.clone(), 5, 64, Vec::new()).unwrap()
}

#[test]
fn report_agrees_with_metric_definitions() {
    let f = fixture(1, false);
    let idx = index(&f);
    let r = evaluate(&idx, &f.queries, &f.features, Method::Qnet).unwrap();
    assert_eq!(r.ranks.len(), 20);
    assert_eq!(r.index_size, 60);
    assert_eq!(r.recall_curve.len(), 60);
    assert_eq!(r.recall_curve.last().unwrap().1, 1.0);
    let inv: f64 = r.ranks.iter().map(|q| 1.0 / q.rank as f64).sum::<f64>() / 20.0;
    assert_eq!(r.mrr, inv);
    assert!(r.mrr > 0.3, "noisy queries should mostly find their photo: {}", r.mrr);
    assert!(r.map > 0.0 && r.map <= 1.0);
    assert!(r.flagged.is_empty());
    assert_eq!(r.file_stem(), "qnet");
}

#[test]
fn metrics_are_invariant_to_relabeling_ids() {
    let f = fixture(2, false);
    let base = evaluate(&index(&f), &f.queries, &f.features, Method::Qnet).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut new_ids: Vec<u64> = (0..60).map(|i| 1000 + 17 * i).collect();
    new_ids.shuffle(&mut rng);
    let map: HashMap<u64, u64> = (0..60).zip(new_ids).collect();
    let mut g = Fixture {
        entries: f.entries.clone(),
        queries: f.queries.clone(),
        features: f.features.clone(),
    };
    for (item, _) in &mut g.entries {
        item.id = map[&item.id];
    }
    for q in &mut g.queries {
        q.groundtruth_id = map[&q.groundtruth_id];
    }
    let relabeled = evaluate(&index(&g), &g.queries, &g.features, Method::Qnet).unwrap();
    assert_eq!(relabeled.mrr, base.mrr);
    assert_eq!(relabeled.map, base.map);
    assert_eq!(relabeled.rank_values(), base.rank_values());
}

#[test]
fn absent_class_is_flagged_with_zero_precision() {
    let mut f = fixture(4, false);
    f.queries[0].class_label = 9;
    let r = evaluate(&index(&f), &f.queries, &f.features, Method::Qnet).unwrap();
    assert_eq!(r.flagged, vec![f.queries[0].sketch_id]);
}

#[test]
fn missing_groundtruth_is_an_error() {
    let mut f = fixture(4, false);
    f.queries[0].groundtruth_id = 12345;
    assert!(evaluate(&index(&f), &f.queries, &f.features, Method::Qnet).is_err());
    assert!(evaluate(&index(&f), &[], &[], Method::Qnet).is_err());
}

#[test]
fn single_point_grid_equals_direct_evaluation() {
    let f = fixture(5, true);
    let idx = index(&f);
    let t = sweep_fusion(&idx, &f.queries, &f.features, SweepParam::Gamma, &[0.4]).unwrap();
    let direct = evaluate(&idx, &f.queries, &f.features, Method::Baseline1 { gamma: 0.4 }).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert_eq!((t.rows[0].mrr, t.rows[0].map), (direct.mrr, direct.map));
    assert!(sweep_fusion(&idx, &f.queries, &f.features, SweepParam::Gamma, &[]).is_err());
    assert!(sweep_fusion(&idx, &f.queries, &f.features, SweepParam::Alpha, &[0.1]).is_err());
}

#[test]
fn sweeps_write_tables_and_charts_named_by_method_and_parameter() {
    let f = fixture(6, true);
    let idx = index(&f);
    let dir = tempfile::tempdir().unwrap();
    let t = sweep_fusion(&idx, &f.queries, &f.features, SweepParam::Gamma, &GAMMA_GRID).unwrap();
    let (jsonl, svg) = t.write(dir.path()).unwrap();
    assert!(jsonl.ends_with("sweep_baseline1_gamma.jsonl"));
    assert!(svg.ends_with("sweep_baseline1_gamma.svg"));
    let lines: Vec<serde_json::Value> = std::fs::read_to_string(&jsonl)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[2]["value"], 0.4);
    assert_eq!(lines[2]["param"], "gamma");
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let r = evaluate(&idx, &f.queries, &f.features, Method::Baseline2 { omega: 0.2 }).unwrap();
    let (json, chart) = r.write(dir.path()).unwrap();
    assert!(json.ends_with("eval_baseline2_omega0.2.json"));
    assert!(chart.ends_with("recall_baseline2_omega0.2.svg"));
}

#[test]
fn missing_checkpoints_are_skipped() {
    let f = fixture(7, false);
    let r = evaluate(&index(&f), &f.queries, &f.features, Method::Qnet).unwrap();
    let t = sweep_from_reports(
        SweepParam::Alpha,
        vec![(0.1, Ok(r.clone())), (0.25, Err("no checkpoint".into())), (0.5, Ok(r))],
    )
    .unwrap();
    assert_eq!(t.rows.iter().map(|r| r.value).collect::<Vec<_>>(), vec![0.1, 0.5]);
    assert_eq!(t.skipped.len(), 1);
    assert_eq!(t.skipped[0].value, 0.25);
    assert_eq!(t.file_stem(), "sweep_qnet_alpha");
}
