use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqnet_core::colorfeat::{
    build_color_corpus_index, color_similarity_tfidf, grid_color_histogram, histogram_distance,
    read_histogram_store, write_histogram_store, ColorHistogram, HistLayout, BINS_PER_CELL,
};
use sqnet_core::RasterImage;

fn sparse_counts(rng: &mut ChaCha8Rng, bins: usize, occupied: usize) -> Vec<u64> {
    let mut c = vec![0u64; bins];
    for _ in 0..occupied {
        c[rng.random_range(0..bins)] += rng.random_range(1..500);
    }
    c
}

fn single(counts: Vec<u64>) -> ColorHistogram {
    ColorHistogram::from_counts(HistLayout::Single, counts).unwrap()
}

/// The log-tf / idf cosine written out term by term.
fn transcribed(sk: &[u64], ph: &[u64], corpus: &[Vec<u64>]) -> f64 {
    let n = corpus.len() as f64;
    let mut numerator = 0.0;
    for b in 0..sk.len() {
        if sk[b] == 0 || ph[b] == 0 {
            continue;
        }
        let docs = corpus.iter().filter(|d| d[b] > 0).count() as f64;
        let idf = 1.0 + (n / docs).ln();
        numerator += (1.0 + (sk[b] as f64).ln()) * (1.0 + (ph[b] as f64).ln()) * idf;
    }
    let norm = |h: &[u64]| {
        let mut s = 0.0;
        for &c in h {
            if c > 0 {
                s += (1.0 + (c as f64).ln()) * (1.0 + (c as f64).ln());
            }
        }
        s.sqrt()
    };
    if numerator == 0.0 {
        0.0
    } else {
        numerator / (norm(sk) * norm(ph))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tfidf_matches_transcription(seed in any::<u64>(), docs in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<Vec<u64>> = (0..docs).map(|_| sparse_counts(&mut rng, BINS_PER_CELL, 12)).collect();
        let corpus: Vec<ColorHistogram> = raw.iter().cloned().map(single).collect();
        let index = build_color_corpus_index(&corpus).unwrap();
        for (i, photo) in corpus.iter().enumerate() {
            let sk = sparse_counts(&mut rng, BINS_PER_CELL, 8);
            let got = color_similarity_tfidf(&single(sk.clone()), photo, &index);
            prop_assert!((got - transcribed(&sk, &raw[i], &raw)).abs() <= 1e-9);
        }
    }

    #[test]
    fn self_similarity_is_positive(seed in any::<u64>(), docs in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus: Vec<ColorHistogram> =
            (0..docs).map(|_| single(sparse_counts(&mut rng, BINS_PER_CELL, 6))).collect();
        let index = build_color_corpus_index(&corpus).unwrap();
        for h in &corpus {
            prop_assert!(color_similarity_tfidf(h, h, &index) > 0.0);
        }
        prop_assert!(index.doc_freq().iter().all(|&f| f <= index.n()));
    }

    #[test]
    fn histogram_distance_is_a_metric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [a, b, c] = [0; 3].map(|_| single(sparse_counts(&mut rng, BINS_PER_CELL, 10)));
        let d = |x: &ColorHistogram, y: &ColorHistogram| histogram_distance(x, y).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d(&a, &b)));
        prop_assert!((a.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn grid_counts_cover_every_pixel(seed in any::<u64>(), w in 2u32..40, h in 2u32..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let px: Vec<u8> = (0..w * h * 3).map(|_| rng.random()).collect();
        let img = RasterImage::new(w, h, px).unwrap();
        let g = grid_color_histogram(&img).unwrap();
        prop_assert_eq!(g.total(), u64::from(w * h));
    }
}

#[test]
fn white_padding_leaves_stroke_histogram_unchanged() {
    use sqnet_core::colorfeat::stroke_color_histogram;
    let mut small = RasterImage::white(20, 20);
    let mut big = RasterImage::white(60, 45);
    for i in 3..15 {
        small.put(i, 7, [200, 30, 30]);
        big.put(i + 20, 30, [200, 30, 30]);
    }
    assert_eq!(stroke_color_histogram(&small), stroke_color_histogram(&big));
}

#[test]
fn histogram_store_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let records: Vec<(u64, ColorHistogram)> = (0..7)
        .map(|i| (i * 3, single(sparse_counts(&mut rng, BINS_PER_CELL, 9))))
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.sqch");
    write_histogram_store(&path, HistLayout::Single, &records).unwrap();
    let (layout, back) = read_histogram_store(&path).unwrap();
    assert_eq!(layout, HistLayout::Single);
    assert_eq!(back, records);
}
