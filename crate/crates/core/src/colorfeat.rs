//! Quantized RGB color histograms and the tf-idf color similarity.
//!
//! Each channel is split into 5 bins with `floor(v * 5 / 256)`, giving 125
//! bins per histogram. The grid layout concatenates the histograms of a 2x2
//! split of the image (500 bins, row-major cell order).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::imageproc::canvas::BackgroundClassifier;
use crate::raster::{RasterImage, Rgb};

pub const BINS_PER_CHANNEL: usize = 5;
pub const BINS_PER_CELL: usize = BINS_PER_CHANNEL * BINS_PER_CHANNEL * BINS_PER_CHANNEL;

const STORE_MAGIC: &[u8; 4] = b"SQCH";
const STORE_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HistLayout {
    /// 2x2 spatial grid, 500 bins.
    Grid2x2,
    /// Whole image, 125 bins.
    Single,
}

impl HistLayout {
    pub fn len(self) -> usize {
        match self {
            HistLayout::Grid2x2 => 4 * BINS_PER_CELL,
            HistLayout::Single => BINS_PER_CELL,
        }
    }

    fn code(self) -> u32 {
        match self {
            HistLayout::Grid2x2 => 1,
            HistLayout::Single => 0,
        }
    }

    fn from_code(c: u32) -> Option<Self> {
        match c {
            1 => Some(HistLayout::Grid2x2),
            0 => Some(HistLayout::Single),
            _ => None,
        }
    }
}

/// Per-channel bin of an 8-bit value.
#[inline]
pub fn channel_bin(v: u8) -> usize {
    usize::from(v) * BINS_PER_CHANNEL / 256
}

#[inline]
pub fn color_bin(c: Rgb) -> usize {
    channel_bin(c[0]) * BINS_PER_CHANNEL * BINS_PER_CHANNEL + channel_bin(c[1]) * BINS_PER_CHANNEL + channel_bin(c[2])
}

/// Color histogram holding raw pixel counts and their L1-normalized
/// weights. An empty histogram (no counted pixels) has all-zero weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ColorHistogram {
    layout: HistLayout,
    counts: Vec<u64>,
    weights: Vec<f64>,
}

impl ColorHistogram {
    pub fn from_counts(layout: HistLayout, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != layout.len() {
            return Err(Error::Format(format!(
                "{layout:?} histogram needs {} bins, got {}",
                layout.len(),
                counts.len()
            )));
        }
        let total: u64 = counts.iter().sum();
        let weights = if total == 0 {
            vec![0.0; counts.len()]
        } else {
            counts.iter().map(|&c| c as f64 / total as f64).collect()
        };
        Ok(Self {
            layout,
            counts,
            weights,
        })
    }

    pub fn layout(&self) -> HistLayout {
        self.layout
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// L1-normalized weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// True when no pixel was counted.
    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    /// Indices of bins with a nonzero count.
    pub fn occupied(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, _)| i)
    }
}

/// 500-bin histogram over a 2x2 grid of cells, L1-normalized globally.
pub fn grid_color_histogram(img: &RasterImage) -> Result<ColorHistogram> {
    if img.width() < 2 || img.height() < 2 {
        return Err(Error::Image(format!(
            "grid histogram needs at least 2x2 pixels, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut counts = vec![0u64; HistLayout::Grid2x2.len()];
    for y in 0..h {
        let cy = y * 2 / h;
        for x in 0..w {
            let cx = x * 2 / w;
            let cell = cy * 2 + cx;
            counts[cell * BINS_PER_CELL + color_bin(img.get(x as u32, y as u32))] += 1;
        }
    }
    ColorHistogram::from_counts(HistLayout::Grid2x2, counts)
}

/// 125-bin histogram over non-background pixels only.
pub fn foreground_color_histogram(img: &RasterImage, bg: &BackgroundClassifier) -> ColorHistogram {
    let mut counts = vec![0u64; BINS_PER_CELL];
    for c in img.pixels() {
        if !bg.is_background(c) {
            counts[color_bin(c)] += 1;
        }
    }
    ColorHistogram::from_counts(HistLayout::Single, counts).expect("layout length matches")
}

/// Histogram over a sketch's stroke pixels. Check
/// [`ColorHistogram::is_empty`] for sketches without strokes.
pub fn stroke_color_histogram(sketch: &RasterImage) -> ColorHistogram {
    foreground_color_histogram(sketch, &BackgroundClassifier::default())
}

/// Document frequencies of histogram bins over an indexed corpus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusColorIndex {
    n: u64,
    doc_freq: Vec<u64>,
}

impl CorpusColorIndex {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn doc_freq(&self) -> &[u64] {
        &self.doc_freq
    }

    /// 1 + ln(N / f_b). Panics for a bin absent from the corpus.
    pub fn idf(&self, bin: usize) -> f64 {
        let f = self.doc_freq[bin];
        assert!(f > 0, "bin {bin} does not occur in the indexed corpus");
        1.0 + (self.n as f64 / f as f64).ln()
    }
}

pub fn build_color_corpus_index(histograms: &[ColorHistogram]) -> Result<CorpusColorIndex> {
    let first = histograms
        .first()
        .ok_or_else(|| Error::Config("cannot index an empty histogram list".into()))?;
    let mut doc_freq = vec![0u64; first.layout.len()];
    for h in histograms {
        if h.layout != first.layout {
            return Err(Error::LayoutMismatch(first.layout, h.layout));
        }
        for b in h.occupied() {
            doc_freq[b] += 1;
        }
    }
    Ok(CorpusColorIndex {
        n: histograms.len() as u64,
        doc_freq,
    })
}

#[inline]
fn log_tf(count: u64) -> f64 {
    1.0 + (count as f64).ln()
}

fn log_tf_norm(h: &ColorHistogram) -> f64 {
    h.occupied().map(|b| log_tf(h.counts[b]).powi(2)).sum::<f64>().sqrt()
}

/// Color similarity with log term frequencies and corpus IDF weighting.
/// Returns 0 when either histogram is empty or they share no bin. The
/// photo histogram must belong to the corpus behind `index`.
pub fn color_similarity_tfidf(sketch: &ColorHistogram, photo: &ColorHistogram, index: &CorpusColorIndex) -> f64 {
    if sketch.is_empty() || photo.is_empty() {
        return 0.0;
    }
    assert_eq!(sketch.layout, photo.layout, "histogram layouts differ");
    let mut dot = 0.0;
    for b in sketch.occupied() {
        let pc = photo.counts[b];
        if pc == 0 {
            continue;
        }
        dot += log_tf(sketch.counts[b]) * log_tf(pc) * index.idf(b);
    }
    if dot == 0.0 {
        return 0.0;
    }
    dot / (log_tf_norm(sketch) * log_tf_norm(photo))
}

/// Half the L1 distance between normalized weights, in [0, 1].
pub fn histogram_distance(a: &ColorHistogram, b: &ColorHistogram) -> Result<f64> {
    if a.layout != b.layout {
        return Err(Error::LayoutMismatch(a.layout, b.layout));
    }
    Ok(a.weights.iter().zip(&b.weights).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0)
}

/// Writes histograms as an `SQCH` store: magic, version u32, layout code
/// u32, bin count u32, normalization code u32, record count u64, then per
/// record the item id u64 and the raw counts as f64, all little-endian.
pub fn write_histogram_store(path: &Path, layout: HistLayout, records: &[(u64, ColorHistogram)]) -> Result<()> {
    let mut out = Vec::with_capacity(28 + records.len() * (8 + 8 * layout.len()));
    out.extend_from_slice(STORE_MAGIC);
    out.extend_from_slice(&STORE_VERSION.to_le_bytes());
    out.extend_from_slice(&layout.code().to_le_bytes());
    out.extend_from_slice(&(layout.len() as u32).to_le_bytes());
    // Normalization 0 = raw counts; weights are rederived on load.
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for (id, h) in records {
        if h.layout != layout {
            return Err(Error::LayoutMismatch(layout, h.layout));
        }
        out.extend_from_slice(&id.to_le_bytes());
        for &c in &h.counts {
            out.extend_from_slice(&(c as f64).to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

pub fn read_histogram_store(path: &Path) -> Result<(HistLayout, Vec<(u64, ColorHistogram)>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |m: &str| Error::Format(format!("{}: {m}", path.display()));
    let mut r = ByteReader::new(&bytes);
    if r.take(4).ok_or_else(|| bad("truncated header"))? != STORE_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = r.u32().ok_or_else(|| bad("truncated header"))?;
    if version != STORE_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let layout = r
        .u32()
        .and_then(HistLayout::from_code)
        .ok_or_else(|| bad("bad layout code"))?;
    let bins = r.u32().ok_or_else(|| bad("truncated header"))? as usize;
    if bins != layout.len() {
        return Err(bad("bin count disagrees with layout"));
    }
    let norm = r.u32().ok_or_else(|| bad("truncated header"))?;
    if norm != 0 {
        return Err(bad("only raw-count stores are supported"));
    }
    let count = r.u64().ok_or_else(|| bad("truncated header"))?;
    let mut records = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let id = r.u64().ok_or_else(|| bad("truncated record"))?;
        let mut counts = Vec::with_capacity(bins);
        for _ in 0..bins {
            let v = r.f64().ok_or_else(|| bad("truncated record"))?;
            if !(v >= 0.0 && v.fract() == 0.0) {
                return Err(bad("non-integral count"));
            }
            counts.push(v as u64);
        }
        records.push((id, ColorHistogram::from_counts(layout, counts)?));
    }
    if !r.is_empty() {
        return Err(bad("trailing bytes"));
    }
    Ok((layout, records))
}

/// Little-endian cursor over a byte buffer.
pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.buf.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    pub fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn f32(&mut self) -> Option<f32> {
        self.take(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Option<f64> {
        self.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn is_empty(&self) -> bool {
        self.pos == self.buf.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(bins: &[(usize, u64)]) -> ColorHistogram {
        let mut c = vec![0; BINS_PER_CELL];
        for &(b, n) in bins {
            c[b] = n;
        }
        ColorHistogram::from_counts(HistLayout::Single, c).unwrap()
    }

    #[test]
    fn bin_mapping_covers_full_range() {
        assert_eq!(channel_bin(0), 0);
        assert_eq!(channel_bin(51), 0);
        assert_eq!(channel_bin(52), 1);
        assert_eq!(channel_bin(255), 4);
        assert_eq!(color_bin([255, 0, 0]), 100);
        assert_eq!(color_bin([0, 0, 255]), 4);
    }

    #[test]
    fn uniform_red_grid() {
        let h = grid_color_histogram(&RasterImage::filled(224, 224, [255, 0, 0])).unwrap();
        for cell in 0..4 {
            assert_eq!(h.weights()[cell * BINS_PER_CELL + 100], 0.25);
        }
        assert_eq!(h.total(), 224 * 224);
        assert!((h.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_tone_grid_separates_cells() {
        let mut img = RasterImage::white(10, 10);
        for y in 0..5 {
            for x in 0..10 {
                img.put(x, y, [0, 0, 0]);
            }
        }
        let h = grid_color_histogram(&img).unwrap();
        let white = color_bin([255, 255, 255]);
        for cell in 0..2 {
            assert_eq!(h.counts()[cell * BINS_PER_CELL], 25);
        }
        for cell in 2..4 {
            assert_eq!(h.counts()[cell * BINS_PER_CELL + white], 25);
        }
    }

    #[test]
    fn grid_needs_two_by_two() {
        assert!(grid_color_histogram(&RasterImage::white(1, 5)).is_err());
    }

    #[test]
    fn stroke_histogram_ignores_background() {
        assert!(stroke_color_histogram(&RasterImage::white(20, 20)).is_empty());
        let mut img = RasterImage::white(20, 20);
        for i in 0..100u32 {
            img.put(i % 20, i / 20, [0, 0, 255]);
        }
        let h = stroke_color_histogram(&img);
        assert_eq!(h.counts()[4], 100);
        assert_eq!(h.total(), 100);
        let mut bigger = RasterImage::white(40, 30);
        crate::imageproc::resize::paste(&mut bigger, &img, 7, 3);
        assert_eq!(stroke_color_histogram(&bigger), h);
    }

    #[test]
    fn corpus_index_counts_documents() {
        let h = single(&[(3, 2), (7, 9)]);
        let idx = build_color_corpus_index(std::slice::from_ref(&h)).unwrap();
        assert_eq!(idx.n(), 1);
        assert_eq!(idx.doc_freq()[3], 1);
        assert_eq!(idx.doc_freq()[7], 1);
        assert_eq!(idx.doc_freq().iter().sum::<u64>(), 2);
        let idx2 = build_color_corpus_index(&[h.clone(), h]).unwrap();
        assert_eq!(idx2.doc_freq()[3], 2);
        assert_eq!(idx2.doc_freq()[7], 2);
        assert!(build_color_corpus_index(&[]).is_err());
    }

    #[test]
    fn tfidf_hand_values() {
        let a = single(&[(1, 1)]);
        let b = single(&[(2, 1)]);
        let idx = build_color_corpus_index(&[b.clone()]).unwrap();
        assert_eq!(color_similarity_tfidf(&a, &b, &idx), 0.0);
        let one = single(&[(5, 1)]);
        let idx = build_color_corpus_index(std::slice::from_ref(&one)).unwrap();
        assert_eq!(color_similarity_tfidf(&one, &one, &idx), 1.0);
        let empty = single(&[]);
        assert_eq!(color_similarity_tfidf(&empty, &one, &idx), 0.0);
    }

    #[test]
    fn distance_hand_values() {
        let mut c1 = vec![0; BINS_PER_CELL];
        c1[0] = 1;
        c1[1] = 1;
        let mut c2 = vec![0; BINS_PER_CELL];
        c2[1] = 1;
        c2[2] = 1;
        let h1 = ColorHistogram::from_counts(HistLayout::Single, c1).unwrap();
        let h2 = ColorHistogram::from_counts(HistLayout::Single, c2).unwrap();
        assert_eq!(histogram_distance(&h1, &h1).unwrap(), 0.0);
        assert_eq!(histogram_distance(&h1, &h2).unwrap(), 0.5);
        assert_eq!(histogram_distance(&single(&[(0, 3)]), &single(&[(9, 1)])).unwrap(), 1.0);
        let g = grid_color_histogram(&RasterImage::white(4, 4)).unwrap();
        assert!(histogram_distance(&h1, &g).is_err());
    }

    #[test]
    fn store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.sqch");
        let recs = vec![(3u64, single(&[(1, 4), (100, 2)])), (9, single(&[]))];
        write_histogram_store(&path, HistLayout::Single, &recs).unwrap();
        let (layout, back) = read_histogram_store(&path).unwrap();
        assert_eq!(layout, HistLayout::Single);
        assert_eq!(back, recs);
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"SQCH");
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(read_histogram_store(&path).is_err());
    }
}
