//! Synthetic color sketches from photos: edge-preserving smoothing, k-means
//! color flattening, then Canny edges drawn as dark strokes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imageproc::canny::{detect_edges, DEFAULT_HIGH, DEFAULT_LOW};
use crate::imageproc::kmeans::flatten_colors;
use crate::imageproc::smooth::{smooth_edge_preserving, SmoothingParams};
use crate::raster::{RasterImage, Rgb};
use crate::seed::stream_seed;

pub const STROKE_COLOR: Rgb = [20, 20, 20];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SketchSynthParams {
    pub smoothing: SmoothingParams,
    pub k_min: usize,
    pub k_max: usize,
    pub canny_low: f64,
    pub canny_high: f64,
    pub stroke_color: Rgb,
    pub seed: u64,
}

impl Default for SketchSynthParams {
    fn default() -> Self {
        Self {
            smoothing: SmoothingParams::default(),
            k_min: 7,
            k_max: 10,
            canny_low: DEFAULT_LOW,
            canny_high: DEFAULT_HIGH,
            stroke_color: STROKE_COLOR,
            seed: 0,
        }
    }
}

impl SketchSynthParams {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_min == 0 || self.k_min > self.k_max {
            return Err(Error::Config(format!(
                "cluster range [{}, {}] is empty or starts at zero",
                self.k_min, self.k_max
            )));
        }
        if self.canny_low >= self.canny_high {
            return Err(Error::Config(format!(
                "canny thresholds must satisfy low < high, got {} >= {}",
                self.canny_low, self.canny_high
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesizedSketch {
    pub image: RasterImage,
    /// Cluster count drawn for the flattening step.
    pub k: usize,
}

/// Turns a photo into a flat-color sketch with at most `k + 1` colors.
pub fn synthesize_color_sketch(img: &RasterImage, params: &SketchSynthParams) -> Result<SynthesizedSketch> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(params.seed, "sketch.k"));
    let k = rng.random_range(params.k_min..=params.k_max);
    let smoothed = smooth_edge_preserving(img, &params.smoothing);
    let mut flat = flatten_colors(&smoothed, k, stream_seed(params.seed, "sketch.kmeans"))?;
    let edges = detect_edges(&smoothed, params.canny_low, params.canny_high);
    for (x, y) in edges.iter_set() {
        flat.put(x, y, params.stroke_color);
    }
    Ok(SynthesizedSketch { image: flat, k })
}
