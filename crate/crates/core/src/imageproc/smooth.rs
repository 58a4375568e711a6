//! Bilateral edge-preserving smoothing.

use crate::raster::RasterImage;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingParams {
    /// Half-width of the square window.
    pub spatial_radius: u32,
    /// Gaussian width of the color-difference weight, 0-255 units.
    pub range_sigma: f64,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        Self {
            spatial_radius: 3,
            range_sigma: 30.0,
        }
    }
}

impl SmoothingParams {
    pub fn spatial_sigma(&self) -> f64 {
        (f64::from(self.spatial_radius) / 2.0).max(0.5)
    }
}

/// Bilateral filter with a joint RGB range kernel. Window pixels outside
/// the image are skipped, not padded.
pub fn smooth_edge_preserving(img: &RasterImage, params: &SmoothingParams) -> RasterImage {
    let r = params.spatial_radius as i64;
    let (w, h) = (i64::from(img.width()), i64::from(img.height()));
    let ss = params.spatial_sigma();
    let spatial: Vec<f64> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .map(|(dx, dy)| (-((dx * dx + dy * dy) as f64) / (2.0 * ss * ss)).exp())
        .collect();
    let range_denom = 2.0 * params.range_sigma * params.range_sigma;
    let src = img.as_bytes();
    let mut out = Vec::with_capacity(src.len());
    for y in 0..h {
        for x in 0..w {
            let ci = ((y * w + x) * 3) as usize;
            let center = [f64::from(src[ci]), f64::from(src[ci + 1]), f64::from(src[ci + 2])];
            let mut acc = [0.0f64; 3];
            let mut norm = 0.0;
            for dy in -r..=r {
                let yy = y + dy;
                if yy < 0 || yy >= h {
                    continue;
                }
                for dx in -r..=r {
                    let xx = x + dx;
                    if xx < 0 || xx >= w {
                        continue;
                    }
                    let ni = ((yy * w + xx) * 3) as usize;
                    let px = [f64::from(src[ni]), f64::from(src[ni + 1]), f64::from(src[ni + 2])];
                    let d2 = (px[0] - center[0]).powi(2)
                        + (px[1] - center[1]).powi(2)
                        + (px[2] - center[2]).powi(2);
                    let wgt = spatial[((dy + r) * (2 * r + 1) + dx + r) as usize] * (-d2 / range_denom).exp();
                    norm += wgt;
                    for c in 0..3 {
                        acc[c] += wgt * px[c];
                    }
                }
            }
            for a in acc {
                out.push((a / norm).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage::new(img.width(), img.height(), out).expect("dimensions preserved")
}
