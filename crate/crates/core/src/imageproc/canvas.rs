//! Canvas normalization before embedding.

use crate::error::{Error, Result};
use crate::imageproc::color::rgb_to_hsv;
use crate::imageproc::resize::{crop, paste, resize};
use crate::raster::{luma, RasterImage, Rgb};

/// Background test shared by canvas centering and stroke histograms: a
/// pixel is background when it is both bright and unsaturated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BackgroundClassifier {
    pub min_luma: f64,
    pub max_saturation: f64,
}

impl Default for BackgroundClassifier {
    fn default() -> Self {
        Self {
            min_luma: 245.0,
            max_saturation: 0.1,
        }
    }
}

impl BackgroundClassifier {
    #[inline]
    pub fn is_background(&self, c: Rgb) -> bool {
        luma(c) > self.min_luma && rgb_to_hsv(c).1 < self.max_saturation
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CanvasKind {
    Sketch,
    Photo,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedCanvas {
    pub image: RasterImage,
    /// Set when a sketch had no foreground to center.
    pub blank: bool,
}

/// Padding added around sketch content, as a fraction of its larger side.
pub const SKETCH_PADDING: f64 = 0.10;
pub const MIN_SIDE: u32 = 16;

/// Bounding box (x0, y0, x1, y1), inclusive, of non-background pixels.
pub fn content_bbox(img: &RasterImage, bg: &BackgroundClassifier) -> Option<(u32, u32, u32, u32)> {
    let mut bbox: Option<(u32, u32, u32, u32)> = None;
    for y in 0..img.height() {
        for x in 0..img.width() {
            if bg.is_background(img.get(x, y)) {
                continue;
            }
            bbox = Some(match bbox {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
    }
    bbox
}

/// Brings a sketch or photo onto a white `side` x `side` canvas.
///
/// Sketches are cropped to their content, centered with white padding of
/// [`SKETCH_PADDING`] of the larger content side, then resized. Photos are
/// resized keeping their aspect ratio and centered on white.
pub fn normalize_canvas(img: &RasterImage, kind: CanvasKind, side: u32) -> Result<NormalizedCanvas> {
    if side < MIN_SIDE {
        return Err(Error::Config(format!("canvas side {side} below minimum {MIN_SIDE}")));
    }
    match kind {
        CanvasKind::Photo => {
            let scale = f64::from(side) / f64::from(img.width().max(img.height()));
            let nw = ((f64::from(img.width()) * scale).round() as u32).clamp(1, side);
            let nh = ((f64::from(img.height()) * scale).round() as u32).clamp(1, side);
            let scaled = resize(img, nw, nh);
            let mut canvas = RasterImage::white(side, side);
            paste(&mut canvas, &scaled, i64::from((side - nw) / 2), i64::from((side - nh) / 2));
            Ok(NormalizedCanvas {
                image: canvas,
                blank: false,
            })
        }
        CanvasKind::Sketch => {
            let Some((x0, y0, x1, y1)) = content_bbox(img, &BackgroundClassifier::default()) else {
                return Ok(NormalizedCanvas {
                    image: RasterImage::white(side, side),
                    blank: true,
                });
            };
            let (bw, bh) = (x1 - x0 + 1, y1 - y0 + 1);
            let content = crop(img, x0, y0, bw, bh);
            let largest = bw.max(bh);
            let pad = (SKETCH_PADDING * f64::from(largest)).round() as u32;
            let total = largest + 2 * pad;
            let mut square = RasterImage::white(total, total);
            paste(&mut square, &content, i64::from((total - bw) / 2), i64::from((total - bh) / 2));
            Ok(NormalizedCanvas {
                image: resize(&square, side, side),
                blank: false,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::WHITE;

    #[test]
    fn white_square_stays_white() {
        let img = RasterImage::white(32, 32);
        let out = normalize_canvas(&img, CanvasKind::Photo, 32).unwrap();
        assert_eq!(out.image, img);
        let sk = normalize_canvas(&img, CanvasKind::Sketch, 32).unwrap();
        assert!(sk.blank);
        assert_eq!(sk.image, img);
    }

    #[test]
    fn wide_photo_is_letterboxed() {
        let img = RasterImage::filled(100, 50, [0, 0, 255]);
        let out = normalize_canvas(&img, CanvasKind::Photo, 224).unwrap().image;
        assert_eq!((out.width(), out.height()), (224, 224));
        for y in 0..224 {
            let inside = (56..168).contains(&y);
            for x in [0u32, 100, 223] {
                let c = out.get(x, y);
                if inside {
                    assert_eq!(c, [0, 0, 255], "({x},{y})");
                } else {
                    assert_eq!(c, WHITE, "({x},{y})");
                }
            }
        }
    }

    #[test]
    fn rejects_tiny_side() {
        assert!(normalize_canvas(&RasterImage::white(4, 4), CanvasKind::Photo, 8).is_err());
    }
}
