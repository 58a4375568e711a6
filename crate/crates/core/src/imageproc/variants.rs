//! Hue-rotated and gray color variants of catalog photos.

use std::path::PathBuf;

use crate::catalog::{Catalog, CatalogItem, ColorGroup, Origin};
use crate::error::Result;
use crate::imageproc::color::hue_shift;
use crate::raster::{luma, RasterImage, WHITE};
use crate::toy::ToyDataset;

/// Hue rotations applied to each original; with the original this gives
/// five colorings spaced evenly around the hue circle.
pub const HUE_SHIFTS: [f64; 4] = [72.0, 144.0, 216.0, 288.0];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VariantKind {
    Hue(f64),
    /// Index into [`GrayVariantParams::levels`].
    Gray(u32),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrayVariantParams {
    /// Pixels with luma below this fraction of the image maximum are
    /// foreground.
    pub foreground_threshold: f64,
    /// Target mean foreground luma, as a fraction of 255, per gray variant.
    pub levels: [f64; 2],
    /// Gain applied to foreground luma deviations from their mean.
    pub contrast_gain: f64,
}

impl Default for GrayVariantParams {
    fn default() -> Self {
        Self {
            foreground_threshold: 0.9,
            levels: [0.35, 0.6],
            contrast_gain: 1.5,
        }
    }
}

/// Grayscale version with a segmented white background and the foreground
/// contrast-stretched around `target` mean luma.
pub fn gray_variant(img: &RasterImage, target: f64, params: &GrayVariantParams) -> RasterImage {
    let l = img.luma();
    let max = l.iter().copied().fold(0.0, f64::max);
    let threshold = params.foreground_threshold * max;
    let fg: Vec<bool> = l.iter().map(|&v| v < threshold).collect();
    let n_fg = fg.iter().filter(|&&b| b).count();
    if n_fg == 0 {
        return RasterImage::white(img.width(), img.height());
    }
    let mean = l.iter().zip(&fg).filter(|(_, &f)| f).map(|(v, _)| v).sum::<f64>() / n_fg as f64;
    let mut out = RasterImage::white(img.width(), img.height());
    for (i, (&v, &is_fg)) in l.iter().zip(&fg).enumerate() {
        if !is_fg {
            continue;
        }
        let g = ((v - mean) * params.contrast_gain + target * 255.0).round().clamp(0.0, 255.0) as u8;
        out.put(i as u32 % img.width(), i as u32 / img.width(), [g, g, g]);
    }
    out
}

/// Four hue-rotated variants followed by two gray variants.
pub fn make_variants(img: &RasterImage) -> Vec<(VariantKind, RasterImage)> {
    make_variants_with(img, &GrayVariantParams::default())
}

pub fn make_variants_with(img: &RasterImage, gray: &GrayVariantParams) -> Vec<(VariantKind, RasterImage)> {
    let mut out: Vec<(VariantKind, RasterImage)> = HUE_SHIFTS
        .iter()
        .map(|&s| (VariantKind::Hue(s), hue_shift(img, s)))
        .collect();
    for (i, &level) in gray.levels.iter().enumerate() {
        out.push((VariantKind::Gray(i as u32), gray_variant(img, level, gray)));
    }
    out
}

/// Appends the variants of every original item. New ids continue after the
/// largest existing id; variants share the original's class and instance.
pub fn expand_with_variants(ds: &ToyDataset, gray: &GrayVariantParams) -> Result<ToyDataset> {
    let mut items = ds.catalog.items.clone();
    let mut images = ds.images.clone();
    let mut next_id = items.iter().map(|i| i.id + 1).max().unwrap_or(0);
    for (item, img) in ds.catalog.items.iter().zip(&ds.images) {
        if item.origin != Origin::Original {
            continue;
        }
        for (kind, variant) in make_variants_with(img, gray) {
            let (origin, color_group) = match kind {
                VariantKind::Hue(s) => {
                    let group = if item.color_group.is_gray() {
                        item.color_group
                    } else {
                        ColorGroup::hue(f64::from(item.color_group.0) + s)
                    };
                    (Origin::HueVariant, group)
                }
                VariantKind::Gray(level) => (Origin::GrayVariant, ColorGroup::gray(level)),
            };
            items.push(CatalogItem {
                id: next_id,
                image_path: PathBuf::from(format!("photos/{next_id:06}.png")),
                class_label: item.class_label,
                instance_id: item.instance_id,
                color_group,
                origin,
            });
            images.push(variant);
            next_id += 1;
        }
    }
    Ok(ToyDataset {
        catalog: Catalog::new(items, ds.catalog.class_count)?,
        images,
    })
}

/// Mean luma of the non-white pixels, or None if all are white.
pub fn foreground_mean_luma(img: &RasterImage) -> Option<f64> {
    let v: Vec<f64> = img.pixels().filter(|&c| c != WHITE).map(luma).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}
