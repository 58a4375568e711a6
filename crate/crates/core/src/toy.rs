//! Procedural toy catalog: flat colored shapes on a white background.
//!
//! Class identity is the shape kind and color identity is the base hue, so
//! the shape-versus-color factorization of real product photos is present
//! without any external data.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::{Catalog, CatalogItem, ColorGroup, Origin};
use crate::error::{Error, Result};
use crate::imageproc::color::hsv_to_rgb;
use crate::raster::{RasterImage, Rgb};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ToyConfig {
    pub shape_classes: u32,
    pub base_colors: u32,
    pub items_per_class: u32,
    pub canvas: u32,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            shape_classes: 8,
            base_colors: 5,
            items_per_class: 200,
            canvas: 64,
            seed: 1,
        }
    }
}

impl ToyConfig {
    pub const MIN_CANVAS: u32 = 32;

    pub fn validate(&self) -> Result<()> {
        if self.shape_classes < 2 {
            return Err(Error::Config("shape_classes must be at least 2".into()));
        }
        if self.shape_classes as usize > ShapeKind::ALL.len() {
            return Err(Error::Config(format!(
                "shape_classes {} exceeds the {} available shapes",
                self.shape_classes,
                ShapeKind::ALL.len()
            )));
        }
        if self.base_colors < 2 {
            return Err(Error::Config("base_colors must be at least 2".into()));
        }
        if self.items_per_class == 0 {
            return Err(Error::Config("items_per_class must be positive".into()));
        }
        if self.canvas < Self::MIN_CANVAS {
            return Err(Error::Config(format!(
                "canvas {} too small to render shapes (minimum {})",
                self.canvas,
                Self::MIN_CANVAS
            )));
        }
        Ok(())
    }

    /// Hue in degrees of base color `b`.
    pub fn base_hue(&self, b: u32) -> f64 {
        f64::from(b) * 360.0 / f64::from(self.base_colors)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeKind {
    Circle,
    Square,
    Triangle,
    Star,
    Ring,
    Cross,
    Diamond,
    Hexagon,
    Crescent,
    Frame,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 10] = [
        ShapeKind::Circle,
        ShapeKind::Square,
        ShapeKind::Triangle,
        ShapeKind::Star,
        ShapeKind::Ring,
        ShapeKind::Cross,
        ShapeKind::Diamond,
        ShapeKind::Hexagon,
        ShapeKind::Crescent,
        ShapeKind::Frame,
    ];

    /// Whether the point (u, v), in shape-local coordinates with the
    /// bounding box spanning [-1, 1]², lies inside the shape.
    pub fn contains(self, u: f64, v: f64) -> bool {
        match self {
            ShapeKind::Circle => u * u + v * v <= 1.0,
            ShapeKind::Square => u.abs() <= 0.85 && v.abs() <= 0.85,
            ShapeKind::Triangle => point_in_polygon(u, v, &[(0.0, -1.0), (1.0, 0.85), (-1.0, 0.85)]),
            ShapeKind::Star => point_in_polygon(u, v, &star_polygon()),
            ShapeKind::Ring => {
                let r2 = u * u + v * v;
                (0.3..=1.0).contains(&r2)
            }
            ShapeKind::Cross => (u.abs() <= 0.3 && v.abs() <= 1.0) || (v.abs() <= 0.3 && u.abs() <= 1.0),
            ShapeKind::Diamond => u.abs() + v.abs() <= 1.0,
            ShapeKind::Hexagon => {
                let (a, b) = (u.abs(), v.abs());
                b <= 0.866 && 0.866 * a + 0.5 * b <= 0.866
            }
            ShapeKind::Crescent => {
                let outer = u * u + v * v <= 1.0;
                let (du, dv) = (u - 0.45, v + 0.1);
                outer && du * du + dv * dv > 0.6
            }
            ShapeKind::Frame => {
                let m = u.abs().max(v.abs());
                (0.55..=0.9).contains(&m)
            }
        }
    }
}

fn star_polygon() -> [(f64, f64); 10] {
    let mut pts = [(0.0, 0.0); 10];
    for (i, p) in pts.iter_mut().enumerate() {
        let r = if i % 2 == 0 { 1.0 } else { 0.42 };
        let a = -std::f64::consts::FRAC_PI_2 + i as f64 * std::f64::consts::PI / 5.0;
        *p = (r * a.cos(), r * a.sin());
    }
    pts
}

/// Even-odd rule.
fn point_in_polygon(x: f64, y: f64, poly: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Placement of one rendered shape, in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Placement {
    pub center_x: f64,
    pub center_y: f64,
    pub half_size: f64,
}

/// Rasterizes a filled shape without anti-aliasing, so the image holds
/// exactly two colors.
pub fn render_shape(kind: ShapeKind, placement: Placement, color: Rgb, canvas: u32) -> RasterImage {
    let mut img = RasterImage::white(canvas, canvas);
    for y in 0..canvas {
        for x in 0..canvas {
            let u = (f64::from(x) + 0.5 - placement.center_x) / placement.half_size;
            let v = (f64::from(y) + 0.5 - placement.center_y) / placement.half_size;
            if kind.contains(u, v) {
                img.put(x, y, color);
            }
        }
    }
    img
}

/// A catalog together with its decoded images, index-aligned.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyDataset {
    pub catalog: Catalog,
    pub images: Vec<RasterImage>,
}

impl ToyDataset {
    /// Writes every image as PNG at its catalog path below `dir`, then the
    /// manifest at `dir/manifest_name`.
    pub fn write(&self, dir: &Path, manifest_name: &str) -> Result<PathBuf> {
        for (it, img) in self.catalog.items.iter().zip(&self.images) {
            let path = dir.join(&it.image_path);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            img.save_png(&path)?;
        }
        let manifest = dir.join(manifest_name);
        self.catalog.persist(&manifest)?;
        Ok(manifest)
    }

    /// Loads a manifest and every image it references.
    pub fn read(manifest: &Path) -> Result<Self> {
        let catalog = Catalog::load(manifest)?;
        let root = crate::catalog::manifest_root(manifest);
        let images = catalog
            .items
            .iter()
            .map(|it| RasterImage::load(&root.join(&it.image_path)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { catalog, images })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Renders the toy catalog. Item `k` of a class gets base color
/// `k mod base_colors`; every original item is its own instance.
pub fn generate_toy_catalog(config: &ToyConfig) -> Result<ToyDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let canvas = f64::from(config.canvas);
    let n = (config.shape_classes * config.items_per_class) as usize;
    let mut items = Vec::with_capacity(n);
    let mut images = Vec::with_capacity(n);
    for class in 0..config.shape_classes {
        let kind = ShapeKind::ALL[class as usize];
        for k in 0..config.items_per_class {
            let id = u64::from(class * config.items_per_class + k);
            let base = k % config.base_colors;
            let hue = config.base_hue(base);
            let color = hsv_to_rgb(hue, 1.0, 1.0);
            let half_size = canvas * rng.random_range(0.28..0.40);
            let max_shift = canvas * 0.08;
            let placement = Placement {
                center_x: canvas / 2.0 + rng.random_range(-max_shift..=max_shift),
                center_y: canvas / 2.0 + rng.random_range(-max_shift..=max_shift),
                half_size,
            };
            images.push(render_shape(kind, placement, color, config.canvas));
            items.push(CatalogItem {
                id,
                image_path: PathBuf::from(format!("photos/{id:06}.png")),
                class_label: class,
                instance_id: id,
                color_group: ColorGroup::hue(hue),
                origin: Origin::Original,
            });
        }
    }
    Ok(ToyDataset {
        catalog: Catalog::new(items, config.shape_classes)?,
        images,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeMap, BTreeSet};

    fn cfg(classes: u32, colors: u32, per: u32, seed: u64) -> ToyConfig {
        ToyConfig {
            shape_classes: classes,
            base_colors: colors,
            items_per_class: per,
            canvas: 48,
            seed,
        }
    }

    #[test]
    fn cardinality_follows_config() {
        let ds = generate_toy_catalog(&cfg(4, 3, 10, 7)).unwrap();
        assert_eq!(ds.catalog.len(), 40);
        assert_eq!(ds.images.len(), 40);
        let labels: BTreeSet<_> = ds.catalog.items.iter().map(|i| i.class_label).collect();
        assert_eq!(labels.len(), 4);
        assert!(ds.catalog.items.iter().all(|i| i.class_label < 4));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_toy_catalog(&cfg(4, 3, 10, 7)).unwrap();
        let b = generate_toy_catalog(&cfg(4, 3, 10, 7)).unwrap();
        assert_eq!(a, b);
        let pa: Vec<_> = a.images.iter().map(|i| i.encode_png().unwrap()).collect();
        let pb: Vec<_> = b.images.iter().map(|i| i.encode_png().unwrap()).collect();
        assert_eq!(pa, pb);
        let c = generate_toy_catalog(&cfg(4, 3, 10, 8)).unwrap();
        assert_ne!(a.images, c.images);
    }

    #[test]
    fn color_groups_are_uniform_per_class() {
        let ds = generate_toy_catalog(&ToyConfig {
            canvas: 32,
            ..cfg(8, 5, 200, 1)
        })
        .unwrap();
        let mut counts: BTreeMap<(u32, ColorGroup), usize> = BTreeMap::new();
        for it in &ds.catalog.items {
            *counts.entry((it.class_label, it.color_group)).or_default() += 1;
        }
        assert_eq!(counts.len(), 40);
        let expected = 200.0 / 5.0;
        for (&key, &c) in &counts {
            assert!((c as f64 - expected).abs() <= 0.1 * expected, "{key:?}: {c}");
        }
    }

    #[test]
    fn images_hold_background_and_one_color() {
        let ds = generate_toy_catalog(&cfg(8, 5, 3, 3)).unwrap();
        for img in &ds.images {
            let colors = img.distinct_colors();
            assert_eq!(colors.len(), 2, "{colors:?}");
            assert!(colors.contains(&crate::raster::WHITE));
        }
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(generate_toy_catalog(&cfg(1, 3, 10, 0)).is_err());
        assert!(generate_toy_catalog(&cfg(4, 1, 10, 0)).is_err());
        assert!(generate_toy_catalog(&ToyConfig { canvas: 16, ..cfg(4, 3, 10, 0) }).is_err());
        assert!(generate_toy_catalog(&cfg(11, 3, 1, 0)).is_err());
    }

    #[test]
    fn shapes_are_distinct_masks() {
        let p = Placement {
            center_x: 32.0,
            center_y: 32.0,
            half_size: 24.0,
        };
        let masks: Vec<_> = ShapeKind::ALL
            .iter()
            .map(|&k| render_shape(k, p, [0, 0, 0], 64))
            .collect();
        for i in 0..masks.len() {
            for j in i + 1..masks.len() {
                assert_ne!(masks[i], masks[j], "{:?} vs {:?}", ShapeKind::ALL[i], ShapeKind::ALL[j]);
            }
        }
    }
}
