//! Training-time augmentation: rotation, rescale, horizontal flip, HSV and
//! contrast jitter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imageproc::color::{hsv_to_rgb, rgb_to_hsv};
use crate::raster::{RasterImage, Rgb, WHITE};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentConfig {
    /// Rotation drawn uniformly from [-rotation, rotation] degrees.
    pub rotation: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub hflip_prob: f64,
    /// Hue offset drawn from [-hue_jitter, hue_jitter] degrees.
    pub hue_jitter: f64,
    /// Saturation, value and contrast are multiplied by 1 + U(-j, j).
    pub sat_jitter: f64,
    pub val_jitter: f64,
    pub contrast_jitter: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            rotation: 20.0,
            scale_min: 0.9,
            scale_max: 1.1,
            hflip_prob: 0.5,
            hue_jitter: 5.0,
            sat_jitter: 0.1,
            val_jitter: 0.1,
            contrast_jitter: 0.1,
        }
    }
}

impl AugmentConfig {
    pub fn identity() -> Self {
        Self {
            rotation: 0.0,
            scale_min: 1.0,
            scale_max: 1.0,
            hflip_prob: 0.0,
            hue_jitter: 0.0,
            sat_jitter: 0.0,
            val_jitter: 0.0,
            contrast_jitter: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("augment: {m}")));
        if !(0.0..=20.0).contains(&self.rotation) {
            return bad("rotation must lie in [0, 20] degrees");
        }
        if !(0.9 <= self.scale_min && self.scale_min <= 1.0 && 1.0 <= self.scale_max && self.scale_max <= 1.1) {
            return bad("scale range must satisfy 0.9 <= min <= 1 <= max <= 1.1");
        }
        if !(0.0..=1.0).contains(&self.hflip_prob) {
            return bad("hflip_prob must be a probability");
        }
        if !(0.0..=180.0).contains(&self.hue_jitter) {
            return bad("hue_jitter must lie in [0, 180]");
        }
        for j in [self.sat_jitter, self.val_jitter, self.contrast_jitter] {
            if !(0.0..1.0).contains(&j) {
                return bad("saturation, value and contrast jitter must lie in [0, 1)");
            }
        }
        Ok(())
    }
}

/// Parameters actually applied by one [`augment`] call.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentDraw {
    pub rotation: f64,
    pub scale: f64,
    pub flip: bool,
    pub hue: f64,
    pub saturation: f64,
    pub value: f64,
    pub contrast: f64,
}

impl AugmentDraw {
    pub fn draw(config: &AugmentConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sym = |r: f64| (2.0 * rng.random::<f64>() - 1.0) * r;
        let rotation = sym(config.rotation);
        let u = sym(1.0);
        let scale = if u < 0.0 {
            1.0 + u * (1.0 - config.scale_min)
        } else {
            1.0 + u * (config.scale_max - 1.0)
        };
        let flip = (sym(1.0) + 1.0) / 2.0 < config.hflip_prob;
        Self {
            rotation,
            scale,
            flip,
            hue: sym(config.hue_jitter),
            saturation: 1.0 + sym(config.sat_jitter),
            value: 1.0 + sym(config.val_jitter),
            contrast: 1.0 + sym(config.contrast_jitter),
        }
    }
}

/// Rotation by `degrees` and isotropic scale about the image center, with
/// bilinear sampling and white fill.
pub fn rotate_scale(img: &RasterImage, degrees: f64, scale: f64) -> RasterImage {
    let (w, h) = (img.width(), img.height());
    let (cx, cy) = (f64::from(w) / 2.0, f64::from(h) / 2.0);
    let (sin, cos) = degrees.to_radians().sin_cos();
    let sample = |x: i64, y: i64| -> [f64; 3] {
        if x < 0 || y < 0 || x >= i64::from(w) || y >= i64::from(h) {
            [255.0; 3]
        } else {
            img.get(x as u32, y as u32).map(f64::from)
        }
    };
    let mut out = RasterImage::white(w, h);
    for y in 0..h {
        for x in 0..w {
            let px = f64::from(x) + 0.5 - cx;
            let py = f64::from(y) + 0.5 - cy;
            let sx = (cos * px + sin * py) / scale + cx - 0.5;
            let sy = (-sin * px + cos * py) / scale + cy - 0.5;
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as i64, y0 as i64);
            let a = sample(x0, y0);
            let b = sample(x0 + 1, y0);
            let c = sample(x0, y0 + 1);
            let d = sample(x0 + 1, y0 + 1);
            let mut px_out = [0u8; 3];
            for k in 0..3 {
                let top = a[k] * (1.0 - fx) + b[k] * fx;
                let bottom = c[k] * (1.0 - fx) + d[k] * fx;
                px_out[k] = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
            }
            out.put(x, y, px_out);
        }
    }
    out
}

fn jitter_color(c: Rgb, draw: &AugmentDraw) -> Rgb {
    if c == WHITE {
        return c;
    }
    let (h, s, v) = rgb_to_hsv(c);
    let mut out = hsv_to_rgb(h + draw.hue, s * draw.saturation, v * draw.value);
    // Contrast is stretched about white so the background is unaffected.
    for ch in &mut out {
        *ch = (255.0 - (255.0 - f64::from(*ch)) * draw.contrast).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Applies one seeded random augmentation. Output dimensions match the input.
pub fn augment(img: &RasterImage, config: &AugmentConfig, seed: u64) -> Result<(RasterImage, AugmentDraw)> {
    config.validate()?;
    let draw = AugmentDraw::draw(config, seed);
    Ok((apply_draw(img, &draw), draw))
}

pub fn apply_draw(img: &RasterImage, draw: &AugmentDraw) -> RasterImage {
    let mut out = if draw.rotation != 0.0 || draw.scale != 1.0 {
        rotate_scale(img, draw.rotation, draw.scale)
    } else {
        img.clone()
    };
    if draw.flip {
        out = out.flip_horizontal();
    }
    if draw.hue != 0.0 || draw.saturation != 1.0 || draw.value != 1.0 || draw.contrast != 1.0 {
        out = out.map_pixels(|c| jitter_color(c, draw));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RasterImage {
        let mut img = RasterImage::white(24, 24);
        for y in 4..14 {
            for x in 6..18 {
                img.put(x, y, [30, 160, 220]);
            }
        }
        img
    }

    #[test]
    fn identity_config_is_identity() {
        let img = sample();
        for seed in 0..20 {
            let (out, draw) = augment(&img, &AugmentConfig::identity(), seed).unwrap();
            assert_eq!(out, img);
            assert!(!draw.flip);
        }
        assert_eq!(rotate_scale(&img, 0.0, 1.0), img);
    }

    #[test]
    fn seeded_and_size_preserving() {
        let img = sample();
        let cfg = AugmentConfig::default();
        let (a, da) = augment(&img, &cfg, 5).unwrap();
        let (b, db) = augment(&img, &cfg, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(da, db);
        assert_eq!((a.width(), a.height()), (24, 24));
    }

    #[test]
    fn out_of_range_config_rejected() {
        let cfg = AugmentConfig {
            rotation: 45.0,
            ..Default::default()
        };
        assert!(augment(&sample(), &cfg, 0).is_err());
        let cfg = AugmentConfig {
            scale_min: 0.5,
            ..Default::default()
        };
        assert!(augment(&sample(), &cfg, 0).is_err());
    }

    #[test]
    fn rotation_by_90_moves_pixels() {
        let mut img = RasterImage::white(8, 8);
        img.put(6, 1, [0, 0, 0]);
        let out = rotate_scale(&img, 90.0, 1.0);
        assert_eq!(out.get(6, 1), WHITE);
        assert_eq!(out.pixels().filter(|&c| c != WHITE).count(), 1);
    }
}
