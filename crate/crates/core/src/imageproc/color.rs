//! RGB/HSV conversion and hue rotation.

use crate::raster::{RasterImage, Rgb};

/// Returns (hue in degrees [0, 360), saturation [0, 1], value [0, 1]).
pub fn rgb_to_hsv(c: Rgb) -> (f64, f64, f64) {
    let r = f64::from(c[0]) / 255.0;
    let g = f64::from(c[1]) / 255.0;
    let b = f64::from(c[2]) / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h.rem_euclid(360.0), s, max)
}

pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> Rgb {
    let h = h.rem_euclid(360.0);
    let s = s.clamp(0.0, 1.0);
    let v = v.clamp(0.0, 1.0);
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let q = |t: f64| ((t + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}

/// Rotates every pixel's hue by `degrees`, leaving saturation and value.
pub fn hue_shift(img: &RasterImage, degrees: f64) -> RasterImage {
    img.map_pixels(|c| {
        let (h, s, v) = rgb_to_hsv(c);
        hsv_to_rgb(h + degrees, s, v)
    })
}

/// Smallest absolute difference between two angles, in degrees.
pub fn hue_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}
