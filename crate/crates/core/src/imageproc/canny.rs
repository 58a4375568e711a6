//! Canny edge detection: luma, 5x5 Gaussian (sigma 1.4), Sobel gradient,
//! non-maximum suppression and hysteresis thresholding.

use std::collections::VecDeque;

use crate::raster::RasterImage;

pub const DEFAULT_LOW: f64 = 50.0;
pub const DEFAULT_HIGH: f64 = 150.0;
const GAUSS_SIGMA: f64 = 1.4;

/// Binary edge map, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeMask {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl EdgeMask {
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| (i as u32 % self.width, i as u32 / self.width))
    }
}

fn gaussian_kernel_5() -> [f64; 5] {
    let mut k = [0.0; 5];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - 2.0;
        *v = (-d * d / (2.0 * GAUSS_SIGMA * GAUSS_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

#[inline]
fn clamp_index(i: i64, n: i64) -> usize {
    i.clamp(0, n - 1) as usize
}

/// Separable 5x5 Gaussian with replicated borders.
pub fn gaussian_blur(gray: &[f64], w: usize, h: usize) -> Vec<f64> {
    let k = gaussian_kernel_5();
    let (wi, hi) = (w as i64, h as i64);
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = (0..5)
                .map(|t| k[t] * gray[y * w + clamp_index(x as i64 + t as i64 - 2, wi)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = (0..5)
                .map(|t| k[t] * tmp[clamp_index(y as i64 + t as i64 - 2, hi) * w + x])
                .sum();
        }
    }
    out
}

/// Sobel gradients (gx, gy) with replicated borders.
pub fn sobel(img: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let (wi, hi) = (w as i64, h as i64);
    let at = |x: i64, y: i64| img[clamp_index(y, hi) * w + clamp_index(x, wi)];
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..hi {
        for x in 0..wi {
            let i = (y * wi + x) as usize;
            gx[i] = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            gy[i] = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
        }
    }
    (gx, gy)
}

/// Canny edges with hysteresis thresholds on the Sobel magnitude of the
/// 0-255 luma image.
pub fn detect_edges(img: &RasterImage, low: f64, high: f64) -> EdgeMask {
    assert!(low < high, "canny thresholds must satisfy low < high");
    let (w, h) = (img.width() as usize, img.height() as usize);
    let blurred = gaussian_blur(&img.luma(), w, h);
    let (gx, gy) = sobel(&blurred, w, h);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();

    // Non-maximum suppression along the quantized gradient direction. A
    // pixel must beat its predecessor strictly and tie-or-beat its
    // successor, so plateaus two pixels wide keep exactly one pixel.
    let mut thin = vec![0.0; w * h];
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let i = y * w + x;
            let m = mag[i];
            if m == 0.0 {
                continue;
            }
            let angle = gy[i].atan2(gx[i]).to_degrees().rem_euclid(180.0);
            let (dx, dy): (i64, i64) = if !(22.5..157.5).contains(&angle) {
                (1, 0)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let before = mag[((y as i64 - dy) as usize) * w + (x as i64 - dx) as usize];
            let after = mag[((y as i64 + dy) as usize) * w + (x as i64 + dx) as usize];
            if m > before && m >= after {
                thin[i] = m;
            }
        }
    }

    let mut bits = vec![false; w * h];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for (i, &m) in thin.iter().enumerate() {
        if m >= high {
            bits[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !bits[j] && thin[j] >= low {
                    bits[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    EdgeMask {
        width: img.width(),
        height: img.height(),
        bits,
    }
}
