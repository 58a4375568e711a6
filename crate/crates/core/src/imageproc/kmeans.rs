//! Color flattening by k-means in RGB space.
//!
//! Clustering runs over the image's distinct colors weighted by pixel
//! count, which is equivalent to clustering every pixel and much cheaper on
//! flat images.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::raster::{RasterImage, Rgb};

const MAX_ITERATIONS: usize = 100;

/// Weighted k-means with k-means++ seeding. Returns the final centroids and
/// the cluster index of each input point.
pub fn kmeans_weighted(points: &[[f64; 3]], weights: &[f64], k: usize, seed: u64) -> (Vec<[f64; 3]>, Vec<usize>) {
    assert_eq!(points.len(), weights.len());
    assert!(k >= 1 && k <= points.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d2 = |a: &[f64; 3], b: &[f64; 3]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2);

    let mut centers: Vec<[f64; 3]> = Vec::with_capacity(k);
    centers.push(points[pick_weighted(weights, &mut rng)]);
    let mut nearest: Vec<f64> = points.iter().map(|p| d2(p, &centers[0])).collect();
    while centers.len() < k {
        let scores: Vec<f64> = nearest.iter().zip(weights).map(|(d, w)| d * w).collect();
        let next = if scores.iter().sum::<f64>() > 0.0 {
            points[pick_weighted(&scores, &mut rng)]
        } else {
            break;
        };
        for (n, p) in nearest.iter_mut().zip(points) {
            *n = n.min(d2(p, &next));
        }
        centers.push(next);
    }

    let assign = |centers: &[[f64; 3]]| -> Vec<usize> {
        points
            .iter()
            .map(|p| {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (i, c) in centers.iter().enumerate() {
                    let d = d2(p, c);
                    if d < best_d {
                        best_d = d;
                        best = i;
                    }
                }
                best
            })
            .collect()
    };

    let mut labels = assign(&centers);
    for _ in 0..MAX_ITERATIONS {
        let mut sums = vec![[0.0f64; 3]; centers.len()];
        let mut mass = vec![0.0f64; centers.len()];
        for ((p, &l), &w) in points.iter().zip(&labels).zip(weights) {
            for c in 0..3 {
                sums[l][c] += p[c] * w;
            }
            mass[l] += w;
        }
        for (i, c) in centers.iter_mut().enumerate() {
            if mass[i] > 0.0 {
                *c = [sums[i][0] / mass[i], sums[i][1] / mass[i], sums[i][2] / mass[i]];
            }
        }
        let next = assign(&centers);
        if next == labels {
            break;
        }
        labels = next;
    }
    (centers, labels)
}

fn pick_weighted(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut t = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if t < w {
                return i;
            }
            t -= w;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Replaces every pixel with its k-means cluster centroid, rounded to 8 bits.
/// `k` larger than the number of distinct colors is allowed.
pub fn flatten_colors(img: &RasterImage, k: usize, seed: u64) -> Result<RasterImage> {
    if k == 0 {
        return Err(Error::Config("k-means cluster count must be positive".into()));
    }
    let mut counts: BTreeMap<Rgb, f64> = BTreeMap::new();
    for c in img.pixels() {
        *counts.entry(c).or_default() += 1.0;
    }
    let colors: Vec<Rgb> = counts.keys().copied().collect();
    let points: Vec<[f64; 3]> = colors
        .iter()
        .map(|c| [f64::from(c[0]), f64::from(c[1]), f64::from(c[2])])
        .collect();
    let weights: Vec<f64> = counts.values().copied().collect();
    let (centers, labels) = kmeans_weighted(&points, &weights, k.min(colors.len()), seed);
    let q = |v: f64| v.round().clamp(0.0, 255.0) as u8;
    let palette: BTreeMap<Rgb, Rgb> = colors
        .iter()
        .zip(&labels)
        .map(|(&c, &l)| (c, [q(centers[l][0]), q(centers[l][1]), q(centers[l][2])]))
        .collect();
    Ok(img.map_pixels(|c| palette[&c]))
}
