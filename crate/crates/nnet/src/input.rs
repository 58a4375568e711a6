//! Raster images to network input tensors.

use sqnet_core::imageproc::{normalize_canvas, CanvasKind};
use sqnet_core::RasterImage;

use crate::error::{NnetError, Result};
use crate::model::{Branch, INPUT_CHANNELS};
use crate::tensor::Tensor;

/// Normalizes an arbitrary image onto the branch's canvas at `side`.
pub fn prepare(img: &RasterImage, branch: Branch, side: usize) -> Result<RasterImage> {
    let kind = match branch {
        Branch::Sketch => CanvasKind::Sketch,
        Branch::Photo => CanvasKind::Photo,
    };
    let side = u32::try_from(side).map_err(|_| NnetError::Config(format!("side {side} too large")))?;
    normalize_canvas(img, kind, side)
        .map(|c| c.image)
        .map_err(|e| NnetError::Config(e.to_string()))
}

/// Stacks `side` x `side` images into [N, 3, side, side] with channel value
/// 1 - v/255, so white background is zero.
pub fn batch_tensor(images: &[&RasterImage], side: usize) -> Result<Tensor> {
    let plane = side * side;
    let mut data = Vec::with_capacity(images.len() * INPUT_CHANNELS * plane);
    for img in images {
        if img.width() as usize != side || img.height() as usize != side {
            return Err(NnetError::Shape(format!(
                "input image is {}x{}, expected {side}x{side}",
                img.width(),
                img.height()
            )));
        }
        let bytes = img.as_bytes();
        for c in 0..INPUT_CHANNELS {
            data.extend((0..plane).map(|p| 1.0 - f64::from(bytes[p * 3 + c]) / 255.0));
        }
    }
    Tensor::new(vec![images.len(), INPUT_CHANNELS, side, side], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_maps_to_zero_and_channels_split() {
        let mut img = RasterImage::white(2, 2);
        img.put(1, 0, [0, 255, 51]);
        let t = batch_tensor(&[&img], 2).unwrap();
        assert_eq!(t.shape(), &[1, 3, 2, 2]);
        assert_eq!(t.data(), &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.8, 0.0, 0.0]);
        assert!(batch_tensor(&[&img], 3).is_err());
    }
}
