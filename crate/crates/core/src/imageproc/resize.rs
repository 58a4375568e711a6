use image::imageops::{self, FilterType};

use crate::raster::RasterImage;

/// Resamples with a triangle (bilinear, antialiased on downscale) filter.
pub fn resize(img: &RasterImage, width: u32, height: u32) -> RasterImage {
    if img.width() == width && img.height() == height {
        return img.clone();
    }
    let out = imageops::resize(&img.to_rgb_image(), width, height, FilterType::Triangle);
    RasterImage::from_rgb_image(out)
}

/// Copies `src` into `dst` with its top-left corner at (x0, y0), clipping.
pub fn paste(dst: &mut RasterImage, src: &RasterImage, x0: i64, y0: i64) {
    for y in 0..src.height() {
        let ty = y0 + i64::from(y);
        if ty < 0 || ty >= i64::from(dst.height()) {
            continue;
        }
        for x in 0..src.width() {
            let tx = x0 + i64::from(x);
            if tx < 0 || tx >= i64::from(dst.width()) {
                continue;
            }
            dst.put(tx as u32, ty as u32, src.get(x, y));
        }
    }
}

/// Sub-image [x0, x0+w) x [y0, y0+h).
pub fn crop(img: &RasterImage, x0: u32, y0: u32, w: u32, h: u32) -> RasterImage {
    let mut out = RasterImage::white(w, h);
    for y in 0..h {
        for x in 0..w {
            out.put(x, y, img.get(x0 + x, y0 + y));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_size_is_identity() {
        let mut img = RasterImage::white(7, 5);
        img.put(2, 2, [1, 2, 3]);
        assert_eq!(resize(&img, 7, 5), img);
    }

    #[test]
    fn constant_images_stay_constant() {
        let img = RasterImage::filled(30, 20, [10, 200, 30]);
        let out = resize(&img, 11, 17);
        assert_eq!((out.width(), out.height()), (11, 17));
        assert!(out.pixels().all(|c| c == [10, 200, 30]));
    }
}
