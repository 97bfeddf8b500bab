use std::path::Path;

use image::DynamicImage;

use crate::error::{FeatureError, Result};
use crate::plane::{Image, Plane};

/// Reads a PGM/PPM/PNG file into planes scaled to `[0, 1]`.
pub fn load_image(path: &Path) -> Result<Image> {
    let img = image::open(path).map_err(|source| FeatureError::Image {
        path: path.display().to_string(),
        source,
    })?;
    from_dynamic(&img)
}

pub fn from_dynamic(img: &DynamicImage) -> Result<Image> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        let rgb = img.to_rgb32f();
        let channel = |c: usize| Plane::new(w, h, rgb.pixels().map(|p| p.0[c] as f64).collect());
        Image::rgb(channel(0)?, channel(1)?, channel(2)?)
    } else {
        let gray = img.to_luma32f();
        Ok(Image::Gray(Plane::new(
            w,
            h,
            gray.pixels().map(|p| p.0[0] as f64).collect(),
        )?))
    }
}

/// Writes a gray plane (clamped to `[0, 1]`) as an 8-bit image; the format
/// follows the file extension.
pub fn save_gray(plane: &Plane, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = plane
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let buf = image::GrayImage::from_raw(plane.width() as u32, plane.height() as u32, bytes)
        .expect("buffer length matches plane size");
    buf.save(path).map_err(|source| FeatureError::Image {
        path: path.display().to_string(),
        source,
    })
}
