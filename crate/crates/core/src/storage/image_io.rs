//! Grayscale image ingestion (PNG, PGM) and B-mode PNG export.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::storage::atomic_write;
use crate::types::BModeImage;

/// Loads an image as intensities in `[0, 1]`, rows along depth. Color images
/// are converted to luma.
pub fn load_grayscale(path: &Path) -> Result<Array2<f64>> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.to_owned(),
        reason: e.to_string(),
    })?;
    Ok(to_intensity(&img))
}

/// Decodes an in-memory PNG or PGM.
pub fn decode_grayscale(bytes: &[u8]) -> Result<Array2<f64>> {
    let img = image::load_from_memory(bytes).map_err(|e| Error::Image {
        path: "<memory>".into(),
        reason: e.to_string(),
    })?;
    Ok(to_intensity(&img))
}

fn to_intensity(img: &DynamicImage) -> Array2<f64> {
    let luma = img.to_luma16();
    let (w, h) = luma.dimensions();
    Array2::from_shape_fn((h as usize, w as usize), |(r, c)| {
        luma.get_pixel(c as u32, r as u32).0[0] as f64 / u16::MAX as f64
    })
}

/// Display gray level of a dB value: `round(255 (v + DR) / DR)`.
pub fn bmode_gray(value_db: f64, dynamic_range_db: f64) -> u8 {
    (255.0 * (value_db + dynamic_range_db) / dynamic_range_db)
        .round()
        .clamp(0.0, 255.0) as u8
}

pub fn bmode_to_gray(bmode: &BModeImage) -> GrayImage {
    let (nz, nx) = bmode.values().dim();
    let dr = bmode.dynamic_range_db();
    GrayImage::from_fn(nx as u32, nz as u32, |x, z| {
        image::Luma([bmode_gray(bmode.values()[[z as usize, x as usize]], dr)])
    })
}

/// Writes an 8-bit grayscale PNG: 0 dB is white, `-DR` black.
pub fn export_bmode_png(bmode: &BModeImage, path: &Path) -> Result<()> {
    write_gray_png(&bmode_to_gray(bmode), path)
}

pub fn write_gray_png(img: &GrayImage, path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    img.write_to(&mut Cursor::new(&mut bytes), ImageFormat::Png)
        .map_err(|e| Error::Image {
            path: path.to_owned(),
            reason: e.to_string(),
        })?;
    atomic_write(path, |w| w.write_all(&bytes).map_err(|e| Error::io(path, e)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_levels() {
        assert_eq!(bmode_gray(0.0, 60.0), 255);
        assert_eq!(bmode_gray(-60.0, 60.0), 0);
        assert_eq!(bmode_gray(-20.0, 60.0), 170);
    }

    #[test]
    fn ascii_and_binary_pgm_decode() {
        let ascii = b"P2\n3 2\n255\n0 128 255\n255 0 51\n";
        let a = decode_grayscale(ascii).unwrap();
        assert_eq!(a.dim(), (2, 3));
        assert_eq!(a[[0, 2]], 1.0);
        assert!((a[[1, 2]] - 0.2).abs() < 1e-3);
        let mut binary = b"P5\n3 2\n255\n".to_vec();
        binary.extend_from_slice(&[0, 128, 255, 255, 0, 51]);
        assert_eq!(decode_grayscale(&binary).unwrap(), a);
    }
}
