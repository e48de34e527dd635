use std::f64::consts::PI;
use std::path::Path;

use image::imageops::{self, FilterType};
use image::{DynamicImage, GrayImage, Luma};

use crate::error::{Error, Result};

const SIZE: usize = 32;
const LOW: usize = 8;

/// 8-bit BT.601 luma with the same fixed-point rounding as the usual
/// imaging libraries' RGB→L conversion. Alpha is ignored.
fn luma_601(img: &DynamicImage) -> GrayImage {
    let rgb = img.to_rgb8();
    let mut out = GrayImage::new(rgb.width(), rgb.height());
    for (x, y, p) in rgb.enumerate_pixels() {
        let [r, g, b] = p.0;
        let l = (r as u32 * 19595 + g as u32 * 38470 + b as u32 * 7471 + 0x8000) >> 16;
        out.put_pixel(x, y, Luma([l as u8]));
    }
    out
}

/// Unnormalized 1-D DCT-II coefficients 0..LOW of `x`.
fn dct_low(x: &[f64], table: &[[f64; SIZE]; LOW]) -> [f64; LOW] {
    let mut out = [0.0; LOW];
    for (k, row) in table.iter().enumerate() {
        out[k] = 2.0 * x.iter().zip(row).map(|(a, c)| a * c).sum::<f64>();
    }
    out
}

/// 64-bit DCT perceptual hash: BT.601 grey, Lanczos resample to 32x32,
/// 2-D DCT-II, top-left 8x8 block thresholded at its median, bits packed
/// row-major with the first coefficient in the most significant bit.
pub fn phash_image(img: &DynamicImage) -> u64 {
    let grey = luma_601(img);
    let small = imageops::resize(&grey, SIZE as u32, SIZE as u32, FilterType::Lanczos3);

    let mut table = [[0.0; SIZE]; LOW];
    for (k, row) in table.iter_mut().enumerate() {
        for (n, c) in row.iter_mut().enumerate() {
            *c = (PI * k as f64 * (2 * n + 1) as f64 / (2 * SIZE) as f64).cos();
        }
    }

    // columns first (along y), then rows (along x), keeping only low bands
    let mut cols = [[0.0; SIZE]; LOW]; // cols[ky][x]
    for x in 0..SIZE {
        let column: Vec<f64> = (0..SIZE)
            .map(|y| small.get_pixel(x as u32, y as u32).0[0] as f64)
            .collect();
        for (ky, v) in dct_low(&column, &table).into_iter().enumerate() {
            cols[ky][x] = v;
        }
    }
    let mut coeffs = [0.0; LOW * LOW];
    for ky in 0..LOW {
        let row = dct_low(&cols[ky], &table);
        coeffs[ky * LOW..(ky + 1) * LOW].copy_from_slice(&row);
    }

    let mut sorted = coeffs;
    sorted.sort_by(f64::total_cmp);
    let median = (sorted[LOW * LOW / 2 - 1] + sorted[LOW * LOW / 2]) / 2.0;
    coeffs
        .iter()
        .fold(0u64, |acc, c| (acc << 1) | (*c > median) as u64)
}

pub fn phash_bytes(bytes: &[u8]) -> Result<u64> {
    let img = image::load_from_memory(bytes).map_err(|e| Error::ImageDecode(e.to_string()))?;
    Ok(phash_image(&img))
}

pub fn phash_path(path: &Path) -> Result<u64> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    phash_bytes(&bytes)
}

pub fn hamming(a: u64, b: u64) -> u32 {
    (a ^ b).count_ones()
}
