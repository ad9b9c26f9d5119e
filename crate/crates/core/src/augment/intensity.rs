//! Intensity augmentations: column masking, pixel dropout, Gaussian noise
//! and Gaussian blur.

use rand::seq::index;

use crate::augment::filter::{convolve_separable, gaussian_kernel, Border};
use crate::error::{Error, Result};
use crate::raster::{quantize, round_dim, GrayImage, BACKGROUND};
use crate::rng::RngStream;

pub const BLUR_KERNEL_SIZE: usize = 5;

fn check_rate(name: &'static str, rate: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::param(name, rate, "must be in [0, 1]"))
    }
}

/// Picks `round(rate * width)` distinct columns uniformly, sorted ascending.
pub fn choose_columns(width: usize, rate: f64, rng: &mut RngStream) -> Result<Vec<usize>> {
    check_rate("rate", rate)?;
    let k = round_dim(rate * width as f64).min(width);
    let mut cols = index::sample(rng, width, k).into_vec();
    cols.sort_unstable();
    Ok(cols)
}

/// Sets the given columns to background. Columns past the edge are ignored.
pub fn zero_columns(img: &GrayImage, columns: &[usize]) -> GrayImage {
    let mut out = img.clone();
    for &c in columns.iter().filter(|&&c| c < img.width()) {
        for y in 0..img.height() {
            out.set(c, y, BACKGROUND);
        }
    }
    out
}

pub fn mask_columns(img: &GrayImage, rate: f64, rng: &mut RngStream) -> Result<GrayImage> {
    let cols = choose_columns(img.width(), rate, rng)?;
    Ok(zero_columns(img, &cols))
}

/// Zeroes each pixel independently with probability `rate`.
pub fn pixel_dropout(img: &GrayImage, rate: f64, rng: &mut RngStream) -> Result<GrayImage> {
    check_rate("rate", rate)?;
    Ok(img.map_with(|v| if rng.bernoulli(rate) { BACKGROUND } else { v }))
}

/// Additive noise with std `sigma` on the [0, 1] intensity scale, clamped.
pub fn gaussian_noise(img: &GrayImage, sigma: f64, rng: &mut RngStream) -> Result<GrayImage> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::param("sigma", sigma, "noise sigma must be >= 0"));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    Ok(img.map_with(|v| {
        let n = v as f64 / 255.0 + sigma * rng.standard_normal();
        quantize(n.clamp(0.0, 1.0) * 255.0)
    }))
}

/// 5x5 separable Gaussian blur with replicated borders.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> Result<GrayImage> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::param("sigma", sigma, "blur sigma must be > 0"));
    }
    let kernel = gaussian_kernel(sigma, BLUR_KERNEL_SIZE / 2);
    let plane: Vec<f64> = img.as_raw().iter().map(|&v| v as f64).collect();
    let out = convolve_separable(&plane, img.width(), img.height(), &kernel, Border::Replicate);
    GrayImage::from_raw(
        img.width(),
        img.height(),
        out.into_iter().map(quantize).collect(),
    )
}

impl GrayImage {
    /// Row-major map with a stateful closure.
    fn map_with(&self, mut f: impl FnMut(u8) -> u8) -> GrayImage {
        let data = self.as_raw().iter().map(|&v| f(v)).collect();
        GrayImage::from_raw(self.width(), self.height(), data).expect("same dimensions")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| ((x * 7 + y * 41) % 256) as u8)
    }

    #[test]
    fn mask_examples() {
        let img = GrayImage::filled(10, 4, 200);
        assert_eq!(mask_columns(&img, 0.0, &mut RngStream::new(1)).unwrap(), img);
        assert!(mask_columns(&img, 1.0, &mut RngStream::new(1))
            .unwrap()
            .as_raw()
            .iter()
            .all(|&v| v == 0));
        for seed in 0..200 {
            let out = mask_columns(&img, 0.4, &mut RngStream::new(seed)).unwrap();
            let zeroed = (0..10).filter(|&x| out.get(x, 0) == 0).count();
            assert_eq!(zeroed, 4);
            for x in 0..10 {
                let col: Vec<u8> = (0..4).map(|y| out.get(x, y)).collect();
                assert!(col.iter().all(|&v| v == 0) || col.iter().all(|&v| v == 200));
            }
        }
        assert!(mask_columns(&img, 1.5, &mut RngStream::new(1)).is_err());
    }

    #[test]
    fn dropout_examples() {
        let img = GrayImage::filled(100, 100, 255);
        assert_eq!(pixel_dropout(&img, 0.0, &mut RngStream::new(2)).unwrap(), img);
        assert!(pixel_dropout(&img, 1.0, &mut RngStream::new(2))
            .unwrap()
            .as_raw()
            .iter()
            .all(|&v| v == 0));
        let out = pixel_dropout(&img, 0.2, &mut RngStream::new(2)).unwrap();
        let frac = out.as_raw().iter().filter(|&&v| v == 0).count() as f64 / 1e4;
        // 99% binomial interval half-width is 2.58 * 0.004 ≈ 0.0103
        assert!((frac - 0.2).abs() < 0.02, "{frac}");
        assert!(pixel_dropout(&img, -0.1, &mut RngStream::new(2)).is_err());
    }

    #[test]
    fn noise_examples() {
        let img = ramp(30, 20);
        assert_eq!(gaussian_noise(&img, 0.0, &mut RngStream::new(5)).unwrap(), img);
        let mid = GrayImage::filled(100, 100, 128);
        let out = gaussian_noise(&mid, 0.08, &mut RngStream::new(5)).unwrap();
        let diffs: Vec<f64> = out
            .as_raw()
            .iter()
            .map(|&v| (v as f64 - 128.0) / 255.0)
            .collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
        let std = var.sqrt();
        assert!((0.07..=0.09).contains(&std), "{std}");
        let white = GrayImage::filled(50, 50, 255);
        let noisy = gaussian_noise(&white, 0.18, &mut RngStream::new(6)).unwrap();
        assert!(noisy.as_raw().iter().any(|&v| v < 255));
        assert!(gaussian_noise(&img, -0.1, &mut RngStream::new(5)).is_err());
    }

    #[test]
    fn blur_kernel_closed_form() {
        // independent evaluation of exp(-k^2/2) for k = -2..=2
        let raw: Vec<f64> = [-2.0f64, -1.0, 0.0, 1.0, 2.0]
            .iter()
            .map(|k| (-k * k / 2.0).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        let taps = gaussian_kernel(1.0, 2);
        for (t, r) in taps.iter().zip(&raw) {
            assert!((t - r / total).abs() < 1e-12);
        }
        assert!((taps[2] - 0.402620).abs() < 1e-4, "{}", taps[2]);
    }

    #[test]
    fn blur_examples() {
        let flat = GrayImage::filled(9, 7, 77);
        for sigma in [0.1, 1.0, 2.0] {
            assert_eq!(gaussian_blur(&flat, sigma).unwrap(), flat);
        }
        let img = ramp(23, 11);
        let lo = *img.as_raw().iter().min().unwrap();
        let hi = *img.as_raw().iter().max().unwrap();
        let out = gaussian_blur(&img, 1.7).unwrap();
        assert!(out.as_raw().iter().all(|&v| v >= lo && v <= hi));
        assert!(gaussian_blur(&img, 0.0).is_err());
    }
}
