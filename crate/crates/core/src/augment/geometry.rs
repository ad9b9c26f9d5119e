//! Geometric transforms: rotation, shift, shear, downscaling and elastic
//! deformation. All of them sample bilinearly and fill vacated area with
//! the background value.

use crate::augment::filter::{convolve_separable, gaussian_kernel, Border};
use crate::error::{Error, Result};
use crate::raster::{pad_to, quantize, resize, round_dim, sample_bilinear, Anchor, GrayImage};
use crate::rng::RngStream;

pub const MAX_ROTATION_DEGREES: f64 = 45.0;
pub const MAX_SHEAR_DEGREES: f64 = 60.0;

/// Canvas that holds a `width`x`height` image rotated by `angle` degrees.
pub fn rotated_canvas(width: usize, height: usize, angle: f64) -> (usize, usize) {
    let t = angle.to_radians();
    let (c, s) = (t.cos().abs(), t.sin().abs());
    let (w, h) = (width as f64, height as f64);
    ((w * c + h * s).ceil() as usize, (w * s + h * c).ceil() as usize)
}

/// Rotates about the image centre, counter-clockwise on screen for positive
/// angles, growing the canvas so that nothing is clipped.
pub fn rotate_expand(img: &GrayImage, angle: f64) -> Result<GrayImage> {
    if !angle.is_finite() || angle.abs() > MAX_ROTATION_DEGREES {
        return Err(Error::param("angle", angle, "rotation must be within ±45 degrees"));
    }
    if angle == 0.0 {
        return Ok(img.clone());
    }
    let (w, h) = img.dimensions();
    let (nw, nh) = rotated_canvas(w, h, angle);
    let t = angle.to_radians();
    let (c, s) = (t.cos(), t.sin());
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let (ncx, ncy) = (nw as f64 / 2.0, nh as f64 / 2.0);
    Ok(GrayImage::from_fn(nw, nh, |x, y| {
        let u = x as f64 + 0.5 - ncx;
        let v = y as f64 + 0.5 - ncy;
        let sx = c * u - s * v + cx - 0.5;
        let sy = s * u + c * v + cy - 0.5;
        quantize(sample_bilinear(img, sx, sy))
    }))
}

/// Translates content by (`dx`, `dy`) pixels; the canvas keeps its size.
pub fn shift(img: &GrayImage, dx: f64, dy: f64) -> Result<GrayImage> {
    let (w, h) = img.dimensions();
    if !dx.is_finite() || dx.abs() >= w as f64 {
        return Err(Error::param("dx", dx, "shift must be smaller than the image width"));
    }
    if !dy.is_finite() || dy.abs() >= h as f64 {
        return Err(Error::param("dy", dy, "shift must be smaller than the image height"));
    }
    if dx == 0.0 && dy == 0.0 {
        return Ok(img.clone());
    }
    Ok(GrayImage::from_fn(w, h, |x, y| {
        quantize(sample_bilinear(img, x as f64 - dx, y as f64 - dy))
    }))
}

/// Horizontal shear about the bottom edge: rows are displaced by
/// `(h - y) * tan(angle)`, so positive angles lean the top to the right.
/// The canvas widens by `ceil(h * |tan(angle)|)`.
pub fn shear_horizontal(img: &GrayImage, angle: f64) -> Result<GrayImage> {
    if !angle.is_finite() || angle.abs() >= MAX_SHEAR_DEGREES {
        return Err(Error::param("angle", angle, "shear must be below 60 degrees"));
    }
    if angle == 0.0 {
        return Ok(img.clone());
    }
    let (w, h) = img.dimensions();
    let t = angle.to_radians().tan();
    let extra = (h as f64 * t.abs()).ceil() as usize;
    let base = if t < 0.0 { extra as f64 } else { 0.0 };
    Ok(GrayImage::from_fn(w + extra, h, |x, y| {
        let offset = (h as f64 - (y as f64 + 0.5)) * t + base;
        quantize(sample_bilinear(img, x as f64 - offset, y as f64))
    }))
}

/// Shrinks by `factor` in both axes and pads back to the original height,
/// centred vertically. The width is not padded back.
pub fn scale_down(img: &GrayImage, factor: f64) -> Result<GrayImage> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(Error::param("factor", factor, "scale factor must be in (0, 1]"));
    }
    if factor == 1.0 {
        return Ok(img.clone());
    }
    let (w, h) = img.dimensions();
    let nw = round_dim(w as f64 * factor).max(1);
    let nh = round_dim(h as f64 * factor).max(1);
    let content = resize(img, nw, nh);
    pad_to(&content, nw, h, Anchor::CenterVertical)
}

/// Random elastic deformation: two fields uniform on [-1, 1], smoothed by a
/// Gaussian of std `sigma` (truncated at 3 sigma, mirrored borders) and
/// scaled by `alpha`, displace the sampling grid.
pub fn elastic(img: &GrayImage, alpha: f64, sigma: f64, rng: &mut RngStream) -> Result<GrayImage> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::param("alpha", alpha, "alpha must be >= 0"));
    }
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::param("sigma", sigma, "sigma must be > 0"));
    }
    let (w, h) = img.dimensions();
    let n = w * h;
    let raw_x: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let raw_y: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
    if alpha == 0.0 {
        return Ok(img.clone());
    }
    let kernel = gaussian_kernel(sigma, (3.0 * sigma).ceil() as usize);
    let field_x = convolve_separable(&raw_x, w, h, &kernel, Border::Reflect);
    let field_y = convolve_separable(&raw_y, w, h, &kernel, Border::Reflect);
    Ok(GrayImage::from_fn(w, h, |x, y| {
        let i = y * w + x;
        let sx = x as f64 + alpha * field_x[i];
        let sy = y as f64 + alpha * field_y[i];
        quantize(sample_bilinear(img, sx, sy))
    }))
}
