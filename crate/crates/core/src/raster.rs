//! 8-bit grayscale rasters, sub-pixel sampling, padding and PNG I/O.
//!
//! Images are stored foreground-bright on a black background. Every read
//! outside the raster returns the background value 0.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};

use crate::error::{Error, Result};

/// Intensity used for padding and out-of-bounds reads.
pub const BACKGROUND: u8 = 0;

/// Row-major 8-bit grayscale image.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GrayImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl GrayImage {
    /// Background-filled image. Panics on a zero dimension.
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, BACKGROUND)
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be >= 1");
        GrayImage {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be >= 1, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} bytes for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut img = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                img.data[y * width + x] = f(x, y);
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    /// Pixel at signed coordinates, `outside` when off the raster.
    #[inline]
    pub fn get_or(&self, x: isize, y: isize, outside: u8) -> u8 {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            outside
        } else {
            self.data[y as usize * self.width + x as usize]
        }
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn map(&self, f: impl Fn(u8) -> u8) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Copy of the `w`x`h` window at (`x0`, `y0`). Panics when out of range.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> GrayImage {
        assert!(x0 + w <= self.width && y0 + h <= self.height);
        GrayImage::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    Nearest,
    #[default]
    Bilinear,
}

/// Samples `img` at continuous pixel coordinates (pixel centres on integers).
pub fn sample(img: &GrayImage, x: f64, y: f64, mode: Interpolation) -> f64 {
    match mode {
        Interpolation::Nearest => sample_nearest(img, x, y),
        Interpolation::Bilinear => sample_bilinear(img, x, y),
    }
}

pub fn sample_nearest(img: &GrayImage, x: f64, y: f64) -> f64 {
    let xi = (x + 0.5).floor() as isize;
    let yi = (y + 0.5).floor() as isize;
    img.get_or(xi, yi, BACKGROUND) as f64
}

/// Bilinear sample; neighbours outside the raster read as background.
pub fn sample_bilinear(img: &GrayImage, x: f64, y: f64) -> f64 {
    if !x.is_finite() || !y.is_finite() {
        return BACKGROUND as f64;
    }
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    // far outside; avoid isize overflow
    if x0 < -2.0 || y0 < -2.0 || x0 > img.width as f64 + 1.0 || y0 > img.height as f64 + 1.0 {
        return BACKGROUND as f64;
    }
    let (xi, yi) = (x0 as isize, y0 as isize);
    let p = |dx: isize, dy: isize| img.get_or(xi + dx, yi + dy, BACKGROUND) as f64;
    if fx == 0.0 && fy == 0.0 {
        return p(0, 0);
    }
    let top = p(0, 0) * (1.0 - fx) + p(1, 0) * fx;
    let bottom = p(0, 1) * (1.0 - fx) + p(1, 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Rounds half up and clamps to the 8-bit range.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Round-half-up for non-negative output dimensions.
#[inline]
pub fn round_dim(v: f64) -> usize {
    (v + 0.5).floor().max(0.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    TopLeft,
    /// Left-aligned, with the vertical slack split floor/ceil above/below.
    CenterVertical,
}

pub fn pad_to(img: &GrayImage, target_w: usize, target_h: usize, anchor: Anchor) -> Result<GrayImage> {
    pad_to_with(img, target_w, target_h, anchor, BACKGROUND)
}

/// As [`pad_to`] but with an arbitrary fill value.
pub fn pad_to_with(
    img: &GrayImage,
    target_w: usize,
    target_h: usize,
    anchor: Anchor,
    fill: u8,
) -> Result<GrayImage> {
    if target_w < img.width || target_h < img.height {
        return Err(Error::DimensionTooSmall {
            width: img.width,
            height: img.height,
            target_w,
            target_h,
        });
    }
    let top = match anchor {
        Anchor::TopLeft => 0,
        Anchor::CenterVertical => (target_h - img.height) / 2,
    };
    let mut out = GrayImage::filled(target_w, target_h, fill);
    for y in 0..img.height {
        let dst = (top + y) * target_w;
        out.data[dst..dst + img.width].copy_from_slice(img.row(y));
    }
    Ok(out)
}

/// Bilinear resize with centre-aligned sampling. Source coordinates are
/// clamped to the raster so the edges do not fade into the background.
pub fn resize(img: &GrayImage, new_w: usize, new_h: usize) -> GrayImage {
    assert!(new_w >= 1 && new_h >= 1);
    if (new_w, new_h) == img.dimensions() {
        return img.clone();
    }
    let sx = img.width as f64 / new_w as f64;
    let sy = img.height as f64 / new_h as f64;
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;
    let xs: Vec<f64> = (0..new_w)
        .map(|x| ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x))
        .collect();
    GrayImage::from_fn(new_w, new_h, |x, y| {
        let src_y = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        quantize(sample_bilinear(img, xs[x], src_y))
    })
}

/// Aspect-preserving rescale to `target_h` rows.
pub fn resize_height(img: &GrayImage, target_h: usize) -> Result<GrayImage> {
    if target_h == 0 {
        return Err(Error::param("target_h", 0.0, "must be >= 1"));
    }
    let new_w = round_dim(img.width as f64 * target_h as f64 / img.height as f64).max(1);
    Ok(resize(img, new_w, target_h))
}

/// How non-grayscale PNGs are handled on read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReadOptions {
    /// Convert 8-bit colour input with BT.601 luma weights instead of rejecting it.
    pub luma: bool,
    /// Invert intensities, for dark-on-light scans.
    pub invert: bool,
}

pub fn read_png(path: impl AsRef<Path>) -> Result<GrayImage> {
    read_png_with(path, ReadOptions::default())
}

pub fn read_png_with(path: impl AsRef<Path>, opts: ReadOptions) -> Result<GrayImage> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = ImageReader::with_format(BufReader::new(file), image::ImageFormat::Png);
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::Unsupported(u) => Error::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: u.to_string(),
        },
        other => Error::Codec(format!("{}: {other}", path.display())),
    })?;
    let unsupported = |detail: &str| Error::UnsupportedFormat {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    };
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data = match decoded {
        DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        DynamicImage::ImageLumaA8(buf) if opts.luma => {
            buf.pixels().map(|p| p.0[0]).collect()
        }
        DynamicImage::ImageRgb8(buf) if opts.luma => {
            buf.pixels().map(|p| bt601(p.0[0], p.0[1], p.0[2])).collect()
        }
        DynamicImage::ImageRgba8(buf) if opts.luma => {
            buf.pixels().map(|p| bt601(p.0[0], p.0[1], p.0[2])).collect()
        }
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => {
            return Err(unsupported("colour image; enable luma conversion to accept it"))
        }
        other => {
            return Err(unsupported(&format!(
                "{:?} is not an 8-bit raster",
                other.color()
            )))
        }
    };
    let img = GrayImage::from_raw(w, h, data)?;
    Ok(if opts.invert { img.map(|v| 255 - v) } else { img })
}

fn bt601(r: u8, g: u8, b: u8) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    PngEncoder::new(&mut buf)
        .write_image(
            &img.data,
            img.width as u32,
            img.height as u32,
            ExtendedColorType::L8,
        )
        .map_err(|e| Error::Codec(e.to_string()))?;
    Ok(buf)
}

pub fn write_png(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_png(img)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
