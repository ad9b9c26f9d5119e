//! Grayscale dilation and erosion with flat structuring elements.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeShape {
    Square,
    Disk,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MorphOp {
    Dilate,
    Erode,
}

/// A flat neighbourhood given as offsets from the anchor pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    shape: SeShape,
    size: u32,
    offsets: Vec<(isize, isize)>,
}

impl StructuringElement {
    /// Square of side `width`. Even widths anchor at `(width - 1) / 2`, so
    /// the extra row and column fall on the positive side.
    pub fn square(width: u32) -> Self {
        assert!(width >= 1, "square SE width must be >= 1");
        let a = ((width - 1) / 2) as isize;
        let w = width as isize;
        let offsets = (0..w)
            .flat_map(|dy| (0..w).map(move |dx| (dx - a, dy - a)))
            .collect();
        StructuringElement {
            shape: SeShape::Square,
            size: width,
            offsets,
        }
    }

    /// All offsets with `dx^2 + dy^2 <= radius^2`.
    pub fn disk(radius: u32) -> Self {
        let r = radius as isize;
        let offsets = (-r..=r)
            .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
            .filter(|&(dx, dy)| dx * dx + dy * dy <= r * r)
            .collect();
        StructuringElement {
            shape: SeShape::Disk,
            size: radius,
            offsets,
        }
    }

    pub fn new(shape: SeShape, size: u32) -> Self {
        match shape {
            SeShape::Square => Self::square(size),
            SeShape::Disk => Self::disk(size),
            SeShape::Custom => panic!("custom structuring elements need explicit offsets"),
        }
    }

    pub fn from_offsets(mut offsets: Vec<(isize, isize)>) -> Self {
        offsets.sort_unstable_by_key(|&(dx, dy)| (dy, dx));
        offsets.dedup();
        StructuringElement {
            shape: SeShape::Custom,
            size: 0,
            offsets,
        }
    }

    /// Point reflection through the anchor.
    pub fn reflected(&self) -> Self {
        StructuringElement {
            shape: self.shape,
            size: self.size,
            offsets: self.offsets.iter().map(|&(dx, dy)| (-dx, -dy)).collect(),
        }
    }

    pub fn shape(&self) -> SeShape {
        self.shape
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn offsets(&self) -> &[(isize, isize)] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn contains(&self, offset: (isize, isize)) -> bool {
        self.offsets.contains(&offset)
    }
}

/// `dilate(f)(p) = max f(p - b)`, reading 0 outside the image;
/// `erode(f)(p) = min f(p + b)`, reading 255 outside.
pub fn morphology(img: &GrayImage, op: MorphOp, se: &StructuringElement) -> Result<GrayImage> {
    if se.is_empty() {
        return Err(Error::Config("structuring element is empty".into()));
    }
    let (w, h) = img.dimensions();
    let out = match op {
        MorphOp::Dilate => GrayImage::from_fn(w, h, |x, y| {
            se.offsets
                .iter()
                .map(|&(dx, dy)| img.get_or(x as isize - dx, y as isize - dy, 0))
                .max()
                .unwrap()
        }),
        MorphOp::Erode => GrayImage::from_fn(w, h, |x, y| {
            se.offsets
                .iter()
                .map(|&(dx, dy)| img.get_or(x as isize + dx, y as isize + dy, 255))
                .min()
                .unwrap()
        }),
    };
    Ok(out)
}

pub fn dilate(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    morphology(img, MorphOp::Dilate, se).expect("non-empty SE")
}

pub fn erode(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    morphology(img, MorphOp::Erode, se).expect("non-empty SE")
}
