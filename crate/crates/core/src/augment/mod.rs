//! Augmentation presets, parameter sampling and composition.
//!
//! Applying a config is split in two steps: [`AugmentConfig::sample`] draws
//! every random quantity into a [`Draw`], and [`Draw::apply`] is a pure
//! function of the image and the draw. The draw doubles as the logged trace.

pub mod config;
mod filter;
pub mod geometry;
pub mod intensity;
pub mod morphology;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GrayImage;
use crate::rng::RngStream;

pub use config::{
    all_presets, load_config, parse_config, preset, preset_rank, AugmentConfig, AugmentKind,
    IntRange, Range, BASELINE, PRESET_NAMES,
};
pub use filter::gaussian_kernel;
pub use geometry::{elastic, rotate_expand, rotated_canvas, scale_down, shear_horizontal, shift};
pub use intensity::{gaussian_blur, gaussian_noise, mask_columns, pixel_dropout};
pub use morphology::{morphology, MorphOp, SeShape, StructuringElement};

/// Name of the composite of the three best single presets.
pub const COMBINED_TOP3: &str = "combined-top3";
pub const COMBINED_TOP3_MEMBERS: [&str; 3] = ["rot1.5", "shift", "scale75"];

/// Concrete parameters drawn for one application of a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Draw {
    Identity,
    Rotate { angle: f64 },
    Morphology { morph: MorphOp, shape: SeShape, size: u32 },
    Shift { dx: f64, dy: f64 },
    Elastic { alpha: f64, sigma: f64, field_seed: u64 },
    Shear { angle: f64 },
    Scale { factor: f64 },
    MaskColumns { rate: f64, columns: Vec<usize> },
    Dropout { rate: f64, mask_seed: u64 },
    Noise { sigma: f64, noise_seed: u64 },
    Blur { sigma: f64 },
}

/// A draw tagged with the config it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledParams {
    pub config: String,
    #[serde(flatten)]
    pub draw: Draw,
}

impl Draw {
    pub fn apply(&self, img: &GrayImage) -> Result<GrayImage> {
        match *self {
            Draw::Identity => Ok(img.clone()),
            Draw::Rotate { angle } => rotate_expand(img, angle),
            Draw::Morphology { morph, shape, size } => {
                morphology(img, morph, &StructuringElement::new(shape, size))
            }
            Draw::Shift { dx, dy } => shift(img, dx, dy),
            Draw::Elastic {
                alpha,
                sigma,
                field_seed,
            } => elastic(img, alpha, sigma, &mut RngStream::new(field_seed)),
            Draw::Shear { angle } => shear_horizontal(img, angle),
            Draw::Scale { factor } => scale_down(img, factor),
            Draw::MaskColumns { ref columns, .. } => Ok(intensity::zero_columns(img, columns)),
            Draw::Dropout { rate, mask_seed } => {
                pixel_dropout(img, rate, &mut RngStream::new(mask_seed))
            }
            Draw::Noise { sigma, noise_seed } => {
                gaussian_noise(img, sigma, &mut RngStream::new(noise_seed))
            }
            Draw::Blur { sigma } => gaussian_blur(img, sigma),
        }
    }

    /// Whether the draw moves content (and so can introduce padding).
    pub fn is_geometric(&self) -> bool {
        matches!(
            self,
            Draw::Rotate { .. }
                | Draw::Shift { .. }
                | Draw::Elastic { .. }
                | Draw::Shear { .. }
                | Draw::Scale { .. }
        )
    }
}

impl AugmentConfig {
    /// Draws parameters for an image of the given width.
    pub fn sample(&self, width: usize, rng: &mut RngStream) -> Result<Draw> {
        self.validate()?;
        Ok(match &self.kind {
            AugmentKind::None => Draw::Identity,
            AugmentKind::RotationRandom { degrees } => Draw::Rotate {
                angle: rng.uniform(degrees.low, degrees.high),
            },
            AugmentKind::RotationFixed { degrees } => Draw::Rotate { angle: *degrees },
            AugmentKind::Dilation { shape, size } => Draw::Morphology {
                morph: MorphOp::Dilate,
                shape: *shape,
                size: rng.int_inclusive(size.low, size.high),
            },
            AugmentKind::Erosion { shape, size } => Draw::Morphology {
                morph: MorphOp::Erode,
                shape: *shape,
                size: rng.int_inclusive(size.low, size.high),
            },
            AugmentKind::Shift {
                horizontal,
                vertical,
            } => {
                let dx = rng.uniform(horizontal.low, horizontal.high);
                let dy = rng.uniform(vertical.low, vertical.high);
                Draw::Shift { dx, dy }
            }
            AugmentKind::Elastic { alpha, sigma } => {
                let a = rng.uniform(alpha.low, alpha.high);
                let s = rng.uniform(sigma.low, sigma.high);
                Draw::Elastic {
                    alpha: a,
                    sigma: s,
                    field_seed: rand::RngCore::next_u64(rng),
                }
            }
            AugmentKind::Shear { degrees } => Draw::Shear {
                angle: rng.uniform(degrees.low, degrees.high),
            },
            AugmentKind::Scale { factor } => Draw::Scale {
                factor: rng.uniform(factor.low, factor.high),
            },
            AugmentKind::ColumnMask { rate } => Draw::MaskColumns {
                rate: *rate,
                columns: intensity::choose_columns(width, *rate, rng)?,
            },
            AugmentKind::PixelDropout { rate } => {
                let r = rng.uniform(rate.low, rate.high);
                Draw::Dropout {
                    rate: r,
                    mask_seed: rand::RngCore::next_u64(rng),
                }
            }
            AugmentKind::GaussianNoise { sigma } => {
                let s = sigma[rng.index(sigma.len())];
                Draw::Noise {
                    sigma: s,
                    noise_seed: rand::RngCore::next_u64(rng),
                }
            }
            AugmentKind::GaussianBlur { sigma } => Draw::Blur {
                sigma: rng.uniform(sigma.low, sigma.high),
            },
        })
    }

    /// Draws at the ends of each sampling range, for previews.
    pub fn extremes(&self, width: usize, rng: &mut RngStream) -> Result<Vec<Draw>> {
        self.validate()?;
        let seed = |rng: &mut RngStream| rand::RngCore::next_u64(rng);
        Ok(match &self.kind {
            AugmentKind::None => vec![Draw::Identity],
            AugmentKind::RotationRandom { degrees } => vec![
                Draw::Rotate { angle: degrees.low },
                Draw::Rotate { angle: degrees.high },
            ],
            AugmentKind::RotationFixed { degrees } => vec![Draw::Rotate { angle: *degrees }],
            AugmentKind::Dilation { shape, size } | AugmentKind::Erosion { shape, size } => {
                let morph = if matches!(self.kind, AugmentKind::Dilation { .. }) {
                    MorphOp::Dilate
                } else {
                    MorphOp::Erode
                };
                vec![
                    Draw::Morphology { morph, shape: *shape, size: size.low },
                    Draw::Morphology { morph, shape: *shape, size: size.high },
                ]
            }
            AugmentKind::Shift {
                horizontal,
                vertical,
            } => vec![
                Draw::Shift { dx: horizontal.low, dy: vertical.low },
                Draw::Shift { dx: horizontal.high, dy: vertical.high },
            ],
            AugmentKind::Elastic { alpha, sigma } => {
                let s = seed(rng);
                vec![
                    Draw::Elastic { alpha: alpha.low, sigma: sigma.low, field_seed: s },
                    Draw::Elastic { alpha: alpha.high, sigma: sigma.high, field_seed: s },
                ]
            }
            AugmentKind::Shear { degrees } => vec![
                Draw::Shear { angle: degrees.low },
                Draw::Shear { angle: degrees.high },
            ],
            AugmentKind::Scale { factor } => vec![
                Draw::Scale { factor: factor.low },
                Draw::Scale { factor: factor.high },
            ],
            AugmentKind::ColumnMask { rate } => vec![Draw::MaskColumns {
                rate: *rate,
                columns: intensity::choose_columns(width, *rate, rng)?,
            }],
            AugmentKind::PixelDropout { rate } => {
                let s = seed(rng);
                vec![
                    Draw::Dropout { rate: rate.low, mask_seed: s },
                    Draw::Dropout { rate: rate.high, mask_seed: s },
                ]
            }
            AugmentKind::GaussianNoise { sigma } => {
                let s = seed(rng);
                sigma
                    .iter()
                    .map(|&sigma| Draw::Noise { sigma, noise_seed: s })
                    .collect()
            }
            AugmentKind::GaussianBlur { sigma } => vec![
                Draw::Blur { sigma: sigma.low },
                Draw::Blur { sigma: sigma.high },
            ],
        })
    }
}

/// Draws parameters from `config` and applies them.
pub fn sample_and_apply(
    config: &AugmentConfig,
    img: &GrayImage,
    rng: &mut RngStream,
) -> Result<(GrayImage, SampledParams)> {
    let draw = config.sample(img.width(), rng)?;
    let out = draw.apply(img)?;
    Ok((
        out,
        SampledParams {
            config: config.name.clone(),
            draw,
        },
    ))
}

/// Applies each config in order, each with independent probability `prob`.
pub fn compose(
    configs: &[AugmentConfig],
    prob: f64,
    img: &GrayImage,
    rng: &mut RngStream,
) -> Result<(GrayImage, Vec<SampledParams>)> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::param("prob", prob, "probability must be in [0, 1]"));
    }
    let mut current = img.clone();
    let mut trace = Vec::new();
    for cfg in configs {
        if rng.bernoulli(prob) {
            let (next, params) = sample_and_apply(cfg, &current, rng)?;
            current = next;
            trace.push(params);
        }
    }
    Ok((current, trace))
}

/// What the augment command applies to each image.
#[derive(Debug, Clone, PartialEq)]
pub enum Pipeline {
    /// One config, applied to an image when its coin comes up.
    Single(AugmentConfig),
    /// Several configs, each with its own coin.
    Sequence {
        name: String,
        configs: Vec<AugmentConfig>,
    },
}

impl Pipeline {
    /// Resolves a preset name, `combined-top3`, or a path to a custom config.
    pub fn resolve(name: &str) -> Result<Pipeline> {
        if name == COMBINED_TOP3 {
            return Ok(Pipeline::Sequence {
                name: name.to_string(),
                configs: COMBINED_TOP3_MEMBERS
                    .iter()
                    .map(|n| preset(n))
                    .collect::<Result<_>>()?,
            });
        }
        match preset(name) {
            Ok(cfg) => Ok(Pipeline::Single(cfg)),
            Err(e) => {
                let path = std::path::Path::new(name);
                if path.is_file() {
                    load_config(path).map(Pipeline::Single)
                } else {
                    Err(e)
                }
            }
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Pipeline::Single(cfg) => &cfg.name,
            Pipeline::Sequence { name, .. } => name,
        }
    }

    /// Applies the pipeline with rate `prob`: a single config gets one coin,
    /// a sequence gets one coin per member.
    pub fn apply(
        &self,
        img: &GrayImage,
        prob: f64,
        rng: &mut RngStream,
    ) -> Result<(GrayImage, Vec<SampledParams>)> {
        match self {
            Pipeline::Single(cfg) => compose(std::slice::from_ref(cfg), prob, img, rng),
            Pipeline::Sequence { configs, .. } => compose(configs, prob, img, rng),
        }
    }
}
