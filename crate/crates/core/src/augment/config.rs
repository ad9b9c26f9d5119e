//! Augmentation configurations and the named presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::geometry::{MAX_ROTATION_DEGREES, MAX_SHEAR_DEGREES};
use crate::augment::morphology::SeShape;
use crate::error::{Error, Result};

/// Closed real interval, written `[low, high]` in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Range {
    pub low: f64,
    pub high: f64,
}

impl Range {
    pub const fn new(low: f64, high: f64) -> Self {
        Range { low, high }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.low && v <= self.high
    }

    fn check(&self, what: &str) -> Result<()> {
        if !self.low.is_finite() || !self.high.is_finite() || self.low > self.high {
            return Err(Error::Config(format!(
                "{what}: range [{}, {}] is not ordered",
                self.low, self.high
            )));
        }
        Ok(())
    }
}

impl From<[f64; 2]> for Range {
    fn from([low, high]: [f64; 2]) -> Self {
        Range { low, high }
    }
}

impl From<Range> for [f64; 2] {
    fn from(r: Range) -> Self {
        [r.low, r.high]
    }
}

/// Closed integer interval `[low..high]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct IntRange {
    pub low: u32,
    pub high: u32,
}

impl IntRange {
    pub const fn new(low: u32, high: u32) -> Self {
        IntRange { low, high }
    }

    pub fn contains(&self, v: u32) -> bool {
        v >= self.low && v <= self.high
    }
}

impl From<[u32; 2]> for IntRange {
    fn from([low, high]: [u32; 2]) -> Self {
        IntRange { low, high }
    }
}

impl From<IntRange> for [u32; 2] {
    fn from(r: IntRange) -> Self {
        [r.low, r.high]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AugmentKind {
    None,
    RotationRandom { degrees: Range },
    RotationFixed { degrees: f64 },
    Dilation { shape: SeShape, size: IntRange },
    Erosion { shape: SeShape, size: IntRange },
    Shift { horizontal: Range, vertical: Range },
    Elastic { alpha: Range, sigma: Range },
    Shear { degrees: Range },
    Scale { factor: Range },
    ColumnMask { rate: f64 },
    PixelDropout { rate: Range },
    GaussianNoise { sigma: Vec<f64> },
    GaussianBlur { sigma: Range },
}

impl AugmentKind {
    pub fn label(&self) -> &'static str {
        match self {
            AugmentKind::None => "none",
            AugmentKind::RotationRandom { .. } => "rotation_random",
            AugmentKind::RotationFixed { .. } => "rotation_fixed",
            AugmentKind::Dilation { .. } => "dilation",
            AugmentKind::Erosion { .. } => "erosion",
            AugmentKind::Shift { .. } => "shift",
            AugmentKind::Elastic { .. } => "elastic",
            AugmentKind::Shear { .. } => "shear",
            AugmentKind::Scale { .. } => "scale",
            AugmentKind::ColumnMask { .. } => "column_mask",
            AugmentKind::PixelDropout { .. } => "pixel_dropout",
            AugmentKind::GaussianNoise { .. } => "gaussian_noise",
            AugmentKind::GaussianBlur { .. } => "gaussian_blur",
        }
    }
}

/// A named augmentation with its sampling ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub name: String,
    #[serde(flatten)]
    pub kind: AugmentKind,
}

/// Preset names in table order, baseline first.
pub const PRESET_NAMES: [&str; 23] = [
    "baseline",
    "rot1.5",
    "rot5",
    "rot10",
    "positive",
    "negative",
    "rot+2",
    "rot-2",
    "square-dilation",
    "disk-dilation",
    "square-erosion",
    "disk-erosion",
    "shift",
    "elastic",
    "shear",
    "shear30",
    "scale75",
    "scale95",
    "mask10",
    "mask40",
    "noise",
    "dropout",
    "blur",
];

pub const BASELINE: &str = "baseline";

/// Position of a preset in table order.
pub fn preset_rank(name: &str) -> Option<usize> {
    PRESET_NAMES.iter().position(|&n| n == name)
}

pub fn preset(name: &str) -> Result<AugmentConfig> {
    use AugmentKind::*;
    let kind = match name {
        "baseline" => None,
        "rot1.5" => RotationRandom { degrees: Range::new(-1.5, 1.5) },
        "rot5" => RotationRandom { degrees: Range::new(-5.0, 5.0) },
        "rot10" => RotationRandom { degrees: Range::new(-10.0, 10.0) },
        "positive" => RotationRandom { degrees: Range::new(0.0, 1.5) },
        "negative" => RotationRandom { degrees: Range::new(-1.5, 0.0) },
        "rot+2" => RotationFixed { degrees: 2.0 },
        "rot-2" => RotationFixed { degrees: -2.0 },
        "square-dilation" => Dilation { shape: SeShape::Square, size: IntRange::new(1, 4) },
        "disk-dilation" => Dilation { shape: SeShape::Disk, size: IntRange::new(1, 4) },
        "square-erosion" => Erosion { shape: SeShape::Square, size: IntRange::new(1, 3) },
        "disk-erosion" => Erosion { shape: SeShape::Disk, size: IntRange::new(1, 3) },
        "shift" => Shift {
            horizontal: Range::new(0.0, 15.0),
            vertical: Range::new(-3.5, 3.5),
        },
        "elastic" => Elastic {
            alpha: Range::new(16.0, 20.0),
            sigma: Range::new(5.0, 7.0),
        },
        "shear" => Shear { degrees: Range::new(-5.0, 30.0) },
        "shear30" => Shear { degrees: Range::new(-30.0, 30.0) },
        "scale75" => Scale { factor: Range::new(0.75, 1.0) },
        "scale95" => Scale { factor: Range::new(0.95, 1.0) },
        "mask10" => ColumnMask { rate: 0.10 },
        "mask40" => ColumnMask { rate: 0.40 },
        "noise" => GaussianNoise { sigma: vec![0.08, 0.12, 0.18] },
        "dropout" => PixelDropout { rate: Range::new(0.0, 0.2) },
        "blur" => GaussianBlur { sigma: Range::new(0.1, 2.0) },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(AugmentConfig {
        name: name.to_string(),
        kind,
    })
}

pub fn all_presets() -> Vec<AugmentConfig> {
    PRESET_NAMES.iter().map(|n| preset(n).unwrap()).collect()
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("{}: {msg}", self.name)));
        match &self.kind {
            AugmentKind::None => Ok(()),
            AugmentKind::RotationRandom { degrees } => {
                degrees.check("degrees")?;
                if degrees.low.abs().max(degrees.high.abs()) > MAX_ROTATION_DEGREES {
                    return bad("rotation beyond ±45 degrees".into());
                }
                Ok(())
            }
            AugmentKind::RotationFixed { degrees } => {
                if !degrees.is_finite() || degrees.abs() > MAX_ROTATION_DEGREES {
                    return bad("rotation beyond ±45 degrees".into());
                }
                Ok(())
            }
            AugmentKind::Dilation { shape, size } | AugmentKind::Erosion { shape, size } => {
                if *shape == SeShape::Custom {
                    return bad("SE shape must be square or disk".into());
                }
                if size.low < 1 || size.low > size.high {
                    return bad(format!("SE sizes [{}..{}] must be positive and ordered", size.low, size.high));
                }
                Ok(())
            }
            AugmentKind::Shift {
                horizontal,
                vertical,
            } => {
                horizontal.check("horizontal")?;
                vertical.check("vertical")
            }
            AugmentKind::Elastic { alpha, sigma } => {
                alpha.check("alpha")?;
                sigma.check("sigma")?;
                if alpha.low < 0.0 || sigma.low <= 0.0 {
                    return bad("alpha must be >= 0 and sigma > 0".into());
                }
                Ok(())
            }
            AugmentKind::Shear { degrees } => {
                degrees.check("degrees")?;
                if degrees.low.abs().max(degrees.high.abs()) >= MAX_SHEAR_DEGREES {
                    return bad("shear must stay below 60 degrees".into());
                }
                Ok(())
            }
            AugmentKind::Scale { factor } => {
                factor.check("factor")?;
                if factor.low <= 0.0 || factor.high > 1.0 {
                    return bad("scale factors must lie in (0, 1]".into());
                }
                Ok(())
            }
            AugmentKind::ColumnMask { rate } => {
                if !(0.0..=1.0).contains(rate) {
                    return bad("rate must lie in [0, 1]".into());
                }
                Ok(())
            }
            AugmentKind::PixelDropout { rate } => {
                rate.check("rate")?;
                if rate.low < 0.0 || rate.high > 1.0 {
                    return bad("rate must lie in [0, 1]".into());
                }
                Ok(())
            }
            AugmentKind::GaussianNoise { sigma } => {
                if sigma.is_empty() || sigma.iter().any(|s| !s.is_finite() || *s < 0.0) {
                    return bad("noise sigmas must be a non-empty list of values >= 0".into());
                }
                Ok(())
            }
            AugmentKind::GaussianBlur { sigma } => {
                sigma.check("sigma")?;
                if sigma.low <= 0.0 {
                    return bad("blur sigma must be > 0".into());
                }
                Ok(())
            }
        }
    }
}

/// Parses a custom configuration, e.g.
///
/// ```toml
/// name = "rot3"
/// kind = "rotation_random"
/// degrees = [-3, 3]
/// ```
pub fn parse_config(text: &str) -> Result<AugmentConfig> {
    let cfg: AugmentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<AugmentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
