//! Synthetic color mismatches applied to the left view of a stereo pair:
//! brightness/contrast, gamma, and hue/saturation/value shifts.
//!
//! Every operator is the exact identity at its neutral parameters. Random
//! parameters come from a ChaCha8 stream seeded with a 64-bit integer, so a
//! given seed reproduces the same distortion on every platform.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::color::{hsv_to_rgb, rgb_to_hsv};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::image::{ImageBuffer, Stereopair};

/// `clamp((x - 0.5)(1 + contrast) + 0.5 + brightness)`, contrast pivoting on
/// mid-gray.
pub fn apply_brightness_contrast(img: &ImageBuffer, brightness: f64, contrast: f64) -> ImageBuffer {
    // x + c(x - 0.5) + b is algebraically the pivot form and exact at c = b = 0
    img.map_samples(|x| (x + contrast * (x - 0.5) + brightness).clamp(0.0, 1.0))
}

/// `x^gamma` per sample.
pub fn apply_gamma(img: &ImageBuffer, gamma: f64) -> ImageBuffer {
    img.map_samples(|x| x.max(0.0).powf(gamma))
}

/// Rotates hue by `hue_shift` degrees and scales saturation and value, both
/// clamped to `[0, 1]`.
pub fn apply_hsv_shift(img: &ImageBuffer, hue_shift: f64, sat_scale: f64, val_scale: f64) -> ImageBuffer {
    if hue_shift == 0.0 && sat_scale == 1.0 && val_scale == 1.0 {
        return img.clone();
    }
    img.map_pixels(|p| {
        let [h, s, v] = rgb_to_hsv(p);
        hsv_to_rgb([
            (h + hue_shift).rem_euclid(360.0),
            (s * sat_scale).clamp(0.0, 1.0),
            (v * val_scale).clamp(0.0, 1.0),
        ])
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DistortionOp {
    BrightnessContrast,
    Gamma,
    HueSaturationValue,
}

impl DistortionOp {
    pub const ALL: [DistortionOp; 3] = [
        DistortionOp::BrightnessContrast,
        DistortionOp::Gamma,
        DistortionOp::HueSaturationValue,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistortionOp::BrightnessContrast => "bc",
            DistortionOp::Gamma => "gamma",
            DistortionOp::HueSaturationValue => "hsv",
        }
    }

    /// Parameter names and their neutral values.
    pub fn params(self) -> &'static [(&'static str, f64)] {
        match self {
            DistortionOp::BrightnessContrast => &[("brightness", 0.0), ("contrast", 0.0)],
            DistortionOp::Gamma => &[("gamma", 1.0)],
            DistortionOp::HueSaturationValue => &[("hue_shift", 0.0), ("sat_scale", 1.0), ("val_scale", 1.0)],
        }
    }
}

impl fmt::Display for DistortionOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistortionOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DistortionOp::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown distortion `{s}` (bc, gamma, hsv)")))
    }
}

/// Parses a comma-separated operator list such as `bc,gamma,hsv`.
pub fn parse_ops(list: &str) -> Result<Vec<DistortionOp>> {
    let ops: Vec<DistortionOp> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if ops.is_empty() {
        return Err(Error::InvalidParameter("empty distortion list".into()));
    }
    Ok(ops)
}

/// One fully specified distortion.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionSpec {
    pub op: DistortionOp,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
}

impl DistortionSpec {
    pub fn new(op: DistortionOp, params: &[(&str, f64)], seed: u64) -> Result<Self> {
        let spec = Self {
            op,
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The neutral spec for `op`.
    pub fn identity(op: DistortionOp) -> Self {
        Self {
            op,
            params: op.params().iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            seed: 0,
        }
    }

    pub fn param(&self, name: &str) -> Result<f64> {
        self.params
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("{} needs `{name}`", self.op)))
    }

    /// Checks that exactly the operator's parameters are present and lie in
    /// their mathematical domain.
    pub fn validate(&self) -> Result<()> {
        for (name, _) in self.op.params() {
            let v = self.param(name)?;
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("`{name}` must be finite")));
            }
        }
        if let Some(extra) = self
            .params
            .keys()
            .find(|k| !self.op.params().iter().any(|(n, _)| n == k))
        {
            return Err(Error::InvalidParameter(format!(
                "{} has no parameter `{extra}`",
                self.op
            )));
        }
        let positive = |name: &str| -> Result<()> {
            if self.param(name)? <= 0.0 {
                return Err(Error::InvalidParameter(format!("`{name}` must be positive")));
            }
            Ok(())
        };
        match self.op {
            DistortionOp::BrightnessContrast => {
                if self.param("contrast")? <= -1.0 {
                    return Err(Error::InvalidParameter("`contrast` must exceed -1".into()));
                }
            }
            DistortionOp::Gamma => positive("gamma")?,
            DistortionOp::HueSaturationValue => {
                positive("sat_scale")?;
                positive("val_scale")?;
            }
        }
        Ok(())
    }

    pub fn apply(&self, img: &ImageBuffer) -> Result<ImageBuffer> {
        self.validate()?;
        Ok(match self.op {
            DistortionOp::BrightnessContrast => {
                apply_brightness_contrast(img, self.param("brightness")?, self.param("contrast")?)
            }
            DistortionOp::Gamma => apply_gamma(img, self.param("gamma")?),
            DistortionOp::HueSaturationValue => apply_hsv_shift(
                img,
                self.param("hue_shift")?,
                self.param("sat_scale")?,
                self.param("val_scale")?,
            ),
        })
    }

    /// Sidecar text: `op`, `seed`, then one line per parameter.
    pub fn to_sidecar(&self) -> String {
        let mut c = Config::new();
        c.set("op", self.op);
        c.set("seed", self.seed);
        for (k, v) in &self.params {
            c.set(k.as_str(), v);
        }
        c.to_text()
    }

    pub fn from_sidecar(text: &str) -> Result<Self> {
        let c = Config::parse(text)?;
        let op: DistortionOp = c
            .get_str("op")
            .ok_or_else(|| Error::Config("sidecar lacks `op`".into()))?
            .parse()?;
        let seed = c
            .get("seed")?
            .ok_or_else(|| Error::Config("sidecar lacks `seed`".into()))?;
        let mut params = BTreeMap::new();
        for key in c.keys().filter(|k| *k != "op" && *k != "seed") {
            params.insert(key.to_string(), c.get::<f64>(key)?.unwrap_or_default());
        }
        let spec = Self { op, params, seed };
        spec.validate()?;
        Ok(spec)
    }
}

/// Replaces the left view by its distorted version and keeps the original
/// as ground truth.
pub fn synthesize(pair: &Stereopair, spec: &DistortionSpec) -> Result<Stereopair> {
    if pair.gt_left().is_some() {
        return Err(Error::InvalidParameter(
            "pair already carries a ground-truth left view".into(),
        ));
    }
    let distorted = spec.apply(pair.left())?;
    Stereopair::with_ground_truth(distorted, pair.right().clone(), pair.left().clone())
}

/// Inclusive sampling range for one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRange {
    pub min: f64,
    pub max: f64,
}

impl ParamRange {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

/// Sampling ranges for every distortion parameter.
///
/// Defaults: brightness and contrast in `[-0.3, 0.3]`, gamma in
/// `[0.7, 1.4]`, hue shift in `[-20, 20]` degrees, saturation and value
/// scales in `[0.7, 1.3]`. Config keys are `distort.<param>.min` and
/// `distort.<param>.max`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionRanges {
    ranges: BTreeMap<&'static str, ParamRange>,
}

impl Default for DistortionRanges {
    fn default() -> Self {
        let ranges = [
            ("brightness", ParamRange::new(-0.3, 0.3)),
            ("contrast", ParamRange::new(-0.3, 0.3)),
            ("gamma", ParamRange::new(0.7, 1.4)),
            ("hue_shift", ParamRange::new(-20.0, 20.0)),
            ("sat_scale", ParamRange::new(0.7, 1.3)),
            ("val_scale", ParamRange::new(0.7, 1.3)),
        ]
        .into_iter()
        .collect();
        Self { ranges }
    }
}

impl DistortionRanges {
    pub fn from_config(config: &Config) -> Result<Self> {
        let mut out = Self::default();
        for (name, range) in out.ranges.iter_mut() {
            range.min = config.get_or(&format!("distort.{name}.min"), range.min)?;
            range.max = config.get_or(&format!("distort.{name}.max"), range.max)?;
            if !(range.min <= range.max) {
                return Err(Error::Config(format!("distort.{name}: min exceeds max")));
            }
        }
        Ok(out)
    }

    pub fn get(&self, param: &str) -> Option<ParamRange> {
        self.ranges.get(param).copied()
    }

    pub fn contains(&self, spec: &DistortionSpec) -> bool {
        spec.params
            .iter()
            .all(|(k, v)| self.ranges.get(k.as_str()).is_some_and(|r| r.contains(*v)))
    }

    /// Draws `op`'s parameters uniformly from their ranges.
    pub fn sample(&self, op: DistortionOp, seed: u64) -> DistortionSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = op
            .params()
            .iter()
            .map(|(name, _)| {
                let r = self.ranges[name];
                let v = if r.min == r.max {
                    r.min
                } else {
                    rng.random_range(r.min..=r.max)
                };
                (name.to_string(), v)
            })
            .collect();
        DistortionSpec { op, params, seed }
    }

    /// Picks one of `ops` and samples its parameters, all from `seed`.
    pub fn sample_any(&self, ops: &[DistortionOp], seed: u64) -> DistortionSpec {
        assert!(!ops.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let op = ops[rng.random_range(0..ops.len())];
        self.sample(op, seed)
    }
}
