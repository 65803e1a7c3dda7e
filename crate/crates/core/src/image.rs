//! Floating-point RGB images and stereo pairs.
//!
//! Samples are stored interleaved (`r, g, b, r, g, b, ...`) in row-major order
//! as `f64`, nominally in `[0, 1]`. 8-bit PNG files convert by `/255` on load
//! and by `x255` with round-half-up on save.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("zero-sized image {width}x{height}")));
        }
        if data.len() != width * height * CHANNELS {
            return Err(Error::InvalidImage(format!(
                "expected {} samples for {width}x{height}, got {}",
                width * height * CHANNELS,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    /// An image filled with one color.
    pub fn filled(width: usize, height: usize, color: [f64; 3]) -> Result<Self> {
        let data = std::iter::repeat_n(color, width * height).flatten().collect();
        Self::new(width, height, data)
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub(crate) fn from_pixels(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Self {
        debug_assert_eq!(pixels.len(), width * height);
        Self {
            width,
            height,
            data: pixels.into_iter().flatten().collect(),
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl ExactSizeIterator<Item = [f64; 3]> + Clone + '_ {
        self.data.chunks_exact(CHANNELS).map(|p| [p[0], p[1], p[2]])
    }

    /// Applies `f` to every pixel, producing a new image of the same size.
    pub fn map_pixels(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let data = self
            .data
            .chunks_exact(CHANNELS)
            .flat_map(|p| f([p[0], p[1], p[2]]))
            .collect();
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Applies `f` to every sample.
    pub fn map_samples(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn clamped(&self) -> Self {
        self.map_samples(|v| v.clamp(0.0, 1.0))
    }

    pub fn same_dims(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_same_dims(&self, other: &ImageBuffer) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: other.width,
                right_h: other.height,
            })
        }
    }

    /// One channel as a contiguous plane.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(CHANNELS).copied().collect()
    }

    /// Copies a `width x height` window starting at `(x0, y0)`, mirroring at
    /// the borders when the window extends past the image.
    pub fn crop_mirrored(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        let mirror = |v: usize, n: usize| {
            let period = 2 * n;
            let m = v % period;
            if m < n {
                m
            } else {
                period - 1 - m
            }
        };
        Self::from_fn(width, height, |x, y| {
            self.pixel(mirror(x0 + x, self.width), mirror(y0 + y, self.height))
        })
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let decoded = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
            .map_err(|source| Error::Codec {
                path: path.to_path_buf(),
                source,
            })?
            .to_rgb8();
        let (w, h) = decoded.dimensions();
        let data = decoded
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) / 255.0)
            .collect();
        Self::new(w as usize, h as usize, data)
    }

    /// Quantizes to 8 bits (clamp, `x255`, round half up).
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize_u8(v)).collect()
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        let encoder = image::codecs::png::PngEncoder::new(&mut out);
        image::ImageEncoder::write_image(
            encoder,
            &self.to_rgb8(),
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|source| Error::Codec {
            path: "<memory>".into(),
            source,
        })?;
        Ok(out)
    }

    /// Writes a PNG atomically: the image goes to a temporary sibling file
    /// which is then renamed over `path`.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.encode_png()?;
        let file_name = path
            .file_name()
            .ok_or_else(|| Error::InvalidParameter(format!("not a file path: {}", path.display())))?;
        let mut tmp_name = std::ffi::OsString::from(".");
        tmp_name.push(file_name);
        tmp_name.push(".tmp");
        let tmp = path.with_file_name(tmp_name);
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        };
        write().map_err(|e| {
            let _ = fs::remove_file(&tmp);
            Error::io(path, e)
        })
    }
}

#[inline]
pub fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Left and right views of one stereoscopic frame, plus the undistorted left
/// view when it is known.
#[derive(Debug, Clone, PartialEq)]
pub struct Stereopair {
    left: ImageBuffer,
    right: ImageBuffer,
    gt_left: Option<ImageBuffer>,
}

impl Stereopair {
    pub fn new(left: ImageBuffer, right: ImageBuffer) -> Result<Self> {
        left.check_same_dims(&right)?;
        Ok(Self {
            left,
            right,
            gt_left: None,
        })
    }

    pub fn with_ground_truth(left: ImageBuffer, right: ImageBuffer, gt_left: ImageBuffer) -> Result<Self> {
        left.check_same_dims(&right)?;
        left.check_same_dims(&gt_left)?;
        Ok(Self {
            left,
            right,
            gt_left: Some(gt_left),
        })
    }

    pub fn left(&self) -> &ImageBuffer {
        &self.left
    }

    pub fn right(&self) -> &ImageBuffer {
        &self.right
    }

    pub fn gt_left(&self) -> Option<&ImageBuffer> {
        self.gt_left.as_ref()
    }

    pub fn into_parts(self) -> (ImageBuffer, ImageBuffer, Option<ImageBuffer>) {
        (self.left, self.right, self.gt_left)
    }
}
