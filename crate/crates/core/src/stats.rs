//! First and second color moments of an image.

use crate::image::ImageBuffer;
use crate::linalg::{Mat3, SymEigen, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorStats {
    pub mean: Vec3,
    /// Population covariance (normalized by `N`).
    pub cov: Mat3,
    pub std: Vec3,
}

impl ColorStats {
    pub fn min_eigenvalue(&self) -> f64 {
        SymEigen::new(&self.cov).min_value()
    }
}

/// Per-channel mean and population covariance of the image's pixels.
///
/// Uses a two-pass scheme (mean first, then centered products) so a constant
/// image yields an exactly zero covariance.
pub fn compute_stats(img: &ImageBuffer) -> ColorStats {
    compute_stats_of(img.pixels(), img.pixel_count())
}

pub(crate) fn compute_stats_of<I>(pixels: I, n: usize) -> ColorStats
where
    I: Iterator<Item = [f64; 3]> + Clone,
{
    let inv_n = 1.0 / n as f64;
    let mut sum = [0.0; 3];
    for p in pixels.clone() {
        for c in 0..3 {
            sum[c] += p[c];
        }
    }
    let mean = sum.map(|s| s * inv_n);
    let mut acc = [0.0; 6];
    for p in pixels {
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        acc[0] += d[0] * d[0];
        acc[1] += d[0] * d[1];
        acc[2] += d[0] * d[2];
        acc[3] += d[1] * d[1];
        acc[4] += d[1] * d[2];
        acc[5] += d[2] * d[2];
    }
    let acc = acc.map(|v| v * inv_n);
    let cov = [
        [acc[0], acc[1], acc[2]],
        [acc[1], acc[3], acc[4]],
        [acc[2], acc[4], acc[5]],
    ];
    let std = [acc[0].sqrt(), acc[3].sqrt(), acc[5].sqrt()];
    ColorStats { mean, cov, std }
}
