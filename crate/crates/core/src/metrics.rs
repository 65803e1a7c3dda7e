//! Full-reference quality metrics and the wall-clock timing protocol.
//!
//! PSNR is computed jointly over all RGB samples with peak 1.0. SSIM is the
//! single-scale Wang et al. index on Rec. 601 luma with an 11x11 Gaussian
//! window (sigma 1.5), `K1 = 0.01`, `K2 = 0.03`, dynamic range 1.0, averaged
//! over every fully covered window position.

use std::hint::black_box;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Peak signal-to-noise ratio in dB. Identical images give `f64::INFINITY`.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    a.check_same_dims(b)?;
    let mse = mse(a.data(), b.data());
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mse.log10())
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    // Neumaier-compensated sum; a constant error image gives its exact MSE
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let v = (x - y) * (x - y);
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    (sum + comp) / a.len() as f64
}

/// Rec. 601 luma plane.
pub fn luma(img: &ImageBuffer) -> Vec<f64> {
    img.pixels()
        .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
        .collect()
}

/// Normalized 1D Gaussian taps.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let mut k: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

fn check_ssim_input(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    a.check_same_dims(b)?;
    if a.width().min(a.height()) < SSIM_WINDOW {
        return Err(Error::TooSmall {
            width: a.width(),
            height: a.height(),
            min: SSIM_WINDOW,
        });
    }
    Ok(())
}

#[inline]
fn ssim_term(mu_x: f64, mu_y: f64, xx: f64, yy: f64, xy: f64) -> f64 {
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let var_x = xx - mu_x * mu_x;
    let var_y = yy - mu_y * mu_y;
    let cov = xy - mu_x * mu_y;
    ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)) / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2))
}

/// Valid-region separable filtering of a `width x height` plane.
fn filter_valid(plane: &[f64], width: usize, height: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let ow = width - n + 1;
    let oh = height - n + 1;
    let mut horiz = vec![0.0; ow * height];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..ow {
            horiz[y * ow + x] = k.iter().zip(&row[x..x + n]).map(|(w, v)| w * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k
                .iter()
                .enumerate()
                .map(|(i, w)| w * horiz[(y + i) * ow + x])
                .sum();
        }
    }
    (out, ow, oh)
}

/// Mean structural similarity over luma.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_ssim_input(a, b)?;
    let (w, h) = (a.width(), a.height());
    let x = luma(a);
    let y = luma(b);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let k = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA);
    let (mu_x, ow, oh) = filter_valid(&x, w, h, &k);
    let (mu_y, ..) = filter_valid(&y, w, h, &k);
    let (e_xx, ..) = filter_valid(&xx, w, h, &k);
    let (e_yy, ..) = filter_valid(&yy, w, h, &k);
    let (e_xy, ..) = filter_valid(&xy, w, h, &k);
    let total: f64 = (0..ow * oh)
        .map(|i| ssim_term(mu_x[i], mu_y[i], e_xx[i], e_yy[i], e_xy[i]))
        .sum();
    Ok(total / (ow * oh) as f64)
}

/// PSNR, SSIM and optional timing for one corrected image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub psnr_db: f64,
    pub ssim: f64,
    pub elapsed_ms: Option<f64>,
}

impl MetricsReport {
    pub fn compute(result: &ImageBuffer, ground_truth: &ImageBuffer) -> Result<Self> {
        Ok(Self {
            psnr_db: psnr(result, ground_truth)?,
            ssim: ssim(result, ground_truth)?,
            elapsed_ms: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    /// Every recorded run, in order, excluding the warm-up run.
    pub samples_ms: Vec<f64>,
    pub min_ms: f64,
}

/// Runs `f` `repeats` times and keeps the shortest wall-clock time.
///
/// With `warmup` an extra untimed run happens first. Anything `f` does is
/// timed, so file I/O must happen outside of it.
pub fn time_method<T>(mut f: impl FnMut() -> T, repeats: usize, warmup: bool) -> Timing {
    assert!(repeats >= 1, "at least one timed run is required");
    if warmup {
        black_box(f());
    }
    let samples_ms: Vec<f64> = (0..repeats)
        .map(|_| {
            let start = Instant::now();
            black_box(f());
            start.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    let min_ms = samples_ms.iter().copied().fold(f64::INFINITY, f64::min);
    Timing { samples_ms, min_ms }
}
