//! Deterministic synthetic scenes for tests, fixtures and timing probes.
//!
//! A scene is a smooth colored background, a few soft-edged colored
//! ellipses, and low-amplitude value-noise texture. Stereo pairs render the
//! same scene twice with a per-layer horizontal disparity, so occlusions and
//! the left/right color statistics differ slightly as in real footage.
//! Colors stay inside `[0.08, 0.92]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::ImageBuffer;

struct Blob {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    color: [f64; 3],
    disparity: f64,
}

struct Scene {
    base: [f64; 3],
    grad_x: [f64; 3],
    grad_y: [f64; 3],
    background_disparity: f64,
    blobs: Vec<Blob>,
    noise_seed: u64,
    width: f64,
    height: f64,
}

fn hash2(seed: u64, x: i64, y: i64) -> f64 {
    let mut h = seed
        ^ (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    h ^= h >> 33;
    h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    h ^= h >> 33;
    h = h.wrapping_mul(0xC4CE_B9FE_1A85_EC53);
    h ^= h >> 33;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Bilinear value noise in `[-1, 1]` with lattice spacing `cell`.
fn value_noise(seed: u64, x: f64, y: f64, cell: f64) -> f64 {
    let (gx, gy) = (x / cell, y / cell);
    let (x0, y0) = (gx.floor(), gy.floor());
    let (fx, fy) = (gx - x0, gy - y0);
    let (sx, sy) = (fx * fx * (3.0 - 2.0 * fx), fy * fy * (3.0 - 2.0 * fy));
    let (ix, iy) = (x0 as i64, y0 as i64);
    let v00 = hash2(seed, ix, iy);
    let v10 = hash2(seed, ix + 1, iy);
    let v01 = hash2(seed, ix, iy + 1);
    let v11 = hash2(seed, ix + 1, iy + 1);
    let top = v00 + sx * (v10 - v00);
    let bottom = v01 + sx * (v11 - v01);
    2.0 * (top + sy * (bottom - top)) - 1.0
}

impl Scene {
    fn new(width: usize, height: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let color = |rng: &mut ChaCha8Rng| -> [f64; 3] {
            [
                rng.random_range(0.2..0.8),
                rng.random_range(0.2..0.8),
                rng.random_range(0.2..0.8),
            ]
        };
        let base = color(&mut rng);
        let grad = |rng: &mut ChaCha8Rng| -> [f64; 3] {
            [
                rng.random_range(-0.15..0.15),
                rng.random_range(-0.15..0.15),
                rng.random_range(-0.15..0.15),
            ]
        };
        let grad_x = grad(&mut rng);
        let grad_y = grad(&mut rng);
        let (w, h) = (width as f64, height as f64);
        let n_blobs = rng.random_range(4..8);
        let mut blobs: Vec<Blob> = (0..n_blobs)
            .map(|_| Blob {
                cx: rng.random_range(0.0..w),
                cy: rng.random_range(0.0..h),
                rx: rng.random_range(0.08..0.3) * w,
                ry: rng.random_range(0.08..0.3) * h,
                color: color(&mut rng),
                disparity: rng.random_range(0.02..0.06) * w,
            })
            .collect();
        // far layers first so nearer blobs (larger disparity) paint over them
        blobs.sort_by(|a, b| a.disparity.total_cmp(&b.disparity));
        Self {
            base,
            grad_x,
            grad_y,
            background_disparity: 0.01 * w,
            blobs,
            noise_seed: rng.random(),
            width: w,
            height: h,
        }
    }

    /// Color at `(x, y)` of the view whose layers are shifted by
    /// `shift * disparity`.
    fn color(&self, x: f64, y: f64, shift: f64) -> [f64; 3] {
        let bx = x + shift * self.background_disparity;
        let (u, v) = (bx / self.width - 0.5, y / self.height - 0.5);
        let mut c = [0.0; 3];
        for k in 0..3 {
            c[k] = self.base[k] + self.grad_x[k] * u * 2.0 + self.grad_y[k] * v * 2.0;
        }
        let mut texture_x = bx;
        for blob in &self.blobs {
            let lx = x + shift * blob.disparity;
            let dx = (lx - blob.cx) / blob.rx;
            let dy = (y - blob.cy) / blob.ry;
            let r = (dx * dx + dy * dy).sqrt();
            // soft edge about two pixels wide
            let edge = 2.0 / blob.rx.min(blob.ry);
            let alpha = ((1.0 - r) / edge).clamp(0.0, 1.0);
            if alpha > 0.0 {
                let shade = 1.0 - 0.25 * r * r;
                for k in 0..3 {
                    c[k] = (1.0 - alpha) * c[k] + alpha * blob.color[k] * shade;
                }
                if alpha >= 0.5 {
                    texture_x = lx;
                }
            }
        }
        let n = 0.04 * value_noise(self.noise_seed, texture_x, y, 6.0)
            + 0.02 * value_noise(self.noise_seed ^ 0xABCD, texture_x, y, 2.0);
        c.map(|v| (v + n).clamp(0.08, 0.92))
    }
}

/// A single synthetic view.
pub fn natural(width: usize, height: usize, seed: u64) -> ImageBuffer {
    let scene = Scene::new(width, height, seed);
    ImageBuffer::from_fn(width, height, |x, y| scene.color(x as f64, y as f64, 0.0))
        .expect("non-zero dimensions")
}

/// Left and right views of one synthetic scene.
pub fn stereo_pair(width: usize, height: usize, seed: u64) -> (ImageBuffer, ImageBuffer) {
    let scene = Scene::new(width, height, seed);
    let left = ImageBuffer::from_fn(width, height, |x, y| scene.color(x as f64, y as f64, 0.0))
        .expect("non-zero dimensions");
    let right = ImageBuffer::from_fn(width, height, |x, y| scene.color(x as f64, y as f64, 1.0))
        .expect("non-zero dimensions");
    (left, right)
}
