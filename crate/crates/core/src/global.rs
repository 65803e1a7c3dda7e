//! Global color transfer: one affine color map estimated from image moments
//! and applied to every pixel of the target view.
//!
//! - Reinhard: per-channel mean/std matching in CIELAB.
//! - Xiao: full-covariance matching in RGB through the eigen (SVD) factors of
//!   both covariances (scale, rotation, shift of the pixel cloud).
//! - Pitié linear: covariance fitting `T Σ_t Tᵀ = Σ_r` with the map taken from
//!   a Cholesky factorization, the symmetric square root, or the
//!   Monge-Kantorovitch optimal-transport solution.
//!
//! Every map is applied pre-clamp in its working space; clamping to `[0, 1]`
//! happens once, after conversion back to RGB.

use std::fmt;
use std::str::FromStr;

use crate::color;
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::linalg::{self, Mat3, SymEigen, Vec3};
use crate::stats::{compute_stats, ColorStats};

/// Smallest covariance eigenvalue accepted for the target view.
pub const MIN_EIGENVALUE: f64 = 1e-8;

/// Below this per-channel std Reinhard only shifts the mean.
pub const REINHARD_MIN_STD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorSpace {
    Rgb,
    Lab,
}

/// `p -> matrix * p + offset`, evaluated in `space`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearColorMap {
    pub matrix: Mat3,
    pub offset: Vec3,
    pub space: ColorSpace,
}

impl LinearColorMap {
    /// The map `p -> T (p - mean_t) + mean_r`.
    pub fn from_moments(matrix: Mat3, target_mean: Vec3, reference_mean: Vec3, space: ColorSpace) -> Self {
        let shifted = linalg::mul_vec(&matrix, target_mean);
        let offset = [
            reference_mean[0] - shifted[0],
            reference_mean[1] - shifted[1],
            reference_mean[2] - shifted[2],
        ];
        Self {
            matrix,
            offset,
            space,
        }
    }

    #[inline]
    pub fn apply_pixel(&self, p: Vec3) -> Vec3 {
        let m = linalg::mul_vec(&self.matrix, p);
        [
            m[0] + self.offset[0],
            m[1] + self.offset[1],
            m[2] + self.offset[2],
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.matrix
            .iter()
            .flatten()
            .chain(&self.offset)
            .all(|v| v.is_finite())
    }

    /// Applies the map to an RGB image and returns the result in the map's
    /// working space, without clamping.
    pub fn apply_in_space(&self, rgb: &ImageBuffer) -> ImageBuffer {
        match self.space {
            ColorSpace::Rgb => rgb.map_pixels(|p| self.apply_pixel(p)),
            ColorSpace::Lab => rgb.map_pixels(|p| self.apply_pixel(color::rgb_to_lab_pixel(p))),
        }
    }

    /// Applies the map to an RGB image and returns clamped RGB.
    pub fn apply(&self, rgb: &ImageBuffer) -> ImageBuffer {
        match self.space {
            ColorSpace::Rgb => rgb.map_pixels(|p| self.apply_pixel(p).map(|v| v.clamp(0.0, 1.0))),
            ColorSpace::Lab => {
                rgb.map_pixels(|p| color::lab_to_rgb_pixel(self.apply_pixel(color::rgb_to_lab_pixel(p))))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decomposition {
    Cholesky,
    Sqrt,
    MongeKantorovitch,
}

impl Decomposition {
    pub const ALL: [Decomposition; 3] = [
        Decomposition::Cholesky,
        Decomposition::Sqrt,
        Decomposition::MongeKantorovitch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Decomposition::Cholesky => "cholesky",
            Decomposition::Sqrt => "sqrt",
            Decomposition::MongeKantorovitch => "mk",
        }
    }
}

impl fmt::Display for Decomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Decomposition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Decomposition::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown decomposition `{s}`")))
    }
}

/// Rejects a singular target covariance.
fn check_target(cov: &Mat3) -> Result<SymEigen> {
    let eig = SymEigen::new(cov);
    if !(eig.min_value() >= MIN_EIGENVALUE) {
        return Err(Error::NearSingularCovariance {
            min_eigenvalue: eig.min_value(),
        });
    }
    Ok(eig)
}

/// Adds a small ridge to a reference covariance that is close to singular.
fn regularize_reference(cov: &Mat3) -> Mat3 {
    let eig = SymEigen::new(cov);
    if eig.min_value() < MIN_EIGENVALUE {
        let ridge = MIN_EIGENVALUE + (-eig.min_value()).max(0.0);
        linalg::add_diagonal(cov, ridge)
    } else {
        *cov
    }
}

/// Fits Reinhard's per-channel CIELAB mean/std transfer.
pub fn fit_reinhard(target: &ImageBuffer, reference: &ImageBuffer) -> LinearColorMap {
    let t = compute_stats(&color::rgb_to_lab(target));
    let r = compute_stats(&color::rgb_to_lab(reference));
    reinhard_map(&t, &r)
}

pub(crate) fn reinhard_map(t: &ColorStats, r: &ColorStats) -> LinearColorMap {
    let mut matrix = [[0.0; 3]; 3];
    for c in 0..3 {
        matrix[c][c] = if t.std[c] > REINHARD_MIN_STD {
            r.std[c] / t.std[c]
        } else {
            1.0
        };
    }
    LinearColorMap::from_moments(matrix, t.mean, r.mean, ColorSpace::Lab)
}

pub fn reinhard_transfer(target: &ImageBuffer, reference: &ImageBuffer) -> ImageBuffer {
    fit_reinhard(target, reference).apply(target)
}

/// Xiao's map `R_r S_r S_t⁻¹ R_tᵀ` from the eigen factors `Σ = R Λ Rᵀ`,
/// `S = Λ^{1/2}`.
///
/// Eigenvectors are sorted by decreasing eigenvalue. Each reference axis is
/// sign-aligned with the matching target axis so that equal covariances give
/// the identity.
pub fn xiao_matrix(cov_t: &Mat3, cov_r: &Mat3) -> Result<Mat3> {
    let et = check_target(cov_t)?;
    let er = SymEigen::new(&regularize_reference(cov_r));
    let mut rr = er.vectors;
    for k in 0..3 {
        let dot: f64 = (0..3).map(|i| rr[i][k] * et.vectors[i][k]).sum();
        if dot < 0.0 {
            for row in rr.iter_mut() {
                row[k] = -row[k];
            }
        }
    }
    let mut scale = [[0.0; 3]; 3];
    for k in 0..3 {
        scale[k][k] = er.values[k].max(0.0).sqrt() / et.values[k].sqrt();
    }
    Ok(linalg::mul(
        &linalg::mul(&rr, &scale),
        &linalg::transpose(&et.vectors),
    ))
}

pub fn fit_xiao(target: &ImageBuffer, reference: &ImageBuffer) -> Result<LinearColorMap> {
    let t = compute_stats(target);
    let r = compute_stats(reference);
    let m = xiao_matrix(&t.cov, &r.cov)?;
    Ok(LinearColorMap::from_moments(m, t.mean, r.mean, ColorSpace::Rgb))
}

pub fn xiao_transfer(target: &ImageBuffer, reference: &ImageBuffer) -> Result<ImageBuffer> {
    Ok(fit_xiao(target, reference)?.apply(target))
}

/// A matrix `T` with `T Σ_t Tᵀ = Σ_r` for the chosen decomposition.
pub fn pitie_matrix(cov_t: &Mat3, cov_r: &Mat3, decomposition: Decomposition) -> Result<Mat3> {
    check_target(cov_t)?;
    let cov_r = regularize_reference(cov_r);
    let singular = |m: f64| Error::NearSingularCovariance { min_eigenvalue: m };
    match decomposition {
        Decomposition::Cholesky => {
            let lt = linalg::cholesky(cov_t).ok_or_else(|| singular(0.0))?;
            let lr = linalg::cholesky(&cov_r).ok_or_else(|| singular(0.0))?;
            let lt_inv = linalg::inverse_lower(&lt).ok_or_else(|| singular(0.0))?;
            Ok(linalg::mul(&lr, &lt_inv))
        }
        Decomposition::Sqrt => {
            let rt_inv = linalg::inv_sqrt_spd(cov_t).ok_or_else(|| singular(0.0))?;
            Ok(linalg::mul(&linalg::sqrt_spd(&cov_r), &rt_inv))
        }
        Decomposition::MongeKantorovitch => {
            let rt = linalg::sqrt_spd(cov_t);
            let rt_inv = linalg::inv_sqrt_spd(cov_t).ok_or_else(|| singular(0.0))?;
            let inner = linalg::mul(&linalg::mul(&rt, &cov_r), &rt);
            let middle = linalg::sqrt_spd(&inner);
            Ok(linalg::symmetrize(&linalg::mul(
                &linalg::mul(&rt_inv, &middle),
                &rt_inv,
            )))
        }
    }
}

pub fn fit_pitie(
    target: &ImageBuffer,
    reference: &ImageBuffer,
    decomposition: Decomposition,
) -> Result<LinearColorMap> {
    let t = compute_stats(target);
    let r = compute_stats(reference);
    let m = pitie_matrix(&t.cov, &r.cov, decomposition)?;
    Ok(LinearColorMap::from_moments(m, t.mean, r.mean, ColorSpace::Rgb))
}

pub fn pitie_linear_transfer(
    target: &ImageBuffer,
    reference: &ImageBuffer,
    decomposition: Decomposition,
) -> Result<ImageBuffer> {
    Ok(fit_pitie(target, reference, decomposition)?.apply(target))
}
