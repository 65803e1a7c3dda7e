//! Iterative distribution transfer (IDT).
//!
//! The target's RGB point cloud is repeatedly rotated by a random orthogonal
//! matrix; along each of the three rotated axes the projected target samples
//! are remapped so that their 1D distribution matches the projected reference
//! samples, then the cloud is rotated back. Repeating this with fresh
//! rotations drives the full 3D color distribution toward the reference.
//! A gradient-preserving [`regrain`] pass afterwards removes the grain that
//! the remapping introduces in flat regions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::linalg::{self, Mat3};

/// Above this many pixels, histograms are built from a strided subsample.
pub const HISTOGRAM_SAMPLE_LIMIT: usize = 1_000_000;

/// Gauss-Seidel sweeps used by [`regrain`].
pub const REGRAIN_SWEEPS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdtConfig {
    pub iterations: usize,
    pub bins: usize,
    pub seed: u64,
    pub regrain: bool,
    pub regrain_strength: f64,
}

impl Default for IdtConfig {
    fn default() -> Self {
        Self {
            iterations: 20,
            bins: 300,
            seed: 0,
            regrain: true,
            regrain_strength: 1.0,
        }
    }
}

impl IdtConfig {
    /// Reads `idt.iterations`, `idt.bins`, `idt.seed`, `idt.regrain` and
    /// `idt.regrain_strength`, keeping defaults for absent keys.
    pub fn from_config(config: &Config) -> Result<Self> {
        let d = Self::default();
        let c = Self {
            iterations: config.get_or("idt.iterations", d.iterations)?,
            bins: config.get_or("idt.bins", d.bins)?,
            seed: config.get_or("idt.seed", d.seed)?,
            regrain: config.get_or("idt.regrain", d.regrain)?,
            regrain_strength: config.get_or("idt.regrain_strength", d.regrain_strength)?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::InvalidParameter("idt iterations must be >= 1".into()));
        }
        if self.bins < 16 {
            return Err(Error::InvalidParameter("idt bins must be >= 16".into()));
        }
        if !(self.regrain_strength >= 0.0 && self.regrain_strength.is_finite()) {
            return Err(Error::InvalidParameter(
                "regrain strength must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Fixed-range histogram with its piecewise-linear CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram1D {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<f64>,
    /// `cdf[k]` is the fraction of samples below `bin_edges[k]`.
    pub cdf: Vec<f64>,
}

impl Histogram1D {
    /// Requires `lo < hi` and `bins >= 1`.
    pub fn new(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        debug_assert!(lo < hi && bins >= 1);
        let width = (hi - lo) / bins as f64;
        let bin_edges: Vec<f64> = (0..=bins)
            .map(|k| if k == bins { hi } else { lo + k as f64 * width })
            .collect();
        let mut counts = vec![0.0; bins];
        let scale = bins as f64 / (hi - lo);
        for &s in samples {
            let idx = ((s - lo) * scale).floor();
            let idx = if idx < 0.0 {
                0
            } else {
                (idx as usize).min(bins - 1)
            };
            counts[idx] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        let mut cdf = Vec::with_capacity(bins + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for c in &counts {
            acc += c;
            cdf.push(acc / total);
        }
        *cdf.last_mut().unwrap() = 1.0;
        Self {
            bin_edges,
            counts,
            cdf,
        }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    fn lo(&self) -> f64 {
        self.bin_edges[0]
    }

    fn hi(&self) -> f64 {
        self.bin_edges[self.bins()]
    }

    /// Linearly interpolated CDF, clamped to `[0, 1]` outside the range.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let bins = self.bins();
        let pos = (x - self.lo()) / (self.hi() - self.lo()) * bins as f64;
        if !(pos > 0.0) {
            return 0.0;
        }
        if pos >= bins as f64 {
            return 1.0;
        }
        let k = pos.floor() as usize;
        let frac = pos - k as f64;
        self.cdf[k] + frac * (self.cdf[k + 1] - self.cdf[k])
    }

    /// Inverse of [`Histogram1D::cdf_at`]. Where the CDF is flat the rightmost
    /// preimage is returned, which is where binned samples sit.
    pub fn quantile(&self, u: f64) -> f64 {
        let k = self.cdf.partition_point(|&c| c <= u);
        if k > self.bins() {
            let last = self
                .counts
                .iter()
                .rposition(|&c| c > 0.0)
                .unwrap_or(self.bins() - 1);
            return self.bin_edges[last + 1];
        }
        let k = k.max(1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let frac = ((u - c0) / (c1 - c0)).clamp(0.0, 1.0);
        let (e0, e1) = (self.bin_edges[k - 1], self.bin_edges[k]);
        e0 + frac * (e1 - e0)
    }
}

/// A fitted 1D density transfer `x -> C_r⁻¹(C_t(x))`.
#[derive(Debug, Clone)]
pub enum DensityTransfer {
    /// The reference is a single value.
    Constant(f64),
    Histograms {
        target: Histogram1D,
        reference: Histogram1D,
    },
}

impl DensityTransfer {
    /// Builds both histograms over the shared range of the two sample sets.
    pub fn fit(target: &[f64], reference: &[f64], bins: usize) -> Self {
        let (r_lo, r_hi) = min_max(reference);
        if r_lo == r_hi {
            return DensityTransfer::Constant(r_lo);
        }
        let (t_lo, t_hi) = min_max(target);
        let (lo, hi) = (t_lo.min(r_lo), t_hi.max(r_hi));
        DensityTransfer::Histograms {
            target: Histogram1D::new(target, lo, hi, bins),
            reference: Histogram1D::new(reference, lo, hi, bins),
        }
    }

    #[inline]
    pub fn map(&self, x: f64) -> f64 {
        match self {
            DensityTransfer::Constant(c) => *c,
            DensityTransfer::Histograms { target, reference } => reference.quantile(target.cdf_at(x)),
        }
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    })
}

/// Matches the distribution of `target` to that of `reference`.
///
/// Panics if either sequence is empty.
pub fn pdf_transfer_1d(target: &[f64], reference: &[f64], bins: usize) -> Vec<f64> {
    assert!(
        !target.is_empty() && !reference.is_empty(),
        "empty sample sequence"
    );
    let transfer = DensityTransfer::fit(target, reference, bins);
    target.iter().map(|&x| transfer.map(x)).collect()
}

/// Uniformly distributed rotation in SO(3) for iteration `iteration` of the
/// stream seeded by `seed`.
///
/// Uses Shoemake's method: three uniforms give a uniform unit quaternion.
pub fn random_rotation(seed: u64, iteration: u64) -> Mat3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration);
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let u3: f64 = rng.random();
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = [
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
        b * (tau * u3).cos(),
    ];
    quaternion_to_matrix(q)
}

fn quaternion_to_matrix([x, y, z, w]: [f64; 4]) -> Mat3 {
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
        ],
        [
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
        ],
        [
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// Exact 1-Wasserstein distance between two empirical distributions.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    // walk the merged quantile breakpoints i/n and j/m
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0.0;
    let mut total = 0.0;
    while i < n && j < m {
        let next_a = (i + 1) as f64 / n as f64;
        let next_b = (j + 1) as f64 / m as f64;
        let next = next_a.min(next_b);
        total += (next - u) * (a[i] - b[j]).abs();
        u = next;
        if next_a <= next {
            i += 1;
        }
        if next_b <= next {
            j += 1;
        }
    }
    total
}

/// Projection of every point onto `axis`.
pub fn project(points: &[[f64; 3]], axis: [f64; 3]) -> Vec<f64> {
    points
        .iter()
        .map(|p| axis[0] * p[0] + axis[1] * p[1] + axis[2] * p[2])
        .collect()
}

fn stride_for(n: usize) -> usize {
    n.div_ceil(HISTOGRAM_SAMPLE_LIMIT).max(1)
}

fn strided(v: &[f64], stride: usize) -> Vec<f64> {
    if stride == 1 {
        v.to_vec()
    } else {
        v.iter().step_by(stride).copied().collect()
    }
}

/// Iteration state of the distribution transfer, exposed so callers can
/// observe convergence between rounds.
#[derive(Debug, Clone)]
pub struct IdtSolver {
    points: Vec<[f64; 3]>,
    reference: Vec<[f64; 3]>,
    bins: usize,
    seed: u64,
    iteration: u64,
}

impl IdtSolver {
    pub fn new(target: &ImageBuffer, reference: &ImageBuffer, bins: usize, seed: u64) -> Self {
        Self {
            points: target.pixels().collect(),
            reference: reference.pixels().collect(),
            bins,
            seed,
            iteration: 0,
        }
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn iterations_done(&self) -> u64 {
        self.iteration
    }

    /// One round with the next rotation of the seeded stream.
    pub fn step(&mut self) {
        let rotation = random_rotation(self.seed, self.iteration);
        self.step_with_rotation(&rotation);
    }

    /// One round along the rows of `rotation`.
    pub fn step_with_rotation(&mut self, rotation: &Mat3) {
        let t_stride = stride_for(self.points.len());
        let r_stride = stride_for(self.reference.len());
        let mapped: Vec<Vec<f64>> = (0..3)
            .into_par_iter()
            .map(|k| {
                let axis = rotation[k];
                let proj_t = project(&self.points, axis);
                let proj_r = project(&self.reference, axis);
                let transfer = DensityTransfer::fit(
                    &strided(&proj_t, t_stride),
                    &strided(&proj_r, r_stride),
                    self.bins,
                );
                proj_t.iter().map(|&x| transfer.map(x)).collect()
            })
            .collect();
        let back = linalg::transpose(rotation);
        for (i, p) in self.points.iter_mut().enumerate() {
            *p = linalg::mul_vec(&back, [mapped[0][i], mapped[1][i], mapped[2][i]]);
        }
        self.iteration += 1;
    }

    pub fn to_image(&self, width: usize, height: usize) -> ImageBuffer {
        ImageBuffer::from_pixels(width, height, self.points.clone())
    }
}

/// Full IDT: `config.iterations` rounds, optional regrain against the
/// original target, then a clamp to `[0, 1]`.
pub fn idt_transfer(
    target: &ImageBuffer,
    reference: &ImageBuffer,
    config: &IdtConfig,
) -> Result<ImageBuffer> {
    config.validate()?;
    let mut solver = IdtSolver::new(target, reference, config.bins, config.seed);
    for _ in 0..config.iterations {
        solver.step();
    }
    let mapped = solver.to_image(target.width(), target.height());
    let out = if config.regrain {
        regrain(target, &mapped, config.regrain_strength)?
    } else {
        mapped
    };
    Ok(out.clamped())
}

/// Gradient-preserving smoothing of a color-mapped image.
///
/// Per channel, minimizes
///
/// ```text
/// E(o) = Σ_p (o_p - m_p)² + strength · Σ_(p,q) w_pq ((o_p - o_q) - (s_p - s_q))²
/// ```
///
/// over 4-neighbour pairs `(p, q)`, where `m` is `color_mapped` and `s` is
/// `structure_source`. `w_pq` averages `30 / (1 + 10 |∇s|)` over the pair, so
/// gradient fidelity dominates in flat source regions and color fidelity near
/// edges.
#[derive(Debug, Clone)]
pub struct RegrainSolver {
    width: usize,
    height: usize,
    source: [Vec<f64>; 3],
    mapped: [Vec<f64>; 3],
    out: [Vec<f64>; 3],
    w_right: Vec<f64>,
    w_down: Vec<f64>,
}

impl RegrainSolver {
    pub fn new(structure_source: &ImageBuffer, color_mapped: &ImageBuffer, strength: f64) -> Result<Self> {
        structure_source.check_same_dims(color_mapped)?;
        let (w, h) = (structure_source.width(), structure_source.height());
        let source = [0, 1, 2].map(|c| structure_source.channel(c));
        let mapped = [0, 1, 2].map(|c| color_mapped.channel(c));
        let mut grad = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let mut g2 = 0.0;
                for ch in &source {
                    let dx = if x + 1 < w { ch[i + 1] - ch[i] } else { 0.0 };
                    let dy = if y + 1 < h { ch[i + w] - ch[i] } else { 0.0 };
                    g2 += dx * dx + dy * dy;
                }
                grad[i] = g2.sqrt();
            }
        }
        let phi: Vec<f64> = grad.iter().map(|g| 30.0 / (1.0 + 10.0 * g)).collect();
        let mut w_right = vec![0.0; w * h];
        let mut w_down = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if x + 1 < w {
                    w_right[i] = strength * 0.5 * (phi[i] + phi[i + 1]);
                }
                if y + 1 < h {
                    w_down[i] = strength * 0.5 * (phi[i] + phi[i + w]);
                }
            }
        }
        Ok(Self {
            width: w,
            height: h,
            out: mapped.clone(),
            source,
            mapped,
            w_right,
            w_down,
        })
    }

    /// One in-place Gauss-Seidel sweep over every channel. Each pixel update
    /// is the exact minimizer of `E` in that coordinate, so `E` never grows.
    pub fn sweep(&mut self) {
        let (w, h) = (self.width, self.height);
        let (w_right, w_down) = (&self.w_right, &self.w_down);
        self.out
            .par_iter_mut()
            .zip(self.source.par_iter())
            .zip(self.mapped.par_iter())
            .for_each(|((out, src), mapped)| {
                for y in 0..h {
                    for x in 0..w {
                        let i = y * w + x;
                        let mut num = mapped[i];
                        let mut den = 1.0;
                        let mut couple = |j: usize, wt: f64| {
                            num += wt * (out[j] + src[i] - src[j]);
                            den += wt;
                        };
                        if x + 1 < w {
                            couple(i + 1, w_right[i]);
                        }
                        if x > 0 {
                            couple(i - 1, w_right[i - 1]);
                        }
                        if y + 1 < h {
                            couple(i + w, w_down[i]);
                        }
                        if y > 0 {
                            couple(i - w, w_down[i - w]);
                        }
                        out[i] = num / den;
                    }
                }
            });
    }

    pub fn energy(&self) -> f64 {
        let (w, h) = (self.width, self.height);
        let mut e = 0.0;
        for c in 0..3 {
            let (o, s, m) = (&self.out[c], &self.source[c], &self.mapped[c]);
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    e += (o[i] - m[i]).powi(2);
                    if x + 1 < w {
                        e += self.w_right[i] * ((o[i] - o[i + 1]) - (s[i] - s[i + 1])).powi(2);
                    }
                    if y + 1 < h {
                        e += self.w_down[i] * ((o[i] - o[i + w]) - (s[i] - s[i + w])).powi(2);
                    }
                }
            }
        }
        e
    }

    pub fn to_image(&self) -> ImageBuffer {
        let n = self.width * self.height;
        let pixels = (0..n)
            .map(|i| [self.out[0][i], self.out[1][i], self.out[2][i]])
            .collect();
        ImageBuffer::from_pixels(self.width, self.height, pixels)
    }
}

/// Runs [`RegrainSolver`] for [`REGRAIN_SWEEPS`] sweeps. Strength 0 returns
/// `color_mapped` unchanged.
pub fn regrain(
    structure_source: &ImageBuffer,
    color_mapped: &ImageBuffer,
    strength: f64,
) -> Result<ImageBuffer> {
    structure_source.check_same_dims(color_mapped)?;
    if strength == 0.0 {
        return Ok(color_mapped.clone());
    }
    let mut solver = RegrainSolver::new(structure_source, color_mapped, strength)?;
    for _ in 0..REGRAIN_SWEEPS {
        solver.sweep();
    }
    Ok(solver.to_image())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    fn uniform_samples(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(lo..hi)).collect()
    }

    fn textured(seed: u64, w: usize, h: usize) -> ImageBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageBuffer::from_fn(w, h, |x, y| {
            let fx = x as f64 / w as f64;
            let fy = y as f64 / h as f64;
            [
                0.2 + 0.5 * fx + rng.random_range(-0.05..0.05),
                0.3 + 0.4 * fy + rng.random_range(-0.05..0.05),
                0.6 - 0.3 * fx * fy + rng.random_range(-0.05..0.05),
            ]
        })
        .unwrap()
    }

    fn grad_distance(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
        let (w, h) = (a.width(), a.height());
        let mut s = 0.0;
        for c in 0..3 {
            let (pa, pb) = (a.channel(c), b.channel(c));
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    if x + 1 < w {
                        s += ((pa[i + 1] - pa[i]) - (pb[i + 1] - pb[i])).powi(2);
                    }
                    if y + 1 < h {
                        s += ((pa[i + w] - pa[i]) - (pb[i + w] - pb[i])).powi(2);
                    }
                }
            }
        }
        s.sqrt()
    }

    #[test]
    fn config_validation() {
        assert!(IdtConfig::default().validate().is_ok());
        assert!(IdtConfig {
            iterations: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(IdtConfig {
            bins: 15,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(IdtConfig {
            regrain_strength: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn histogram_cdf_invariants() {
        let s = uniform_samples(1, 1000, 0.0, 1.0);
        let h = Histogram1D::new(&s, 0.0, 1.0, 50);
        assert_eq!(h.bin_edges.len(), 51);
        assert!(h.bin_edges.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(h.cdf[0], 0.0);
        assert_eq!(*h.cdf.last().unwrap(), 1.0);
        assert!(h.cdf.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(h.counts.iter().sum::<f64>(), 1000.0);
    }

    #[test]
    fn rotations_are_proper_and_deterministic() {
        for it in 0..200 {
            let r = random_rotation(42, it);
            let rrt = linalg::mul(&r, &linalg::transpose(&r));
            for i in 0..3 {
                for j in 0..3 {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((rrt[i][j] - e).abs() < 1e-9);
                }
            }
            assert!((linalg::det(&r) - 1.0).abs() < 1e-9);
            assert_eq!(r, random_rotation(42, it));
        }
        assert_ne!(random_rotation(42, 0), random_rotation(42, 1));
        assert_ne!(random_rotation(42, 0), random_rotation(43, 0));
    }

    #[test]
    fn rotations_are_not_degenerate() {
        // For Haar-distributed rotations E|R_ij - I_ij| is well above zero;
        // this only guards against a stream that collapses to the identity.
        let mut total = 0.0;
        for it in 0..1000 {
            let r = random_rotation(7, it);
            for i in 0..3 {
                for j in 0..3 {
                    let e = if i == j { 1.0 } else { 0.0 };
                    total += (r[i][j] - e).abs();
                }
            }
        }
        let mean = total / 9000.0;
        assert!(mean > 0.3, "mean |R - I| = {mean}");
        // Haar angle density (1 - cos t)/pi gives E[cos t] = -1/2, so E[trace] = 0
        let trace: f64 = (0..1000)
            .map(|it| {
                let r = random_rotation(9, it);
                r[0][0] + r[1][1] + r[2][2]
            })
            .sum::<f64>()
            / 1000.0;
        assert!(trace.abs() < 0.1, "mean trace {trace}");
    }

    #[test]
    fn transfer_of_identical_distribution_is_near_identity() {
        let s = uniform_samples(2, 5000, 0.1, 0.9);
        let mapped = pdf_transfer_1d(&s, &s, 300);
        let bin = 0.8 / 300.0;
        for (a, b) in s.iter().zip(&mapped) {
            assert!((a - b).abs() <= bin, "{a} -> {b}");
        }
    }

    #[test]
    fn transfer_between_uniforms_is_affine() {
        let t = uniform_samples(3, 20000, 0.0, 1.0);
        let r = uniform_samples(4, 20000, 2.0, 4.0);
        let mapped = pdf_transfer_1d(&t, &r, 300);
        let (lo, hi) = (t.iter().chain(&r).fold(f64::INFINITY, |a, &b| a.min(b)), 4.0);
        let bin = (hi - lo) / 300.0;
        // closed-form CDF matching: x -> 2 + 2x, plus sampling noise of the
        // empirical CDFs
        let noise = 2.0 * 2.0 / (20000f64).sqrt();
        for (x, y) in t.iter().zip(&mapped) {
            assert!((y - (2.0 + 2.0 * x)).abs() <= 2.0 * bin + noise, "{x} -> {y}");
        }
        let w1 = wasserstein_1d(&mapped, &r);
        assert!(w1 <= 2.0 * bin, "w1 {w1}");
    }

    #[test]
    fn constant_reference_maps_to_constant() {
        let t = uniform_samples(5, 100, 0.0, 1.0);
        let mapped = pdf_transfer_1d(&t, &[0.5; 10], 64);
        assert!(mapped.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn wasserstein_closed_forms() {
        assert_eq!(wasserstein_1d(&[0.0, 1.0], &[0.0, 1.0]), 0.0);
        assert!((wasserstein_1d(&[0.0, 1.0], &[0.5, 1.5]) - 0.5).abs() < 1e-15);
        // {0} vs {0, 1}: half the mass moves by 1
        assert!((wasserstein_1d(&[0.0], &[0.0, 1.0]) - 0.5).abs() < 1e-15);
        assert!((wasserstein_1d(&[0.0, 0.0, 3.0], &[1.0]) - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identity_rotation_step_equals_per_channel_transfer() {
        let target = textured(6, 24, 20);
        let reference = textured(7, 30, 16).map_samples(|v| v * 0.8 + 0.1);
        let mut solver = IdtSolver::new(&target, &reference, 128, 0);
        solver.step_with_rotation(&linalg::IDENTITY);
        for c in 0..3 {
            let expected = pdf_transfer_1d(&target.channel(c), &reference.channel(c), 128);
            let got: Vec<f64> = solver.points().iter().map(|p| p[c]).collect();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn idt_identity_without_regrain() {
        let img = textured(8, 32, 32);
        let cfg = IdtConfig {
            regrain: false,
            ..Default::default()
        };
        let out = idt_transfer(&img, &img, &cfg).unwrap();
        for (a, b) in img.data().iter().zip(out.data()) {
            assert!((a - b).abs() < 0.02);
        }
    }

    #[test]
    fn idt_is_deterministic() {
        let t = textured(9, 32, 24);
        let r = textured(10, 32, 24).map_samples(|v| (v * 1.2).min(1.0));
        let cfg = IdtConfig {
            iterations: 5,
            seed: 99,
            ..Default::default()
        };
        let a = idt_transfer(&t, &r, &cfg).unwrap();
        let b = idt_transfer(&t, &r, &cfg).unwrap();
        assert_eq!(a.to_rgb8(), b.to_rgb8());
        assert!(a
            .data()
            .iter()
            .zip(b.data())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn regrain_zero_strength_is_exact_passthrough() {
        let s = textured(11, 16, 16);
        let m = textured(12, 16, 16);
        assert_eq!(regrain(&s, &m, 0.0).unwrap(), m);
    }

    #[test]
    fn regrain_fixed_point_when_inputs_agree() {
        let s = textured(13, 20, 20);
        let out = regrain(&s, &s, 1.0).unwrap();
        for (a, b) in s.data().iter().zip(out.data()) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn regrain_pulls_gradients_toward_source() {
        let s = textured(14, 40, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let normal = |rng: &mut ChaCha8Rng| {
            // Box-Muller
            let u1: f64 = rng.random_range(f64::EPSILON..1.0);
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        };
        let noisy = ImageBuffer::new(
            40,
            40,
            s.data().iter().map(|v| v + 0.05 * normal(&mut rng)).collect(),
        )
        .unwrap();
        let out = regrain(&s, &noisy, 1.0).unwrap();
        let before = grad_distance(&noisy, &s);
        let after = grad_distance(&out, &s);
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn regrain_energy_never_increases() {
        let s = textured(16, 32, 32);
        let m = textured(17, 32, 32).map_samples(|v| v * 0.7 + 0.2);
        let mut solver = RegrainSolver::new(&s, &m, 1.0).unwrap();
        let mut prev = solver.energy();
        for _ in 0..REGRAIN_SWEEPS {
            solver.sweep();
            let e = solver.energy();
            assert!(e <= prev * (1.0 + 1e-12), "{e} > {prev}");
            prev = e;
        }
    }

    #[test]
    fn regrain_rejects_mismatched_dims() {
        let a = textured(1, 8, 8);
        let b = textured(1, 8, 9);
        assert!(regrain(&a, &b, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn transfer_output_matches_reference_distribution(
            seed in 0u64..1000, n in 200usize..2000, shift in -1.0f64..1.0, scale in 0.2f64..3.0
        ) {
            let t = uniform_samples(seed, n, 0.0, 1.0);
            let r: Vec<f64> = uniform_samples(seed + 1, n, 0.0, 1.0)
                .iter().map(|v| v * v * scale + shift).collect();
            let mapped = pdf_transfer_1d(&t, &r, 300);
            let (lo, hi) = min_max(&t.iter().chain(&r).copied().collect::<Vec<_>>());
            let w1 = wasserstein_1d(&mapped, &r);
            prop_assert!(w1 <= 2.0 * (hi - lo) / 300.0, "w1 {}", w1);
        }
    }
}
