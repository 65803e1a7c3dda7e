//! sRGB (D65) to CIELAB and HSV conversions.

use std::sync::LazyLock;

use crate::image::ImageBuffer;
use crate::linalg::{self, Mat3};

/// Linear sRGB to CIE XYZ, D65.
const RGB_TO_XYZ: Mat3 = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

static XYZ_TO_RGB: LazyLock<Mat3> =
    LazyLock::new(|| linalg::inverse(&RGB_TO_XYZ).expect("sRGB matrix is invertible"));

/// D65 reference white.
const WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

const DELTA: f64 = 6.0 / 29.0;

#[inline]
pub fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
pub fn linear_to_srgb(v: f64) -> f64 {
    if v <= 0.0031308 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

#[inline]
fn lab_f_inv(t: f64) -> f64 {
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

pub fn rgb_to_lab_pixel(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let xyz = linalg::mul_vec(&RGB_TO_XYZ, lin);
    let fx = lab_f(xyz[0] / WHITE[0]);
    let fy = lab_f(xyz[1] / WHITE[1]);
    let fz = lab_f(xyz[2] / WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Lab to sRGB without the final clamp. Out-of-gamut colors produce samples
/// outside `[0, 1]`.
pub fn lab_to_rgb_pixel_unclamped(lab: [f64; 3]) -> [f64; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let xyz = [
        WHITE[0] * lab_f_inv(fx),
        WHITE[1] * lab_f_inv(fy),
        WHITE[2] * lab_f_inv(fz),
    ];
    linalg::mul_vec(&XYZ_TO_RGB, xyz).map(linear_to_srgb)
}

pub fn lab_to_rgb_pixel(lab: [f64; 3]) -> [f64; 3] {
    lab_to_rgb_pixel_unclamped(lab).map(|v| v.clamp(0.0, 1.0))
}

/// Converts an sRGB image to CIELAB. Output channels are `(L, a, b)` with
/// `L` in `[0, 100]`.
pub fn rgb_to_lab(img: &ImageBuffer) -> ImageBuffer {
    img.map_pixels(rgb_to_lab_pixel)
}

/// Converts a CIELAB image back to sRGB, clamping out-of-gamut samples.
pub fn lab_to_rgb(img: &ImageBuffer) -> ImageBuffer {
    img.map_pixels(lab_to_rgb_pixel)
}

/// RGB in `[0, 1]` to `(hue in degrees [0, 360), saturation, value)`.
pub fn rgb_to_hsv(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let chroma = max - min;
    let hue = if chroma <= 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / chroma).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / chroma + 2.0)
    } else {
        60.0 * ((r - g) / chroma + 4.0)
    };
    let sat = if max <= 0.0 { 0.0 } else { chroma / max };
    [hue, sat, max]
}

pub fn hsv_to_rgb(hsv: [f64; 3]) -> [f64; 3] {
    let [h, s, v] = hsv;
    let chroma = v * s;
    let h6 = h.rem_euclid(360.0) / 60.0;
    let x = chroma * (1.0 - (h6.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match h6 as u32 {
        0 => (chroma, x, 0.0),
        1 => (x, chroma, 0.0),
        2 => (0.0, chroma, x),
        3 => (0.0, x, chroma),
        4 => (x, 0.0, chroma),
        _ => (chroma, 0.0, x),
    };
    let m = v - chroma;
    [r + m, g + m, b + m]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// Independent scalar sRGB -> XYZ -> Lab using the textbook constants
    /// written out longhand.
    fn lab_oracle(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
        fn lin(c: f64) -> f64 {
            if c > 0.04045 {
                ((c + 0.055) / 1.055).powf(2.4)
            } else {
                c / 12.92
            }
        }
        let (r, g, b) = (lin(r), lin(g), lin(b));
        let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
        let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
        let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
        fn f(t: f64) -> f64 {
            let eps = 216.0 / 24389.0;
            let kappa = 24389.0 / 27.0;
            if t > eps {
                t.powf(1.0 / 3.0)
            } else {
                (kappa * t + 16.0) / 116.0
            }
        }
        let (fx, fy, fz) = (f(x / 0.95047), f(y / 1.0), f(z / 1.08883));
        (116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))
    }

    fn one(rgb: [f64; 3]) -> ImageBuffer {
        ImageBuffer::new(1, 1, rgb.to_vec()).unwrap()
    }

    #[test]
    fn black_maps_to_origin() {
        let lab = rgb_to_lab(&one([0.0, 0.0, 0.0]));
        for v in lab.data() {
            assert!(v.abs() < 1e-12);
        }
        let rgb = lab_to_rgb(&one([0.0, 0.0, 0.0]));
        for v in rgb.data() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn white_and_gray_match_scalar_oracle() {
        let (l, a, b) = lab_oracle(1.0, 1.0, 1.0);
        assert!((l - 100.0).abs() < 1e-3 && a.abs() < 1e-3 && b.abs() < 1e-3);
        let lab = rgb_to_lab(&one([1.0, 1.0, 1.0]));
        let d = lab.data();
        assert!((d[0] - 100.0).abs() < 1e-3, "{d:?}");
        assert!(d[1].abs() < 1e-3 && d[2].abs() < 1e-3, "{d:?}");

        let (l, _, _) = lab_oracle(0.5, 0.5, 0.5);
        assert!((l - 53.39).abs() < 0.05, "oracle gray L = {l}");
        let lab = rgb_to_lab(&one([0.5, 0.5, 0.5]));
        let d = lab.data();
        assert!((d[0] - 53.39).abs() < 0.05, "{d:?}");
        assert!(d[1].abs() < 1e-3 && d[2].abs() < 1e-3);
    }

    #[test]
    fn matches_oracle_on_random_colors() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let c: [f64; 3] = [rng.random(), rng.random(), rng.random()];
            let (l, a, b) = lab_oracle(c[0], c[1], c[2]);
            let got = rgb_to_lab_pixel(c);
            assert!((got[0] - l).abs() < 1e-9);
            assert!((got[1] - a).abs() < 1e-9);
            assert!((got[2] - b).abs() < 1e-9);
        }
    }

    #[test]
    fn white_lab_back_to_rgb() {
        let rgb = lab_to_rgb(&one([100.0, 0.0, 0.0]));
        for v in rgb.data() {
            assert!((v - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn round_trip_random_16x16() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let img = ImageBuffer::from_fn(16, 16, |_, _| [rng.random(), rng.random(), rng.random()]).unwrap();
        let back = lab_to_rgb(&rgb_to_lab(&img));
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn out_of_gamut_lab_clamps() {
        let rgb = lab_to_rgb(&one([50.0, 120.0, -120.0]));
        assert!(rgb.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn hsv_primaries() {
        assert_eq!(rgb_to_hsv([1.0, 0.0, 0.0]), [0.0, 1.0, 1.0]);
        let g = rgb_to_hsv([0.0, 1.0, 0.0]);
        assert!((g[0] - 120.0).abs() < 1e-12);
        let b = rgb_to_hsv([0.0, 0.0, 1.0]);
        assert!((b[0] - 240.0).abs() < 1e-12);
        let gray = rgb_to_hsv([0.4, 0.4, 0.4]);
        assert_eq!(gray[1], 0.0);
    }

    proptest! {
        #[test]
        fn lab_round_trip_is_identity(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let back = lab_to_rgb_pixel(rgb_to_lab_pixel([r, g, b]));
            prop_assert!((back[0] - r).abs() < 1e-4);
            prop_assert!((back[1] - g).abs() < 1e-4);
            prop_assert!((back[2] - b).abs() < 1e-4);
        }

        #[test]
        fn lab_lightness_in_range(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let lab = rgb_to_lab_pixel([r, g, b]);
            prop_assert!(lab[0] >= -1e-9 && lab[0] <= 100.0 + 1e-3);
        }

        #[test]
        fn hsv_round_trip(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let back = hsv_to_rgb(rgb_to_hsv([r, g, b]));
            prop_assert!((back[0] - r).abs() < 1e-12);
            prop_assert!((back[1] - g).abs() < 1e-12);
            prop_assert!((back[2] - b).abs() < 1e-12);
        }
    }
}
