//! sRGB ↔ CIELAB under the D65 white point.

use super::{ColorSpace, ImageBuffer, ImagingError};
use crate::Scalar;

const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

const XYZ_TO_RGB: [[f64; 3]; 3] = invert3(&RGB_TO_XYZ);

const fn minor(m: &[[f64; 3]; 3], r0: usize, r1: usize, c0: usize, c1: usize) -> f64 {
    m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
}

const fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * minor(m, 1, 2, 1, 2) - m[0][1] * minor(m, 1, 2, 0, 2)
        + m[0][2] * minor(m, 1, 2, 0, 1);
    [
        [
            minor(m, 1, 2, 1, 2) / det,
            -minor(m, 0, 2, 1, 2) / det,
            minor(m, 0, 1, 1, 2) / det,
        ],
        [
            -minor(m, 1, 2, 0, 2) / det,
            minor(m, 0, 2, 0, 2) / det,
            -minor(m, 0, 1, 0, 2) / det,
        ],
        [
            minor(m, 1, 2, 0, 1) / det,
            -minor(m, 0, 2, 0, 1) / det,
            minor(m, 0, 1, 0, 1) / det,
        ],
    ]
}

const WHITE_D65: [f64; 3] = [0.95047, 1.0, 1.08883];

// CIE constants: δ = 6/29
const DELTA: f64 = 6.0 / 29.0;

fn srgb_to_linear<T: Scalar>(c: T) -> T {
    if c <= T::lit(0.04045) {
        c / T::lit(12.92)
    } else {
        ((c + T::lit(0.055)) / T::lit(1.055)).powf(T::lit(2.4))
    }
}

fn linear_to_srgb<T: Scalar>(c: T) -> T {
    if c <= T::lit(0.0031308) {
        c * T::lit(12.92)
    } else {
        T::lit(1.055) * c.powf(T::lit(1.0 / 2.4)) - T::lit(0.055)
    }
}

fn lab_f<T: Scalar>(t: T) -> T {
    let d = T::lit(DELTA);
    if t > d * d * d {
        t.cbrt()
    } else {
        t / (T::lit(3.0) * d * d) + T::lit(4.0 / 29.0)
    }
}

fn lab_f_inv<T: Scalar>(t: T) -> T {
    let d = T::lit(DELTA);
    if t > d {
        t * t * t
    } else {
        T::lit(3.0) * d * d * (t - T::lit(4.0 / 29.0))
    }
}

fn mat3<T: Scalar>(m: &[[f64; 3]; 3], v: [T; 3]) -> [T; 3] {
    let row = |r: &[f64; 3]| T::lit(r[0]) * v[0] + T::lit(r[1]) * v[1] + T::lit(r[2]) * v[2];
    [row(&m[0]), row(&m[1]), row(&m[2])]
}

pub fn rgb_to_lab_pixel<T: Scalar>(rgb: [T; 3]) -> [T; 3] {
    let lin = rgb.map(srgb_to_linear);
    let xyz = mat3(&RGB_TO_XYZ, lin);
    let fx = lab_f(xyz[0] / T::lit(WHITE_D65[0]));
    let fy = lab_f(xyz[1] / T::lit(WHITE_D65[1]));
    let fz = lab_f(xyz[2] / T::lit(WHITE_D65[2]));
    [
        T::lit(116.0) * fy - T::lit(16.0),
        T::lit(500.0) * (fx - fy),
        T::lit(200.0) * (fy - fz),
    ]
}

/// Inverse of [`rgb_to_lab_pixel`]; out-of-gamut results are clamped to
/// `[0, 1]`.
pub fn lab_to_rgb_pixel<T: Scalar>(lab: [T; 3]) -> [T; 3] {
    let fy = (lab[0] + T::lit(16.0)) / T::lit(116.0);
    let fx = fy + lab[1] / T::lit(500.0);
    let fz = fy - lab[2] / T::lit(200.0);
    let xyz = [
        T::lit(WHITE_D65[0]) * lab_f_inv(fx),
        T::lit(WHITE_D65[1]) * lab_f_inv(fy),
        T::lit(WHITE_D65[2]) * lab_f_inv(fz),
    ];
    mat3(&XYZ_TO_RGB, xyz).map(|c| {
        linear_to_srgb(c.max(T::zero()))
            .max(T::zero())
            .min(T::one())
    })
}

pub fn rgb_to_lab<T: Scalar>(img: &ImageBuffer<T>) -> Result<ImageBuffer<T>, ImagingError> {
    img.require_space(ColorSpace::Rgb)?;
    Ok(map_pixels(img, ColorSpace::Lab, rgb_to_lab_pixel))
}

pub fn lab_to_rgb<T: Scalar>(img: &ImageBuffer<T>) -> Result<ImageBuffer<T>, ImagingError> {
    img.require_space(ColorSpace::Lab)?;
    Ok(map_pixels(img, ColorSpace::Rgb, lab_to_rgb_pixel))
}

fn map_pixels<T: Scalar>(
    img: &ImageBuffer<T>,
    space: ColorSpace,
    f: fn([T; 3]) -> [T; 3],
) -> ImageBuffer<T> {
    let data = img
        .data
        .chunks_exact(3)
        .flat_map(|px| f([px[0], px[1], px[2]]))
        .collect();
    ImageBuffer {
        width: img.width,
        height: img.height,
        space,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn white_and_black() {
        let w = rgb_to_lab_pixel([1.0f64, 1.0, 1.0]);
        assert!((w[0] - 100.0).abs() < 1e-4, "{w:?}");
        assert!(w[1].abs() < 0.01 && w[2].abs() < 0.01, "{w:?}");
        let b = rgb_to_lab_pixel([0.0f64, 0.0, 0.0]);
        assert_eq!(b[0], 0.0);
    }

    #[test]
    fn known_primary() {
        // sRGB red is about L=53.24, a=80.09, b=67.20 under D65
        let r = rgb_to_lab_pixel([1.0f64, 0.0, 0.0]);
        assert!((r[0] - 53.24).abs() < 0.01);
        assert!((r[1] - 80.09).abs() < 0.01);
        assert!((r[2] - 67.20).abs() < 0.01);
    }

    #[test]
    fn roundtrip_random_colors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let c: [f64; 3] = [rng.random(), rng.random(), rng.random()];
            let back = lab_to_rgb_pixel(rgb_to_lab_pixel(c));
            for i in 0..3 {
                assert!((back[i] - c[i]).abs() < 1e-4, "{c:?} -> {back:?}");
            }
        }
    }

    #[test]
    fn wrong_space_rejected() {
        let img = ImageBuffer::<f64>::filled(2, 2, ColorSpace::Lab, [50.0, 0.0, 0.0]);
        assert!(matches!(
            rgb_to_lab(&img),
            Err(ImagingError::WrongColorSpace { .. })
        ));
        let rgb = lab_to_rgb(&img).unwrap();
        assert_eq!(rgb.space(), ColorSpace::Rgb);
        assert!(matches!(
            lab_to_rgb(&rgb),
            Err(ImagingError::WrongColorSpace { .. })
        ));
    }
}
