//! Raster buffers, PPM I/O, color conversion, covapixel rendering and
//! reconstruction statistics.

mod color;
mod ppm;
mod quality;
mod render;

use thiserror::Error;

use crate::Scalar;

pub use color::{lab_to_rgb, lab_to_rgb_pixel, rgb_to_lab, rgb_to_lab_pixel};
pub use ppm::{read_ppm, write_ppm};
pub use quality::{boundary_pixel_pairs, quality_stats, QualityReport};
pub use render::{overlay_boundaries, render_ellipses, render_flat, Background, BOUNDARY_COLOR};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImagingError {
    #[error("malformed PPM header: {0}")]
    MalformedHeader(String),
    #[error("unexpected end of PPM data")]
    UnexpectedEof,
    #[error("unsupported PPM maxval {0} (only 255)")]
    UnsupportedMaxval(u32),
    #[error("wrong color space: expected {expected:?}, found {found:?}")]
    WrongColorSpace {
        expected: ColorSpace,
        found: ColorSpace,
    },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("pixel buffer length {got} does not match {expected}")]
    BadLength { expected: usize, got: usize },
    #[error("pixel buffer has non-finite values")]
    NonFinite,
    #[error("no covapixel for region {0}")]
    MissingRegion(u32),
    #[error("feature space has no color features")]
    NoColorFeatures,
    #[error("feature space has no spatial features")]
    NoSpatialFeatures,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColorSpace {
    /// sRGB, channels in `[0, 1]`.
    Rgb,
    /// CIELAB (D65): `L ∈ [0, 100]`, `a, b ∈ [−128, 127]`.
    Lab,
}

/// Three-channel raster, row-major, interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer<T> {
    width: usize,
    height: usize,
    space: ColorSpace,
    data: Vec<T>,
}

impl<T: Scalar> ImageBuffer<T> {
    pub fn new(
        width: usize,
        height: usize,
        space: ColorSpace,
        data: Vec<T>,
    ) -> Result<Self, ImagingError> {
        let expected = width * height * 3;
        if data.len() != expected {
            return Err(ImagingError::BadLength {
                expected,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(ImagingError::NonFinite);
        }
        Ok(Self {
            width,
            height,
            space,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, space: ColorSpace, px: [T; 3]) -> Self {
        let data = std::iter::repeat_n(px, width * height).flatten().collect();
        Self {
            width,
            height,
            space,
            data,
        }
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        space: ColorSpace,
        mut f: impl FnMut(usize, usize) -> [T; 3],
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            space,
            data,
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
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [T; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Pixel by row-major index.
    #[inline]
    pub fn pixel_at(&self, idx: usize) -> [T; 3] {
        let i = idx * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, px: [T; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&px);
    }

    pub(crate) fn require_space(&self, expected: ColorSpace) -> Result<(), ImagingError> {
        if self.space != expected {
            return Err(ImagingError::WrongColorSpace {
                expected,
                found: self.space,
            });
        }
        Ok(())
    }
}
