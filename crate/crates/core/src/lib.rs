//! Covapixels: region summaries of raster images as (mean vector, covariance
//! matrix) pairs, plus the covariance-fusion operators that act on them.
//!
//! The pipeline is segment → extract → fuse/merge → render → stats:
//!
//! - [`segmentation`] partitions an image into regions (SLIC superpixels or
//!   regular grid tiles) and produces a [`LabelMap`].
//! - [`covapixel`] turns each region into a [`Covapixel`]: its pixel count and
//!   the mean/covariance of per-pixel features (position and color).
//! - [`fusion`] implements Kalman (moment and information form), Covariance
//!   Intersection, Covariance Union and Covariance Addition over
//!   [`Estimate`] values.
//! - [`imaging`] holds PPM I/O, sRGB/CIELAB conversion, rendering and quality
//!   statistics.
//! - [`matstat`] is the small symmetric-PSD matrix kernel underneath all of it.
//!
//! All numeric types are generic over [`Scalar`] (`f32` or `f64`). The
//! aliases at the crate root fix the scalar to `f64`; the `*F32` aliases fix
//! it to `f32`.

pub mod cli;
pub mod covapixel;
pub mod fusion;
pub mod imaging;
pub mod matstat;
mod scalar;
pub mod segmentation;

pub use scalar::Scalar;
pub use segmentation::{LabelMap, SlicParams};

pub type SymPsdMatrix = matstat::SymPsdMatrix<f64>;
pub type CholFactor = matstat::CholFactor<f64>;
pub type Estimate = fusion::Estimate<f64>;
pub type FusionResult = fusion::FusionResult<f64>;
pub type Covapixel = covapixel::Covapixel<f64>;
pub type CovapixelSet = covapixel::CovapixelSet<f64>;
pub type ImageBuffer = imaging::ImageBuffer<f64>;
pub type QualityReport = imaging::QualityReport<f64>;

pub type SymPsdMatrixF32 = matstat::SymPsdMatrix<f32>;
pub type CholFactorF32 = matstat::CholFactor<f32>;
pub type EstimateF32 = fusion::Estimate<f32>;
pub type FusionResultF32 = fusion::FusionResult<f32>;
pub type CovapixelF32 = covapixel::Covapixel<f32>;
pub type ImageBufferF32 = imaging::ImageBuffer<f32>;
