use std::fmt;

use super::{ColorSpace, ImageBuffer, ImagingError};
use crate::segmentation::LabelMap;
use crate::Scalar;

/// Reconstruction error and boundary complexity of a segmentation.
#[derive(Clone, Debug, PartialEq)]
pub struct QualityReport<T> {
    pub mse: T,
    /// `10·log10(1/mse)`; `+∞` when `mse = 0`.
    pub psnr_db: T,
    /// Number of horizontally or vertically adjacent pixel pairs whose labels
    /// differ.
    pub boundary_px: usize,
    pub boundary_per_region: T,
}

/// Formats like C's `%.6g`.
fn sig6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    }
}

impl<T: Scalar> fmt::Display for QualityReport<T> {
    /// `mse=… psnr_db=… boundary_px=… boundary_per_region=…`, six significant
    /// digits.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mse={} psnr_db={} boundary_px={} boundary_per_region={}",
            sig6(self.mse.to_f64_lossy()),
            sig6(self.psnr_db.to_f64_lossy()),
            self.boundary_px,
            sig6(self.boundary_per_region.to_f64_lossy()),
        )
    }
}

pub fn boundary_pixel_pairs(labels: &LabelMap) -> usize {
    let (w, h) = labels.dims();
    let mut count = 0;
    for y in 0..h {
        for x in 0..w {
            let l = labels.label(x, y);
            if x + 1 < w && labels.label(x + 1, y) != l {
                count += 1;
            }
            if y + 1 < h && labels.label(x, y + 1) != l {
                count += 1;
            }
        }
    }
    count
}

pub fn quality_stats<T: Scalar>(
    original: &ImageBuffer<T>,
    recon: &ImageBuffer<T>,
    labels: &LabelMap,
) -> Result<QualityReport<T>, ImagingError> {
    if original.dims() != recon.dims() {
        return Err(ImagingError::DimensionMismatch {
            left: original.dims(),
            right: recon.dims(),
        });
    }
    if original.dims() != labels.dims() {
        return Err(ImagingError::DimensionMismatch {
            left: original.dims(),
            right: labels.dims(),
        });
    }
    original.require_space(ColorSpace::Rgb)?;
    recon.require_space(ColorSpace::Rgb)?;
    let sse = original
        .data()
        .iter()
        .zip(recon.data())
        .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
    let mse = sse / T::from_count(original.data().len().max(1));
    let psnr_db = if mse == T::zero() {
        T::infinity()
    } else {
        T::lit(10.0) * mse.recip().log10()
    };
    let boundary_px = boundary_pixel_pairs(labels);
    Ok(QualityReport {
        mse,
        psnr_db,
        boundary_px,
        boundary_per_region: T::from_count(boundary_px) / T::from_count(labels.region_count()),
    })
}
