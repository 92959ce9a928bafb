//! Rendering covapixels back to rasters.

use std::collections::HashMap;

use super::color::{lab_to_rgb_pixel, rgb_to_lab_pixel};
use super::{ColorSpace, ImageBuffer, ImagingError};
use crate::covapixel::{Covapixel, FeatureSpace};
use crate::segmentation::LabelMap;
use crate::Scalar;

/// Boundary paint color (sRGB red).
pub const BOUNDARY_COLOR: [f64; 3] = [1.0, 0.0, 0.0];

/// What [`render_ellipses`] paints under the ellipses.
#[derive(Clone, Copy, Debug)]
pub enum Background<'a> {
    Black,
    /// Flat reconstruction over the given label map.
    Flat(&'a LabelMap),
}

fn display_rgb<T: Scalar>(c: &Covapixel<T>) -> Result<[T; 3], ImagingError> {
    let color = c.mean_color().ok_or(ImagingError::NoColorFeatures)?;
    let rgb = match c.feature_space {
        FeatureSpace::XyLab => lab_to_rgb_pixel(color),
        _ => color,
    };
    Ok(rgb.map(|v| v.max(T::zero()).min(T::one())))
}

/// Paints every pixel with its region's mean color (sRGB).
pub fn render_flat<T: Scalar>(
    labels: &LabelMap,
    covas: &[Covapixel<T>],
) -> Result<ImageBuffer<T>, ImagingError> {
    let by_id: HashMap<u32, &Covapixel<T>> = covas.iter().map(|c| (c.id, c)).collect();
    let palette = (0..labels.region_count() as u32)
        .map(|id| {
            let c = by_id.get(&id).ok_or(ImagingError::MissingRegion(id))?;
            display_rgb(c)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let data = labels
        .labels()
        .iter()
        .flat_map(|&l| palette[l as usize])
        .collect();
    Ok(ImageBuffer {
        width: labels.width(),
        height: labels.height(),
        space: ColorSpace::Rgb,
        data,
    })
}

/// Draws each covapixel as the set of pixels within spatial Mahalanobis
/// distance `nsigma` of its mean, filled with its mean color, then marks
/// each mean with one pixel of inverted color.
///
/// Larger regions paint first so small ones stay visible. Covapixels
/// without color features paint white.
pub fn render_ellipses<T: Scalar>(
    covas: &[Covapixel<T>],
    width: usize,
    height: usize,
    nsigma: T,
    background: Background<'_>,
) -> Result<ImageBuffer<T>, ImagingError> {
    let mut img = match background {
        Background::Black => ImageBuffer::filled(width, height, ColorSpace::Rgb, [T::zero(); 3]),
        Background::Flat(labels) => {
            if labels.dims() != (width, height) {
                return Err(ImagingError::DimensionMismatch {
                    left: (width, height),
                    right: labels.dims(),
                });
            }
            render_flat(labels, covas)?
        }
    };
    if covas.iter().any(|c| c.est.mu.len() < 2) {
        return Err(ImagingError::NoSpatialFeatures);
    }
    let colors = covas
        .iter()
        .map(|c| {
            if c.feature_space.has_color() {
                display_rgb(c)
            } else {
                Ok([T::one(); 3])
            }
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut order: Vec<usize> = (0..covas.len()).collect();
    order.sort_by(|&i, &j| {
        covas[j]
            .n
            .cmp(&covas[i].n)
            .then(covas[i].id.cmp(&covas[j].id))
    });

    let lim2 = nsigma * nsigma;
    for &i in &order {
        let c = &covas[i];
        let (mx, my) = c.centroid();
        let [sxx, sxy, syy] = c.spatial_cov();
        let det = sxx * syy - sxy * sxy;
        if det.is_nan() || det <= T::zero() || nsigma <= T::zero() {
            continue;
        }
        // inverse of the 2×2 spatial block
        let (ixx, ixy, iyy) = (syy / det, -sxy / det, sxx / det);
        let rx = nsigma * sxx.sqrt() + T::one();
        let ry = nsigma * syy.sqrt() + T::one();
        let wmax = T::from_count(width.saturating_sub(1));
        let hmax = T::from_count(height.saturating_sub(1));
        let clampi = |v: T, hi: T| v.max(T::zero()).min(hi).to_usize().unwrap_or(0);
        let (x0, x1) = (
            clampi((mx - rx).floor(), wmax),
            clampi((mx + rx).ceil(), wmax),
        );
        let (y0, y1) = (
            clampi((my - ry).floor(), hmax),
            clampi((my + ry).ceil(), hmax),
        );
        if width == 0 || height == 0 {
            continue;
        }
        for y in y0..=y1 {
            let dy = T::from_count(y) - my;
            for x in x0..=x1 {
                let dx = T::from_count(x) - mx;
                let d2 = ixx * dx * dx + T::lit(2.0) * ixy * dx * dy + iyy * dy * dy;
                if d2 <= lim2 {
                    img.set_pixel(x, y, colors[i]);
                }
            }
        }
    }
    for (c, color) in covas.iter().zip(&colors) {
        let (mx, my) = c.centroid();
        let (x, y) = (mx.round(), my.round());
        if x >= T::zero() && y >= T::zero() {
            let (x, y) = (
                x.to_usize().unwrap_or(usize::MAX),
                y.to_usize().unwrap_or(usize::MAX),
            );
            if x < width && y < height {
                img.set_pixel(x, y, color.map(|v| T::one() - v));
            }
        }
    }
    Ok(img)
}

/// Paints pixels that have a 4-neighbor with a different label in
/// [`BOUNDARY_COLOR`] (converted to CIELAB for Lab images).
pub fn overlay_boundaries<T: Scalar>(
    img: &ImageBuffer<T>,
    labels: &LabelMap,
) -> Result<ImageBuffer<T>, ImagingError> {
    if img.dims() != labels.dims() {
        return Err(ImagingError::DimensionMismatch {
            left: img.dims(),
            right: labels.dims(),
        });
    }
    let red = BOUNDARY_COLOR.map(T::lit);
    let paint = match img.space() {
        ColorSpace::Rgb => red,
        ColorSpace::Lab => rgb_to_lab_pixel(red),
    };
    let (w, h) = img.dims();
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let l = labels.label(x, y);
            let differs = (x > 0 && labels.label(x - 1, y) != l)
                || (x + 1 < w && labels.label(x + 1, y) != l)
                || (y > 0 && labels.label(x, y - 1) != l)
                || (y + 1 < h && labels.label(x, y + 1) != l);
            if differs {
                out.set_pixel(x, y, paint);
            }
        }
    }
    Ok(out)
}
