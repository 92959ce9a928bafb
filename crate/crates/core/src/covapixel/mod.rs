//! Covapixels: per-region (mean, covariance) summaries of image features.
//!
//! Features are pixel position (`x` = column, `y` = row, origin top-left, in
//! pixels) optionally followed by three color channels in `[0, 1]`. The
//! covariance is the population (divide-by-`n`) second central moment plus
//! `eps·I`, which is added once at extraction and never at merge.

mod io;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::fusion::Estimate;
use crate::imaging::{ColorSpace, ImageBuffer};
use crate::matstat::SymPsdMatrix;
use crate::segmentation::LabelMap;
use crate::Scalar;

pub use io::{read_covapix, write_covapix, FORMAT_VERSION};

/// Default regularization added to every extracted covariance.
pub const DEFAULT_EPS: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CovapixelError {
    #[error("dimension mismatch: image {image:?}, labels {labels:?}")]
    DimensionMismatch {
        image: (usize, usize),
        labels: (usize, usize),
    },
    #[error("feature space {features} needs a {expected:?} image, got {found:?}")]
    ColorSpaceMismatch {
        features: FeatureSpace,
        expected: ColorSpace,
        found: ColorSpace,
    },
    #[error("feature space mismatch: {0} vs {1}")]
    FeatureSpaceMismatch(FeatureSpace, FeatureSpace),
    #[error("eps must be finite and nonnegative")]
    InvalidEps,
    #[error("unknown feature space {0:?}")]
    UnknownFeatureSpace(String),
    #[error("malformed covapixel document: {0}")]
    Format(String),
}

/// Which per-pixel features a covapixel summarizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FeatureSpace {
    /// Position only (k = 2).
    Xy,
    /// Position and sRGB (k = 5).
    XyRgb,
    /// Position and CIELAB scaled to `[0, 1]`: `L/100`, `(a+128)/255`,
    /// `(b+128)/255` (k = 5).
    #[default]
    XyLab,
}

impl FeatureSpace {
    pub fn k(self) -> usize {
        match self {
            FeatureSpace::Xy => 2,
            FeatureSpace::XyRgb | FeatureSpace::XyLab => 5,
        }
    }

    pub fn has_color(self) -> bool {
        self != FeatureSpace::Xy
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureSpace::Xy => "xy",
            FeatureSpace::XyRgb => "xy_rgb",
            FeatureSpace::XyLab => "xy_lab",
        }
    }

    /// Image color space the extractor expects, if any.
    pub fn required_space(self) -> Option<ColorSpace> {
        match self {
            FeatureSpace::Xy => None,
            FeatureSpace::XyRgb => Some(ColorSpace::Rgb),
            FeatureSpace::XyLab => Some(ColorSpace::Lab),
        }
    }

    /// Maps an image pixel to the color features.
    pub fn color_features<T: Scalar>(self, px: [T; 3]) -> [T; 3] {
        match self {
            FeatureSpace::XyLab => {
                let off = T::lit(128.0);
                let span = T::lit(255.0);
                [
                    px[0] / T::lit(100.0),
                    (px[1] + off) / span,
                    (px[2] + off) / span,
                ]
            }
            _ => px,
        }
    }

    /// Inverse of [`color_features`](Self::color_features): back to image
    /// channel units.
    pub fn feature_color<T: Scalar>(self, f: [T; 3]) -> [T; 3] {
        match self {
            FeatureSpace::XyLab => {
                let off = T::lit(128.0);
                let span = T::lit(255.0);
                [f[0] * T::lit(100.0), f[1] * span - off, f[2] * span - off]
            }
            _ => f,
        }
    }
}

impl fmt::Display for FeatureSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSpace {
    type Err = CovapixelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "xy" => Ok(FeatureSpace::Xy),
            "xy_rgb" => Ok(FeatureSpace::XyRgb),
            "xy_lab" => Ok(FeatureSpace::XyLab),
            other => Err(CovapixelError::UnknownFeatureSpace(other.to_string())),
        }
    }
}

/// Summary of one region: pixel count and feature mean/covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct Covapixel<T> {
    pub id: u32,
    pub n: usize,
    pub est: Estimate<T>,
    pub feature_space: FeatureSpace,
}

impl<T: Scalar> Covapixel<T> {
    /// Spatial mean `(x, y)`.
    pub fn centroid(&self) -> (T, T) {
        (self.est.mu[0], self.est.mu[1])
    }

    /// Mean color in image channel units, if the feature space has color.
    pub fn mean_color(&self) -> Option<[T; 3]> {
        if !self.feature_space.has_color() || self.est.mu.len() < 5 {
            return None;
        }
        let mu = &self.est.mu;
        Some(self.feature_space.feature_color([mu[2], mu[3], mu[4]]))
    }

    /// 2×2 spatial block `[[var_x, cov_xy], [cov_xy, var_y]]`.
    pub fn spatial_cov(&self) -> [T; 3] {
        let c = &self.est.cov;
        [c.get(0, 0), c.get(1, 0), c.get(1, 1)]
    }
}

/// A set of covapixels with the metadata stored alongside them on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct CovapixelSet<T> {
    pub feature_space: FeatureSpace,
    pub eps: T,
    pub width: usize,
    pub height: usize,
    pub covapixels: Vec<Covapixel<T>>,
}

/// Extracts one covapixel per region, ordered by id.
///
/// Means use per-region sums in row-major pixel order; the spatial mean is
/// the integer coordinate sum divided by `n`, so it is the region centroid.
pub fn extract_covapixels<T: Scalar>(
    image: &ImageBuffer<T>,
    labels: &LabelMap,
    fs: FeatureSpace,
    eps: T,
) -> Result<Vec<Covapixel<T>>, CovapixelError> {
    if image.dims() != labels.dims() {
        return Err(CovapixelError::DimensionMismatch {
            image: image.dims(),
            labels: labels.dims(),
        });
    }
    if let Some(expected) = fs.required_space() {
        if image.space() != expected {
            return Err(CovapixelError::ColorSpaceMismatch {
                features: fs,
                expected,
                found: image.space(),
            });
        }
    }
    if !(eps >= T::zero() && eps.is_finite()) {
        return Err(CovapixelError::InvalidEps);
    }

    let k = fs.k();
    let w = labels.width();
    let regions = labels.region_count();
    let features = |p: usize| -> [T; 5] {
        let [c0, c1, c2] = fs.color_features(image.pixel_at(p));
        [T::from_count(p % w), T::from_count(p / w), c0, c1, c2]
    };

    let mut counts = vec![0usize; regions];
    let mut xy_sums = vec![(0u64, 0u64); regions];
    let mut color_sums = vec![[T::zero(); 3]; regions];
    for (p, &l) in labels.labels().iter().enumerate() {
        let r = l as usize;
        counts[r] += 1;
        xy_sums[r].0 += (p % w) as u64;
        xy_sums[r].1 += (p / w) as u64;
        if k > 2 {
            let f = features(p);
            for c in 0..3 {
                color_sums[r][c] += f[2 + c];
            }
        }
    }

    let means: Vec<Vec<T>> = (0..regions)
        .map(|r| {
            let n = T::from_count(counts[r]);
            let mut mu = vec![
                T::from_u64(xy_sums[r].0).unwrap() / n,
                T::from_u64(xy_sums[r].1).unwrap() / n,
            ];
            if k > 2 {
                mu.extend(color_sums[r].iter().map(|&s| s / n));
            }
            mu
        })
        .collect();

    let packed = k * (k + 1) / 2;
    let mut moments = vec![vec![T::zero(); packed]; regions];
    for (p, &l) in labels.labels().iter().enumerate() {
        let r = l as usize;
        let f = features(p);
        let mu = &means[r];
        let mut d = [T::zero(); 5];
        for i in 0..k {
            d[i] = f[i] - mu[i];
        }
        let acc = &mut moments[r];
        let mut idx = 0;
        for i in 0..k {
            for j in 0..=i {
                acc[idx] += d[i] * d[j];
                idx += 1;
            }
        }
    }

    Ok((0..regions)
        .map(|r| {
            let n = T::from_count(counts[r]);
            let mut lower: Vec<T> = moments[r].iter().map(|&s| s / n).collect();
            for i in 0..k {
                lower[i * (i + 1) / 2 + i] += eps;
            }
            Covapixel {
                id: r as u32,
                n: counts[r],
                est: Estimate {
                    mu: means[r].clone(),
                    cov: SymPsdMatrix::from_lower_unchecked(k, lower),
                },
                feature_space: fs,
            }
        })
        .collect())
}

/// Moment-matched union of two regions: the exact mean and covariance of the
/// combined pixel set (weights `n`). The merged id is the smaller of the two.
/// No extra `eps·I` is added.
pub fn merge_covapixels<T: Scalar>(
    a: &Covapixel<T>,
    b: &Covapixel<T>,
) -> Result<Covapixel<T>, CovapixelError> {
    if a.feature_space != b.feature_space {
        return Err(CovapixelError::FeatureSpaceMismatch(
            a.feature_space,
            b.feature_space,
        ));
    }
    let n = a.n + b.n;
    let (wa, wb) = (T::from_count(a.n), T::from_count(b.n));
    let total = T::from_count(n);
    let mu: Vec<T> = a
        .est
        .mu
        .iter()
        .zip(&b.est.mu)
        .map(|(&x, &y)| (wa * x + wb * y) / total)
        .collect();
    let da: Vec<T> = a.est.mu.iter().zip(&mu).map(|(&x, &m)| x - m).collect();
    let db: Vec<T> = b.est.mu.iter().zip(&mu).map(|(&y, &m)| y - m).collect();
    let ca = a.est.cov.add_outer(&da);
    let cb = b.est.cov.add_outer(&db);
    let cov = ca.lin_comb(wa / total, &cb, wb / total);
    Ok(Covapixel {
        id: a.id.min(b.id),
        n,
        est: Estimate { mu, cov },
        feature_space: a.feature_space,
    })
}

/// Regions sharing a horizontal or vertical pixel boundary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjacencyGraph {
    pub region_count: usize,
    /// Unordered pairs stored as `(low, high)`.
    pub edges: BTreeSet<(u32, u32)>,
}

impl AdjacencyGraph {
    pub fn contains(&self, p: u32, q: u32) -> bool {
        self.edges.contains(&(p.min(q), p.max(q)))
    }

    pub fn neighbors(&self, id: u32) -> impl Iterator<Item = u32> + '_ {
        self.edges.iter().filter_map(move |&(p, q)| {
            if p == id {
                Some(q)
            } else if q == id {
                Some(p)
            } else {
                None
            }
        })
    }
}

pub fn region_adjacency(labels: &LabelMap) -> AdjacencyGraph {
    let (w, h) = labels.dims();
    let mut edges = BTreeSet::new();
    let ids = labels.labels();
    for y in 0..h {
        for x in 0..w {
            let p = ids[y * w + x];
            let mut add = |q: u32| {
                if p != q {
                    edges.insert((p.min(q), p.max(q)));
                }
            };
            if x + 1 < w {
                add(ids[y * w + x + 1]);
            }
            if y + 1 < h {
                add(ids[(y + 1) * w + x]);
            }
        }
    }
    AdjacencyGraph {
        region_count: labels.region_count(),
        edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::grid_segment;

    fn single_region(w: usize, h: usize) -> LabelMap {
        LabelMap::new(w, h, vec![0; w * h]).unwrap()
    }

    #[test]
    fn uniform_rectangle_moments() {
        let (w, h) = (4usize, 3usize);
        let img = ImageBuffer::<f64>::filled(w, h, ColorSpace::Rgb, [0.2, 0.4, 0.6]);
        let eps = 1e-8;
        let c =
            &extract_covapixels(&img, &single_region(w, h), FeatureSpace::XyRgb, eps).unwrap()[0];
        assert_eq!(c.n, 12);
        assert_eq!(c.centroid(), (1.5, 1.0));
        let cov = &c.est.cov;
        assert!((cov.get(0, 0) - ((w * w - 1) as f64 / 12.0 + eps)).abs() < 1e-15);
        assert!((cov.get(1, 1) - ((h * h - 1) as f64 / 12.0 + eps)).abs() < 1e-15);
        assert_eq!(cov.get(1, 0), 0.0);
        for i in 2..5 {
            for j in 0..5 {
                let want = if i == j { eps } else { 0.0 };
                assert!(
                    (cov.get(i, j) - want).abs() < 1e-20,
                    "({i},{j}) = {}",
                    cov.get(i, j)
                );
            }
        }
    }

    #[test]
    fn singleton_and_pair() {
        let img =
            ImageBuffer::<f64>::from_fn(3, 1, ColorSpace::Rgb, |x, _| [x as f64 / 4.0, 0.5, 0.5]);
        let labels = LabelMap::new(3, 1, vec![0, 1, 0]).unwrap();
        let cps = extract_covapixels(&img, &labels, FeatureSpace::XyRgb, 1e-8).unwrap();
        assert_eq!(cps[1].est.mu, vec![1.0, 0.0, 0.25, 0.5, 0.5]);
        assert_eq!(cps[1].est.cov, SymPsdMatrix::scaled_identity(5, 1e-8));
        // x ∈ {0, 2}; colors 0 and 0.5 in channel 0
        assert_eq!(cps[0].n, 2);
        assert!((cps[0].est.cov.get(0, 0) - (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn merge_two_singletons() {
        let img = ImageBuffer::<f64>::filled(3, 1, ColorSpace::Rgb, [0.1, 0.1, 0.1]);
        let labels = LabelMap::new(3, 1, vec![0, 2, 1]).unwrap();
        let cps = extract_covapixels(&img, &labels, FeatureSpace::Xy, 0.0).unwrap();
        let m = merge_covapixels(&cps[0], &cps[1]).unwrap();
        assert_eq!(m.id, 0);
        assert_eq!(m.n, 2);
        assert_eq!(m.est.mu, vec![1.0, 0.0]);
        assert_eq!(m.est.cov.get(0, 0), 1.0);
        assert_eq!(m.est.cov.get(1, 1), 0.0);
    }

    #[test]
    fn merge_identical_moments() {
        let img = ImageBuffer::<f64>::from_fn(4, 4, ColorSpace::Rgb, |x, y| {
            [x as f64 / 4.0, y as f64 / 4.0, 0.0]
        });
        let c = extract_covapixels(&img, &single_region(4, 4), FeatureSpace::XyRgb, 0.0)
            .unwrap()
            .remove(0);
        let mut d = c.clone();
        d.id = 9;
        let m = merge_covapixels(&c, &d).unwrap();
        assert_eq!(m.est.mu, c.est.mu);
        for (x, y) in m.est.cov.as_lower().iter().zip(c.est.cov.as_lower()) {
            assert!((x - y).abs() < 1e-15);
        }
        let mut other = c.clone();
        other.feature_space = FeatureSpace::XyLab;
        assert!(matches!(
            merge_covapixels(&c, &other),
            Err(CovapixelError::FeatureSpaceMismatch(..))
        ));
    }

    #[test]
    fn extraction_errors() {
        let img = ImageBuffer::<f64>::filled(4, 4, ColorSpace::Rgb, [0.0; 3]);
        let labels = grid_segment(4, 3, 2, 2).unwrap();
        assert!(matches!(
            extract_covapixels(&img, &labels, FeatureSpace::Xy, 0.0),
            Err(CovapixelError::DimensionMismatch { .. })
        ));
        let labels = grid_segment(4, 4, 2, 2).unwrap();
        assert!(matches!(
            extract_covapixels(&img, &labels, FeatureSpace::XyLab, 0.0),
            Err(CovapixelError::ColorSpaceMismatch { .. })
        ));
        assert_eq!(
            extract_covapixels(&img, &labels, FeatureSpace::Xy, -1.0).unwrap_err(),
            CovapixelError::InvalidEps
        );
        assert_eq!(
            extract_covapixels(&img, &labels, FeatureSpace::Xy, 0.0)
                .unwrap()
                .len(),
            4
        );
    }

    #[test]
    fn adjacency_examples() {
        assert!(region_adjacency(&single_region(3, 3)).edges.is_empty());
        let g = region_adjacency(&LabelMap::new(2, 1, vec![0, 1]).unwrap());
        assert_eq!(g.edges.iter().copied().collect::<Vec<_>>(), vec![(0, 1)]);
        let g = region_adjacency(&LabelMap::new(2, 2, vec![0, 1, 1, 0]).unwrap());
        assert_eq!(g.edges.len(), 1);
        assert!(g.contains(1, 0));
        let g = region_adjacency(&grid_segment(6, 6, 2, 2).unwrap());
        // 3×3 grid of tiles: 12 edges, no diagonals
        assert_eq!(g.edges.len(), 12);
        assert!(!g.contains(0, 4));
        assert_eq!(g.neighbors(4).collect::<Vec<_>>(), vec![1, 3, 5, 7]);
    }

    #[test]
    fn feature_space_parsing() {
        for fs in [FeatureSpace::Xy, FeatureSpace::XyRgb, FeatureSpace::XyLab] {
            assert_eq!(fs.name().parse::<FeatureSpace>().unwrap(), fs);
        }
        assert!("rgb".parse::<FeatureSpace>().is_err());
        let lab = [53.0f64, -20.0, 40.0];
        let back = FeatureSpace::XyLab.feature_color(FeatureSpace::XyLab.color_features(lab));
        for i in 0..3 {
            assert!((back[i] - lab[i]).abs() < 1e-12);
        }
    }
}
