//! Label maps: regular grid tiles and SLIC superpixels.

use std::collections::VecDeque;

use thiserror::Error;

use crate::imaging::ImageBuffer;
use crate::Scalar;

/// Magic prefix of the binary label-map format.
pub const LABEL_MAGIC: &[u8; 8] = b"CVPXLBL1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentationError {
    #[error("zero dimension (image {width}x{height}, tile {tile_w}x{tile_h})")]
    ZeroDimension {
        width: usize,
        height: usize,
        tile_w: usize,
        tile_h: usize,
    },
    #[error("empty image")]
    EmptyImage,
    #[error("target region count {k} exceeds pixel count {pixels}")]
    KTooLarge { k: usize, pixels: usize },
    #[error("invalid SLIC parameters: {0}")]
    InvalidParams(&'static str),
    #[error("label buffer length {got} does not match {expected}")]
    BadLength { expected: usize, got: usize },
    #[error("label ids are not contiguous in [0, {region_count})")]
    NonContiguous { region_count: usize },
    #[error("malformed label file: {0}")]
    MalformedFile(&'static str),
}

/// Per-pixel region ids, row-major. Ids cover `[0, region_count)` with every
/// id used.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    region_count: usize,
}

impl LabelMap {
    /// Wraps labels that already form a contiguous id range.
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self, SegmentationError> {
        if labels.len() != width * height {
            return Err(SegmentationError::BadLength {
                expected: width * height,
                got: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(SegmentationError::EmptyImage);
        }
        let count = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
        let mut used = vec![false; count];
        for &l in &labels {
            used[l as usize] = true;
        }
        if used.iter().any(|u| !u) {
            return Err(SegmentationError::NonContiguous {
                region_count: count,
            });
        }
        Ok(Self {
            width,
            height,
            labels,
            region_count: count,
        })
    }

    /// Renumbers arbitrary labels to `0, 1, ...` in order of first appearance
    /// (row-major).
    pub fn compacted(
        width: usize,
        height: usize,
        labels: &[u32],
    ) -> Result<Self, SegmentationError> {
        if labels.len() != width * height {
            return Err(SegmentationError::BadLength {
                expected: width * height,
                got: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(SegmentationError::EmptyImage);
        }
        let mut map = std::collections::HashMap::new();
        let out: Vec<u32> = labels
            .iter()
            .map(|&l| {
                let next = map.len() as u32;
                *map.entry(l).or_insert(next)
            })
            .collect();
        Ok(Self {
            width,
            height,
            labels: out,
            region_count: map.len(),
        })
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
    pub fn region_count(&self) -> usize {
        self.region_count
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Pixel count per region id.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.region_count];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }

    /// Encodes as `CVPXLBL1`, then little-endian `u32` width, height,
    /// region_count and the row-major labels.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 12 + 4 * self.labels.len());
        out.extend_from_slice(LABEL_MAGIC);
        for v in [self.width, self.height, self.region_count] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for &l in &self.labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SegmentationError> {
        if bytes.len() < 20 {
            return Err(SegmentationError::MalformedFile("truncated header"));
        }
        if &bytes[..8] != LABEL_MAGIC {
            return Err(SegmentationError::MalformedFile("bad magic"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let (width, height, count) = (word(8), word(12), word(16));
        let n = width
            .checked_mul(height)
            .ok_or(SegmentationError::MalformedFile("dimensions overflow"))?;
        if bytes.len() != 20 + 4 * n {
            return Err(SegmentationError::MalformedFile("payload length"));
        }
        let labels: Vec<u32> = bytes[20..]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let map = Self::new(width, height, labels)?;
        if map.region_count != count {
            return Err(SegmentationError::MalformedFile(
                "region_count disagrees with labels",
            ));
        }
        Ok(map)
    }
}

/// Regular tiling; ragged tiles at the right and bottom edges.
pub fn grid_segment(
    width: usize,
    height: usize,
    tile_w: usize,
    tile_h: usize,
) -> Result<LabelMap, SegmentationError> {
    if width == 0 || height == 0 || tile_w == 0 || tile_h == 0 {
        return Err(SegmentationError::ZeroDimension {
            width,
            height,
            tile_w,
            tile_h,
        });
    }
    let cols = width.div_ceil(tile_w);
    let rows = height.div_ceil(tile_h);
    let labels = (0..height)
        .flat_map(|y| (0..width).map(move |x| ((y / tile_h) * cols + x / tile_w) as u32))
        .collect();
    Ok(LabelMap {
        width,
        height,
        labels,
        region_count: cols * rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlicParams {
    /// Requested number of superpixels `K`.
    pub target_regions: usize,
    /// Color-vs-space weight `m`.
    pub compactness: f64,
    pub iterations: usize,
}

impl SlicParams {
    pub fn new(target_regions: usize, compactness: f64) -> Self {
        Self {
            target_regions,
            compactness,
            iterations: 10,
        }
    }
}

struct Center<T> {
    x: T,
    y: T,
    color: [T; 3],
}

/// Near-square grid of `nx × ny ≤ k` seeds for a `width × height` image.
fn seed_grid(width: usize, height: usize, k: usize, step: f64) -> (usize, usize) {
    let mut nx = ((width as f64 / step).round() as usize).clamp(1, width);
    let mut ny = ((height as f64 / step).round() as usize).clamp(1, height);
    while nx * ny > k {
        if nx >= ny && nx > 1 {
            nx -= 1;
        } else if ny > 1 {
            ny -= 1;
        } else {
            break;
        }
    }
    (nx, ny)
}

/// SLIC superpixels.
///
/// Fully deterministic: seeds sit on a regular grid (no gradient
/// perturbation), and distance ties go to the lower seed index. Distance is
/// `D² = dc² + (ds/S)²·m²` with `S = sqrt(W·H/K)`, searched in a `2S`
/// window around each seed. The result passes through
/// [`enforce_connectivity`]; its `region_count` is usually within
/// `[K/2, 2K]` but this is not guaranteed.
///
/// The color distance is Euclidean in whatever space the image carries;
/// `m ≈ 10` is calibrated for CIELAB.
pub fn slic_segment<T: Scalar>(
    image: &ImageBuffer<T>,
    params: &SlicParams,
) -> Result<LabelMap, SegmentationError> {
    let (w, h) = image.dims();
    let n = w * h;
    if n == 0 {
        return Err(SegmentationError::EmptyImage);
    }
    let k = params.target_regions;
    if k == 0 {
        return Err(SegmentationError::InvalidParams(
            "target_regions must be positive",
        ));
    }
    if k > n {
        return Err(SegmentationError::KTooLarge { k, pixels: n });
    }
    if !(params.compactness > 0.0 && params.compactness.is_finite()) {
        return Err(SegmentationError::InvalidParams(
            "compactness must be positive",
        ));
    }
    if params.iterations == 0 {
        return Err(SegmentationError::InvalidParams(
            "iterations must be positive",
        ));
    }

    let step = (n as f64 / k as f64).sqrt();
    let (nx, ny) = seed_grid(w, h, k, step);
    let (sx, sy) = (w as f64 / nx as f64, h as f64 / ny as f64);
    let mut centers: Vec<Center<T>> = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let cx = (i as f64 + 0.5) * sx - 0.5;
            let cy = (j as f64 + 0.5) * sy - 0.5;
            let px = (cx.round() as usize).min(w - 1);
            let py = (cy.round() as usize).min(h - 1);
            centers.push(Center {
                x: T::lit(cx),
                y: T::lit(cy),
                color: image.pixel(px, py),
            });
        }
    }

    // window half-extent: at least S, and wide enough that the seed grid
    // covers every pixel
    let half_x = T::lit(step.max(sx));
    let half_y = T::lit(step.max(sy));
    let space_w = T::lit(params.compactness * params.compactness / (step * step));
    let dist2 = |c: &Center<T>, x: usize, y: usize| -> T {
        let px = image.pixel(x, y);
        let dc = (0..3).fold(T::zero(), |acc, i| {
            let d = px[i] - c.color[i];
            acc + d * d
        });
        let dx = T::from_count(x) - c.x;
        let dy = T::from_count(y) - c.y;
        dc + (dx * dx + dy * dy) * space_w
    };

    let unassigned = u32::MAX;
    let mut labels = vec![unassigned; n];
    let mut best = vec![T::infinity(); n];
    let wmax = T::from_count(w - 1);
    let hmax = T::from_count(h - 1);
    for _ in 0..params.iterations {
        labels.fill(unassigned);
        best.fill(T::infinity());
        for (ci, c) in centers.iter().enumerate() {
            let x0 = (c.x - half_x)
                .ceil()
                .max(T::zero())
                .min(wmax)
                .to_usize()
                .unwrap_or(0);
            let x1 = (c.x + half_x)
                .floor()
                .max(T::zero())
                .min(wmax)
                .to_usize()
                .unwrap_or(0);
            let y0 = (c.y - half_y)
                .ceil()
                .max(T::zero())
                .min(hmax)
                .to_usize()
                .unwrap_or(0);
            let y1 = (c.y + half_y)
                .floor()
                .max(T::zero())
                .min(hmax)
                .to_usize()
                .unwrap_or(0);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let d = dist2(c, x, y);
                    let p = y * w + x;
                    if d < best[p] {
                        best[p] = d;
                        labels[p] = ci as u32;
                    }
                }
            }
        }
        // pixels outside every window fall back to the globally nearest seed
        for p in 0..n {
            if labels[p] == unassigned {
                let (x, y) = (p % w, p / w);
                for (ci, c) in centers.iter().enumerate() {
                    let d = dist2(c, x, y);
                    if d < best[p] {
                        best[p] = d;
                        labels[p] = ci as u32;
                    }
                }
            }
        }

        let mut sums = vec![[T::zero(); 5]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (p, &label) in labels.iter().enumerate().take(n) {
            let ci = label as usize;
            let px = image.pixel_at(p);
            let s = &mut sums[ci];
            s[0] += T::from_count(p % w);
            s[1] += T::from_count(p / w);
            s[2] += px[0];
            s[3] += px[1];
            s[4] += px[2];
            counts[ci] += 1;
        }
        for (c, (s, &cnt)) in centers.iter_mut().zip(sums.iter().zip(&counts)) {
            if cnt == 0 {
                continue;
            }
            let inv = T::from_count(cnt).recip();
            c.x = s[0] * inv;
            c.y = s[1] * inv;
            c.color = [s[2] * inv, s[3] * inv, s[4] * inv];
        }
    }

    Ok(connectivity_pass(w, h, &labels, centers.len()))
}

/// 4-connected components of equal labels, numbered in row-major order of
/// their first pixel.
fn components(w: usize, h: usize, labels: &[u32]) -> (Vec<u32>, Vec<usize>) {
    let n = w * h;
    let unset = u32::MAX;
    let mut comp = vec![unset; n];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if comp[start] != unset {
            continue;
        }
        let id = sizes.len() as u32;
        let lab = labels[start];
        comp[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(p) = queue.pop_front() {
            size += 1;
            let (x, y) = (p % w, p / w);
            let mut visit = |q: usize| {
                if comp[q] == unset && labels[q] == lab {
                    comp[q] = id;
                    queue.push_back(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < w {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - w);
            }
            if y + 1 < h {
                visit(p + w);
            }
        }
        sizes.push(size);
    }
    (comp, sizes)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// One absorption round at `threshold`. Returns the merged component labels
/// and whether anything was merged.
fn absorb_small(w: usize, h: usize, labels: &[u32], threshold: f64) -> (Vec<u32>, bool) {
    let (comp, sizes) = components(w, h, labels);
    let nc = sizes.len();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); nc];
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let a = comp[p] as usize;
            let mut link = |q: usize| {
                let b = comp[q] as usize;
                if a != b {
                    neighbors[a].push(b);
                    neighbors[b].push(a);
                }
            };
            if x + 1 < w {
                link(p + 1);
            }
            if y + 1 < h {
                link(p + w);
            }
        }
    }
    for list in &mut neighbors {
        list.sort_unstable();
        list.dedup();
    }

    let mut parent: Vec<usize> = (0..nc).collect();
    let mut size = sizes;
    let mut merged_any = false;
    loop {
        let mut changed = false;
        for c in 0..nc {
            let r = find(&mut parent, c);
            if r != c || (size[r] as f64) >= threshold {
                continue;
            }
            let mut target: Option<usize> = None;
            let candidates = neighbors[r].clone();
            for nb in candidates {
                let t = find(&mut parent, nb);
                if t == r {
                    continue;
                }
                target = match target {
                    Some(cur) if size[cur] > size[t] || (size[cur] == size[t] && cur < t) => {
                        Some(cur)
                    }
                    _ => Some(t),
                };
            }
            if let Some(t) = target {
                parent[r] = t;
                size[t] += size[r];
                let moved = std::mem::take(&mut neighbors[r]);
                neighbors[t].extend(moved);
                changed = true;
                merged_any = true;
            }
        }
        if !changed {
            break;
        }
    }
    let out = comp
        .iter()
        .map(|&c| find(&mut parent, c as usize) as u32)
        .collect();
    (out, merged_any)
}

fn connectivity_pass(w: usize, h: usize, labels: &[u32], nominal_regions: usize) -> LabelMap {
    let n = w * h;
    let mut current = labels.to_vec();
    let mut regions = nominal_regions.max(1);
    loop {
        let threshold = n as f64 / regions as f64 / 4.0;
        let (merged, changed) = absorb_small(w, h, &current, threshold);
        let map = LabelMap::compacted(w, h, &merged).expect("dimensions already validated");
        let stable = !changed && map.region_count == regions;
        regions = map.region_count;
        current = map.labels;
        if stable || (!changed && (n as f64 / regions as f64 / 4.0) <= threshold) {
            return LabelMap {
                width: w,
                height: h,
                labels: current,
                region_count: regions,
            };
        }
    }
}

/// Splits every label into its 4-connected components, absorbs components
/// smaller than `(W·H / region_count) / 4` into their largest adjacent
/// neighbor, and renumbers ids in row-major order of first appearance.
/// Repeats until stable, so the operation is idempotent.
pub fn enforce_connectivity(labels: &LabelMap) -> LabelMap {
    connectivity_pass(
        labels.width,
        labels.height,
        &labels.labels,
        labels.region_count,
    )
}
