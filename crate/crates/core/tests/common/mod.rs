//! Test-side oracles and random generators. Dense linear algebra here is
//! deliberately independent of the library's matstat kernel.
#![allow(dead_code)]

use covapix::imaging::ColorSpace;
use covapix::ImageBuffer;
use covapix::SymPsdMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Dense = Vec<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Dense {
    (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

pub fn matmul(a: &[f64], b: &[f64], n: usize, m: usize, p: usize) -> Dense {
    let mut out = vec![0.0; n * p];
    for i in 0..n {
        for k in 0..m {
            for j in 0..p {
                out[i * p + j] += a[i * m + k] * b[k * p + j];
            }
        }
    }
    out
}

pub fn transpose(a: &[f64], rows: usize, cols: usize) -> Dense {
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

pub fn add(a: &[f64], b: &[f64]) -> Dense {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Dense {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Dense {
    a.iter().map(|x| x * s).collect()
}

pub fn identity(n: usize) -> Dense {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

pub fn frob(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    frob(&sub(got, want)) / frob(want).max(f64::MIN_POSITIVE)
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn inverse(a: &[f64], n: usize) -> Dense {
    let mut m = a.to_vec();
    let mut inv = identity(n);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| {
                m[i * n + col]
                    .abs()
                    .partial_cmp(&m[j * n + col].abs())
                    .unwrap()
            })
            .unwrap();
        for j in 0..n {
            m.swap(col * n + j, piv * n + j);
            inv.swap(col * n + j, piv * n + j);
        }
        let d = m[col * n + col];
        for j in 0..n {
            m[col * n + j] /= d;
            inv[col * n + j] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = m[i * n + col];
                if f != 0.0 {
                    for j in 0..n {
                        m[i * n + j] -= f * m[col * n + j];
                        inv[i * n + j] -= f * inv[col * n + j];
                    }
                }
            }
        }
    }
    inv
}

/// Plain Cholesky of a positive-definite matrix.
pub fn cholesky_pd(a: &[f64], n: usize) -> Dense {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let s: f64 = a[j * n + j] - (0..j).map(|p| l[j * n + p] * l[j * n + p]).sum::<f64>();
        let d = s.max(0.0).sqrt();
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let t: f64 = a[i * n + j] - (0..j).map(|p| l[i * n + p] * l[j * n + p]).sum::<f64>();
            l[i * n + j] = if d > 0.0 { t / d } else { 0.0 };
        }
    }
    l
}

/// Random orthogonal matrix by Gram–Schmidt on Gaussian columns.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Dense {
    loop {
        let g = gaussian(rng, n, n);
        let mut q = vec![0.0; n * n];
        let mut ok = true;
        for c in 0..n {
            let mut v: Vec<f64> = (0..n).map(|r| g[r * n + c]).collect();
            for p in 0..c {
                let dot: f64 = (0..n).map(|r| v[r] * q[r * n + p]).sum();
                for r in 0..n {
                    v[r] -= dot * q[r * n + p];
                }
            }
            let norm = frob(&v);
            if norm < 1e-8 {
                ok = false;
                break;
            }
            for r in 0..n {
                q[r * n + c] = v[r] / norm;
            }
        }
        if ok {
            return q;
        }
    }
}

/// `Q·diag(λ)·Qᵀ` with `λ` log-uniform in `[lo, hi]`.
pub fn random_spd_dense(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Dense {
    let q = random_orthogonal(rng, n);
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        let t: f64 = rng.random();
        d[i * n + i] = (lo.ln() + t * (hi.ln() - lo.ln())).exp();
    }
    matmul(&matmul(&q, &d, n, n, n), &transpose(&q, n, n), n, n, n)
}

/// `G·Gᵀ` with `G` Gaussian `n × rank`.
pub fn random_gram_dense(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> Dense {
    let g = gaussian(rng, n, rank);
    matmul(&g, &transpose(&g, n, rank), n, rank, n)
}

pub fn sym(dense: &[f64], n: usize) -> SymPsdMatrix {
    SymPsdMatrix::from_dense(n, dense).expect("test matrix is PSD")
}

/// Well-conditioned (cond ≤ 1e4) SPD matrix.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> SymPsdMatrix {
    sym(&random_spd_dense(rng, n, 1e-2, 1e2), n)
}

/// Mixture used for closure sweeps: mostly spectral SPD, one in four a
/// possibly rank-deficient Gram matrix.
pub fn random_psd_mixed(rng: &mut ChaCha8Rng, n: usize) -> SymPsdMatrix {
    if rng.random_range(0..4) == 0 {
        let rank = rng.random_range(1..=n);
        sym(&random_gram_dense(rng, n, rank), n)
    } else {
        random_spd(rng, n)
    }
}

/// Valid cross-covariance for blocks `ca`, `cb`: `La·R·Lbᵀ` with `‖R‖₂ ≤ 1`.
/// One draw in three uses an orthogonal `R` (fully correlated, tight).
pub fn random_cross_cov(rng: &mut ChaCha8Rng, ca: &[f64], cb: &[f64], n: usize) -> Dense {
    let la = cholesky_pd(ca, n);
    let lb = cholesky_pd(cb, n);
    let r = if rng.random_range(0..3) == 0 {
        let q = random_orthogonal(rng, n);
        if rng.random_bool(0.5) {
            q
        } else {
            scale(&q, -1.0)
        }
    } else {
        let g = gaussian(rng, n, n);
        let u: f64 = rng.random();
        scale(&g, u / frob(&g))
    };
    matmul(&matmul(&la, &r, n, n, n), &transpose(&lb, n, n), n, n, n)
}

pub fn condition_number(m: &SymPsdMatrix) -> f64 {
    let ev = m.eigenvalues();
    let lo = ev[0];
    let hi = ev[ev.len() - 1];
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImageBuffer {
    ImageBuffer::from_fn(w, h, ColorSpace::Rgb, |_, _| {
        [rng.random(), rng.random(), rng.random()]
    })
}

/// Smooth two-axis gradient in `[0, 1]`.
pub fn gradient_image(w: usize, h: usize) -> ImageBuffer {
    ImageBuffer::from_fn(w, h, ColorSpace::Rgb, |x, y| {
        let u = x as f64 / (w - 1) as f64;
        let v = y as f64 / (h - 1) as f64;
        [u, v, 0.5 * (u + v)]
    })
}

/// Gradient background with a disc and a bar, for segmentation runs.
pub fn synthetic_scene(w: usize, h: usize) -> ImageBuffer {
    ImageBuffer::from_fn(w, h, ColorSpace::Rgb, |x, y| {
        let (fx, fy) = (x as f64 / w as f64, y as f64 / h as f64);
        let (dx, dy) = (fx - 0.35, fy - 0.4);
        if dx * dx + dy * dy < 0.04 {
            [0.9, 0.2, 0.1]
        } else if (0.6..0.8).contains(&fx) && fy > 0.5 {
            [0.1, 0.3, 0.8]
        } else {
            [0.3 + 0.4 * fx, 0.5 + 0.3 * fy, 0.4]
        }
    })
}

/// Flood-fill check that every region is a single 4-connected component.
pub fn regions_are_connected(labels: &covapix::LabelMap) -> bool {
    let (w, h) = labels.dims();
    let ids = labels.labels();
    let mut seen = vec![false; w * h];
    let mut started = vec![false; labels.region_count()];
    for start in 0..w * h {
        if seen[start] {
            continue;
        }
        let id = ids[start] as usize;
        if started[id] {
            return false;
        }
        started[id] = true;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(p) = stack.pop() {
            let (x, y) = (p % w, p / w);
            let mut nbrs = Vec::with_capacity(4);
            if x > 0 {
                nbrs.push(p - 1);
            }
            if x + 1 < w {
                nbrs.push(p + 1);
            }
            if y > 0 {
                nbrs.push(p - w);
            }
            if y + 1 < h {
                nbrs.push(p + w);
            }
            for q in nbrs {
                if !seen[q] && ids[q] as usize == id {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
    }
    true
}
