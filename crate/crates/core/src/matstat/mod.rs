//! Symmetric positive-semidefinite matrix numerics.
//!
//! Matrices are tiny (k ≤ [`MAX_DIM`]), so everything here favors exactness
//! and determinism over speed: packed lower-triangle storage, a Cholesky
//! factorization with a fixed jitter ladder, and a cyclic Jacobi eigensolver.

pub(crate) mod dense;
pub(crate) mod eigen;

use thiserror::Error;

use self::dense::Square;
use crate::Scalar;

/// Relative tolerance for the PSD invariant, scaled by `max(1, trace/k)`.
pub const PSD_TOL: f64 = 1e-9;

/// Diagonal jitter ladder used by [`JitterPolicy::Auto`], scaled by
/// `max(1, trace/k)`.
pub const JITTER_STEPS: [f64; 3] = [1e-12, 1e-10, 1e-8];

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatError {
    #[error("matrix is not positive semidefinite (pivot {pivot:e} at index {index})")]
    NotPositiveSemidefinite { index: usize, pivot: f64 },
    #[error("matrix has minimum eigenvalue {min_eigenvalue:e}, below the PSD tolerance")]
    NegativeEigenvalue { min_eigenvalue: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("unsupported dimension {0} (must be 1..={MAX_DIM})")]
    InvalidDimension(usize),
    #[error("expected {expected} entries, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
}

/// Scalar size of a covariance, minimized by the fusion optimizers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Objective {
    #[default]
    LogDet,
    Trace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum JitterPolicy {
    /// Factor as-is; zero pivots are allowed for semidefinite input.
    #[default]
    None,
    /// Require strictly positive pivots, escalating through [`JITTER_STEPS`].
    Auto,
}

#[inline]
fn packed_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

fn check_dim(dim: usize) -> Result<(), MatError> {
    if dim == 0 || dim > MAX_DIM {
        Err(MatError::InvalidDimension(dim))
    } else {
        Ok(())
    }
}

/// Symmetric nonnegative-definite matrix stored as its packed lower triangle
/// (row-major). Symmetry holds by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SymPsdMatrix<T> {
    dim: usize,
    lower: Vec<T>,
}

impl<T: Scalar> SymPsdMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "unsupported dimension {dim}");
        Self {
            dim,
            lower: vec![T::zero(); packed_len(dim)],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, T::one())
    }

    /// `s·I`; `s` must be nonnegative.
    pub fn scaled_identity(dim: usize, s: T) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.lower[packed_index(i, i)] = s;
        }
        m
    }

    pub fn from_diagonal(diag: &[T]) -> Result<Self, MatError> {
        check_dim(diag.len())?;
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.lower[packed_index(i, i)] = d;
        }
        m.validated()
    }

    /// Builds from the packed lower triangle, row-major:
    /// `[m00, m10, m11, m20, m21, m22, ...]`.
    pub fn from_lower(dim: usize, lower: Vec<T>) -> Result<Self, MatError> {
        check_dim(dim)?;
        if lower.len() != packed_len(dim) {
            return Err(MatError::BadLength {
                expected: packed_len(dim),
                got: lower.len(),
            });
        }
        Self { dim, lower }.validated()
    }

    /// Builds from a full row-major `dim × dim` matrix, averaging it with its
    /// transpose.
    pub fn from_dense(dim: usize, dense: &[T]) -> Result<Self, MatError> {
        check_dim(dim)?;
        if dense.len() != dim * dim {
            return Err(MatError::BadLength {
                expected: dim * dim,
                got: dense.len(),
            });
        }
        Self::from_square_unchecked(&Square {
            n: dim,
            a: dense.to_vec(),
        })
        .validated()
    }

    pub(crate) fn from_lower_unchecked(dim: usize, lower: Vec<T>) -> Self {
        debug_assert_eq!(lower.len(), packed_len(dim));
        Self { dim, lower }
    }

    pub(crate) fn from_square_unchecked(sq: &Square<T>) -> Self {
        let n = sq.n;
        let half = T::lit(0.5);
        let mut lower = Vec::with_capacity(packed_len(n));
        for i in 0..n {
            for j in 0..=i {
                lower.push(if i == j {
                    sq.at(i, i)
                } else {
                    (sq.at(i, j) + sq.at(j, i)) * half
                });
            }
        }
        Self { dim: n, lower }
    }

    fn validated(self) -> Result<Self, MatError> {
        if self.lower.iter().any(|v| !v.is_finite()) {
            return Err(MatError::NonFinite);
        }
        let min = self.min_eigenvalue();
        if min < -T::lit(PSD_TOL) * self.scale() {
            return Err(MatError::NegativeEigenvalue {
                min_eigenvalue: min.to_f64_lossy(),
            });
        }
        Ok(self)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.lower[packed_index(i, j)]
    }

    /// Packed lower triangle, row-major.
    pub fn as_lower(&self) -> &[T] {
        &self.lower
    }

    /// Full row-major `dim × dim` copy.
    pub fn to_dense(&self) -> Vec<T> {
        self.to_square().a
    }

    pub(crate) fn to_square(&self) -> Square<T> {
        let n = self.dim;
        let mut sq = Square::zeros(n);
        for i in 0..n {
            for j in 0..n {
                sq.set(i, j, self.get(i, j));
            }
        }
        sq
    }

    pub fn trace(&self) -> T {
        (0..self.dim).fold(T::zero(), |acc, i| acc + self.get(i, i))
    }

    /// `max(1, trace/k)`: the reference magnitude for relative tolerances.
    pub fn scale(&self) -> T {
        (self.trace() / T::from_count(self.dim)).max(T::one())
    }

    pub fn frobenius_norm(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                let v = self.get(i, j);
                s += v * v;
            }
        }
        s.sqrt()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<T> {
        eigen::jacobi(self.to_square()).values
    }

    /// Eigenvalues ascending and the row-major matrix whose columns are the
    /// matching unit eigenvectors.
    pub fn eigen(&self) -> (Vec<T>, Vec<T>) {
        let e = eigen::jacobi(self.to_square());
        (e.values, e.vectors.a)
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues()[0]
    }

    /// Checks the PSD invariant at the given relative tolerance.
    pub fn is_psd(&self, tol: T) -> bool {
        self.min_eigenvalue() >= -tol * self.scale()
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.dim)
            .map(|i| (0..self.dim).fold(T::zero(), |acc, j| acc + self.get(i, j) * v[j]))
            .collect()
    }

    /// `alpha·self + beta·other`; both coefficients must be nonnegative for
    /// the result to stay PSD.
    pub(crate) fn lin_comb(&self, alpha: T, other: &Self, beta: T) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            lower: self
                .lower
                .iter()
                .zip(&other.lower)
                .map(|(&a, &b)| alpha * a + beta * b)
                .collect(),
        }
    }

    /// `self + v·vᵀ`.
    pub(crate) fn add_outer(&self, v: &[T]) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim {
            for j in 0..=i {
                out.lower[packed_index(i, j)] += v[i] * v[j];
            }
        }
        out
    }

    fn max_diag(&self) -> T {
        (0..self.dim).fold(T::zero(), |acc, i| acc.max(self.get(i, i)))
    }
}

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = source + jitter·I`.
#[derive(Clone, Debug, PartialEq)]
pub struct CholFactor<T> {
    dim: usize,
    lower: Vec<T>,
    jitter: T,
}

impl<T: Scalar> CholFactor<T> {
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Packed lower triangle, row-major.
    pub fn as_lower(&self) -> &[T] {
        &self.lower
    }

    /// Entry `(i, j)`; zero above the diagonal.
    pub fn get(&self, i: usize, j: usize) -> T {
        if j > i {
            T::zero()
        } else {
            self.lower[packed_index(i, j)]
        }
    }

    /// Diagonal shift `δ` that was added before factoring.
    pub fn jitter(&self) -> T {
        self.jitter
    }

    /// Rebuilds a factor from packed storage, e.g. when reading a file.
    /// Entries are taken as given; `reconstruct` yields a PSD matrix for any
    /// real lower-triangular input.
    pub fn from_lower(dim: usize, lower: Vec<T>) -> Result<Self, MatError> {
        check_dim(dim)?;
        if lower.len() != packed_len(dim) {
            return Err(MatError::BadLength {
                expected: packed_len(dim),
                got: lower.len(),
            });
        }
        if lower.iter().any(|v| !v.is_finite()) {
            return Err(MatError::NonFinite);
        }
        Ok(Self {
            dim,
            lower,
            jitter: T::zero(),
        })
    }

    /// `L·Lᵀ`.
    pub fn reconstruct(&self) -> SymPsdMatrix<T> {
        let n = self.dim;
        let mut lower = Vec::with_capacity(packed_len(n));
        for i in 0..n {
            for j in 0..=i {
                let s = (0..=j).fold(T::zero(), |acc, p| acc + self.get(i, p) * self.get(j, p));
                lower.push(s);
            }
        }
        SymPsdMatrix::from_lower_unchecked(n, lower)
    }

    /// `log det(L·Lᵀ)`.
    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        (0..self.dim).fold(T::zero(), |acc, i| acc + two * self.get(i, i).ln())
    }

    /// `L⁻¹` as a dense matrix. Requires a nonzero diagonal.
    pub(crate) fn inverse_lower(&self) -> Square<T> {
        let n = self.dim;
        let mut inv = Square::zeros(n);
        for col in 0..n {
            for i in col..n {
                let mut s = if i == col { T::one() } else { T::zero() };
                for p in col..i {
                    s -= self.get(i, p) * inv.at(p, col);
                }
                inv.set(i, col, s / self.get(i, i));
            }
        }
        inv
    }

    /// `(L·Lᵀ)⁻¹`.
    pub fn inverse(&self) -> SymPsdMatrix<T> {
        let n = self.dim;
        let li = self.inverse_lower();
        let mut lower = Vec::with_capacity(packed_len(n));
        for i in 0..n {
            for j in 0..=i {
                let s = (i..n).fold(T::zero(), |acc, k| acc + li.at(k, i) * li.at(k, j));
                lower.push(s);
            }
        }
        SymPsdMatrix::from_lower_unchecked(n, lower)
    }
}

/// One factorization attempt of `m + delta·I`. On failure returns the
/// offending pivot.
fn factor<T: Scalar>(
    m: &SymPsdMatrix<T>,
    delta: T,
    semidefinite: bool,
) -> Result<Vec<T>, (usize, T)> {
    let n = m.dim;
    let tiny = T::epsilon() * T::from_count(n) * (m.max_diag() + delta);
    let neg_tol = T::lit(PSD_TOL) * m.scale();
    let mut l = vec![T::zero(); packed_len(n)];
    for j in 0..n {
        let mut s = m.get(j, j) + delta;
        for p in 0..j {
            let v = l[packed_index(j, p)];
            s -= v * v;
        }
        if s > tiny {
            let d = s.sqrt();
            l[packed_index(j, j)] = d;
            for i in (j + 1)..n {
                let mut t = m.get(i, j);
                for p in 0..j {
                    t -= l[packed_index(i, p)] * l[packed_index(j, p)];
                }
                l[packed_index(i, j)] = t / d;
            }
        } else if semidefinite && s >= -neg_tol {
            // zero pivot: the column is already explained by earlier ones
        } else {
            return Err((j, s));
        }
    }
    Ok(l)
}

/// Cholesky factorization `m + δI = L·Lᵀ`.
///
/// With [`JitterPolicy::None`], `δ = 0` and (numerically) zero pivots yield a
/// zero column, so singular PSD matrices factor exactly. With
/// [`JitterPolicy::Auto`] every pivot must be strictly positive; on failure
/// `δ` escalates through [`JITTER_STEPS`]`· max(1, trace/k)`.
pub fn cholesky<T: Scalar>(
    m: &SymPsdMatrix<T>,
    policy: JitterPolicy,
) -> Result<CholFactor<T>, MatError> {
    let to_err = |(index, pivot): (usize, T)| MatError::NotPositiveSemidefinite {
        index,
        pivot: pivot.to_f64_lossy(),
    };
    match policy {
        JitterPolicy::None => factor(m, T::zero(), true)
            .map(|lower| CholFactor {
                dim: m.dim,
                lower,
                jitter: T::zero(),
            })
            .map_err(to_err),
        JitterPolicy::Auto => {
            let scale = m.scale();
            let mut last = match factor(m, T::zero(), false) {
                Ok(lower) => {
                    return Ok(CholFactor {
                        dim: m.dim,
                        lower,
                        jitter: T::zero(),
                    })
                }
                Err(e) => e,
            };
            for step in JITTER_STEPS {
                let delta = T::lit(step) * scale;
                match factor(m, delta, false) {
                    Ok(lower) => {
                        return Ok(CholFactor {
                            dim: m.dim,
                            lower,
                            jitter: delta,
                        })
                    }
                    Err(e) => last = e,
                }
            }
            Err(to_err(last))
        }
    }
}

/// Inverse of `m + δI`, with `δ` chosen by the auto jitter ladder.
pub fn spd_inverse<T: Scalar>(m: &SymPsdMatrix<T>) -> Result<SymPsdMatrix<T>, MatError> {
    Ok(cholesky(m, JitterPolicy::Auto)?.inverse())
}

/// Log-determinant (via the jittered Cholesky factor) or trace.
///
/// A matrix the jitter ladder cannot factor has no finite log-determinant;
/// `-∞` is returned for it only if every pivot was nonnegative, `NaN` otherwise.
pub fn size_measure<T: Scalar>(m: &SymPsdMatrix<T>, objective: Objective) -> T {
    match objective {
        Objective::Trace => m.trace(),
        Objective::LogDet => match cholesky(m, JitterPolicy::Auto) {
            Ok(l) => l.log_det(),
            Err(MatError::NotPositiveSemidefinite { pivot, .. }) if pivot >= 0.0 => {
                T::neg_infinity()
            }
            Err(_) => T::nan(),
        },
    }
}

/// `a ⪰ b` in the Loewner order: `λ_min(a − b) ≥ −tol · max(1, trace(a)/k)`.
pub fn loewner_dominates<T: Scalar>(
    a: &SymPsdMatrix<T>,
    b: &SymPsdMatrix<T>,
    tol: T,
) -> Result<bool, MatError> {
    if a.dim != b.dim {
        return Err(MatError::DimensionMismatch {
            left: a.dim,
            right: b.dim,
        });
    }
    let diff = a.to_square().sub(&b.to_square());
    let min = eigen::jacobi(diff).values[0];
    Ok(min >= -tol * a.scale())
}
