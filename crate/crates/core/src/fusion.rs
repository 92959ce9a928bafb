//! Fusion operators over (mean, covariance) estimates.
//!
//! - [`kf_fuse`]: Kalman update of two independent estimates of the same
//!   quantity, in moment or information form.
//! - [`ci_fuse`]: Covariance Intersection, consistent under unknown
//!   cross-correlation.
//! - [`cu_fuse`]: Covariance Union, a single estimate whose covariance bounds
//!   each input inflated by its mean offset.
//! - [`ca_bound`]: Covariance Addition, a bound on the covariance of the sum
//!   of two quantities with unknown cross-correlation.
//! - [`fuse_reduce`]: left fold of one operator over a list.

use std::cmp::Ordering;

use thiserror::Error;

use crate::matstat::dense::Square;
use crate::matstat::{self, cholesky, spd_inverse, JitterPolicy, MatError, SymPsdMatrix};
use crate::Scalar;

pub use crate::matstat::Objective;

/// Golden-section stopping width on the scalar parameter.
pub const SEARCH_TOL: f64 = 1e-8;
/// Golden-section iteration cap.
pub const SEARCH_MAX_ITER: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("mean vector has non-finite entries")]
    NonFiniteMean,
    #[error("both covariances have zero trace")]
    DegenerateInput,
    #[error("empty input list")]
    EmptyInput,
    #[error("element {index}: {source}")]
    AtIndex {
        index: usize,
        #[source]
        source: Box<FusionError>,
    },
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// A mean vector with its covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate<T> {
    pub mu: Vec<T>,
    pub cov: SymPsdMatrix<T>,
}

impl<T: Scalar> Estimate<T> {
    pub fn new(mu: Vec<T>, cov: SymPsdMatrix<T>) -> Result<Self, FusionError> {
        if mu.len() != cov.dim() {
            return Err(FusionError::DimensionMismatch {
                left: mu.len(),
                right: cov.dim(),
            });
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(FusionError::NonFiniteMean);
        }
        Ok(Self { mu, cov })
    }

    /// Scalar estimate `(mu, var)`.
    pub fn scalar(mu: T, var: T) -> Result<Self, FusionError> {
        Self::new(vec![mu], SymPsdMatrix::from_diagonal(&[var])?)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Fused estimate plus the optimizer's parameter: `ω` for CI, `t` for CU,
/// `γ` for CA, and 0 for KF.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionResult<T> {
    pub estimate: Estimate<T>,
    pub aux: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum KfForm {
    Moment,
    #[default]
    Information,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FusionOp {
    /// Kalman update, information form.
    Kf,
    Ci,
    Cu,
    Ca,
}

fn check_dims<T: Scalar>(a: &Estimate<T>, b: &Estimate<T>) -> Result<(), FusionError> {
    if a.dim() != b.dim() {
        return Err(FusionError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

/// Total order on estimates used to evaluate the asymmetric optimizers in a
/// canonical operand order, which makes `op(a, b)` and `op(b, a)` agree
/// bit-for-bit.
fn canonical_order<T: Scalar>(a: &Estimate<T>, b: &Estimate<T>) -> Ordering {
    let lhs = a.cov.as_lower().iter().chain(&a.mu);
    let rhs = b.cov.as_lower().iter().chain(&b.mu);
    for (x, y) in lhs.zip(rhs) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

/// Minimizes `f` over `[0, 1]` by golden-section search, then compares the
/// bracket midpoint against both endpoints. Ties go to the smaller parameter.
pub(crate) fn golden_section<T, E, F>(mut f: F) -> Result<(T, T), E>
where
    T: Scalar,
    F: FnMut(T) -> Result<T, E>,
{
    let r = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let tol = T::lit(SEARCH_TOL);
    let (mut lo, mut hi) = (T::zero(), T::one());
    let mut c = hi - (hi - lo) * r;
    let mut d = lo + (hi - lo) * r;
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..SEARCH_MAX_ITER {
        if hi - lo <= tol {
            break;
        }
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - (hi - lo) * r;
            fc = f(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + (hi - lo) * r;
            fd = f(d)?;
        }
    }
    let mid = (lo + hi) / T::lit(2.0);
    let mut best = (T::zero(), f(T::zero())?);
    for x in [mid, T::one()] {
        let fx = f(x)?;
        if fx < best.1 {
            best = (x, fx);
        }
    }
    Ok(best)
}

/// Kalman update of two independent estimates of the same quantity.
///
/// Information form: `C = (Ca⁻¹ + Cb⁻¹)⁻¹`, `μ = C(Ca⁻¹μa + Cb⁻¹μb)`.
/// Moment form: `K = Ca(Ca + Cb)⁻¹`, `μ = μa + K(μb − μa)`, `C = (I − K)Ca`.
pub fn kf_fuse<T: Scalar>(
    a: &Estimate<T>,
    b: &Estimate<T>,
    form: KfForm,
) -> Result<FusionResult<T>, FusionError> {
    check_dims(a, b)?;
    let estimate = match form {
        KfForm::Information => {
            let ia = spd_inverse(&a.cov)?;
            let ib = spd_inverse(&b.cov)?;
            let cov = spd_inverse(&ia.lin_comb(T::one(), &ib, T::one()))?;
            let ya = ia.mul_vec(&a.mu);
            let yb = ib.mul_vec(&b.mu);
            let y: Vec<T> = ya.iter().zip(&yb).map(|(&p, &q)| p + q).collect();
            Estimate {
                mu: cov.mul_vec(&y),
                cov,
            }
        }
        KfForm::Moment => {
            let s_inv = spd_inverse(&a.cov.lin_comb(T::one(), &b.cov, T::one()))?;
            let ca = a.cov.to_square();
            let gain = ca.mul(&s_inv.to_square());
            let innov: Vec<T> = b.mu.iter().zip(&a.mu).map(|(&p, &q)| p - q).collect();
            let corr = gain.mul_vec(&innov);
            let mu = a.mu.iter().zip(&corr).map(|(&m, &c)| m + c).collect();
            let rest = Square::identity(ca.n).sub(&gain);
            let pa = SymPsdMatrix::from_square_unchecked(&rest.mul(&ca).mul(&rest.transpose()));
            let pb = SymPsdMatrix::from_square_unchecked(
                &gain.mul(&b.cov.to_square()).mul(&gain.transpose()),
            );
            let cov = pa.lin_comb(T::one(), &pb, T::one());
            Estimate { mu, cov }
        }
    };
    Ok(FusionResult {
        estimate,
        aux: T::zero(),
    })
}

struct CiProblem<T> {
    a: Estimate<T>,
    b: Estimate<T>,
    ia: SymPsdMatrix<T>,
    ib: SymPsdMatrix<T>,
    ya: Vec<T>,
    yb: Vec<T>,
}

impl<T: Scalar> CiProblem<T> {
    fn new(a: &Estimate<T>, b: &Estimate<T>) -> Result<Self, FusionError> {
        let ia = spd_inverse(&a.cov)?;
        let ib = spd_inverse(&b.cov)?;
        let ya = ia.mul_vec(&a.mu);
        let yb = ib.mul_vec(&b.mu);
        Ok(Self {
            a: a.clone(),
            b: b.clone(),
            ia,
            ib,
            ya,
            yb,
        })
    }

    fn cov_at(&self, w: T) -> Result<SymPsdMatrix<T>, FusionError> {
        if w == T::one() {
            return Ok(self.a.cov.clone());
        }
        if w == T::zero() {
            return Ok(self.b.cov.clone());
        }
        Ok(spd_inverse(&self.ia.lin_comb(w, &self.ib, T::one() - w))?)
    }

    fn estimate_at(&self, w: T) -> Result<Estimate<T>, FusionError> {
        if w == T::one() {
            return Ok(self.a.clone());
        }
        if w == T::zero() {
            return Ok(self.b.clone());
        }
        let cov = self.cov_at(w)?;
        let y: Vec<T> = self
            .ya
            .iter()
            .zip(&self.yb)
            .map(|(&p, &q)| w * p + (T::one() - w) * q)
            .collect();
        Ok(Estimate {
            mu: cov.mul_vec(&y),
            cov,
        })
    }
}

/// Covariance Intersection.
///
/// `C(ω) = (ωCa⁻¹ + (1−ω)Cb⁻¹)⁻¹`, `μ(ω) = C(ω)(ωCa⁻¹μa + (1−ω)Cb⁻¹μb)`, at
/// the `ω ∈ [0, 1]` minimizing the size of `C(ω)`. `aux` is that `ω`
/// (weight on `a`).
pub fn ci_fuse<T: Scalar>(
    a: &Estimate<T>,
    b: &Estimate<T>,
    objective: Objective,
) -> Result<FusionResult<T>, FusionError> {
    check_dims(a, b)?;
    if canonical_order(a, b) == Ordering::Greater {
        let r = ci_fuse_ordered(b, a, objective)?;
        return Ok(FusionResult {
            aux: T::one() - r.aux,
            ..r
        });
    }
    ci_fuse_ordered(a, b, objective)
}

fn ci_fuse_ordered<T: Scalar>(
    a: &Estimate<T>,
    b: &Estimate<T>,
    objective: Objective,
) -> Result<FusionResult<T>, FusionError> {
    let problem = CiProblem::new(a, b)?;
    let (w, _) = golden_section(|w| {
        Ok::<_, FusionError>(matstat::size_measure(&problem.cov_at(w)?, objective))
    })?;
    Ok(FusionResult {
        estimate: problem.estimate_at(w)?,
        aux: w,
    })
}

/// Smallest covariance from the whitened-max construction that dominates
/// both `p` and `q`. Whitening by `p + q` diagonalizes both in one basis,
/// with spectra `λ` and `1 − λ`; the result takes `max(λ, 1 − λ)` there.
fn whitened_max<T: Scalar>(
    p: &SymPsdMatrix<T>,
    q: &SymPsdMatrix<T>,
) -> Result<SymPsdMatrix<T>, FusionError> {
    let l = cholesky(&p.lin_comb(T::one(), q, T::one()), JitterPolicy::Auto)?;
    let n = p.dim();
    let mut l_sq = Square::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            l_sq.set(i, j, l.get(i, j));
        }
    }
    let l_inv = l.inverse_lower();
    let whitened = l_inv.mul(&p.to_square()).mul(&l_inv.transpose());
    let eig =
        crate::matstat::eigen::jacobi(SymPsdMatrix::from_square_unchecked(&whitened).to_square());
    let v = &eig.vectors;
    let top: Vec<T> = eig.values.iter().map(|&x| x.max(T::one() - x)).collect();
    let mut clamped = Square::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let s = (0..n).fold(T::zero(), |acc, k| acc + v.at(i, k) * top[k] * v.at(j, k));
            clamped.set(i, j, s);
        }
    }
    let c = l_sq.mul(&clamped).mul(&l_sq.transpose());
    Ok(SymPsdMatrix::from_square_unchecked(&c))
}

fn cu_at<T: Scalar>(a: &Estimate<T>, b: &Estimate<T>, t: T) -> Result<Estimate<T>, FusionError> {
    let mu: Vec<T> =
        a.mu.iter()
            .zip(&b.mu)
            .map(|(&x, &y)| x + t * (y - x))
            .collect();
    let da: Vec<T> = mu.iter().zip(&a.mu).map(|(&m, &x)| m - x).collect();
    let db: Vec<T> = mu.iter().zip(&b.mu).map(|(&m, &y)| m - y).collect();
    let pa = a.cov.add_outer(&da);
    let pb = b.cov.add_outer(&db);
    Ok(Estimate {
        mu,
        cov: whitened_max(&pa, &pb)?,
    })
}

/// Covariance Union.
///
/// For `μ = μa + t(μb − μa)`, `C(t)` dominates both `Ca + (μ−μa)(μ−μa)ᵀ` and
/// `Cb + (μ−μb)(μ−μb)ᵀ`; `t ∈ [0, 1]` minimizes the size of `C(t)`. `aux` is
/// that `t`.
pub fn cu_fuse<T: Scalar>(
    a: &Estimate<T>,
    b: &Estimate<T>,
    objective: Objective,
) -> Result<FusionResult<T>, FusionError> {
    check_dims(a, b)?;
    if canonical_order(a, b) == Ordering::Greater {
        let r = cu_fuse_ordered(b, a, objective)?;
        return Ok(FusionResult {
            aux: T::one() - r.aux,
            ..r
        });
    }
    cu_fuse_ordered(a, b, objective)
}

fn cu_fuse_ordered<T: Scalar>(
    a: &Estimate<T>,
    b: &Estimate<T>,
    objective: Objective,
) -> Result<FusionResult<T>, FusionError> {
    let (t, _) = golden_section(|t| {
        Ok::<_, FusionError>(matstat::size_measure(&cu_at(a, b, t)?.cov, objective))
    })?;
    Ok(FusionResult {
        estimate: cu_at(a, b, t)?,
        aux: t,
    })
}

/// Covariance Addition: bound on the covariance of `x_a + x_b` when the
/// cross-covariance is unknown.
///
/// `μ = μa + μb`, `C = (1+γ)Ca + (1+1/γ)Cb` with the trace-minimal
/// `γ = sqrt(tr Cb / tr Ca)`. A zero-trace operand is a known constant: the
/// result keeps the other covariance and `γ` takes its limit (0 when
/// `tr Cb = 0`, ∞ when `tr Ca = 0`).
pub fn ca_bound<T: Scalar>(
    a: &Estimate<T>,
    b: &Estimate<T>,
) -> Result<FusionResult<T>, FusionError> {
    check_dims(a, b)?;
    let mu: Vec<T> = a.mu.iter().zip(&b.mu).map(|(&x, &y)| x + y).collect();
    let (tr_a, tr_b) = (a.cov.trace(), b.cov.trace());
    let (cov, gamma) = match (tr_a > T::zero(), tr_b > T::zero()) {
        (false, false) => return Err(FusionError::DegenerateInput),
        (true, false) => (a.cov.clone(), T::zero()),
        (false, true) => (b.cov.clone(), T::infinity()),
        (true, true) => {
            let g = (tr_b / tr_a).sqrt();
            (
                a.cov.lin_comb(T::one() + g, &b.cov, T::one() + g.recip()),
                g,
            )
        }
    };
    Ok(FusionResult {
        estimate: Estimate { mu, cov },
        aux: gamma,
    })
}

/// Applies one binary operator to a pair. KF uses the information form.
pub fn fuse_pair<T: Scalar>(
    a: &Estimate<T>,
    b: &Estimate<T>,
    op: FusionOp,
    objective: Objective,
) -> Result<FusionResult<T>, FusionError> {
    match op {
        FusionOp::Kf => kf_fuse(a, b, KfForm::Information),
        FusionOp::Ci => ci_fuse(a, b, objective),
        FusionOp::Cu => cu_fuse(a, b, objective),
        FusionOp::Ca => ca_bound(a, b),
    }
}

/// Left fold of `op` over `items` in order. A single item is returned as-is
/// with `aux = 0`; otherwise `aux` comes from the last application.
pub fn fuse_reduce<T: Scalar>(
    items: &[Estimate<T>],
    op: FusionOp,
    objective: Objective,
) -> Result<FusionResult<T>, FusionError> {
    let (first, rest) = items.split_first().ok_or(FusionError::EmptyInput)?;
    let mut acc = FusionResult {
        estimate: first.clone(),
        aux: T::zero(),
    };
    for (offset, item) in rest.iter().enumerate() {
        acc = fuse_pair(&acc.estimate, item, op, objective).map_err(|e| FusionError::AtIndex {
            index: offset + 1,
            source: Box::new(e),
        })?;
    }
    Ok(acc)
}
