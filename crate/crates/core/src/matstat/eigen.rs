//! Cyclic Jacobi eigensolver for small symmetric matrices.

use super::dense::Square;
use crate::Scalar;

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix: eigenvalues ascending, and the
/// matching eigenvectors as the columns of `vectors`.
pub(crate) struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: Square<T>,
}

pub(crate) fn jacobi<T>(mut m: Square<T>) -> SymEigen<T>
where
    T: Scalar,
{
    let n = m.n;
    let mut v = Square::identity(n);
    let eps = T::epsilon();

    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        let mut total = T::zero();
        for i in 0..n {
            for j in 0..n {
                let x = m.at(i, j) * m.at(i, j);
                total += x;
                if i != j {
                    off += x;
                }
            }
        }
        if off == T::zero() || off <= eps * eps * total {
            break;
        }

        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.at(p, q);
                if apq == T::zero() {
                    continue;
                }
                let theta = (m.at(q, q) - m.at(p, p)) / (apq + apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(T::one()));
                let c = T::one() / t.hypot(T::one());
                let s = t * c;

                for k in 0..n {
                    let akp = m.at(k, p);
                    let akq = m.at(k, q);
                    m.set(k, p, c * akp - s * akq);
                    m.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = m.at(p, k);
                    let aqk = m.at(q, k);
                    m.set(p, k, c * apk - s * aqk);
                    m.set(q, k, s * apk + c * aqk);
                }
                m.set(p, q, T::zero());
                m.set(q, p, T::zero());
                for k in 0..n {
                    let vkp = v.at(k, p);
                    let vkq = v.at(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m.at(i, i)
            .partial_cmp(&m.at(j, j))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| m.at(i, i)).collect();
    let mut vectors = Square::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors.set(row, col, v.at(row, src));
        }
    }
    SymEigen { values, vectors }
}
