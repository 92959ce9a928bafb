//! Row-major dense square matrices for intermediate products.

use crate::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Square<T> {
    pub n: usize,
    pub a: Vec<T>,
}

impl<T: Scalar> Square<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            a: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = T::one();
        }
        m
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.a[i * self.n + j] = v;
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.a[i * n + k];
                if aik == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += aik * rhs.a[k * n + j];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.a[j * n + i] = self.a[i * n + j];
            }
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Self {
            n: self.n,
            a: self.a.iter().zip(&rhs.a).map(|(&x, &y)| x - y).collect(),
        }
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).fold(T::zero(), |acc, j| acc + self.a[i * n + j] * v[j]))
            .collect()
    }
}
