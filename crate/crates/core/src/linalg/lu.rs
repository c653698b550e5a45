//! LU factorization with partial pivoting.

use num_traits::{One, Zero};

use super::matrix::CMatrix;
use crate::scalar::{Real, C};

#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: CMatrix<T>,
    perm: Vec<usize>,
    /// Smallest pivot modulus relative to the largest entry of the input.
    pub min_pivot_ratio: T,
}

impl<T: Real> Lu<T> {
    /// Factors a square matrix. Zero pivots are left in place; callers check
    /// [`Lu::is_singular`] before solving.
    pub fn new(a: &CMatrix<T>) -> Self {
        assert!(a.is_square());
        let n = a.rows();
        let scale = a.max_abs();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = T::infinity();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].norm();
            for i in k + 1..n {
                let m = lu[(i, k)].norm();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                perm.swap(k, p);
            }
            min_pivot = min_pivot.min(best);
            let pivot = lu[(k, k)];
            if pivot.is_zero() {
                continue;
            }
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f.is_zero() {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        let min_pivot_ratio = if scale > T::zero() {
            min_pivot / scale
        } else {
            T::zero()
        };
        Self {
            lu,
            perm,
            min_pivot_ratio,
        }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// True when some pivot is at round-off level relative to the matrix.
    pub fn is_singular(&self) -> bool {
        let n = T::from_usize_lossy(self.dim().max(1));
        !(self.min_pivot_ratio > n * T::epsilon())
    }

    pub fn solve(&self, b: &[C<T>]) -> Vec<C<T>> {
        let n = self.dim();
        let mut x: Vec<C<T>> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// Solves with zero pivots replaced by `floor`; used by inverse iteration
    /// where the shifted matrix is singular on purpose.
    pub fn solve_regularized(&self, b: &[C<T>], floor: T) -> Vec<C<T>> {
        let n = self.dim();
        let mut x: Vec<C<T>> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            let mut d = self.lu[(i, i)];
            if d.norm() < floor {
                d = C::new(floor, T::zero());
            }
            x[i] = s / d;
        }
        x
    }

    pub fn inverse(&self) -> CMatrix<T> {
        let n = self.dim();
        let mut inv = CMatrix::zeros(n, n);
        let mut e = vec![C::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = C::zero());
            e[j] = C::one();
            inv.set_column(j, &self.solve(&e));
        }
        inv
    }
}
