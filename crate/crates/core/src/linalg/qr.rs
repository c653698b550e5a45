//! Householder QR of tall complex matrices, used for linear least squares.

use num_traits::Zero;

use super::matrix::CMatrix;
use crate::scalar::{Real, C};

#[derive(Debug, Clone)]
pub struct Qr<T> {
    rows: usize,
    cols: usize,
    /// Unit Householder vectors, column k holds v_k in rows k.. .
    v: CMatrix<T>,
    r: CMatrix<T>,
}

impl<T: Real> Qr<T> {
    pub fn new(a: &CMatrix<T>) -> Self {
        let (m, n) = (a.rows(), a.cols());
        assert!(m >= n, "QR needs rows >= cols");
        let mut w = a.clone();
        let mut v = CMatrix::zeros(m, n);
        for k in 0..n {
            let x: Vec<C<T>> = (k..m).map(|i| w[(i, k)]).collect();
            let xnorm = x.iter().fold(T::zero(), |s, z| s.hypot(z.norm()));
            if xnorm == T::zero() {
                continue;
            }
            let phase = if x[0].norm() > T::zero() {
                x[0] / x[0].norm()
            } else {
                C::new(T::one(), T::zero())
            };
            let alpha = -phase * xnorm;
            let mut h = x;
            h[0] -= alpha;
            let hn = h.iter().fold(T::zero(), |s, z| s.hypot(z.norm()));
            if hn == T::zero() {
                continue;
            }
            for (i, z) in h.iter().enumerate() {
                v[(k + i, k)] = z / hn;
            }
            for j in k..n {
                let mut d = C::zero();
                for i in k..m {
                    d += v[(i, k)].conj() * w[(i, j)];
                }
                let two = T::lit(2.0);
                for i in k..m {
                    let vi = v[(i, k)];
                    w[(i, j)] -= vi * d * two;
                }
            }
        }
        let r = CMatrix::from_fn(n, n, |i, j| if i <= j { w[(i, j)] } else { C::zero() });
        Self {
            rows: m,
            cols: n,
            v,
            r,
        }
    }

    pub fn r(&self) -> &CMatrix<T> {
        &self.r
    }

    /// `min |R_kk| / max |R_kk|`; zero for rank-deficient input.
    pub fn diag_ratio(&self) -> T {
        let d: Vec<T> = (0..self.cols).map(|k| self.r[(k, k)].norm()).collect();
        let hi = d.iter().fold(T::zero(), |a, &b| a.max(b));
        let lo = d.iter().fold(T::infinity(), |a, &b| a.min(b));
        if hi == T::zero() {
            T::zero()
        } else {
            lo / hi
        }
    }

    fn reflect(&self, k: usize, b: &mut [C<T>]) {
        let mut d = C::zero();
        for i in k..self.rows {
            d += self.v[(i, k)].conj() * b[i];
        }
        let two = T::lit(2.0);
        for i in k..self.rows {
            b[i] -= self.v[(i, k)] * d * two;
        }
    }

    /// `b <- Q^H b`.
    pub fn apply_qh(&self, b: &mut [C<T>]) {
        for k in 0..self.cols {
            self.reflect(k, b);
        }
    }

    /// `b <- Q b`.
    pub fn apply_q(&self, b: &mut [C<T>]) {
        for k in (0..self.cols).rev() {
            self.reflect(k, b);
        }
    }

    /// Least-squares solution of `A x = b`.
    pub fn solve_ls(&self, b: &[C<T>]) -> Vec<C<T>> {
        let mut y = b.to_vec();
        self.apply_qh(&mut y);
        let n = self.cols;
        let mut x = vec![C::zero(); n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s -= self.r[(i, j)] * x[j];
            }
            x[i] = s / self.r[(i, i)];
        }
        x
    }

    /// Component of `b` orthogonal to the column space of `A`.
    pub fn project_out(&self, b: &[C<T>]) -> Vec<C<T>> {
        let mut y = b.to_vec();
        self.apply_qh(&mut y);
        for z in y.iter_mut().take(self.cols) {
            *z = C::zero();
        }
        self.apply_q(&mut y);
        y
    }
}
