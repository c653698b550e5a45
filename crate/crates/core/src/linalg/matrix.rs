//! Small dense complex matrices, row-major.

use std::ops::{Index, IndexMut};

use num_traits::{One, Zero};

use crate::scalar::{Real, C};

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<C<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds from row-major storage. Returns `None` on a length mismatch.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C<T>>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<C<T>>]) -> Option<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return None;
        }
        Some(Self::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub fn from_diag(diag: &[C<T>]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C<T>] {
        &self.data
    }

    pub fn row(&self, i: usize) -> Vec<C<T>> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn column(&self, j: usize) -> Vec<C<T>> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_row(&mut self, i: usize, v: &[C<T>]) {
        self.data[i * self.cols..(i + 1) * self.cols].copy_from_slice(v);
    }

    pub fn set_column(&mut self, j: usize, v: &[C<T>]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn map(&self, f: impl Fn(C<T>) -> C<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, s: C<T>) -> Self {
        self.map(|x| x * s)
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    /// `self · v` for a column vector `v`.
    pub fn mul_vec(&self, v: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .fold(C::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    /// `u · self` for a row vector `u`.
    pub fn vec_mul(&self, u: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(self.rows, u.len());
        let mut out = vec![C::zero(); self.cols];
        for (i, &ui) in u.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += ui * self[(i, j)];
            }
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.norm()))
    }

    pub fn frobenius(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |s, x| s + x.norm_sqr())
            .sqrt()
    }

    /// Sum of absolute values of the entries in row `i`.
    pub fn row_abs_sum(&self, i: usize) -> T {
        self.row(i).iter().fold(T::zero(), |s, x| s + x.norm())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    /// Entrywise `|a - b| <= tol`.
    pub fn approx_eq(&self, other: &Self, tol: T) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.sub(other).max_abs() <= tol
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = C<T>;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Bilinear pairing `sum_i a_i b_i`, used for <L|R> with L stored as a row.
pub fn pair<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    a.iter().zip(b).fold(C::zero(), |s, (&x, &y)| s + x * y)
}

/// Hermitian inner product `sum_i conj(a_i) b_i`.
pub fn inner<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    a.iter().zip(b).fold(C::zero(), |s, (&x, &y)| s + x.conj() * y)
}

pub fn norm2<T: Real>(a: &[C<T>]) -> T {
    a.iter().fold(T::zero(), |s, x| s + x.norm_sqr()).sqrt()
}

/// |<a, b>| / (|a| |b|), the cosine of the angle between two complex rays.
pub fn alignment<T: Real>(a: &[C<T>], b: &[C<T>]) -> T {
    let na = norm2(a);
    let nb = norm2(b);
    if na.is_zero() || nb.is_zero() {
        return T::zero();
    }
    inner(a, b).norm() / (na * nb)
}

/// Index of the largest-modulus entry; ties go to the lowest index.
pub fn argmax_abs<T: Real>(v: &[C<T>]) -> usize {
    let mut best = 0;
    let mut best_val = T::neg_infinity();
    for (i, x) in v.iter().enumerate() {
        let m = x.norm();
        if m > best_val {
            best = i;
            best_val = m;
        }
    }
    best
}

/// Scales `v` to unit Euclidean norm with its largest entry real-positive.
///
/// Returns the complex factor that was applied, or `None` for a zero vector.
pub fn gauge_fix<T: Real>(v: &mut [C<T>]) -> Option<C<T>> {
    let n = norm2(v);
    if !(n > T::zero()) {
        return None;
    }
    let k = argmax_abs(v);
    let pivot = v[k];
    // conj(pivot) / |pivot| rotates the pivot onto the positive real axis.
    let factor = pivot.conj() / (pivot.norm() * n);
    for x in v.iter_mut() {
        *x *= factor;
    }
    v[k] = C::new(v[k].re, T::zero());
    Some(factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cl;

    #[test]
    fn matmul_and_vec_products_agree() {
        let a = CMatrix::<f64>::from_fn(3, 3, |i, j| cl((i + 2 * j) as f64, i as f64 - j as f64));
        let v: Vec<C<f64>> = (0..3).map(|k| cl(k as f64 + 1.0, -0.5)).collect();
        let col = CMatrix::from_fn(3, 1, |i, _| v[i]);
        let av = a.mul_vec(&v);
        let am = a.matmul(&col);
        for i in 0..3 {
            assert!((av[i] - am[(i, 0)]).norm() < 1e-14);
        }
        let ua = a.vec_mul(&v);
        let at = a.transpose().mul_vec(&v);
        for i in 0..3 {
            assert!((ua[i] - at[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn gauge_fix_makes_pivot_real_positive() {
        let mut v = vec![cl::<f64>(0.0, 3.0), cl(1.0, 1.0)];
        gauge_fix(&mut v).unwrap();
        assert!((norm2(&v) - 1.0).abs() < 1e-15);
        assert!(v[0].re > 0.0 && v[0].im == 0.0);
        let mut z = vec![cl::<f64>(0.0, 0.0); 2];
        assert!(gauge_fix(&mut z).is_none());
    }

    #[test]
    fn gauge_fix_tie_goes_to_lowest_index() {
        let mut v = vec![cl::<f64>(0.0, 1.0), cl(-1.0, 0.0)];
        gauge_fix(&mut v).unwrap();
        assert!(v[0].im == 0.0 && v[0].re > 0.0);
    }
}
