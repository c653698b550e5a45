//! Non-Hermitian eigenproblems with paired left/right eigenvectors, and the
//! resolvent `(omega I - H)^-1`.

mod eigen;
mod lu;
mod matrix;
mod qr;

use std::cmp::Ordering;

use num_traits::One;

pub use lu::Lu;
pub use qr::Qr;
pub use matrix::{alignment, argmax_abs, gauge_fix, inner, norm2, pair, CMatrix};

use crate::error::{Error, Result};
use crate::scalar::{Real, C};

/// A dense square Hamiltonian in rad/s together with a provenance label.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian<T> {
    entries: CMatrix<T>,
    label: String,
}

impl<T: Real> Hamiltonian<T> {
    pub fn new(entries: CMatrix<T>, label: impl Into<String>) -> Result<Self> {
        if !entries.is_square() || entries.rows() == 0 {
            return Err(Error::InvalidInput(format!(
                "Hamiltonian must be square and non-empty, got {}x{}",
                entries.rows(),
                entries.cols()
            )));
        }
        if !entries.is_finite() {
            return Err(Error::InvalidInput(
                "Hamiltonian has non-finite entries".into(),
            ));
        }
        Ok(Self {
            entries,
            label: label.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.rows()
    }

    pub fn entries(&self) -> &CMatrix<T> {
        &self.entries
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn get(&self, i: usize, j: usize) -> C<T> {
        self.entries[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            entries: self.entries.adjoint(),
            label: format!("adjoint({})", self.label),
        }
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.entries.approx_eq(&self.entries.transpose(), tol)
    }
}

/// Eigenvalues with biorthonormal right (columns of `rev`) and left (rows of
/// `lev`) eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem<T> {
    pub eigenvalues: Vec<C<T>>,
    pub rev: CMatrix<T>,
    pub lev: CMatrix<T>,
    /// Per-mode `|L_n| |R_n| / |<L_n|R_n>|`.
    pub condition: Vec<T>,
}

impl<T: Real> EigenSystem<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Right eigenvector `|psi_n^R>`.
    pub fn right(&self, n: usize) -> Vec<C<T>> {
        self.rev.column(n)
    }

    /// Left eigenvector `<psi_n^L|`, as a row.
    pub fn left(&self, n: usize) -> Vec<C<T>> {
        self.lev.row(n)
    }

    /// Condition number of the eigenvector matrix, `|R|_F |R^-1|_F`.
    pub fn basis_condition(&self) -> T {
        self.rev.frobenius() * self.lev.frobenius()
    }

    /// `max |lev · rev - I|`.
    pub fn biorthonormality_residual(&self) -> T {
        self.lev
            .matmul(&self.rev)
            .sub(&CMatrix::identity(self.dim()))
            .max_abs()
    }

    /// Largest right/left eigen-equation residual over all modes.
    pub fn eigen_residual(&self, h: &Hamiltonian<T>) -> T {
        let mut worst = T::zero();
        for n in 0..self.dim() {
            let w = self.eigenvalues[n];
            let r = self.right(n);
            let hr = h.entries().mul_vec(&r);
            let l = self.left(n);
            let lh = h.entries().vec_mul(&l);
            let rr = hr
                .iter()
                .zip(&r)
                .fold(T::zero(), |s, (&a, &b)| s + (a - w * b).norm_sqr())
                .sqrt();
            let ll = lh
                .iter()
                .zip(&l)
                .fold(T::zero(), |s, (&a, &b)| s + (a - w * b).norm_sqr())
                .sqrt();
            worst = worst.max(rr / norm2(&r)).max(ll / norm2(&l));
        }
        worst
    }

    /// `sum_n |R_n><L_n| / (omega - omega_n)`, the resolvent rebuilt from the
    /// spectral data.
    pub fn spectral_resolvent(&self, omega: T) -> CMatrix<T> {
        let n = self.dim();
        let mut g = CMatrix::zeros(n, n);
        for k in 0..n {
            let denom: C<T> = C::new(omega, T::zero()) - self.eigenvalues[k];
            let inv: C<T> = C::<T>::one() / denom;
            for i in 0..n {
                let ri: C<T> = self.rev[(i, k)] * inv;
                for j in 0..n {
                    g[(i, j)] += ri * self.lev[(k, j)];
                }
            }
        }
        g
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EigOptions<T> {
    /// Basis condition above which the decomposition is rejected.
    pub condition_cap: T,
}

impl<T: Real> Default for EigOptions<T> {
    fn default() -> Self {
        Self {
            condition_cap: T::lit(T::CONDITION_CAP),
        }
    }
}

/// Orders eigenvalues by ascending real part, then ascending imaginary part.
pub fn spectral_order<T: Real>(a: &C<T>, b: &C<T>) -> Ordering {
    a.re.partial_cmp(&b.re)
        .unwrap_or(Ordering::Equal)
        .then(a.im.partial_cmp(&b.im).unwrap_or(Ordering::Equal))
}

pub fn eig<T: Real>(h: &Hamiltonian<T>) -> Result<EigenSystem<T>> {
    eig_with(h, &EigOptions::default())
}

pub fn eig_with<T: Real>(h: &Hamiltonian<T>, opts: &EigOptions<T>) -> Result<EigenSystem<T>> {
    let raw = eigen::right_eigen(h.entries())?;
    let n = h.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| spectral_order(&raw.values[i], &raw.values[j]));
    let eigenvalues: Vec<C<T>> = order.iter().map(|&k| raw.values[k]).collect();
    let mut rev = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut v = raw.vectors.column(src);
        if gauge_fix(&mut v).is_none() {
            return Err(Error::DefectiveMatrix {
                condition: f64::INFINITY,
                cap: opts.condition_cap.as_f64(),
            });
        }
        rev.set_column(dst, &v);
    }
    let lu = Lu::new(&rev);
    if lu.is_singular() {
        return Err(Error::DefectiveMatrix {
            condition: f64::INFINITY,
            cap: opts.condition_cap.as_f64(),
        });
    }
    let lev = lu.inverse();
    let cond = rev.frobenius() * lev.frobenius();
    if !(cond <= opts.condition_cap) {
        return Err(Error::DefectiveMatrix {
            condition: cond.as_f64(),
            cap: opts.condition_cap.as_f64(),
        });
    }
    let (rev, lev) = biorthonormalize(&rev, &lev)?;
    let condition = (0..n)
        .map(|k| norm2(&rev.column(k)) * norm2(&lev.row(k)))
        .collect();
    Ok(EigenSystem {
        eigenvalues,
        rev,
        lev,
        condition,
    })
}

/// Puts a (rev, lev) pair into the canonical gauge: unit-norm REV columns
/// whose largest entry is real-positive, LEV rows rescaled so that each
/// diagonal overlap `<L_n|R_n>` is exactly one.
pub fn biorthonormalize<T: Real>(
    rev: &CMatrix<T>,
    lev: &CMatrix<T>,
) -> Result<(CMatrix<T>, CMatrix<T>)> {
    let n = rev.cols();
    if lev.rows() != n || lev.cols() != rev.rows() {
        return Err(Error::InvalidInput(format!(
            "rev is {}x{} but lev is {}x{}",
            rev.rows(),
            rev.cols(),
            lev.rows(),
            lev.cols()
        )));
    }
    let floor = T::lit(T::OVERLAP_FLOOR);
    let mut r_out = rev.clone();
    let mut l_out = lev.clone();
    for k in 0..n {
        let mut r = rev.column(k);
        if gauge_fix(&mut r).is_none() {
            return Err(Error::SingularOverlap {
                mode: k,
                overlap: 0.0,
            });
        }
        let l = lev.row(k);
        let ov = pair(&l, &r);
        let rel = ov.norm() / norm2(&l).max(T::min_positive_value());
        if !(rel >= floor) {
            return Err(Error::SingularOverlap {
                mode: k,
                overlap: rel.as_f64(),
            });
        }
        let l: Vec<C<T>> = l.iter().map(|&x| x / ov).collect();
        r_out.set_column(k, &r);
        l_out.set_row(k, &l);
    }
    Ok((r_out, l_out))
}

/// `(omega I - H)^-1`.
pub fn resolvent<T: Real>(h: &Hamiltonian<T>, omega: T) -> Result<CMatrix<T>> {
    let n = h.dim();
    let mut m = h.entries().scale(-C::one());
    for i in 0..n {
        m[(i, i)] += C::new(omega, T::zero());
    }
    let lu = Lu::new(&m);
    if lu.is_singular() {
        return Err(Error::SingularAtResonance {
            omega: omega.as_f64(),
        });
    }
    Ok(lu.inverse())
}
