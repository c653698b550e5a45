//! Eigenvalues and right eigenvectors of small dense complex matrices.
//!
//! N = 2 uses the closed-form quadratic. Larger matrices are balanced,
//! reduced to upper Hessenberg form with Householder reflectors and iterated
//! with Wilkinson-shifted complex QR sweeps; eigenvectors then come from
//! inverse iteration on the balanced matrix.

use num_traits::{One, Zero};

use super::lu::Lu;
use super::matrix::{inner, norm2, CMatrix};
use crate::error::{Error, Result};
use crate::scalar::{Real, C};

/// Unsorted eigenvalues with matching (unnormalized) right eigenvectors as
/// columns.
pub(crate) struct RawEigen<T> {
    pub values: Vec<C<T>>,
    pub vectors: CMatrix<T>,
}

pub(crate) fn right_eigen<T: Real>(a: &CMatrix<T>) -> Result<RawEigen<T>> {
    match a.rows() {
        0 => Err(Error::InvalidInput("empty matrix".into())),
        1 => Ok(RawEigen {
            values: vec![a[(0, 0)]],
            vectors: CMatrix::identity(1),
        }),
        2 => closed_form_2x2(a),
        _ => general(a),
    }
}

fn closed_form_2x2<T: Real>(m: &CMatrix<T>) -> Result<RawEigen<T>> {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    if b.is_zero() && c.is_zero() {
        return Ok(RawEigen {
            values: vec![a, d],
            vectors: CMatrix::identity(2),
        });
    }
    let half = T::lit(0.5);
    let h = (a - d) * half;
    let bc = b * c;
    let disc = h * h + bc;
    // When the discriminant is pure cancellation noise the two roots, and
    // hence the two eigenvectors, are indistinguishable at this precision.
    let noise = T::lit(64.0) * T::epsilon() * (h.norm_sqr() + bc.norm());
    if disc.norm() <= noise {
        return Err(Error::DefectiveMatrix {
            condition: f64::INFINITY,
            cap: T::CONDITION_CAP,
        });
    }
    let s = disc.sqrt();
    let mean = (a + d) * half;
    let values = vec![mean + s, mean - s];
    let mut vectors = CMatrix::zeros(2, 2);
    for (k, &lam) in values.iter().enumerate() {
        let v1 = [b, lam - a];
        let v2 = [lam - d, c];
        let v = if norm2(&v1) >= norm2(&v2) { v1 } else { v2 };
        vectors.set_column(k, &v);
    }
    Ok(RawEigen { values, vectors })
}

fn general<T: Real>(a: &CMatrix<T>) -> Result<RawEigen<T>> {
    let n = a.rows();
    let (balanced, scale) = balance(a);
    let mut h = balanced.clone();
    hessenberg_in_place(&mut h);
    let values = hessenberg_qr_eigenvalues(h)?;
    let mut vectors = inverse_iteration(&balanced, &values);
    for j in 0..n {
        for i in 0..n {
            vectors[(i, j)] *= scale[i];
        }
    }
    Ok(RawEigen { values, vectors })
}

/// Diagonal similarity `D^-1 A D` with power-of-two entries of `D` that
/// equalizes row and column norms. Returns the balanced matrix and `D`.
pub(crate) fn balance<T: Real>(a: &CMatrix<T>) -> (CMatrix<T>, Vec<T>) {
    let n = a.rows();
    let mut b = a.clone();
    let mut d = vec![T::one(); n];
    let radix = T::lit(2.0);
    let radix2 = radix * radix;
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 100 {
        converged = true;
        sweeps += 1;
        for i in 0..n {
            let mut col = T::zero();
            let mut row = T::zero();
            for j in 0..n {
                if j != i {
                    col += b[(j, i)].norm();
                    row += b[(i, j)].norm();
                }
            }
            if col.is_zero() || row.is_zero() {
                continue;
            }
            let total = col + row;
            let mut f = T::one();
            let mut c = col;
            let lower = row / radix;
            while c < lower {
                f *= radix;
                c *= radix2;
            }
            let upper = row * radix;
            while c > upper {
                f /= radix;
                c /= radix2;
            }
            if (c + row) / f < T::lit(0.95) * total {
                converged = false;
                d[i] *= f;
                for j in 0..n {
                    b[(i, j)] /= f;
                    b[(j, i)] *= f;
                }
            }
        }
    }
    (b, d)
}

/// Householder reduction to upper Hessenberg form.
pub(crate) fn hessenberg_in_place<T: Real>(h: &mut CMatrix<T>) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    let two = T::lit(2.0);
    for k in 0..n - 2 {
        let x: Vec<C<T>> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = norm2(&x);
        if xnorm.is_zero() {
            continue;
        }
        let x0 = x[0];
        let phase = if x0.is_zero() {
            C::one()
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm = norm2(&v);
        if vnorm.is_zero() {
            continue;
        }
        v.iter_mut().for_each(|e| *e /= vnorm);
        // left: rows k+1.., all columns
        for col in 0..n {
            let mut s = C::zero();
            for (idx, vi) in v.iter().enumerate() {
                s += vi.conj() * h[(k + 1 + idx, col)];
            }
            let s = s * two;
            for (idx, vi) in v.iter().enumerate() {
                let cur = h[(k + 1 + idx, col)];
                h[(k + 1 + idx, col)] = cur - *vi * s;
            }
        }
        // right: all rows, columns k+1..
        for row in 0..n {
            let mut s = C::zero();
            for (idx, vi) in v.iter().enumerate() {
                s += h[(row, k + 1 + idx)] * *vi;
            }
            let s = s * two;
            for (idx, vi) in v.iter().enumerate() {
                let cur = h[(row, k + 1 + idx)];
                h[(row, k + 1 + idx)] = cur - s * vi.conj();
            }
        }
        for i in k + 2..n {
            h[(i, k)] = C::zero();
        }
    }
}

fn wilkinson_shift<T: Real>(a: C<T>, b: C<T>, c: C<T>, d: C<T>) -> C<T> {
    let half = T::lit(0.5);
    let mean = (a + d) * half;
    let h = (a - d) * half;
    let s = (h * h + b * c).sqrt();
    let mu1 = mean + s;
    let mu2 = mean - s;
    if (mu1 - d).norm() <= (mu2 - d).norm() {
        mu1
    } else {
        mu2
    }
}

/// Shifted QR sweeps restricted to the unreduced trailing block. Only the
/// eigenvalues are needed, so transformations are not applied outside the
/// active window.
pub(crate) fn hessenberg_qr_eigenvalues<T: Real>(mut h: CMatrix<T>) -> Result<Vec<C<T>>> {
    let n = h.rows();
    let eps = T::epsilon();
    let norm = h.max_abs();
    let mut values = Vec::with_capacity(n);
    let mut hi = n as isize - 1;
    let mut iter = 0usize;
    let max_iter = 60 * n.max(1);
    let mut total = 0usize;
    while hi >= 0 {
        let hiu = hi as usize;
        if hiu == 0 {
            values.push(h[(0, 0)]);
            break;
        }
        let mut l = hiu;
        while l > 0 {
            let sub = h[(l, l - 1)].norm();
            let mut diag = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if diag.is_zero() {
                diag = norm;
            }
            if sub <= eps * diag || sub <= T::min_positive_value() {
                h[(l, l - 1)] = C::zero();
                break;
            }
            l -= 1;
        }
        if l == hiu {
            values.push(h[(hiu, hiu)]);
            hi -= 1;
            iter = 0;
            continue;
        }
        if l + 1 == hiu {
            // 2x2 block: take both roots directly.
            let (a, b, c, d) = (
                h[(l, l)],
                h[(l, hiu)],
                h[(hiu, l)],
                h[(hiu, hiu)],
            );
            let half = T::lit(0.5);
            let mean = (a + d) * half;
            let hh = (a - d) * half;
            let s = (hh * hh + b * c).sqrt();
            values.push(mean + s);
            values.push(mean - s);
            hi -= 2;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > max_iter {
            return Err(Error::InvalidInput(
                "QR iteration failed to converge".into(),
            ));
        }
        let mu = if iter % 11 == 10 {
            // exceptional shift to break cycles
            h[(hiu, hiu)] + C::new(T::lit(0.75) * h[(hiu, hiu - 1)].norm(), T::zero())
        } else {
            wilkinson_shift(
                h[(hiu - 1, hiu - 1)],
                h[(hiu - 1, hiu)],
                h[(hiu, hiu - 1)],
                h[(hiu, hiu)],
            )
        };
        qr_step(&mut h, l, hiu, mu);
    }
    Ok(values)
}

fn qr_step<T: Real>(h: &mut CMatrix<T>, lo: usize, hi: usize, mu: C<T>) {
    for k in lo..=hi {
        h[(k, k)] -= mu;
    }
    let mut rots: Vec<(C<T>, C<T>)> = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let x = h[(k, k)];
        let y = h[(k + 1, k)];
        let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
        let (cc, ss) = if r.is_zero() {
            (C::one(), C::zero())
        } else {
            (x / r, y / r)
        };
        for j in k..=hi {
            let p = h[(k, j)];
            let q = h[(k + 1, j)];
            h[(k, j)] = cc.conj() * p + ss.conj() * q;
            h[(k + 1, j)] = -ss * p + cc * q;
        }
        rots.push((cc, ss));
    }
    for (idx, &(cc, ss)) in rots.iter().enumerate() {
        let k = lo + idx;
        let top = (k + 2).min(hi);
        for i in lo..=top {
            let p = h[(i, k)];
            let q = h[(i, k + 1)];
            h[(i, k)] = cc * p + ss * q;
            h[(i, k + 1)] = -ss.conj() * p + cc.conj() * q;
        }
    }
    for k in lo..=hi {
        h[(k, k)] += mu;
    }
}

/// Right eigenvectors by shifted inverse iteration. Vectors belonging to
/// (numerically) repeated eigenvalues are kept linearly independent by
/// orthogonalizing each start vector against the cluster found so far.
pub(crate) fn inverse_iteration<T: Real>(a: &CMatrix<T>, values: &[C<T>]) -> CMatrix<T> {
    let n = a.rows();
    let scale = a.max_abs().max(T::min_positive_value());
    let eps = T::epsilon();
    let floor = eps * scale;
    let cluster_tol = eps.sqrt() * scale;
    let mut out = CMatrix::zeros(n, n);
    let mut done: Vec<(C<T>, Vec<C<T>>)> = Vec::with_capacity(n);
    for (k, &lam) in values.iter().enumerate() {
        let mut shifted = a.clone();
        for i in 0..n {
            shifted[(i, i)] -= lam;
        }
        let lu = Lu::new(&shifted);
        let cluster: Vec<&Vec<C<T>>> = done
            .iter()
            .filter(|(mu, _)| (*mu - lam).norm() <= cluster_tol)
            .map(|(_, v)| v)
            .collect();
        // deterministic, generic start vector
        let mut x: Vec<C<T>> = (0..n)
            .map(|i| {
                let t = T::from_usize_lossy(i + 1);
                C::new(T::one() + t * T::lit(0.173), T::lit(0.31) * t.sin())
            })
            .collect();
        for _ in 0..4 {
            for u in &cluster {
                let proj = inner(u, &x);
                for (xi, ui) in x.iter_mut().zip(u.iter()) {
                    *xi -= proj * *ui;
                }
            }
            let y = lu.solve_regularized(&x, floor);
            let ny = norm2(&y);
            if !(ny > T::zero()) || !ny.is_finite() {
                break;
            }
            x = y.into_iter().map(|e| e / ny).collect();
            let r = a.mul_vec(&x);
            let resid = r
                .iter()
                .zip(&x)
                .fold(T::zero(), |s, (&ri, &xi)| s + (ri - lam * xi).norm_sqr())
                .sqrt();
            if resid <= T::lit(4.0) * floor * T::from_usize_lossy(n) && cluster.is_empty() {
                break;
            }
        }
        out.set_column(k, &x);
        done.push((lam, x));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cl;

    fn residual(a: &CMatrix<f64>, raw: &RawEigen<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, &lam) in raw.values.iter().enumerate() {
            let v = raw.vectors.column(k);
            let av = a.mul_vec(&v);
            let r: f64 = av
                .iter()
                .zip(&v)
                .map(|(x, y)| (x - lam * y).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r / norm2(&v));
        }
        worst
    }

    #[test]
    fn hessenberg_preserves_spectrum_structure() {
        let a = CMatrix::<f64>::from_fn(5, 5, |i, j| cl((i * 3 + j) as f64 % 7.0, (j as f64) - 1.5));
        let mut h = a.clone();
        hessenberg_in_place(&mut h);
        for i in 2..5 {
            for j in 0..i - 1 {
                assert_eq!(h[(i, j)], C::zero());
            }
        }
        let tr_a: C<f64> = (0..5).map(|i| a[(i, i)]).sum();
        let tr_h: C<f64> = (0..5).map(|i| h[(i, i)]).sum();
        assert!((tr_a - tr_h).norm() < 1e-12);
    }

    #[test]
    fn general_solver_small_residuals() {
        let a = CMatrix::<f64>::from_fn(6, 6, |i, j| {
            cl(((i * 5 + j * 11) % 13) as f64 - 6.0, ((i * j) % 4) as f64 - 1.0)
        });
        let raw = general(&a).unwrap();
        assert!(residual(&a, &raw) < 1e-10, "{}", residual(&a, &raw));
    }

    #[test]
    fn repeated_eigenvalue_gets_independent_vectors() {
        let a = CMatrix::<f64>::from_diag(&[cl(2.0, 0.0), cl(2.0, 0.0), cl(5.0, 0.0)]);
        let raw = general(&a).unwrap();
        let lu = Lu::new(&raw.vectors);
        assert!(!lu.is_singular());
        assert!(residual(&a, &raw) < 1e-12);
    }

    #[test]
    fn balancing_is_similarity() {
        let a = CMatrix::<f64>::from_fn(3, 3, |i, j| cl(10f64.powi(i as i32 - j as i32 * 2), 0.0));
        let (b, d) = balance(&a);
        for i in 0..3 {
            for j in 0..3 {
                let back = b[(i, j)] * d[i] / d[j];
                assert!((back - a[(i, j)]).norm() <= 1e-12 * a[(i, j)].norm().max(1.0));
            }
        }
    }
}
