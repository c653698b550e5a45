//! The two concrete systems: a two-level resonator pair with loss and
//! non-reciprocal coupling, and a non-reciprocal SSH chain.
//!
//! All parameters are angular frequencies in rad/s.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, Hamiltonian};
use crate::scalar::{c, Real, C};

/// Parameters of the two-level model
/// `(omega0 + i gamma0) I + [[i gamma1, phi_x], [phi_x + gamma2, phi_y]]`.
///
/// The measured tuning ranges were phi_x in [-92.3, 92.3] and phi_y in
/// [-94.2, 94.2]; they are not enforced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelParams<T> {
    pub omega0: T,
    pub gamma0: T,
    pub gamma1: T,
    pub gamma2: T,
    pub phi_x: T,
    pub phi_y: T,
}

impl<T: Real> TwoLevelParams<T> {
    /// Cavity values of the acoustic two-level experiment, at phi = (0, 0).
    pub fn acoustic() -> Self {
        Self {
            omega0: T::lit(9016.0),
            gamma0: T::lit(-41.2),
            gamma1: T::lit(-19.7),
            gamma2: T::lit(-40.8),
            phi_x: T::zero(),
            phi_y: T::zero(),
        }
    }

    pub fn at(self, phi_x: T, phi_y: T) -> Self {
        Self {
            phi_x,
            phi_y,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.omega0,
            self.gamma0,
            self.gamma1,
            self.gamma2,
            self.phi_x,
            self.phi_y,
        ];
        if all.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput("two-level parameters must be finite".into()))
        }
    }
}

pub fn build_h1<T: Real>(p: &TwoLevelParams<T>) -> Result<Hamiltonian<T>> {
    p.validate()?;
    let base = c(p.omega0, p.gamma0);
    let m = CMatrix::from_row_major(
        2,
        2,
        vec![
            base + c(T::zero(), p.gamma1),
            c(p.phi_x, T::zero()),
            c(p.phi_x + p.gamma2, T::zero()),
            base + c(p.phi_y, T::zero()),
        ],
    )
    .expect("2x2 storage");
    Hamiltonian::new(
        m,
        format!("two-level(phi_x={}, phi_y={})", p.phi_x, p.phi_y),
    )
}

/// Eigenvalue discriminant `(i gamma1 - phi_y)^2 + 4 phi_x (phi_x + gamma2)`
/// of the two-level model; it vanishes exactly at the exceptional points.
pub fn discriminant<T: Real>(gamma1: T, gamma2: T, phi_x: T, phi_y: T) -> C<T> {
    let a = c(-phi_y, gamma1);
    let four = T::lit(4.0);
    a * a + c(four * phi_x * (phi_x + gamma2), T::zero())
}

/// The two order-2 exceptional points of the two-level model and the branch
/// cut joining them along phi_y = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExceptionalPoints<T> {
    /// `(phi_x, phi_y)` in ascending phi_x.
    pub points: [(T, T); 2],
    /// phi_x interval covered by the branch cut at phi_y = 0.
    pub branch_cut: (T, T),
}

impl<T: Real> ExceptionalPoints<T> {
    pub fn midpoint(&self) -> (T, T) {
        let half = T::lit(0.5);
        ((self.points[0].0 + self.points[1].0) * half, T::zero())
    }

    pub fn separation(&self) -> T {
        self.points[1].0 - self.points[0].0
    }
}

pub fn ep_locations<T: Real>(gamma1: T, gamma2: T) -> Result<ExceptionalPoints<T>> {
    if gamma1.is_zero() && gamma2.is_zero() {
        return Err(Error::HermitianDegenerate);
    }
    let half = T::lit(0.5);
    let root = gamma1.hypot(gamma2);
    let a = (-gamma2 - root) * half;
    let b = (-gamma2 + root) * half;
    Ok(ExceptionalPoints {
        points: [(a, T::zero()), (b, T::zero())],
        branch_cut: (a, b),
    })
}

/// How the open chain is terminated on the right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ChainEnd {
    /// `2M - 1` sites: M A-sites and M-1 B-sites. The hopping sum stops at
    /// the (M-1)-th cell, so the chain ends on A_M and carries an exact
    /// zero mode on the A sublattice.
    #[default]
    ASite,
    /// `2M` sites: every cell complete, ends on B_M.
    BSite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sublattice {
    A,
    B,
}

/// Non-reciprocal SSH chain. `v` couples B_m into A_m, `v + delta` couples
/// A_m into B_m, and `w` couples the neighbouring cells symmetrically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SshParams<T> {
    pub v: T,
    pub w: T,
    pub delta: T,
    pub m_cells: usize,
    /// Common on-site frequency.
    pub onsite: T,
    /// Uniform on-site dissipation, entering the diagonal as `i * loss`.
    pub loss: T,
    pub chain_end: ChainEnd,
}

impl<T: Real> SshParams<T> {
    /// Hoppings of the acoustic lattice with `delta = w - v`, which makes the
    /// zero mode's right eigenvector fully extended.
    pub fn acoustic() -> Self {
        let v = T::lit(-76.0);
        let w = T::lit(-149.8);
        Self {
            v,
            w,
            delta: w - v,
            m_cells: 6,
            onsite: T::zero(),
            loss: T::zero(),
            chain_end: ChainEnd::ASite,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_cells < 2 {
            return Err(Error::InvalidInput(format!(
                "SSH chain needs at least 2 cells, got {}",
                self.m_cells
            )));
        }
        let all = [self.v, self.w, self.delta, self.onsite, self.loss];
        if !all.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("SSH parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        match self.chain_end {
            ChainEnd::ASite => 2 * self.m_cells - 1,
            ChainEnd::BSite => 2 * self.m_cells,
        }
    }

    pub fn n_b_sites(&self) -> usize {
        self.n_sites() - self.m_cells
    }

    /// 0-based matrix index of a site in cell `m` (1-based). Basis order is
    /// A1, B1, A2, B2, ...
    pub fn site_index(&self, sub: Sublattice, m: usize) -> Option<usize> {
        if m == 0 || m > self.m_cells {
            return None;
        }
        let idx = match sub {
            Sublattice::A => 2 * (m - 1),
            Sublattice::B => 2 * (m - 1) + 1,
        };
        (idx < self.n_sites()).then_some(idx)
    }

    pub fn sublattice_of(&self, idx: usize) -> Sublattice {
        if idx.is_multiple_of(2) {
            Sublattice::A
        } else {
            Sublattice::B
        }
    }

    fn diagonal(&self) -> C<T> {
        c(self.onsite, self.loss)
    }
}

pub fn build_ssh_obc<T: Real>(p: &SshParams<T>) -> Result<Hamiltonian<T>> {
    p.validate()?;
    let n = p.n_sites();
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = p.diagonal();
    }
    for cell in 1..=p.m_cells {
        let a = 2 * (cell - 1);
        let b = a + 1;
        if b < n {
            m[(a, b)] = c(p.v, T::zero());
            m[(b, a)] = c(p.v + p.delta, T::zero());
        }
        if cell < p.m_cells {
            let next = 2 * cell;
            m[(next, b)] = c(p.w, T::zero());
            m[(b, next)] = c(p.w, T::zero());
        }
    }
    Hamiltonian::new(
        m,
        format!(
            "ssh-obc(v={}, w={}, delta={}, M={}, sites={})",
            p.v, p.w, p.delta, p.m_cells, n
        ),
    )
}

/// Bloch Hamiltonian with `e^{ikm}` on the cell index, basis (A, B):
/// `[[0, v + w e^{-ik}], [(v + delta) + w e^{ik}, 0]]` plus the diagonal.
pub fn build_ssh_bloch<T: Real>(p: &SshParams<T>, k: T) -> Result<Hamiltonian<T>> {
    p.validate()?;
    let e_minus = C::from_polar(T::one(), -k);
    let e_plus = C::from_polar(T::one(), k);
    let d = p.diagonal();
    let ab = c(p.v, T::zero()) + e_minus * p.w;
    let ba = c(p.v + p.delta, T::zero()) + e_plus * p.w;
    let m = CMatrix::from_row_major(2, 2, vec![d, ab, ba, d]).expect("2x2 storage");
    Hamiltonian::new(m, format!("ssh-bloch(k={k})"))
}

/// Periodic-boundary spectrum sampled at `nk` midpoints of the Brillouin
/// zone. The Bloch matrix is chiral, so its eigenvalues are
/// `diag ± E(k)`; the two returned curves are the `Re E >= 0` branch and its
/// mirror image.
pub fn pbc_locus<T: Real>(p: &SshParams<T>, nk: usize) -> Result<[Vec<C<T>>; 2]> {
    p.validate()?;
    if nk == 0 {
        return Err(Error::InvalidInput("need at least one k-point".into()));
    }
    let d = p.diagonal();
    let mut upper = Vec::with_capacity(nk);
    let mut lower = Vec::with_capacity(nk);
    for j in 0..nk {
        let k = -T::PI()
            + T::TAU() * (T::from_usize_lossy(j) + T::lit(0.5)) / T::from_usize_lossy(nk);
        let ab = c(p.v, T::zero()) + C::from_polar(p.w, -k);
        let ba = c(p.v + p.delta, T::zero()) + C::from_polar(p.w, k);
        let mut e = (ab * ba).sqrt();
        if e.re < T::zero() || (e.re.is_zero() && e.im < T::zero()) {
            e = -e;
        }
        upper.push(d + e);
        lower.push(d - e);
    }
    Ok([upper, lower])
}

/// Zero-mode profiles on the A sublattice:
/// `L_m = c_L (-v/w)^m`, `R_m = c_R (-(v+delta)/w)^m`, B entries zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TzmProfile<T> {
    pub lev_a: Vec<C<T>>,
    pub rev_a: Vec<C<T>>,
    pub lev_b: Vec<C<T>>,
    pub rev_b: Vec<C<T>>,
    pub c_l: T,
    pub c_r: T,
}

impl<T: Real> TzmProfile<T> {
    /// Right eigenvector on the full chain basis (A1, B1, A2, ...).
    pub fn rev_sites(&self) -> Vec<C<T>> {
        interleave(&self.rev_a, &self.rev_b)
    }

    /// Left eigenvector on the full chain basis.
    pub fn lev_sites(&self) -> Vec<C<T>> {
        interleave(&self.lev_a, &self.lev_b)
    }
}

fn interleave<T: Real>(a: &[C<T>], b: &[C<T>]) -> Vec<C<T>> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    for (m, &x) in a.iter().enumerate() {
        out.push(x);
        if let Some(&y) = b.get(m) {
            out.push(y);
        }
    }
    out
}

/// Analytic zero mode in the same gauge as [`crate::linalg::eig`]: the REV
/// has unit norm with its first largest entry real-positive, and
/// `sum_m L_m R_m = 1`.
pub fn tzm_profile<T: Real>(p: &SshParams<T>) -> Result<TzmProfile<T>> {
    p.validate()?;
    if p.v.abs() >= p.w.abs() {
        return Err(Error::TrivialPhase {
            v_abs: p.v.abs().as_f64(),
            w_abs: p.w.abs().as_f64(),
        });
    }
    let ratio_l = -p.v / p.w;
    let ratio_r = -(p.v + p.delta) / p.w;
    let m = p.m_cells;
    let x: Vec<T> = (1..=m).map(|k| ratio_l.powi(k as i32)).collect();
    let y: Vec<T> = (1..=m).map(|k| ratio_r.powi(k as i32)).collect();
    let ynorm = y.iter().fold(T::zero(), |s, &e| s + e * e).sqrt();
    if !(ynorm > T::zero()) {
        return Err(Error::InvalidInput("zero-mode REV vanishes (v + delta = 0)".into()));
    }
    // first entry of maximal modulus sets the sign
    let mut pivot = 0;
    for (i, e) in y.iter().enumerate() {
        if e.abs() > y[pivot].abs() {
            pivot = i;
        }
    }
    let c_r = y[pivot].signum() / ynorm;
    let overlap = x
        .iter()
        .zip(&y)
        .fold(T::zero(), |s, (&a, &b)| s + a * b * c_r);
    if overlap.is_zero() {
        return Err(Error::SingularOverlap {
            mode: 0,
            overlap: 0.0,
        });
    }
    let c_l = T::one() / overlap;
    let nb = p.n_b_sites();
    Ok(TzmProfile {
        lev_a: x.iter().map(|&e| c(e * c_l, T::zero())).collect(),
        rev_a: y.iter().map(|&e| c(e * c_r, T::zero())).collect(),
        lev_b: vec![C::zero(); nb],
        rev_b: vec![C::zero(); nb],
        c_l,
        c_r,
    })
}
