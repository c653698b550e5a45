//! Steady-state responses `A(omega) = a0 <P|G(omega)|S>` with single-site
//! source and probe vectors.
//!
//! Site indices in this module are 1-based, matching how measurement
//! campaigns are described; matrix indices elsewhere are 0-based.

use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{resolvent, Hamiltonian, Lu};
use crate::scalar::{Real, C};

/// One measured or synthesized spectrum for a single (source, probe) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSpectrum<T> {
    pub omega_grid: Vec<T>,
    pub amplitudes: Vec<C<T>>,
    pub source_idx: usize,
    pub probe_idx: usize,
    pub a0: C<T>,
}

impl<T: Real> ResponseSpectrum<T> {
    pub fn new(
        omega_grid: Vec<T>,
        amplitudes: Vec<C<T>>,
        source_idx: usize,
        probe_idx: usize,
        a0: C<T>,
    ) -> Result<Self> {
        validate_grid(&omega_grid)?;
        if amplitudes.len() != omega_grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} amplitudes for {} grid points",
                amplitudes.len(),
                omega_grid.len()
            )));
        }
        if source_idx == 0 || probe_idx == 0 {
            return Err(Error::InvalidInput("site indices are 1-based".into()));
        }
        Ok(Self {
            omega_grid,
            amplitudes,
            source_idx,
            probe_idx,
            a0,
        })
    }

    pub fn len(&self) -> usize {
        self.omega_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega_grid.is_empty()
    }

    pub fn max_abs(&self) -> T {
        self.amplitudes
            .iter()
            .fold(T::zero(), |m, a| m.max(a.norm()))
    }

    /// Index of the grid point closest to `omega`.
    pub fn nearest_index(&self, omega: T) -> usize {
        let g = &self.omega_grid;
        let pos = g.partition_point(|&x| x < omega);
        if pos == 0 {
            0
        } else if pos >= g.len() {
            g.len() - 1
        } else if (omega - g[pos - 1]) <= (g[pos] - omega) {
            pos - 1
        } else {
            pos
        }
    }
}

pub fn validate_grid<T: Real>(grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("frequency grid is empty".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("frequency grid has non-finite values".into()));
    }
    if let Some(i) = grid.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(format!(
            "frequency grid not strictly ascending at point {}",
            i + 1
        )));
    }
    Ok(())
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / T::from_usize_lossy(n - 1);
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        hi
                    } else {
                        lo + step * T::from_usize_lossy(i)
                    }
                })
                .collect()
        }
    }
}

/// 2001 points spanning `omega0 ± 250` rad/s, enough to resolve ~40 rad/s
/// linewidths with about a hundred points each.
pub fn default_grid<T: Real>(omega0: T) -> Vec<T> {
    let half = T::lit(250.0);
    linspace(omega0 - half, omega0 + half, 2001)
}

fn check_site(h: &Hamiltonian<impl Real>, idx: usize, what: &str) -> Result<()> {
    if idx == 0 || idx > h.dim() {
        return Err(Error::InvalidInput(format!(
            "{what} index {idx} outside 1..={}",
            h.dim()
        )));
    }
    Ok(())
}

/// `a0 · G(omega)[probe, source]`.
pub fn response<T: Real>(
    h: &Hamiltonian<T>,
    omega: T,
    source_idx: usize,
    probe_idx: usize,
    a0: C<T>,
) -> Result<C<T>> {
    check_site(h, source_idx, "source")?;
    check_site(h, probe_idx, "probe")?;
    let g = resolvent(h, omega)?;
    Ok(a0 * g[(probe_idx - 1, source_idx - 1)])
}

fn shifted_lu<T: Real>(h: &Hamiltonian<T>, omega: T, transpose: bool) -> Result<Lu<T>> {
    let n = h.dim();
    let mut m = if transpose {
        h.entries().transpose()
    } else {
        h.entries().clone()
    };
    m = m.scale(-C::one());
    for i in 0..n {
        m[(i, i)] += C::new(omega, T::zero());
    }
    let lu = Lu::new(&m);
    if lu.is_singular() {
        return Err(Error::SingularAtResonance {
            omega: omega.as_f64(),
        });
    }
    Ok(lu)
}

/// Column `source` of the resolvent at `omega`: responses at every probe.
fn resolvent_column<T: Real>(h: &Hamiltonian<T>, omega: T, source: usize) -> Result<Vec<C<T>>> {
    let lu = shifted_lu(h, omega, false)?;
    let mut e = vec![C::zero(); h.dim()];
    e[source - 1] = C::one();
    Ok(lu.solve(&e))
}

/// Row `probe` of the resolvent at `omega`: responses to every source.
fn resolvent_row<T: Real>(h: &Hamiltonian<T>, omega: T, probe: usize) -> Result<Vec<C<T>>> {
    let lu = shifted_lu(h, omega, true)?;
    let mut e = vec![C::zero(); h.dim()];
    e[probe - 1] = C::one();
    Ok(lu.solve(&e))
}

pub fn sweep<T: Real>(
    h: &Hamiltonian<T>,
    omega_grid: &[T],
    source_idx: usize,
    probe_idx: usize,
    a0: C<T>,
) -> Result<ResponseSpectrum<T>> {
    validate_grid(omega_grid)?;
    check_site(h, source_idx, "source")?;
    check_site(h, probe_idx, "probe")?;
    let amplitudes = omega_grid
        .iter()
        .map(|&w| resolvent_column(h, w, source_idx).map(|col| a0 * col[probe_idx - 1]))
        .collect::<Result<Vec<_>>>()?;
    ResponseSpectrum::new(omega_grid.to_vec(), amplitudes, source_idx, probe_idx, a0)
}

/// Additive complex Gaussian noise, drawn from a counter-based stream keyed
/// on `(seed, spectrum, point)` so that any subset of points can be
/// regenerated independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation relative to the spectrum's max |A|.
    pub sigma_rel: f64,
    pub seed: u64,
}

fn spectrum_stream(source_idx: usize, probe_idx: usize) -> u64 {
    ((source_idx as u64) << 32) | (probe_idx as u64 & 0xffff_ffff)
}

/// Standard complex normal with `E|z|^2 = 1` for grid point `point`.
fn complex_normal(seed: u64, stream: u64, point: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    // two u64 draws per point = four 32-bit words
    rng.set_word_pos(point as u128 * 4);
    let to_unit = |x: u64| ((x >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    let u1 = to_unit(rng.next_u64());
    let u2 = to_unit(rng.next_u64());
    let r = (-2.0 * u1.ln()).sqrt();
    let t = std::f64::consts::TAU * u2;
    // each quadrature carries half the variance
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (s * r * t.cos(), s * r * t.sin())
}

pub fn add_noise<T: Real>(s: &ResponseSpectrum<T>, sigma_rel: f64, seed: u64) -> Result<ResponseSpectrum<T>> {
    if !(sigma_rel >= 0.0) || !sigma_rel.is_finite() {
        return Err(Error::InvalidInput(format!(
            "noise level must be finite and non-negative, got {sigma_rel}"
        )));
    }
    if sigma_rel == 0.0 {
        return Ok(s.clone());
    }
    let sigma = T::lit(sigma_rel) * s.max_abs();
    let stream = spectrum_stream(s.source_idx, s.probe_idx);
    let mut out = s.clone();
    for (k, a) in out.amplitudes.iter_mut().enumerate() {
        let (re, im) = complex_normal(seed, stream, k);
        *a += C::new(T::lit(re), T::lit(im)) * sigma;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CampaignMode {
    /// Probe fixed, source moved over every site: rows of G, i.e. LEVs.
    Lev,
    /// Source fixed, probe moved over every site: columns of G, i.e. REVs.
    Rev,
}

impl std::fmt::Display for CampaignMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CampaignMode::Lev => "lev",
            CampaignMode::Rev => "rev",
        })
    }
}

/// A full set of spectra with one site fixed and the other swept over the
/// whole system. Spectrum `j` (0-based) has its moving index equal to `j+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Campaign<T> {
    pub spectra: Vec<ResponseSpectrum<T>>,
    pub mode: CampaignMode,
    pub fixed_idx: usize,
}

impl<T: Real> Campaign<T> {
    /// Validates the campaign invariants; spectra are reordered by their
    /// moving index.
    pub fn new(mut spectra: Vec<ResponseSpectrum<T>>, mode: CampaignMode, fixed_idx: usize) -> Result<Self> {
        if spectra.is_empty() {
            return Err(Error::InvalidInput("campaign has no spectra".into()));
        }
        let moving = |s: &ResponseSpectrum<T>| match mode {
            CampaignMode::Lev => s.source_idx,
            CampaignMode::Rev => s.probe_idx,
        };
        let fixed = |s: &ResponseSpectrum<T>| match mode {
            CampaignMode::Lev => s.probe_idx,
            CampaignMode::Rev => s.source_idx,
        };
        spectra.sort_by_key(moving);
        let n = spectra.len();
        for (j, s) in spectra.iter().enumerate() {
            if fixed(s) != fixed_idx {
                return Err(Error::InvalidInput(format!(
                    "{mode} campaign spectrum {} has fixed index {} instead of {fixed_idx}",
                    j + 1,
                    fixed(s)
                )));
            }
            if moving(s) != j + 1 {
                return Err(Error::InvalidInput(format!(
                    "{mode} campaign must cover moving indices 1..={n} exactly once"
                )));
            }
            if s.omega_grid != spectra[0].omega_grid {
                return Err(Error::InvalidInput(
                    "all spectra in a campaign must share one frequency grid".into(),
                ));
            }
        }
        if fixed_idx == 0 || fixed_idx > n {
            return Err(Error::InvalidInput(format!(
                "fixed index {fixed_idx} outside 1..={n}"
            )));
        }
        Ok(Self {
            spectra,
            mode,
            fixed_idx,
        })
    }

    pub fn dim(&self) -> usize {
        self.spectra.len()
    }

    pub fn grid(&self) -> &[T] {
        &self.spectra[0].omega_grid
    }

    /// The spectrum whose moving index equals the fixed one (source = probe).
    pub fn diagonal(&self) -> &ResponseSpectrum<T> {
        &self.spectra[self.fixed_idx - 1]
    }

    pub fn max_abs(&self) -> T {
        self.spectra
            .iter()
            .fold(T::zero(), |m, s| m.max(s.max_abs()))
    }
}

pub fn run_campaign<T: Real>(
    h: &Hamiltonian<T>,
    omega_grid: &[T],
    mode: CampaignMode,
    fixed_idx: usize,
    a0: C<T>,
    noise: Option<NoiseSpec>,
) -> Result<Campaign<T>> {
    validate_grid(omega_grid)?;
    check_site(h, fixed_idx, "fixed")?;
    let n = h.dim();
    let mut amps = vec![Vec::with_capacity(omega_grid.len()); n];
    for &w in omega_grid {
        let line = match mode {
            CampaignMode::Lev => resolvent_row(h, w, fixed_idx)?,
            CampaignMode::Rev => resolvent_column(h, w, fixed_idx)?,
        };
        for (j, g) in line.into_iter().enumerate() {
            amps[j].push(a0 * g);
        }
    }
    let mut spectra = Vec::with_capacity(n);
    for (j, a) in amps.into_iter().enumerate() {
        let (src, probe) = match mode {
            CampaignMode::Lev => (j + 1, fixed_idx),
            CampaignMode::Rev => (fixed_idx, j + 1),
        };
        let mut s = ResponseSpectrum::new(omega_grid.to_vec(), a, src, probe, a0)?;
        if let Some(ns) = noise {
            s = add_noise(&s, ns.sigma_rel, ns.seed)?;
        }
        spectra.push(s);
    }
    Campaign::new(spectra, mode, fixed_idx)
}
