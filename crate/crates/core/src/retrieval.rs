//! Recovering left and right eigenvector entries from response campaigns.
//!
//! A LEV campaign (probe fixed at `p`, source over all sites) has spectra
//! `A_j(w) = a0 sum_n r_n^p l_n^j / (w - w_n)`, so near a resonance the
//! amplitudes across the campaign are proportional to the row `<L_n|`.
//! The REV campaign is the dual. Entries are recovered either by sampling
//! the data at a peak or by fitting a shared-pole Lorentzian sum.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{biorthonormalize, gauge_fix, norm2, spectral_order, CMatrix, EigenSystem, Lu, Qr};
use crate::response::{Campaign, CampaignMode, ResponseSpectrum};
use crate::scalar::{Real, C};

/// Default peak prominence threshold, relative to the global maximum.
pub const DEFAULT_PROMINENCE: f64 = 0.05;
/// Fits whose relative RMS residual exceeds this are reported as diverged.
pub const FIT_QUALITY_LIMIT: f64 = 0.1;
/// A mode whose entries are this small relative to the campaign is unusable.
pub const WEAK_PREFACTOR_RATIO: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak<T> {
    pub omega: T,
    pub index: usize,
    pub magnitude: T,
    pub prominence: T,
    /// Half-width where |A| drops to 1/sqrt(2) of the peak, if the
    /// spectrum falls that far on at least one side.
    pub half_width: Option<T>,
}

/// Local maxima of `mags` whose topographic prominence exceeds
/// `prominence_rel` times the global maximum. At most `max_peaks` of the most
/// prominent are kept, returned in ascending frequency.
pub fn find_peaks<T: Real>(grid: &[T], mags: &[T], max_peaks: usize, prominence_rel: f64) -> Result<Vec<Peak<T>>> {
    let m = mags.len();
    if m < 3 || grid.len() != m {
        return Err(Error::InvalidInput("peak search needs at least 3 grid points".into()));
    }
    let global = mags.iter().fold(T::zero(), |a, &b| a.max(b));
    let threshold = T::lit(prominence_rel) * global;
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < m {
        if !(mags[i] > mags[i - 1]) {
            i += 1;
            continue;
        }
        // walk across a flat top
        let mut end = i;
        while end + 1 < m && mags[end + 1] == mags[i] {
            end += 1;
        }
        if end + 1 >= m || !(mags[end + 1] < mags[i]) {
            i = end + 1;
            continue;
        }
        let top = mags[i];
        let mut left_min = top;
        let mut k = i;
        while k > 0 {
            k -= 1;
            if mags[k] > top {
                break;
            }
            left_min = left_min.min(mags[k]);
        }
        let mut right_min = top;
        let mut k = end;
        while k + 1 < m {
            k += 1;
            if mags[k] > top {
                break;
            }
            right_min = right_min.min(mags[k]);
        }
        let prominence = top - left_min.max(right_min);
        if prominence > threshold && top > T::zero() {
            let idx = (i + end) / 2;
            peaks.push(Peak {
                omega: grid[idx],
                index: idx,
                magnitude: top,
                prominence,
                half_width: half_width(grid, mags, idx),
            });
        }
        i = end + 1;
    }
    if peaks.is_empty() {
        return Err(Error::NoPeaks);
    }
    peaks.sort_by(|a, b| b.prominence.partial_cmp(&a.prominence).unwrap_or(std::cmp::Ordering::Equal));
    peaks.truncate(max_peaks.max(1));
    peaks.sort_by_key(|p| p.index);
    Ok(peaks)
}

fn half_width<T: Real>(grid: &[T], mags: &[T], idx: usize) -> Option<T> {
    let level = mags[idx] * T::FRAC_1_SQRT_2();
    let cross = |a: usize, b: usize| {
        // linear interpolation of the crossing between grid points a and b
        let t = (mags[a] - level) / (mags[a] - mags[b]);
        grid[a] + (grid[b] - grid[a]) * t
    };
    let mut left = None;
    let mut k = idx;
    while k > 0 {
        if mags[k - 1] < level {
            left = Some(grid[idx] - cross(k, k - 1));
            break;
        }
        k -= 1;
    }
    let mut right = None;
    let mut k = idx;
    while k + 1 < mags.len() {
        if mags[k + 1] < level {
            right = Some(cross(k, k + 1) - grid[idx]);
            break;
        }
        k += 1;
    }
    match (left, right) {
        (Some(a), Some(b)) => Some((a + b) / T::lit(2.0)),
        (a, b) => a.or(b),
    }
}

pub fn pick_peaks<T: Real>(s: &ResponseSpectrum<T>, max_peaks: usize) -> Result<Vec<Peak<T>>> {
    let mags: Vec<T> = s.amplitudes.iter().map(|a| a.norm()).collect();
    find_peaks(&s.omega_grid, &mags, max_peaks, DEFAULT_PROMINENCE)
}

/// Root-sum-square magnitude over all spectra of a campaign. Every mode
/// with a nonzero prefactor shows up here even if some entries vanish.
pub fn campaign_magnitude<T: Real>(c: &Campaign<T>) -> Vec<T> {
    (0..c.grid().len())
        .map(|k| {
            c.spectra
                .iter()
                .fold(T::zero(), |s, sp| s.hypot(sp.amplitudes[k].norm()))
        })
        .collect()
}

pub fn pick_campaign_peaks<T: Real>(c: &Campaign<T>, max_peaks: usize, prominence_rel: f64) -> Result<Vec<Peak<T>>> {
    find_peaks(c.grid(), &campaign_magnitude(c), max_peaks, prominence_rel)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PeakSample,
    Fit,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::PeakSample => "peak-sample",
            Method::Fit => "fit",
        })
    }
}

/// Eigenvector entries recovered from one campaign, up to a common factor.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievedMode<T> {
    pub mode_idx: usize,
    pub omega_re: T,
    /// Only known when the mode came out of a fit.
    pub omega_im: Option<T>,
    pub entries: Vec<C<T>>,
    /// LEV campaigns give LEV entries, REV campaigns REV entries.
    pub kind: CampaignMode,
    pub method: Method,
    pub quality: T,
}

impl<T: Real> RetrievedMode<T> {
    pub fn omega_n(&self) -> C<T> {
        C::new(self.omega_re, self.omega_im.unwrap_or_else(T::zero))
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Unit norm with the largest entry real-positive.
    pub fn normalized(&self) -> Option<Self> {
        let mut out = self.clone();
        gauge_fix(&mut out.entries)?;
        Some(out)
    }
}

/// Entries of the campaign sampled at the grid point nearest `omega_peak`.
pub fn extract_peak_entries<T: Real>(c: &Campaign<T>, omega_peak: T) -> Result<RetrievedMode<T>> {
    let grid = c.grid();
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    if !(omega_peak >= lo && omega_peak <= hi) {
        return Err(Error::InvalidInput(format!(
            "peak frequency {omega_peak} outside the grid [{lo}, {hi}]"
        )));
    }
    let k = c.spectra[0].nearest_index(omega_peak);
    Ok(RetrievedMode {
        mode_idx: 0,
        omega_re: grid[k],
        omega_im: None,
        entries: c.spectra.iter().map(|s| s.amplitudes[k]).collect(),
        kind: c.mode,
        method: Method::PeakSample,
        quality: T::zero(),
    })
}

/// `A_j(w) = sum_n residues[n][j] / (w - poles[n])`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitModel<T> {
    pub poles: Vec<C<T>>,
    /// `residues[n][j]` for mode `n` and spectrum `j`.
    pub residues: Vec<Vec<C<T>>>,
    /// Accept poles in the upper half plane (growing modes).
    pub allow_growing: bool,
}

impl<T: Real> FitModel<T> {
    pub fn n_modes(&self) -> usize {
        self.poles.len()
    }

    pub fn eval(&self, spectrum: usize, omega: T) -> C<T> {
        let w = C::new(omega, T::zero());
        self.poles
            .iter()
            .zip(&self.residues)
            .fold(C::zero(), |s, (&p, r)| s + r[spectrum] / (w - p))
    }

    /// RMS of `data - model` over the campaign, relative to max |A|.
    pub fn relative_rms(&self, c: &Campaign<T>) -> T {
        let mut ss = T::zero();
        let mut count = 0usize;
        for (j, s) in c.spectra.iter().enumerate() {
            for (&w, &a) in s.omega_grid.iter().zip(&s.amplitudes) {
                ss += (a - self.eval(j, w)).norm_sqr();
                count += 1;
            }
        }
        (ss / T::from_usize_lossy(count)).sqrt() / c.max_abs()
    }

    pub fn validate(&self) -> Result<()> {
        if self.poles.is_empty() || self.residues.len() != self.poles.len() {
            return Err(Error::InvalidInput("fit model needs one residue row per pole".into()));
        }
        if !self.allow_growing {
            if let Some(p) = self.poles.iter().find(|p| !(p.im < T::zero())) {
                return Err(Error::FitDiverged(format!(
                    "pole {} {:+}i is not decaying",
                    p.re, p.im
                )));
            }
        }
        Ok(())
    }
}

/// The campaign in fit coordinates: grid mapped onto [-1, 1] and data
/// divided by its peak magnitude.
struct Scaled<T> {
    center: T,
    scale: T,
    ymax: T,
    x: Vec<T>,
    ys: Vec<Vec<C<T>>>,
}

impl<T: Real> Scaled<T> {
    fn new(c: &Campaign<T>) -> Result<Self> {
        let g = c.grid();
        let (lo, hi) = (g[0], g[g.len() - 1]);
        let two = T::lit(2.0);
        let center = (lo + hi) / two;
        let mut scale = (hi - lo) / two;
        if scale == T::zero() {
            scale = T::one();
        }
        let ymax = c.max_abs();
        if !(ymax > T::zero()) || !ymax.is_finite() {
            return Err(Error::FitDiverged("campaign has no finite nonzero data".into()));
        }
        Ok(Self {
            center,
            scale,
            ymax,
            x: g.iter().map(|&w| (w - center) / scale).collect(),
            ys: c
                .spectra
                .iter()
                .map(|s| s.amplitudes.iter().map(|&a| a / ymax).collect())
                .collect(),
        })
    }

    fn to_scaled(&self, p: C<T>) -> C<T> {
        (p - self.center) / self.scale
    }

    fn unscale(&self, p: C<T>) -> C<T> {
        p * self.scale + self.center
    }
}

/// Linear stage of the variable projection at fixed poles.
struct Projection<T> {
    qr: Qr<T>,
    /// `coeffs[j][n]`
    coeffs: Vec<Vec<C<T>>>,
    resid: Vec<Vec<C<T>>>,
    cost: T,
}

fn project<T: Real>(sc: &Scaled<T>, poles: &[C<T>]) -> Option<Projection<T>> {
    let m = sc.x.len();
    let n = poles.len();
    let phi = CMatrix::from_fn(m, n, |k, i| {
        C::<T>::one() / (C::new(sc.x[k], T::zero()) - poles[i])
    });
    if !phi.is_finite() {
        return None;
    }
    let qr = Qr::new(&phi);
    let eps = T::epsilon();
    if !(qr.diag_ratio() > eps * T::from_usize_lossy(m)) {
        return None;
    }
    let mut cost = T::zero();
    let mut coeffs = Vec::with_capacity(sc.ys.len());
    let mut resid = Vec::with_capacity(sc.ys.len());
    for y in &sc.ys {
        coeffs.push(qr.solve_ls(y));
        let r = qr.project_out(y);
        cost += r.iter().fold(T::zero(), |s, z| s + z.norm_sqr());
        resid.push(r);
    }
    if !cost.is_finite() {
        return None;
    }
    Some(Projection {
        qr,
        coeffs,
        resid,
        cost,
    })
}

/// Damped Gauss-Newton on the pole positions with the residues eliminated
/// (Kaufman's simplified Jacobian). Works in scaled coordinates.
fn levenberg_marquardt<T: Real>(sc: &Scaled<T>, mut poles: Vec<C<T>>) -> Result<(Vec<C<T>>, Projection<T>)> {
    let n = poles.len();
    let mut cur = project(sc, &poles)
        .ok_or_else(|| Error::RankDeficient("initial poles give a singular basis".into()))?;
    let total: T = sc
        .ys
        .iter()
        .flatten()
        .fold(T::zero(), |s, z| s + z.norm_sqr());
    let floor = total * (T::epsilon() * T::lit(16.0)).powi(2);
    let mut lambda = T::lit(1e-3);
    let mut stalled = 0;
    for _ in 0..500 {
        if cur.cost <= floor {
            break;
        }
        // u_n = P_perp d_n with d_n = 1/(x - p_n)^2
        let u: Vec<Vec<C<T>>> = poles
            .iter()
            .map(|&p| {
                let d: Vec<C<T>> = sc
                    .x
                    .iter()
                    .map(|&x| {
                        let t = C::<T>::one() / (C::new(x, T::zero()) - p);
                        t * t
                    })
                    .collect();
                cur.qr.project_out(&d)
            })
            .collect();
        let dot = |a: &[C<T>], b: &[C<T>]| a.iter().zip(b).fold(C::zero(), |s, (x, y)| s + x.conj() * y);
        let mut a = CMatrix::zeros(n, n);
        let mut g = vec![C::zero(); n];
        for i in 0..n {
            for k in 0..n {
                let s = cur
                    .coeffs
                    .iter()
                    .fold(C::<T>::zero(), |acc, c| acc + c[i].conj() * c[k]);
                a[(i, k)] = s * dot(&u[i], &u[k]);
            }
            g[i] = -cur
                .coeffs
                .iter()
                .zip(&cur.resid)
                .fold(C::<T>::zero(), |acc, (c, r)| acc + c[i].conj() * dot(&u[i], r));
        }
        let dmax = (0..n).fold(T::zero(), |m, i| m.max(a[(i, i)].re));
        if !(dmax > T::zero()) {
            break;
        }
        let mut accepted = false;
        let mut converged = false;
        while lambda < T::lit(1e12) {
            let mut sys = a.clone();
            for i in 0..n {
                let d = a[(i, i)].re.max(T::lit(1e-12) * dmax);
                sys[(i, i)] += C::new(lambda * d, T::zero());
            }
            let lu = Lu::new(&sys);
            let step = lu.solve(&g.iter().map(|&z| -z).collect::<Vec<_>>());
            if step.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                lambda *= T::lit(4.0);
                continue;
            }
            let trial: Vec<C<T>> = poles.iter().zip(&step).map(|(p, d)| p + d).collect();
            match project(sc, &trial) {
                Some(next) if next.cost < cur.cost => {
                    let gain = (cur.cost - next.cost) / cur.cost;
                    let pmax = trial.iter().fold(T::one(), |m, p| m.max(p.norm()));
                    let smax = step.iter().fold(T::zero(), |m, d| m.max(d.norm()));
                    stalled = if gain < T::lit(1e-10) { stalled + 1 } else { 0 };
                    converged = (gain < T::lit(1e-12) && smax < T::lit(1e-10) * pmax) || stalled >= 3;
                    poles = trial;
                    cur = next;
                    lambda = (lambda / T::lit(3.0)).max(T::lit(1e-12));
                    accepted = true;
                    break;
                }
                _ => lambda *= T::lit(4.0),
            }
        }
        if !accepted || converged {
            break;
        }
    }
    Ok((poles, cur))
}

/// Initial poles in scaled coordinates: resonance peaks first (and any
/// requested extra frequencies not already covered), then evenly spaced
/// seeds for whatever is left.
fn seed_poles<T: Real>(c: &Campaign<T>, sc: &Scaled<T>, n: usize, extra: &[T]) -> Vec<C<T>> {
    let grid = c.grid();
    let span = grid[grid.len() - 1] - grid[0];
    let fallback_hw = if span > T::zero() {
        span / T::from_usize_lossy(4 * n)
    } else {
        T::one()
    };
    let peaks = if grid.len() >= 3 {
        pick_campaign_peaks(c, n, DEFAULT_PROMINENCE).unwrap_or_default()
    } else {
        Vec::new()
    };
    let mut hws: Vec<T> = peaks.iter().filter_map(|p| p.half_width).collect();
    hws.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let typical_hw = hws.get(hws.len() / 2).copied().unwrap_or(fallback_hw);

    let mut seeds: Vec<(T, T)> = Vec::new();
    for &w in extra {
        let covered = peaks
            .iter()
            .any(|p| (p.omega - w).abs() < p.half_width.unwrap_or(typical_hw));
        if !covered {
            seeds.push((w, typical_hw));
        }
    }
    let mut by_prominence = peaks.clone();
    by_prominence.sort_by(|a, b| b.prominence.partial_cmp(&a.prominence).unwrap_or(std::cmp::Ordering::Equal));
    for p in &by_prominence {
        seeds.push((p.omega, p.half_width.unwrap_or(typical_hw)));
    }
    seeds.truncate(n);
    let rest = n - seeds.len();
    for i in 0..rest {
        let t = (T::from_usize_lossy(i) + T::lit(0.5)) / T::from_usize_lossy(rest);
        seeds.push((grid[0] + span * t, typical_hw));
    }
    // keep seeds distinct so the initial basis has full rank
    let min_sep = span.max(T::one()) * T::lit(1e-4);
    for i in 1..seeds.len() {
        while seeds[..i].iter().any(|s| (s.0 - seeds[i].0).abs() < min_sep) {
            seeds[i].0 += min_sep * T::lit(3.0);
        }
    }
    seeds
        .into_iter()
        .map(|(w, hw)| sc.to_scaled(C::new(w, -hw.max(min_sep))))
        .collect()
}

/// Joint least-squares fit of every spectrum in the campaign to a sum of
/// `n_modes` Lorentzians with shared poles. Modes come back in spectral
/// order; their entries are the residues across the campaign.
pub fn fit_modes<T: Real>(
    c: &Campaign<T>,
    n_modes: usize,
    init: Option<&FitModel<T>>,
) -> Result<(FitModel<T>, Vec<RetrievedMode<T>>)> {
    fit_modes_seeded(c, n_modes, init, &[])
}

/// [`fit_modes`] with extra frequencies that must get an initial pole.
pub fn fit_modes_seeded<T: Real>(
    c: &Campaign<T>,
    n_modes: usize,
    init: Option<&FitModel<T>>,
    extra_seeds: &[T],
) -> Result<(FitModel<T>, Vec<RetrievedMode<T>>)> {
    if n_modes == 0 {
        return Err(Error::InvalidInput("n_modes must be at least 1".into()));
    }
    let m = c.grid().len();
    let j = c.dim();
    if n_modes * (j + 1) > m * j {
        return Err(Error::RankDeficient(format!(
            "{n_modes} modes need {} complex parameters but the campaign has {} data points",
            n_modes * (j + 1),
            m * j
        )));
    }
    let sc = Scaled::new(c)?;
    let allow_growing = init.map(|f| f.allow_growing).unwrap_or(false);
    let start = match init {
        Some(f) => {
            if f.n_modes() != n_modes {
                return Err(Error::InvalidInput(format!(
                    "initial model has {} modes, {n_modes} requested",
                    f.n_modes()
                )));
            }
            f.poles.iter().map(|&p| sc.to_scaled(p)).collect()
        }
        None => seed_poles(c, &sc, n_modes, extra_seeds),
    };
    let (poles, proj) = levenberg_marquardt(&sc, start)?;

    let mut order: Vec<usize> = (0..n_modes).collect();
    let unscaled: Vec<C<T>> = poles.iter().map(|&p| sc.unscale(p)).collect();
    order.sort_by(|&a, &b| spectral_order(&unscaled[a], &unscaled[b]));
    let factor = sc.scale * sc.ymax;
    let model = FitModel {
        poles: order.iter().map(|&i| unscaled[i]).collect(),
        residues: order
            .iter()
            .map(|&i| proj.coeffs.iter().map(|cj| cj[i] * factor).collect())
            .collect(),
        allow_growing,
    };
    if model
        .poles
        .iter()
        .chain(model.residues.iter().flatten())
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::FitDiverged("non-finite parameters".into()));
    }
    let quality = model.relative_rms(c);
    if !(quality <= T::lit(FIT_QUALITY_LIMIT)) {
        return Err(Error::FitDiverged(format!(
            "relative residual {quality:.3e} above {FIT_QUALITY_LIMIT}"
        )));
    }
    model.validate()?;
    let modes = (0..n_modes)
        .map(|i| RetrievedMode {
            mode_idx: i,
            omega_re: model.poles[i].re,
            omega_im: Some(model.poles[i].im),
            entries: model.residues[i].clone(),
            kind: c.mode,
            method: Method::Fit,
            quality,
        })
        .collect();
    Ok((model, modes))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeSelector<T> {
    /// The mode whose resonance lies closest to this frequency.
    Frequency(T),
    /// Position in spectral order (ascending real part).
    Index(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    /// Peak sampling when resonances are well separated, fitting otherwise.
    #[default]
    Auto,
    PeakSample,
    Fit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrieveOptions<T> {
    pub method: MethodChoice,
    /// Defaults to the campaign dimension.
    pub n_modes: Option<usize>,
    pub prominence_rel: f64,
    /// Minimum peak spacing, in linewidths, for peak sampling under `Auto`.
    pub separation_linewidths: f64,
    pub init: Option<FitModel<T>>,
}

impl<T> Default for RetrieveOptions<T> {
    fn default() -> Self {
        Self {
            method: MethodChoice::Auto,
            n_modes: None,
            prominence_rel: DEFAULT_PROMINENCE,
            separation_linewidths: 10.0,
            init: None,
        }
    }
}

/// Whether a peak list is clean enough to sample: one peak per mode, each
/// pair separated by many linewidths.
pub fn peaks_well_separated<T: Real>(peaks: &[Peak<T>], n_modes: usize, linewidths: f64) -> bool {
    if peaks.len() != n_modes {
        return false;
    }
    let Some(width) = peaks
        .iter()
        .map(|p| p.half_width)
        .try_fold(T::zero(), |m, hw| hw.map(|h| m.max(h)))
    else {
        return false;
    };
    peaks
        .windows(2)
        .all(|w| w[1].omega - w[0].omega > T::lit(linewidths) * width * T::lit(2.0))
}

pub fn retrieve_eigvec<T: Real>(c: &Campaign<T>, target: ModeSelector<T>) -> Result<RetrievedMode<T>> {
    retrieve_eigvec_with(c, target, &RetrieveOptions::default()).map(|(m, _)| m)
}

/// Full retrieval of one eigenvector. Also returns the fit model when the
/// fit path was taken, for continuation along a parameter path.
pub fn retrieve_eigvec_with<T: Real>(
    c: &Campaign<T>,
    target: ModeSelector<T>,
    opts: &RetrieveOptions<T>,
) -> Result<(RetrievedMode<T>, Option<FitModel<T>>)> {
    let n = opts.n_modes.unwrap_or(c.dim());
    let use_fit = match opts.method {
        MethodChoice::Fit => true,
        MethodChoice::PeakSample => false,
        MethodChoice::Auto => {
            opts.init.is_some() || {
                let peaks = pick_campaign_peaks(c, n, opts.prominence_rel)?;
                !peaks_well_separated(&peaks, n, opts.separation_linewidths)
            }
        }
    };
    let weak = |ratio: T| Error::WeakPrefactor {
        fixed_idx: c.fixed_idx,
        ratio: ratio.as_f64(),
    };
    let (mode, model) = if use_fit {
        let extra: Vec<T> = match target {
            ModeSelector::Frequency(w) => vec![w],
            ModeSelector::Index(_) => Vec::new(),
        };
        let (model, modes) = fit_modes_seeded(c, n, opts.init.as_ref(), &extra)?;
        let pick = select(&modes.iter().map(|m| m.omega_re).collect::<Vec<_>>(), target)?;
        let biggest = model
            .residues
            .iter()
            .flatten()
            .fold(T::zero(), |m, z| m.max(z.norm()));
        let mine = modes[pick].entries.iter().fold(T::zero(), |m, z| m.max(z.norm()));
        if !(mine >= T::lit(WEAK_PREFACTOR_RATIO) * biggest) {
            return Err(weak(mine / biggest));
        }
        (modes[pick].clone(), Some(model))
    } else {
        let peaks = pick_campaign_peaks(c, n, opts.prominence_rel)?;
        let pick = select(&peaks.iter().map(|p| p.omega).collect::<Vec<_>>(), target)?;
        if let ModeSelector::Frequency(w) = target {
            // no resonance near the target: the mode is dark from this fixed site
            let p = &peaks[pick];
            let spacing = c.grid()[1.min(c.grid().len() - 1)] - c.grid()[0];
            let reach = p.half_width.unwrap_or(spacing).max(spacing) * T::lit(3.0);
            if (p.omega - w).abs() > reach {
                let mags = campaign_magnitude(c);
                let at = mags[c.spectra[0].nearest_index(w)];
                let top = mags.iter().fold(T::zero(), |m, &x| m.max(x));
                return Err(weak(at / top));
            }
        }
        let mut mode = extract_peak_entries(c, peaks[pick].omega)?;
        mode.mode_idx = pick;
        let mine = mode.entries.iter().fold(T::zero(), |m, z| m.max(z.norm()));
        let biggest = c.max_abs();
        if !(mine >= T::lit(WEAK_PREFACTOR_RATIO) * biggest) {
            return Err(weak(mine / biggest));
        }
        (mode, None)
    };
    let mode = mode.normalized().ok_or_else(|| weak(T::zero()))?;
    Ok((mode, model))
}

fn select<T: Real>(omegas: &[T], target: ModeSelector<T>) -> Result<usize> {
    match target {
        ModeSelector::Index(i) if i < omegas.len() => Ok(i),
        ModeSelector::Index(i) => Err(Error::InvalidInput(format!(
            "mode index {i} but only {} modes retrieved",
            omegas.len()
        ))),
        ModeSelector::Frequency(w) => omegas
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (*a.1 - w)
                    .abs()
                    .partial_cmp(&(*b.1 - w).abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(i, _)| i)
            .ok_or(Error::NoPeaks),
    }
}

/// Complete biorthonormal eigensystem assembled from a LEV and a REV
/// campaign of the same system, both fitted with one pole per site.
#[derive(Debug, Clone)]
pub struct RetrievedSystem<T> {
    pub system: EigenSystem<T>,
    pub lev_fit: FitModel<T>,
    pub rev_fit: FitModel<T>,
}

pub fn retrieve_eigensystem<T: Real>(
    lev: &Campaign<T>,
    rev: &Campaign<T>,
    init: Option<(&FitModel<T>, &FitModel<T>)>,
) -> Result<RetrievedSystem<T>> {
    if lev.mode != CampaignMode::Lev || rev.mode != CampaignMode::Rev {
        return Err(Error::InvalidInput("need one LEV and one REV campaign".into()));
    }
    let n = lev.dim();
    if rev.dim() != n {
        return Err(Error::InvalidInput("LEV and REV campaigns differ in dimension".into()));
    }
    let (lev_fit, _) = fit_modes(lev, n, init.map(|p| p.0))?;
    let (rev_fit, _) = fit_modes(rev, n, init.map(|p| p.1))?;

    // pair REV poles with LEV poles
    let mut used = vec![false; n];
    let mut pairing = Vec::with_capacity(n);
    for p in &lev_fit.poles {
        let best = (0..n)
            .filter(|&k| !used[k])
            .min_by(|&a, &b| {
                (rev_fit.poles[a] - p)
                    .norm()
                    .partial_cmp(&(rev_fit.poles[b] - p).norm())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .ok_or_else(|| Error::FitDiverged("pole sets do not pair up".into()))?;
        used[best] = true;
        pairing.push(best);
    }
    let mut r = CMatrix::zeros(n, n);
    let mut l = CMatrix::zeros(n, n);
    for i in 0..n {
        r.set_column(i, &rev_fit.residues[pairing[i]]);
        l.set_row(i, &lev_fit.residues[i]);
    }
    let (rev_m, lev_m) = biorthonormalize(&r, &l)?;
    let condition = (0..n)
        .map(|k| norm2(&rev_m.column(k)) * norm2(&lev_m.row(k)))
        .collect();
    let eigenvalues = (0..n)
        .map(|i| (lev_fit.poles[i] + rev_fit.poles[pairing[i]]) / T::lit(2.0))
        .collect();
    Ok(RetrievedSystem {
        system: EigenSystem {
            eigenvalues,
            rev: rev_m,
            lev: lev_m,
            condition,
        },
        lev_fit,
        rev_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{alignment, eig, Hamiltonian};
    use crate::models::{build_h1, build_ssh_obc, tzm_profile, SshParams, TwoLevelParams};
    use crate::response::{linspace, run_campaign, sweep, NoiseSpec};
    use crate::scalar::cl;

    fn one() -> C<f64> {
        C::one()
    }

    fn ham(rows: Vec<Vec<C<f64>>>) -> Hamiltonian<f64> {
        Hamiltonian::new(CMatrix::from_rows(&rows).unwrap(), "t").unwrap()
    }

    #[test]
    fn lorentzian_has_one_peak() {
        let h = ham(vec![vec![cl(50.0, -2.0)]]);
        let s = sweep(&h, &linspace(30.0, 70.0, 401), 1, 1, one()).unwrap();
        let p = pick_peaks(&s, 5).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p[0].omega - 50.0).abs() <= 0.1);
        // |A| falls to 1/sqrt(2) at one linewidth from the centre
        assert!((p[0].half_width.unwrap() - 2.0).abs() < 0.01);
    }

    #[test]
    fn two_peaks_near_eigenvalues() {
        let h = build_h1(&TwoLevelParams::<f64>::acoustic().at(400.0, 0.0)).unwrap();
        let es = eig(&h).unwrap();
        let grid = linspace(8400.0, 9600.0, 6001);
        let s = sweep(&h, &grid, 1, 1, one()).unwrap();
        let p = pick_peaks(&s, 4).unwrap();
        assert_eq!(p.len(), 2);
        for (pk, w) in p.iter().zip(&es.eigenvalues) {
            assert!((pk.omega - w.re).abs() < 0.1 * w.im.abs(), "{} vs {}", pk.omega, w.re);
        }
    }

    #[test]
    fn monotonic_spectrum_has_no_peaks() {
        let h = ham(vec![vec![cl(0.0, -1.0)]]);
        let s = sweep(&h, &linspace(10.0, 20.0, 50), 1, 1, one()).unwrap();
        assert_eq!(pick_peaks(&s, 3), Err(Error::NoPeaks));
    }

    #[test]
    fn truncation_keeps_most_prominent() {
        let grid: Vec<f64> = linspace(0.0, 10.0, 1001);
        let mags: Vec<f64> = grid
            .iter()
            .map(|&x| 1.0 / (1.0 + (x - 2.0f64).powi(2) * 40.0) + 0.5 / (1.0 + (x - 8.0f64).powi(2) * 40.0))
            .collect();
        let p = find_peaks(&grid, &mags, 1, 0.05).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p[0].omega - 2.0).abs() < 0.02);
        let p = find_peaks(&grid, &mags, 2, 0.05).unwrap();
        assert!(p[0].omega < p[1].omega);
    }

    #[test]
    fn decoupled_sites_give_unit_lev() {
        let h = ham(vec![vec![cl(10.0, -0.5), C::zero()], vec![C::zero(), cl(30.0, -0.5)]]);
        let grid = linspace(0.0, 40.0, 801);
        let c = run_campaign(&h, &grid, CampaignMode::Lev, 1, one(), None).unwrap();
        let m = extract_peak_entries(&c, 10.0).unwrap();
        assert_eq!(m.method, Method::PeakSample);
        assert!(m.entries[1].norm() == 0.0 && m.entries[0].norm() > 1.0);
    }

    #[test]
    fn two_step_walkthrough() {
        let h = build_h1(&TwoLevelParams::<f64>::acoustic().at(200.0, 0.0)).unwrap();
        let es = eig(&h).unwrap();
        let grid = linspace(8500.0, 9500.0, 4001);
        let c = run_campaign(&h, &grid, CampaignMode::Lev, 1, one(), None).unwrap();
        let m = retrieve_eigvec(&c, ModeSelector::Index(0)).unwrap();
        assert_eq!(m.kind, CampaignMode::Lev);
        assert!(alignment(&m.entries, &es.left(0)) > 0.99);
    }

    #[test]
    fn symmetric_lev_and_rev_agree_at_peak() {
        let h = ham(vec![
            vec![cl(100.0, -1.0), cl(4.0, 0.0)],
            vec![cl(4.0, 0.0), cl(160.0, -1.5)],
        ]);
        let grid = linspace(50.0, 200.0, 1501);
        let lev = run_campaign(&h, &grid, CampaignMode::Lev, 1, one(), None).unwrap();
        let rev = run_campaign(&h, &grid, CampaignMode::Rev, 1, one(), None).unwrap();
        let a = extract_peak_entries(&lev, 100.0).unwrap();
        let b = extract_peak_entries(&rev, 100.0).unwrap();
        assert!(alignment(&a.entries, &b.entries) > 1.0 - 1e-12);
    }

    #[test]
    fn single_pole_fit_is_exact() {
        let pole: C<f64> = cl(40.0, -1.5);
        let res: C<f64> = cl(0.7, -0.2);
        let grid = linspace(20.0, 60.0, 201);
        let amps: Vec<C<f64>> = grid.iter().map(|&w| res / (cl::<f64>(w, 0.0) - pole)).collect();
        let s = ResponseSpectrum::new(grid, amps, 1, 1, one()).unwrap();
        let c = Campaign::new(vec![s], CampaignMode::Lev, 1).unwrap();
        let (model, modes) = fit_modes(&c, 1, None).unwrap();
        assert!((model.poles[0] - pole).norm() < 1e-10);
        assert!((model.residues[0][0] - res).norm() < 1e-10);
        assert!(modes[0].quality < 1e-12);
    }

    #[test]
    fn two_mode_fit_recovers_eigensystem() {
        let h = build_h1(&TwoLevelParams::<f64>::acoustic().at(15.0, 5.0)).unwrap();
        let es = eig(&h).unwrap();
        let grid = linspace(8766.0, 9266.0, 2001);
        let c = run_campaign(&h, &grid, CampaignMode::Lev, 1, cl(0.3, 0.1), None).unwrap();
        let (model, modes) = fit_modes(&c, 2, None).unwrap();
        for n in 0..2 {
            assert!((model.poles[n] - es.eigenvalues[n]).norm() < 1e-6 * es.eigenvalues[n].norm());
            let l = es.left(n);
            let ratio_fit = modes[n].entries[1] / modes[n].entries[0];
            assert!((ratio_fit - l[1] / l[0]).norm() < 1e-6 * (l[1] / l[0]).norm());
        }
        assert!(model.relative_rms(&c) <= modes[0].quality);
    }

    #[test]
    fn fit_rejects_overparameterised_request() {
        let grid = linspace(0.0, 1.0, 3);
        let s = ResponseSpectrum::new(grid, vec![one(); 3], 1, 1, one()).unwrap();
        let c = Campaign::new(vec![s], CampaignMode::Lev, 1).unwrap();
        assert!(matches!(fit_modes(&c, 2, None), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn fit_continuation_from_init() {
        let p0 = TwoLevelParams::<f64>::acoustic().at(20.0, 0.0);
        let grid = linspace(8766.0, 9266.0, 801);
        let c0 = run_campaign(&build_h1(&p0).unwrap(), &grid, CampaignMode::Rev, 2, one(), None).unwrap();
        let (m0, _) = fit_modes(&c0, 2, None).unwrap();
        let h1 = build_h1(&p0.at(21.0, 0.5)).unwrap();
        let c1 = run_campaign(&h1, &grid, CampaignMode::Rev, 2, one(), None).unwrap();
        let (m1, _) = fit_modes(&c1, 2, Some(&m0)).unwrap();
        let es = eig(&h1).unwrap();
        for n in 0..2 {
            assert!((m1.poles[n] - es.eigenvalues[n]).norm() < 1e-6 * 9000.0);
        }
    }

    #[test]
    fn noisy_overlapping_modes() {
        // gap about one linewidth
        let h = ham(vec![
            vec![cl(100.0, -5.0), cl(1.0, 0.0)],
            vec![cl(2.0, 0.0), cl(105.0, -5.0)],
        ]);
        let es = eig(&h).unwrap();
        let grid = linspace(60.0, 145.0, 1001);
        let exact = es.left(0)[1] / es.left(0)[0];
        let mut errs = Vec::new();
        for seed in 0..100u64 {
            let c = run_campaign(
                &h,
                &grid,
                CampaignMode::Lev,
                1,
                one(),
                Some(NoiseSpec { sigma_rel: 0.01, seed }),
            )
            .unwrap();
            let (_, modes) = fit_modes(&c, 2, None).unwrap();
            let ratio = modes[0].entries[1] / modes[0].entries[0];
            errs.push((ratio - exact).norm() / exact.norm());
        }
        errs.sort_by(f64::total_cmp);
        assert!(errs[50] < 0.05, "median {}", errs[50]);
    }

    #[test]
    fn hermitian_lev_is_conjugate_rev() {
        let h = ham(vec![
            vec![cl(100.0, 0.0), cl(12.0, 8.0)],
            vec![cl(12.0, -8.0), cl(140.0, 0.0)],
        ]);
        // add uniform loss so the resolvent stays finite on the real axis
        let h = Hamiltonian::new(
            h.entries().add(&CMatrix::from_diag(&[cl(0.0, -1.0), cl(0.0, -1.0)])),
            "h",
        )
        .unwrap();
        let grid = linspace(60.0, 180.0, 2401);
        let lev = run_campaign(&h, &grid, CampaignMode::Lev, 1, one(), None).unwrap();
        let rev = run_campaign(&h, &grid, CampaignMode::Rev, 1, one(), None).unwrap();
        let fit = RetrieveOptions {
            method: MethodChoice::Fit,
            ..Default::default()
        };
        for n in 0..2 {
            let l = retrieve_eigvec(&lev, ModeSelector::Index(n)).unwrap();
            let r = retrieve_eigvec(&rev, ModeSelector::Index(n)).unwrap();
            assert_eq!(l.method, Method::PeakSample);
            let rc: Vec<C<f64>> = r.entries.iter().map(|z| z.conj()).collect();
            // the neighbouring mode leaks in with a different phase in each campaign
            let a = alignment(&l.entries, &rc);
            assert!(a > 0.99, "{a} {:?} {:?}", l.entries, rc);

            let (l, _) = retrieve_eigvec_with(&lev, ModeSelector::Index(n), &fit).unwrap();
            let (r, _) = retrieve_eigvec_with(&rev, ModeSelector::Index(n), &fit).unwrap();
            let rc: Vec<C<f64>> = r.entries.iter().map(|z| z.conj()).collect();
            assert!(alignment(&l.entries, &rc) > 1.0 - 1e-10);
        }
    }

    fn ssh_setup() -> (Hamiltonian<f64>, SshParams<f64>, Vec<f64>) {
        let mut p = SshParams::<f64>::acoustic();
        p.loss = -41.2;
        (build_ssh_obc(&p).unwrap(), p, linspace(-400.0, 400.0, 2001))
    }

    #[test]
    fn ssh_tzm_lev_from_a_site() {
        let (h, p, grid) = ssh_setup();
        let c = run_campaign(&h, &grid, CampaignMode::Lev, 1, one(), None).unwrap();
        let m = retrieve_eigvec(&c, ModeSelector::Frequency(0.0)).unwrap();
        assert_eq!(m.method, Method::Fit);
        let prof = tzm_profile(&p).unwrap();
        assert!(alignment(&m.entries, &prof.lev_sites()) > 0.999);
    }

    #[test]
    fn ssh_b_site_probe_is_weak() {
        let (h, _, grid) = ssh_setup();
        let c = run_campaign(&h, &grid, CampaignMode::Lev, 2, one(), None).unwrap();
        let r = retrieve_eigvec(&c, ModeSelector::Frequency(0.0));
        assert!(matches!(r, Err(Error::WeakPrefactor { fixed_idx: 2, .. })), "{r:?}");
    }

    #[test]
    fn prefactor_independence() {
        let h = build_h1(&TwoLevelParams::<f64>::acoustic().at(35.0, -10.0)).unwrap();
        let grid = linspace(8766.0, 9266.0, 1001);
        let a = run_campaign(&h, &grid, CampaignMode::Rev, 1, one(), None).unwrap();
        let b = run_campaign(&h, &grid, CampaignMode::Rev, 1, cl(-2.5, 7.0), None).unwrap();
        let ma = retrieve_eigvec(&a, ModeSelector::Index(1)).unwrap();
        let mb = retrieve_eigvec(&b, ModeSelector::Index(1)).unwrap();
        for (x, y) in ma.entries.iter().zip(&mb.entries) {
            assert!((x - y).norm() < 1e-8);
        }
    }

    #[test]
    fn eigensystem_from_campaigns() {
        let h = build_h1(&TwoLevelParams::<f64>::acoustic().at(50.0, 0.0)).unwrap();
        let es = eig(&h).unwrap();
        let grid = linspace(8766.0, 9266.0, 2001);
        let lev = run_campaign(&h, &grid, CampaignMode::Lev, 1, one(), None).unwrap();
        let rev = run_campaign(&h, &grid, CampaignMode::Rev, 1, one(), None).unwrap();
        let got = retrieve_eigensystem(&lev, &rev, None).unwrap();
        assert!(got.system.biorthonormality_residual() < 1e-8);
        for n in 0..2 {
            assert!(alignment(&got.system.right(n), &es.right(n)) > 1.0 - 1e-10);
            assert!(alignment(&got.system.left(n), &es.left(n)) > 1.0 - 1e-10);
        }
        // non-Hermitian: LEV is not the conjugated REV
        let rc: Vec<C<f64>> = es.right(0).iter().map(|z| z.conj()).collect();
        assert!(alignment(&got.system.left(0), &rc) < 0.999);
    }

    #[test]
    fn noisy_ssh_retrieval() {
        let (h, p, grid) = ssh_setup();
        let prof = tzm_profile(&p).unwrap();
        let spec = NoiseSpec { sigma_rel: 0.01, seed: 3 };
        let c = run_campaign(&h, &grid, CampaignMode::Rev, 1, one(), Some(spec)).unwrap();
        let m = retrieve_eigvec(&c, ModeSelector::Frequency(0.0)).unwrap();
        assert!(alignment(&m.entries, &prof.rev_sites()) > 0.99);
    }
}
