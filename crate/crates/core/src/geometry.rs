//! Parameter loops, band tracking and the discrete Berry phase.
//!
//! The phase of a closed strand is the argument of the biorthogonal
//! overlap product around the loop (a Wilson loop),
//! `theta = -arg prod_k <L_k|R_{k+1}>`, which is independent of the phase
//! (and scale) chosen for each individual eigenvector.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig, pair, EigenSystem, Hamiltonian};
use crate::models::{ep_locations, TwoLevelParams};
use crate::response::{run_campaign, CampaignMode, NoiseSpec};
use crate::retrieval::{retrieve_eigensystem, FitModel};
use crate::scalar::{wrap_phase, Real, C};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[default]
    Ccw,
    Cw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParametricLoop<T> {
    /// `(phi_x, phi_y)` for every step of every cycle.
    pub points: Vec<(T, T)>,
    pub cycles: usize,
    pub steps_per_cycle: usize,
    /// The step after the last point returns to the first.
    pub closed: bool,
}

impl<T> ParametricLoop<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Ellipse sampled uniformly in angle, starting on the +x semi-axis and
/// traversed `cycles` times.
pub fn make_loop<T: Real>(
    center: (T, T),
    radii: (T, T),
    steps: usize,
    cycles: usize,
    orientation: Orientation,
) -> Result<ParametricLoop<T>> {
    if steps < 8 {
        return Err(Error::InvalidInput(format!("a loop needs at least 8 steps, got {steps}")));
    }
    if cycles == 0 {
        return Err(Error::InvalidInput("cycles must be positive".into()));
    }
    if !(radii.0 > T::zero() && radii.1 > T::zero()) || !radii.0.is_finite() || !radii.1.is_finite() {
        return Err(Error::InvalidInput("loop radii must be positive and finite".into()));
    }
    let sign = match orientation {
        Orientation::Ccw => T::one(),
        Orientation::Cw => -T::one(),
    };
    let n = T::from_usize_lossy(steps);
    let points = (0..steps * cycles)
        .map(|k| {
            let t = sign * T::TAU() * T::from_usize_lossy(k % steps) / n;
            (center.0 + radii.0 * t.cos(), center.1 + radii.1 * t.sin())
        })
        .collect();
    Ok(ParametricLoop {
        points,
        cycles,
        steps_per_cycle: steps,
        closed: true,
    })
}

/// Circle centred between the two exceptional points of the two-level
/// model whose radius exceeds half their separation by `margin`.
pub fn both_ep_circle<T: Real>(gamma1: T, gamma2: T, margin: T) -> Result<((T, T), (T, T))> {
    let eps = ep_locations(gamma1, gamma2)?;
    let r = eps.separation() / T::lit(2.0) * (T::one() + margin);
    Ok((eps.midpoint(), (r, r)))
}

/// Circle around exceptional point `which` (0 or 1) of radius `fraction`
/// times the EP separation; `fraction < 1` keeps the other EP outside.
pub fn single_ep_circle<T: Real>(gamma1: T, gamma2: T, which: usize, fraction: T) -> Result<((T, T), (T, T))> {
    let eps = ep_locations(gamma1, gamma2)?;
    let p = *eps
        .points
        .get(which)
        .ok_or_else(|| Error::InvalidInput(format!("exceptional point index {which} not in 0..2")))?;
    let r = eps.separation() * fraction;
    Ok((p, (r, r)))
}

/// How eigenvectors are obtained at each loop point.
#[derive(Debug, Clone, PartialEq)]
pub enum EigenSource<T> {
    /// Direct diagonalization.
    Exact,
    /// Synthesized LEV and REV campaigns followed by fitting.
    Retrieved(RetrievalSetup<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalSetup<T> {
    pub grid: Vec<T>,
    /// Probe site of the LEV campaign (1-based).
    pub lev_fixed: usize,
    /// Source site of the REV campaign (1-based).
    pub rev_fixed: usize,
    pub a0: C<T>,
    pub noise: Option<NoiseSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOptions {
    /// Minimum eigenvalue gap relative to the largest eigenvalue modulus.
    pub ep_margin_rel: f64,
    /// Overlaps within this relative distance count as a tie.
    pub ambiguity_rel: f64,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self {
            ep_margin_rel: 1e-6,
            ambiguity_rel: 0.01,
        }
    }
}

/// One band followed around a loop in the parallel-transport gauge.
///
/// `rev`/`lev` have one entry per loop point plus a final entry: the state
/// the strand lands on when the loop closes, transported from the last point,
/// so that `<L_k|R_{k+1}>` is real-positive for every step including the
/// closing one.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportedStates<T> {
    /// Band index (spectral order) at step 0.
    pub band: usize,
    /// Band index at every loop point.
    pub band_at_step: Vec<usize>,
    /// Band at step 0 that the strand returns to.
    pub closing_band: usize,
    pub eigenvalues: Vec<C<T>>,
    pub rev: Vec<Vec<C<T>>>,
    pub lev: Vec<Vec<C<T>>>,
    pub steps_per_cycle: usize,
    pub cycles: usize,
}

impl<T: Real> TransportedStates<T> {
    pub fn is_closed(&self) -> bool {
        self.closing_band == self.band
    }

    pub fn swapped(&self) -> bool {
        !self.is_closed()
    }
}

fn min_gap<T: Real>(values: &[C<T>]) -> T {
    let mut gap = T::infinity();
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            gap = gap.min((values[i] - values[j]).norm());
        }
    }
    gap
}

fn eigensystems<T: Real, F>(h_at: &F, lp: &ParametricLoop<T>, source: &EigenSource<T>, opts: &TrackOptions) -> Result<Vec<EigenSystem<T>>>
where
    F: Fn(T, T) -> Result<Hamiltonian<T>>,
{
    let mut out = Vec::with_capacity(lp.len());
    let mut fits: Option<(FitModel<T>, FitModel<T>)> = None;
    for (step, &(px, py)) in lp.points.iter().enumerate() {
        let h = h_at(px, py)?;
        let es = match source {
            EigenSource::Exact => match eig(&h) {
                Ok(es) => es,
                Err(Error::DefectiveMatrix { .. }) => {
                    let n = h.dim();
                    let mean = (0..n).fold(C::zero(), |s, i| s + h.get(i, i)) / T::from_usize_lossy(n);
                    return Err(Error::EPTooClose {
                        step,
                        gap: 0.0,
                        margin: opts.ep_margin_rel * mean.norm().as_f64(),
                    });
                }
                Err(e) => return Err(e),
            },
            EigenSource::Retrieved(setup) => {
                let lev = run_campaign(&h, &setup.grid, CampaignMode::Lev, setup.lev_fixed, setup.a0, setup.noise)?;
                let rev = run_campaign(&h, &setup.grid, CampaignMode::Rev, setup.rev_fixed, setup.a0, setup.noise)?;
                let got = retrieve_eigensystem(&lev, &rev, fits.as_ref().map(|(a, b)| (a, b)))?;
                fits = Some((got.lev_fit, got.rev_fit));
                got.system
            }
        };
        let scale = es.eigenvalues.iter().fold(T::zero(), |m, w| m.max(w.norm()));
        let margin = T::lit(opts.ep_margin_rel) * scale;
        let gap = min_gap(&es.eigenvalues);
        if !(gap > margin) {
            return Err(Error::EPTooClose {
                step,
                gap: gap.as_f64(),
                margin: margin.as_f64(),
            });
        }
        out.push(es);
    }
    Ok(out)
}

/// Picks, for every band of `prev`, the band of `next` with the largest
/// biorthogonal overlap, falling back to eigenvalue proximity on near ties.
fn match_bands<T: Real>(
    prev_l: &[Vec<C<T>>],
    prev_w: &[C<T>],
    next: &EigenSystem<T>,
    step: usize,
    ambiguity: f64,
) -> Result<Vec<usize>> {
    let n = next.dim();
    let tie = T::one() - T::lit(ambiguity);
    let mut taken = vec![false; n];
    let mut perm = Vec::with_capacity(prev_l.len());
    for (l, &w) in prev_l.iter().zip(prev_w) {
        let mut scores: Vec<(usize, T)> = (0..n).map(|j| (j, pair(l, &next.right(j)).norm())).collect();
        scores.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        let mut choice = scores[0].0;
        if n > 1 && scores[1].1 >= tie * scores[0].1 {
            let d0 = (next.eigenvalues[scores[0].0] - w).norm();
            let d1 = (next.eigenvalues[scores[1].0] - w).norm();
            if d0.min(d1) >= tie * d0.max(d1) {
                return Err(Error::TrackingAmbiguous { step });
            }
            choice = if d0 < d1 { scores[0].0 } else { scores[1].0 };
        }
        if taken[choice] {
            return Err(Error::TrackingAmbiguous { step });
        }
        taken[choice] = true;
        perm.push(choice);
    }
    Ok(perm)
}

fn rephase<T: Real>(l_prev: &[C<T>], r: &mut [C<T>], l: &mut [C<T>]) {
    let ov = pair(l_prev, r);
    if ov.norm() == T::zero() {
        return;
    }
    let u = ov / ov.norm();
    let uc = u.conj();
    for z in r.iter_mut() {
        *z *= uc;
    }
    for z in l.iter_mut() {
        *z *= u;
    }
}

/// Follows every band of `h_at` around the loop. One strand per band at the
/// first point, each in the parallel-transport gauge.
pub fn track_modes<T: Real, F>(
    h_at: F,
    lp: &ParametricLoop<T>,
    source: &EigenSource<T>,
) -> Result<Vec<TransportedStates<T>>>
where
    F: Fn(T, T) -> Result<Hamiltonian<T>>,
{
    track_modes_with(h_at, lp, source, &TrackOptions::default())
}

pub fn track_modes_with<T: Real, F>(
    h_at: F,
    lp: &ParametricLoop<T>,
    source: &EigenSource<T>,
    opts: &TrackOptions,
) -> Result<Vec<TransportedStates<T>>>
where
    F: Fn(T, T) -> Result<Hamiltonian<T>>,
{
    if !lp.closed || lp.len() < 2 {
        return Err(Error::InvalidInput("mode tracking needs a closed loop".into()));
    }
    let systems = eigensystems(&h_at, lp, source, opts)?;
    let n = systems[0].dim();
    let k_total = systems.len();
    let mut strands: Vec<TransportedStates<T>> = (0..n)
        .map(|b| TransportedStates {
            band: b,
            band_at_step: vec![b],
            closing_band: b,
            eigenvalues: vec![systems[0].eigenvalues[b]],
            rev: vec![systems[0].right(b)],
            lev: vec![systems[0].left(b)],
            steps_per_cycle: lp.steps_per_cycle,
            cycles: lp.cycles,
        })
        .collect();
    // the step after the last point lands back on the first system
    for k in 1..=k_total {
        let next = &systems[k % k_total];
        let prev_l: Vec<Vec<C<T>>> = strands.iter().map(|s| s.lev.last().cloned().unwrap()).collect();
        let prev_w: Vec<C<T>> = strands.iter().map(|s| *s.eigenvalues.last().unwrap()).collect();
        let step = k % k_total;
        let perm = match_bands(&prev_l, &prev_w, next, step, opts.ambiguity_rel)?;
        for (s, (&j, l_prev)) in strands.iter_mut().zip(perm.iter().zip(&prev_l)) {
            let mut r = next.right(j);
            let mut l = next.left(j);
            rephase(l_prev, &mut r, &mut l);
            s.rev.push(r);
            s.lev.push(l);
            s.eigenvalues.push(next.eigenvalues[j]);
            if k < k_total {
                s.band_at_step.push(j);
            } else {
                s.closing_band = j;
            }
        }
    }
    Ok(strands)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerryResult<T> {
    /// Accumulated phase in (-pi, pi].
    pub theta: T,
    /// Running phase at every point, in the gauge where `<Ref|R>` is
    /// real-positive; starts at 0 and its last entry equals `theta` mod 2pi.
    pub cumulative: Vec<T>,
    /// `<Ref|R_k>` in the transported gauge.
    pub projections_rev: Vec<C<T>>,
    /// `<L_k|Ref>` in the transported gauge.
    pub projections_lev: Vec<C<T>>,
    pub steps: usize,
    pub cycles: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projections<T> {
    pub rev: Vec<C<T>>,
    pub lev: Vec<C<T>>,
}

/// Raw projections `<Ref|R_k>` and `<L_k|Ref>` at every point.
pub fn project_on_ref<T: Real>(ts: &TransportedStates<T>, reference: &[C<T>]) -> Result<Projections<T>> {
    let dim = ts.rev.first().map(|r| r.len()).unwrap_or(0);
    if reference.len() != dim {
        return Err(Error::InvalidInput(format!(
            "reference has {} entries, states have {dim}",
            reference.len()
        )));
    }
    if reference.iter().all(|z| z.is_zero()) {
        return Err(Error::InvalidInput("reference vector is zero".into()));
    }
    let rev = ts
        .rev
        .iter()
        .map(|r| reference.iter().zip(r).fold(C::zero(), |s, (a, b)| s + a.conj() * b))
        .collect();
    let lev = ts.lev.iter().map(|l| pair(l, reference)).collect();
    Ok(Projections { rev, lev })
}

fn first_basis_vector<T: Real>(dim: usize) -> Vec<C<T>> {
    let mut v = vec![C::zero(); dim];
    if dim > 0 {
        v[0] = C::one();
    }
    v
}

/// Berry phase of a closed strand. The reference vector for the projection
/// series is `(1, 0, ...)`.
pub fn berry_phase<T: Real>(ts: &TransportedStates<T>) -> Result<BerryResult<T>> {
    if !ts.is_closed() {
        return Err(Error::OpenHolonomy {
            start: ts.band,
            end: ts.closing_band,
        });
    }
    let k = ts.rev.len() - 1;
    if k < 1 || ts.lev.len() != k + 1 {
        return Err(Error::InvalidInput("transported sequence too short".into()));
    }
    // -arg of the full overlap product, closing back onto the first state
    let mut phase = T::zero();
    for i in 0..k {
        phase -= pair(&ts.lev[i], &ts.rev[i + 1]).arg();
    }
    phase -= pair(&ts.lev[k], &ts.rev[0]).arg();
    let theta = wrap_phase(phase);

    let reference = first_basis_vector::<T>(ts.rev[0].len());
    let proj = project_on_ref(ts, &reference)?;
    // rotate each state so that <Ref|R> is real-positive
    let gauge: Vec<C<T>> = proj
        .rev
        .iter()
        .map(|p| if p.norm() > T::zero() { p.conj() / p.norm() } else { C::one() })
        .collect();
    let mut cumulative = Vec::with_capacity(k + 1);
    cumulative.push(T::zero());
    let mut acc = T::zero();
    for i in 0..k {
        let r_next = if i + 1 == k { (&ts.rev[0], gauge[0]) } else { (&ts.rev[i + 1], gauge[i + 1]) };
        let ov = pair(&ts.lev[i], r_next.0) * r_next.1 / gauge[i];
        acc -= ov.arg();
        cumulative.push(acc);
    }
    Ok(BerryResult {
        theta,
        cumulative,
        projections_rev: proj.rev,
        projections_lev: proj.lev,
        steps: ts.steps_per_cycle,
        cycles: ts.cycles,
    })
}

/// `h_at` for the two-level model with fixed frequencies and dissipation.
pub fn two_level_family<T: Real>(base: TwoLevelParams<T>) -> impl Fn(T, T) -> Result<Hamiltonian<T>> {
    move |px, py| crate::models::build_h1(&base.at(px, py))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix;
    use crate::response::linspace;
    use crate::scalar::cl;
    use std::f64::consts::PI;

    fn acoustic() -> TwoLevelParams<f64> {
        TwoLevelParams::acoustic()
    }

    fn both_ep_loop(steps: usize, orientation: Orientation) -> ParametricLoop<f64> {
        let (c, r) = both_ep_circle(-19.7, -40.8, 0.3).unwrap();
        make_loop(c, r, steps, 1, orientation).unwrap()
    }

    fn phase_dist(a: f64, b: f64) -> f64 {
        wrap_phase(a - b).abs()
    }

    #[test]
    fn loop_shapes() {
        let l = make_loop((0.0f64, 0.0), (1.0, 2.0), 8, 1, Orientation::Ccw).unwrap();
        assert_eq!(l.len(), 8);
        assert!(l.closed);
        assert!((l.points[2].1 - 2.0).abs() < 1e-15);
        let l2 = make_loop((0.0, 0.0), (1.0, 2.0), 8, 2, Orientation::Ccw).unwrap();
        assert_eq!(l2.len(), 16);
        assert_eq!(&l2.points[..8], &l2.points[8..]);
        let cw = make_loop((0.0, 0.0), (1.0, 2.0), 8, 1, Orientation::Cw).unwrap();
        assert!(cw.points[2].1 < 0.0);
        let tiny = make_loop((3.0f64, -4.0), (1e-9, 1e-9), 16, 1, Orientation::Ccw).unwrap();
        assert!(tiny.points.iter().all(|p| (p.0 - 3.0).abs() <= 2e-9 && (p.1 + 4.0).abs() <= 2e-9));
        assert!(make_loop((0.0, 0.0), (1.0, 1.0), 7, 1, Orientation::Ccw).is_err());
        assert!(make_loop((0.0, 0.0), (0.0, 1.0), 8, 1, Orientation::Ccw).is_err());
    }

    #[test]
    fn hermitian_tracking_is_identity() {
        let h_at = |px: f64, py: f64| {
            let m = CMatrix::from_rows(&[vec![cl(100.0 + px, 0.0), cl(5.0, 0.0)], vec![cl(5.0, 0.0), cl(200.0 + py, 0.0)]]).unwrap();
            Hamiltonian::new(m, "h")
        };
        let lp = make_loop((0.0, 0.0), (10.0, 10.0), 64, 1, Orientation::Ccw).unwrap();
        let ts = track_modes(h_at, &lp, &EigenSource::Exact).unwrap();
        for s in &ts {
            assert!(s.band_at_step.iter().all(|&b| b == s.band));
            assert!(s.is_closed());
            let b = berry_phase(s).unwrap();
            assert!(phase_dist(b.theta, 0.0) < 1e-10);
        }
    }

    #[test]
    fn parallel_transport_gauge() {
        let lp = both_ep_loop(200, Orientation::Ccw);
        let ts = track_modes(two_level_family(acoustic()), &lp, &EigenSource::Exact).unwrap();
        for s in &ts {
            for k in 0..lp.len() {
                let ov = pair(&s.lev[k], &s.rev[k + 1]);
                assert!(ov.arg().abs() < 1e-10);
                assert!((pair(&s.lev[k], &s.rev[k]) - C::one()).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn both_ep_loop_gives_pi() {
        let lp = both_ep_loop(200, Orientation::Ccw);
        let ts = track_modes(two_level_family(acoustic()), &lp, &EigenSource::Exact).unwrap();
        for s in &ts {
            assert!(s.is_closed());
            let b = berry_phase(s).unwrap();
            assert!(phase_dist(b.theta, PI) < 0.02, "theta {}", b.theta);
            assert!(phase_dist(*b.cumulative.last().unwrap(), b.theta) < 1e-9);
            // arguments of the projections are reversed after the cycle
            let k = b.projections_rev.len() - 1;
            let d = b.projections_rev[k].arg() - b.projections_rev[0].arg();
            assert!(phase_dist(d, PI) < 0.02);
            let d = b.projections_lev[k].arg() - b.projections_lev[0].arg();
            assert!(phase_dist(d, PI) < 0.02);
        }
    }

    #[test]
    fn single_ep_needs_two_cycles() {
        let (c, r) = single_ep_circle(-19.7, -40.8, 0, 0.3).unwrap();
        let one = make_loop(c, r, 200, 1, Orientation::Ccw).unwrap();
        let ts = track_modes(two_level_family(acoustic()), &one, &EigenSource::Exact).unwrap();
        assert!(ts.iter().all(|s| s.swapped()));
        assert!(matches!(berry_phase(&ts[0]), Err(Error::OpenHolonomy { start: 0, end: 1 })));

        let two = make_loop(c, r, 200, 2, Orientation::Ccw).unwrap();
        let ts = track_modes(two_level_family(acoustic()), &two, &EigenSource::Exact).unwrap();
        for s in &ts {
            assert!(s.is_closed());
            let b = berry_phase(s).unwrap();
            assert!(phase_dist(b.theta, PI) < 0.05, "theta {}", b.theta);
        }
    }

    #[test]
    fn trivial_loop_gives_zero() {
        let mut p = acoustic();
        p.gamma1 = 0.0;
        p.gamma2 = 0.0;
        let lp = make_loop((60.0, 30.0), (1.0, 1.0), 64, 1, Orientation::Ccw).unwrap();
        let ts = track_modes(two_level_family(p), &lp, &EigenSource::Exact).unwrap();
        for s in &ts {
            assert!(phase_dist(berry_phase(s).unwrap().theta, 0.0) < 1e-8);
        }
    }

    #[test]
    fn orientation_and_convergence() {
        let fam = two_level_family(acoustic());
        let th = |steps, o| {
            let ts = track_modes(&fam, &both_ep_loop(steps, o), &EigenSource::Exact).unwrap();
            berry_phase(&ts[0]).unwrap().theta
        };
        let ccw = th(200, Orientation::Ccw);
        let cw = th(200, Orientation::Cw);
        assert!(phase_dist(ccw, -cw) < 0.02);
        assert!(phase_dist(th(400, Orientation::Ccw), th(800, Orientation::Ccw)) < 1e-3);
    }

    #[test]
    fn gauge_invariance() {
        let lp = both_ep_loop(100, Orientation::Ccw);
        let ts = track_modes(two_level_family(acoustic()), &lp, &EigenSource::Exact).unwrap();
        let mut s = ts[1].clone();
        let base = berry_phase(&s).unwrap().theta;
        for (k, (r, l)) in s.rev.iter_mut().zip(s.lev.iter_mut()).enumerate() {
            let c = C::from_polar(1.0 + 0.1 * k as f64, 0.37 * k as f64);
            r.iter_mut().for_each(|z| *z *= c);
            l.iter_mut().for_each(|z| *z /= c);
        }
        assert!(phase_dist(berry_phase(&s).unwrap().theta, base) < 1e-10);
    }

    #[test]
    fn ep_on_loop_is_rejected() {
        let eps = ep_locations(-19.7f64, -40.8).unwrap();
        let (x, _) = eps.points[0];
        // circle through the exceptional point at its leftmost sample
        let lp = make_loop((x + 5.0, 0.0), (5.0, 5.0), 8, 1, Orientation::Ccw).unwrap();
        let r = track_modes(two_level_family(acoustic()), &lp, &EigenSource::Exact);
        assert!(matches!(r, Err(Error::EPTooClose { step: 4, .. })), "{r:?}");
    }

    #[test]
    fn retrieved_matches_exact_coarse() {
        let lp = both_ep_loop(40, Orientation::Ccw);
        let fam = two_level_family(acoustic());
        let exact = track_modes(&fam, &lp, &EigenSource::Exact).unwrap();
        let setup = RetrievalSetup {
            grid: linspace(8766.0, 9266.0, 501),
            lev_fixed: 1,
            rev_fixed: 1,
            a0: C::one(),
            noise: None,
        };
        let got = track_modes(&fam, &lp, &EigenSource::Retrieved(setup)).unwrap();
        for (a, b) in exact.iter().zip(&got) {
            let ta = berry_phase(a).unwrap().theta;
            let tb = berry_phase(b).unwrap().theta;
            assert!(phase_dist(ta, tb) < 0.02, "{ta} {tb}");
        }
    }
}
