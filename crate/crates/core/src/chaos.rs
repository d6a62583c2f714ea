//! Lyapunov spectra, dynamical classification, period detection,
//! particle-hole restoration and delay embeddings.

use serde::{Deserialize, Serialize};

use crate::dynamics::{check_bounds, divergence_bound, AttractorKind, AttractorRecord, Flow, Rk4, Trajectory};
use crate::error::{Error, Result};
use crate::model::{ph_map, LatticeState, ModelParams, C64};
use crate::obc::jvp;

/// Width of the band `(-zero_tol, zero_tol)` counted as zero exponents (units `J`).
pub const ZERO_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConfig {
    /// Number of exponents, at most `2N`.
    pub k: usize,
    pub dt: f64,
    pub t_total: f64,
    pub renorm_interval: f64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig { k: 4, dt: 5e-3, t_total: 2e4, renorm_interval: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovResult {
    /// Sorted descending.
    pub exponents: Vec<f64>,
    /// Same exponents averaged over the second half of the run only.
    pub trailing_half: Vec<f64>,
    /// Running estimates after each renormalization, `history[epoch][i]`.
    pub history: Vec<Vec<f64>>,
    pub renorm_interval: f64,
    pub t_total: f64,
    /// Time average of `tr J` along the base trajectory.
    pub trace_average: f64,
    pub final_state: LatticeState,
    /// Orthonormal tangent vectors at the end of the run, in exponent order.
    pub final_tangents: Vec<Vec<C64>>,
}

impl LyapunovResult {
    /// Largest `|trailing_half - exponents|`.
    pub fn drift(&self) -> f64 {
        self.exponents
            .iter()
            .zip(&self.trailing_half)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Base flow plus `k` tangent copies, integrated as one system so the
/// tangents see the same RK stages as the base point.
struct TangentFlow<'a> {
    params: &'a ModelParams,
    k: usize,
}

impl Flow for TangentFlow<'_> {
    fn dim(&self) -> usize {
        self.params.sites() * (self.k + 1)
    }

    fn eval(&self, y: &[C64], dy: &mut [C64]) {
        let n = self.params.sites();
        let (base, tangents) = y.split_at(n);
        let (dbase, dtangents) = dy.split_at_mut(n);
        self.params.eval(base, dbase);
        for (v, dv) in tangents.chunks_exact(n).zip(dtangents.chunks_exact_mut(n)) {
            jvp(self.params, base, v, dv);
        }
    }
}

/// Real inner product of complex vectors viewed as `R^{2N}`.
#[inline]
fn rdot(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Modified Gram-Schmidt with one reorthogonalization pass. Returns the
/// norms removed from each vector.
fn orthonormalize(vs: &mut [C64], n: usize) -> Result<Vec<f64>> {
    let k = vs.len() / n;
    let mut norms = vec![0.0; k];
    for i in 0..k {
        let (done, rest) = vs.split_at_mut(i * n);
        let v = &mut rest[..n];
        for _pass in 0..2 {
            for u in done.chunks_exact(n) {
                let c = rdot(u, v);
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= y * c);
            }
        }
        let norm = rdot(v, v).sqrt();
        if !(norm > 1e-300) {
            return Err(Error::TangentUnderflow);
        }
        v.iter_mut().for_each(|x| *x /= norm);
        norms[i] = norm;
    }
    Ok(norms)
}

fn trace(params: &ModelParams, a: &[C64]) -> f64 {
    let gain = 2.0 * (params.pump() - 2.0 * params.corr_loss());
    a.iter().map(|z| gain - 4.0 * params.pair_loss() * z.norm_sqr()).sum()
}

/// Benettin algorithm: `k` tangent vectors evolved with the analytic
/// Jacobian-vector product and re-orthonormalized every `renorm_interval`.
/// `initial` should already lie on the attractor. Tangents start from a
/// fixed deterministic basis.
pub fn lyapunov_spectrum(params: &ModelParams, initial: &LatticeState, cfg: &LyapunovConfig) -> Result<LyapunovResult> {
    initial.check(params)?;
    let n = params.sites();
    if cfg.k == 0 || cfg.k > 2 * n {
        return Err(Error::InvalidParameter(format!("k = {} must lie in 1..={}", cfg.k, 2 * n)));
    }
    if !(cfg.dt > 0.0 && cfg.renorm_interval >= cfg.dt && cfg.t_total > 0.0) {
        return Err(Error::InvalidParameter("need 0 < dt <= renorm_interval and t_total > 0".into()));
    }
    let steps_per = (cfg.renorm_interval / cfg.dt).round() as u64;
    let epochs = (cfg.t_total / cfg.renorm_interval).round() as usize;
    if epochs < 10 {
        return Err(Error::InvalidParameter("need at least 10 renormalization epochs".into()));
    }
    let interval = steps_per as f64 * cfg.dt;
    let flow = TangentFlow { params, k: cfg.k };
    let mut y = vec![C64::default(); n * (cfg.k + 1)];
    y[..n].copy_from_slice(&initial.amplitudes);
    // Deterministic, generic starting basis.
    for i in 0..cfg.k {
        for s in 0..n {
            let phase = 0.7 * (i + 1) as f64 * (s + 1) as f64 + 0.3 * (i * i) as f64;
            y[n * (i + 1) + s] = C64::new(phase.sin(), (1.3 * phase).cos()) / (n as f64).sqrt();
        }
    }
    orthonormalize(&mut y[n..], n)?;
    let bound = divergence_bound(params);
    let mut rk = Rk4::new(flow.dim());
    let mut sums = vec![0.0; cfg.k];
    let mut half_sums = vec![0.0; cfg.k];
    let mut history: Vec<Vec<f64>> = Vec::with_capacity(epochs);
    let mut trace_sum = 0.0;
    let mut step = 0u64;
    for epoch in 0..epochs {
        for _ in 0..steps_per {
            let before = trace(params, &y[..n]);
            rk.step(&flow, &mut y, cfg.dt);
            step += 1;
            trace_sum += 0.5 * (before + trace(params, &y[..n])) * cfg.dt;
            check_bounds(&y[..n], bound, step, initial.time + step as f64 * cfg.dt)?;
        }
        let norms = orthonormalize(&mut y[n..], n)?;
        let elapsed = (epoch + 1) as f64 * interval;
        for i in 0..cfg.k {
            let l = norms[i].ln();
            sums[i] += l;
            if epoch >= epochs / 2 {
                half_sums[i] += l;
            }
        }
        history.push(sums.iter().map(|s| s / elapsed).collect::<Vec<f64>>());
    }
    let total = epochs as f64 * interval;
    let half = (epochs - epochs / 2) as f64 * interval;
    let exponents: Vec<f64> = sums.iter().map(|s| s / total).collect();
    let trailing_half: Vec<f64> = half_sums.iter().map(|s| s / half).collect();
    // Gram-Schmidt already orders the exponents; sort defensively for
    // finite-time estimates that cross.
    let mut order: Vec<usize> = (0..cfg.k).collect();
    order.sort_by(|&a, &b| exponents[b].total_cmp(&exponents[a]));
    let pick = |v: &[f64]| order.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    Ok(LyapunovResult {
        exponents: pick(&exponents),
        trailing_half: pick(&trailing_half),
        history: history.iter().map(|h| pick(h)).collect(),
        renorm_interval: interval,
        t_total: total,
        trace_average: trace_sum / total,
        final_state: LatticeState::new(y[..n].to_vec(), initial.time + total),
        final_tangents: order.iter().map(|&i| y[n * (i + 1)..n * (i + 2)].to_vec()).collect(),
    })
}

/// Angle between the U(1) generator `i alpha` at the final state and the
/// span of the first `count` final tangent vectors.
pub fn goldstone_alignment(res: &LyapunovResult, count: usize) -> f64 {
    let g: Vec<C64> = res.final_state.amplitudes.iter().map(|a| C64::new(0.0, 1.0) * a).collect();
    let gn = rdot(&g, &g).sqrt();
    let proj: f64 = res.final_tangents.iter().take(count).map(|v| rdot(v, &g).powi(2)).sum();
    (proj.sqrt() / gn).min(1.0).acos()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DynamicsKind {
    FixedPoint,
    Periodic,
    Quasiperiodic,
    Chaotic,
    Hyperchaotic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsClass {
    pub kind: DynamicsKind,
    pub zero_count: usize,
    pub positive_count: usize,
    /// False when the exponents drifted by more than `zero_tol/2` over the
    /// second half; `kind` is then only a best guess.
    pub conclusive: bool,
    pub diagnostics: Vec<String>,
}

/// Combines the attractor kind with exponent counts. Fixed points bypass the
/// exponents; otherwise `>= 2` positive is hyperchaotic, 1 chaotic, and with
/// none positive the number of zeros separates periodic (1) from
/// quasiperiodic (`>= 2`).
pub fn classify_dynamics(lces: Option<&LyapunovResult>, attractor: &AttractorRecord, zero_tol: f64) -> Result<DynamicsClass> {
    match attractor.kind {
        AttractorKind::Diverged => {
            return Err(Error::InvalidParameter("cannot classify a diverged trajectory".into()));
        }
        AttractorKind::FixedPoint => {
            return Ok(DynamicsClass {
                kind: DynamicsKind::FixedPoint,
                zero_count: 0,
                positive_count: 0,
                conclusive: true,
                diagnostics: vec![],
            });
        }
        AttractorKind::TimeDependent => {}
    }
    let l = lces.ok_or_else(|| Error::InvalidParameter("time-dependent attractor needs exponents".into()))?;
    let zero_count = l.exponents.iter().filter(|x| x.abs() < zero_tol).count();
    let positive_count = l.exponents.iter().filter(|&&x| x >= zero_tol).count();
    let kind = match (positive_count, zero_count) {
        (p, _) if p >= 2 => DynamicsKind::Hyperchaotic,
        (1, _) => DynamicsKind::Chaotic,
        (_, z) if z >= 2 => DynamicsKind::Quasiperiodic,
        _ => DynamicsKind::Periodic,
    };
    let mut diagnostics = vec![];
    let drift = l.drift();
    if drift >= zero_tol / 2.0 {
        diagnostics.push(format!("exponent drift {drift:.3e} over the trailing half exceeds zero_tol/2"));
    }
    if zero_count == 0 && positive_count == 0 {
        diagnostics.push("no zero exponent on a time-dependent attractor".into());
    }
    if l.exponents.len() == zero_count + positive_count {
        diagnostics.push("every computed exponent is nonnegative; increase k".into());
    }
    match kind {
        DynamicsKind::Chaotic => debug_assert_eq!(positive_count, 1),
        DynamicsKind::Hyperchaotic => debug_assert!(positive_count >= 2),
        DynamicsKind::Quasiperiodic => debug_assert!(zero_count >= 2 && positive_count == 0),
        _ => {}
    }
    Ok(DynamicsClass { kind, zero_count, positive_count, conclusive: diagnostics.is_empty(), diagnostics })
}

/// Gauge-invariant observables `r_j^2`, `cos` and `sin` of bond phase
/// differences on the chosen sites (0-based slots; bonds to the right).
fn observables(state: &[C64], sites: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 * sites.len());
    for &s in sites {
        out.push(state[s].norm_sqr());
        if s + 1 < state.len() {
            let z = state[s + 1] * state[s].conj();
            let m = z.norm();
            if m > 0.0 {
                out.push(z.re / m);
                out.push(z.im / m);
            } else {
                out.extend([0.0, 0.0]);
            }
        }
    }
    out
}

/// Normalized autocorrelation of the mean-free observable series at the
/// given lag (in samples).
fn autocorrelation(x: &[Vec<f64>], lag: usize) -> f64 {
    let m = x.len() - lag;
    let (mut c, mut a, mut b) = (0.0, 0.0, 0.0);
    for t in 0..m {
        for (u, v) in x[t].iter().zip(&x[t + lag]) {
            c += u * v;
            a += u * u;
            b += v * v;
        }
    }
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        c / (a * b).sqrt()
    }
}

/// Period of a time-dependent attractor: the first local maximum above 0.99
/// of the normalized autocorrelation of gauge-invariant observables,
/// refined by a parabola through the peak and its neighbours. Lags up to a
/// tenth of the window are searched. `sites` defaults to every site.
pub fn detect_period(traj: &Trajectory, sites: Option<&[usize]>) -> Result<Option<f64>> {
    let n = traj.params.sites();
    let all: Vec<usize> = (0..n).collect();
    let sites = sites.unwrap_or(&all);
    if let Some(&s) = sites.iter().find(|&&s| s >= n) {
        return Err(Error::OutOfRange { index: s, len: n });
    }
    let len = traj.len();
    if len < 30 {
        return Err(Error::WindowTooShort(format!("{len} samples cannot hold 10 periods")));
    }
    let dts: Vec<f64> = traj.times.windows(2).map(|w| w[1] - w[0]).collect();
    let h = dts[0];
    if dts.iter().any(|d| (d - h).abs() > 1e-9 * h.max(1.0)) {
        return Err(Error::InvalidParameter("period detection needs uniform sampling".into()));
    }
    let mut x: Vec<Vec<f64>> = traj.states.iter().map(|s| observables(s, sites)).collect();
    let dim = x[0].len();
    let mean: Vec<f64> = (0..dim).map(|i| x.iter().map(|v| v[i]).sum::<f64>() / len as f64).collect();
    let mut var = 0.0;
    for v in x.iter_mut() {
        for (u, m) in v.iter_mut().zip(&mean) {
            *u -= m;
            var += *u * *u;
        }
    }
    let scale: f64 = mean.iter().map(|m| m * m).sum::<f64>().max(1.0);
    if var / len as f64 <= 1e-20 * scale {
        return Ok(None);
    }
    let max_lag = len / 10;
    let c: Vec<f64> = (0..=max_lag + 1).map(|l| autocorrelation(&x, l)).collect();
    let mut dipped = false;
    for l in 1..=max_lag {
        if c[l] < 0.99 {
            dipped = true;
        }
        if dipped && c[l] > 0.99 && c[l] >= c[l - 1] && c[l] >= c[l + 1] {
            let (a, b, d) = (c[l - 1], c[l], c[l + 1]);
            let denom = a - 2.0 * b + d;
            let shift = if denom != 0.0 { 0.5 * (a - d) / denom } else { 0.0 };
            return Ok(Some((l as f64 + shift.clamp(-0.5, 0.5)) * h));
        }
    }
    Ok(None)
}

/// Polishes a period estimate by minimizing the mean squared mismatch of
/// the gauge-invariant observables between `t` and `t + T` (golden-section
/// search on `[T - width, T + width]`, with Hermite interpolation between
/// snapshots).
pub fn refine_period(traj: &Trajectory, t_guess: f64, width: f64) -> Result<f64> {
    let n = traj.params.sites();
    let sites: Vec<usize> = (0..n).collect();
    let t0 = traj.times[0];
    let t_end = *traj.times.last().unwrap();
    if t0 + t_guess + width >= t_end {
        return Err(Error::WindowTooShort("horizon shorter than the period".into()));
    }
    let samples: Vec<f64> = traj.times.iter().copied().filter(|t| t + t_guess + width <= t_end).collect();
    let cost = |p: f64| -> f64 {
        samples
            .iter()
            .map(|&t| {
                let a = observables(&traj.interpolate(t).unwrap(), &sites);
                let b = observables(&traj.interpolate(t + p).unwrap(), &sites);
                a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>()
            })
            .sum()
    };
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (t_guess - width, t_guess + width);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    while hi - lo > 1e-9 * t_guess.max(1.0) {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = cost(x2);
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `min_phi max_t ||alpha(t) - e^{i phi} PH[alpha(t + T/2)]||_inf / max|alpha|`,
/// with `phi` from the least-squares overlap over all sampled pairs.
pub fn ph_restoration_residual(traj: &Trajectory, period: f64) -> Result<f64> {
    let half = 0.5 * period;
    let t_end = *traj.times.last().unwrap();
    let pairs: Vec<(Vec<C64>, Vec<C64>)> = traj
        .times
        .iter()
        .zip(&traj.states)
        .filter(|(t, _)| **t + half <= t_end)
        .map(|(t, s)| (s.clone(), ph_map(&traj.interpolate(t + half).unwrap())))
        .collect();
    if pairs.len() < 2 {
        return Err(Error::WindowTooShort("horizon shorter than half a period".into()));
    }
    let overlap: C64 = pairs
        .iter()
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<C64>())
        .sum();
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { C64::new(1.0, 0.0) };
    let amp = traj
        .states
        .iter()
        .flat_map(|s| s.iter().map(|z| z.norm()))
        .fold(0.0, f64::max);
    if amp == 0.0 {
        return Ok(0.0);
    }
    let worst = pairs
        .iter()
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - phase * y).norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    Ok(worst / amp)
}

/// Pairs `(x(t), x(t + delay))` for every valid sample.
pub fn delay_embed(series: &[f64], delay: f64, dt_sample: f64) -> Result<Vec<(f64, f64)>> {
    if !(dt_sample > 0.0 && delay >= 0.0) {
        return Err(Error::InvalidParameter("need dt_sample > 0 and delay >= 0".into()));
    }
    let ratio = delay / dt_sample;
    let lag = ratio.round();
    if (ratio - lag).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidParameter(format!("delay {delay} is not a multiple of {dt_sample}")));
    }
    let lag = lag as usize;
    if lag >= series.len() {
        return Err(Error::WindowTooShort(format!("delay of {lag} samples exceeds the series")));
    }
    Ok(series.iter().zip(&series[lag..]).map(|(a, b)| (*a, *b)).collect())
}

/// Symmetric Hausdorff distance between two planar point sets.
pub fn hausdorff_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let directed = |p: &[(f64, f64)], q: &[(f64, f64)]| {
        p.iter()
            .map(|x| q.iter().map(|y| (x.0 - y.0).hypot(x.1 - y.1)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    directed(a, b).max(directed(b, a))
}

/// Unwrapped phase of one site along a trajectory.
pub fn site_phase_series(traj: &Trajectory, site: usize) -> Result<Vec<f64>> {
    let n = traj.params.sites();
    if site >= n {
        return Err(Error::OutOfRange { index: site, len: n });
    }
    let mut out = Vec::with_capacity(traj.len());
    let mut prev: Option<C64> = None;
    let mut acc = 0.0;
    for s in &traj.states {
        let z = s[site];
        acc = match prev {
            Some(p) => acc + (z * p.conj()).arg(),
            None => z.arg(),
        };
        prev = Some(z);
        out.push(acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, random_initial, IntegrationConfig};
    use crate::model::cis;
    use crate::obc::{deflated_spectrum, jacobian, static_condensate, StaticOptions};
    use std::f64::consts::PI;

    #[test]
    fn orthonormalize_produces_orthonormal_set() {
        let n = 5;
        let mut v: Vec<C64> = (0..15).map(|i| C64::new((i as f64).sin(), (2.0 * i as f64).cos())).collect();
        orthonormalize(&mut v, n).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let d = rdot(&v[i * n..(i + 1) * n], &v[j * n..(j + 1) * n]);
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        let mut zero = vec![C64::default(); 5];
        assert_eq!(orthonormalize(&mut zero, 5), Err(Error::TangentUnderflow));
    }

    #[test]
    fn exponent_sum_matches_trace() {
        // Full spectrum on a small chain with a time-dependent attractor.
        let p = ModelParams::open_chain(4, 1.5, 0.2).unwrap();
        let init = random_initial(&p, 3, 0.5).unwrap();
        let warm = integrate(&p, &init, &IntegrationConfig { t_transient: 200.0, t_measure: 0.0, ..Default::default() })
            .unwrap()
            .terminal_state;
        let cfg = LyapunovConfig { k: 8, t_total: 2000.0, ..Default::default() };
        let r = lyapunov_spectrum(&p, &warm, &cfg).unwrap();
        let sum: f64 = r.exponents.iter().sum();
        assert!(((sum - r.trace_average) / r.trace_average).abs() < 1e-2, "{sum} vs {}", r.trace_average);
        assert!(r.exponents.windows(2).all(|w| w[0] >= w[1]));
        assert!(r.history.len() >= 10);
    }

    #[test]
    fn fixed_point_exponents_match_jacobian() {
        let p = ModelParams::open_chain(12, 1.0, 2.0).unwrap();
        let s = static_condensate(&p, None, &StaticOptions::default()).unwrap();
        let mut growth: Vec<f64> = crate::linalg::eigenvalues_real(&jacobian(&p, &s).unwrap().matrix)
            .unwrap()
            .iter()
            .map(|z| z.re)
            .collect();
        growth.sort_by(|a, b| b.total_cmp(a));
        let cfg = LyapunovConfig { k: 3, t_total: 400.0, ..Default::default() };
        let r = lyapunov_spectrum(&p, &s, &cfg).unwrap();
        // The full average carries the transient growth of the non-normal
        // linearization; the trailing half does not.
        let l = &r.trailing_half;
        assert!(l[0].abs() < 1e-3);
        for (a, b) in l.iter().zip(&growth) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
        let d = deflated_spectrum(&jacobian(&p, &s).unwrap()).unwrap();
        assert!((l[1] - d.leading_growth()).abs() < 1e-3);
        assert!(goldstone_alignment(&r, 1) < 1e-3);
    }

    #[test]
    fn classification_rules() {
        let rec = |kind| AttractorRecord {
            kind,
            window: synthetic(vec![vec![C64::default(); 2]; 2], 1.0),
            residual: 0.0,
            elapsed: 1.0,
            extended: false,
            warnings: vec![],
        };
        let lr = |e: Vec<f64>| LyapunovResult {
            trailing_half: e.clone(),
            exponents: e,
            history: vec![],
            renorm_interval: 1.0,
            t_total: 1.0,
            trace_average: 0.0,
            final_state: LatticeState::vacuum(2),
            final_tangents: vec![],
        };
        let td = rec(AttractorKind::TimeDependent);
        let c = |e: Vec<f64>| classify_dynamics(Some(&lr(e)), &td, ZERO_TOL).unwrap();
        assert_eq!(c(vec![1e-4, -0.1]).kind, DynamicsKind::Periodic);
        assert_eq!(c(vec![1e-4, -2e-4, -0.1]).kind, DynamicsKind::Quasiperiodic);
        assert_eq!(c(vec![0.05, 1e-4, -0.1]).kind, DynamicsKind::Chaotic);
        let h = c(vec![0.05, 0.02, 1e-4, -0.1]);
        assert_eq!((h.kind, h.positive_count, h.zero_count), (DynamicsKind::Hyperchaotic, 2, 1));
        let fp = classify_dynamics(None, &rec(AttractorKind::FixedPoint), ZERO_TOL).unwrap();
        assert_eq!(fp.kind, DynamicsKind::FixedPoint);
        let mut drifting = lr(vec![1e-4, -0.1]);
        drifting.trailing_half = vec![1e-3, -0.1];
        assert!(!classify_dynamics(Some(&drifting), &td, ZERO_TOL).unwrap().conclusive);
    }

    fn synthetic(states: Vec<Vec<C64>>, h: f64) -> Trajectory {
        let p = ModelParams::open_chain(states[0].len(), 1.0, 0.2).unwrap();
        let times: Vec<f64> = (0..states.len()).map(|k| k as f64 * h).collect();
        let last = LatticeState::new(states.last().unwrap().clone(), *times.last().unwrap());
        Trajectory { params: p, config: IntegrationConfig::default(), times, states, terminal_state: last }
    }

    #[test]
    fn plane_wave_has_no_period() {
        let states = (0..500).map(|k| (1..=6).map(|j| 1.3 * cis(0.7 * j as f64 - 0.9 * 0.1 * k as f64)).collect()).collect();
        assert_eq!(detect_period(&synthetic(states, 0.1), None).unwrap(), None);
    }

    #[test]
    fn breathing_wave_period() {
        let period = 7.3;
        let w = 2.0 * PI / period;
        let states = (0..2000)
            .map(|k| {
                let t = 0.1 * k as f64;
                (1..=5).map(|j| (1.0 + 0.3 * (w * t + j as f64).sin()) * cis(0.4 * j as f64 - 1.1 * t)).collect()
            })
            .collect();
        let tr = synthetic(states, 0.1);
        let t = detect_period(&tr, None).unwrap().unwrap();
        assert!((t - period).abs() < 1e-2, "{t}");
        let polished = refine_period(&tr, t, 0.05).unwrap();
        assert!((polished - period).abs() < 1e-6, "{polished}");
    }

    #[test]
    fn static_condensate_is_ph_restored() {
        let p = ModelParams::open_chain(20, 1.5, 2.0).unwrap();
        let s = static_condensate(&p, None, &StaticOptions::default()).unwrap();
        let cfg = IntegrationConfig { t_transient: 0.0, t_measure: 20.0, ..Default::default() };
        let tr = integrate(&p, &s, &cfg).unwrap();
        assert!(ph_restoration_residual(&tr, 3.7).unwrap() < 1e-6);
    }

    #[test]
    fn delay_embedding_geometry() {
        let c = delay_embed(&[2.0; 50], 0.5, 0.1).unwrap();
        assert!(c.iter().all(|&(a, b)| a == 2.0 && b == 2.0));
        let period = 4.0;
        let h = 0.01;
        let s: Vec<f64> = (0..2000).map(|k| (2.0 * PI * k as f64 * h / period).sin()).collect();
        let pts = delay_embed(&s, period / 4.0, h).unwrap();
        assert!(pts.iter().all(|(a, b)| (a.hypot(*b) - 1.0).abs() < 1e-9));
        assert!(delay_embed(&s, 0.015, h).is_err());
        assert!(delay_embed(&s, 100.0, h).is_err());
        assert!(hausdorff_distance(&pts, &pts) == 0.0);
    }
}
