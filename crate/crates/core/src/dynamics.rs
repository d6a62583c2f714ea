//! Time integration of the equation of motion and attractor detection.

use std::f64::consts::TAU;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{max_abs, LatticeState, ModelParams, C64};

/// An autonomous complex ODE `dy/dt = f(y)`.
pub trait Flow {
    fn dim(&self) -> usize;
    fn eval(&self, y: &[C64], dy: &mut [C64]);
}

impl Flow for ModelParams {
    fn dim(&self) -> usize {
        self.sites()
    }

    #[inline]
    fn eval(&self, y: &[C64], dy: &mut [C64]) {
        self.rhs_unchecked(y, dy);
    }
}

/// Classic fourth-order Runge-Kutta with reusable stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        let z = vec![C64::default(); dim];
        Rk4 { k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), tmp: z }
    }

    pub fn step<F: Flow + ?Sized>(&mut self, f: &F, y: &mut [C64], dt: f64) {
        let h2 = 0.5 * dt;
        f.eval(y, &mut self.k1);
        for ((t, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k1) {
            *t = y + k * h2;
        }
        f.eval(&self.tmp, &mut self.k2);
        for ((t, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k2) {
            *t = y + k * h2;
        }
        f.eval(&self.tmp, &mut self.k3);
        for ((t, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k3) {
            *t = y + k * dt;
        }
        f.eval(&self.tmp, &mut self.k4);
        let h6 = dt / 6.0;
        for i in 0..y.len() {
            y[i] += (self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i]) * h6;
        }
    }
}

// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Embedded Dormand-Prince 5(4) stepper with standard step-size control.
#[derive(Debug, Clone)]
pub struct Dopri45 {
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Dopri45 {
    pub fn new(dim: usize, abs_tol: f64, rel_tol: f64) -> Self {
        let z = vec![C64::default(); dim];
        Dopri45 {
            k: std::array::from_fn(|_| z.clone()),
            tmp: z,
            abs_tol,
            rel_tol,
        }
    }

    /// Attempts one step of size `dt`. On acceptance `y` is advanced and the
    /// return value holds the suggested next step; on rejection `y` is left
    /// untouched.
    pub fn try_step<F: Flow + ?Sized>(&mut self, f: &F, y: &mut [C64], dt: f64) -> (bool, f64) {
        let n = y.len();
        f.eval(y, &mut self.k[0]);
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (r, a) in DP_A[s][..s].iter().enumerate() {
                    if *a != 0.0 {
                        acc += self.k[r][i] * (a * dt);
                    }
                }
                self.tmp[i] = acc;
            }
            f.eval(&self.tmp, &mut self.k[s]);
        }
        debug_assert_eq!(DP_C[6], 1.0);
        // tmp now holds the 5th-order solution (stage 7 input, FSAL).
        let mut err_sq = 0.0;
        for i in 0..n {
            let mut e = C64::default();
            for s in 0..7 {
                e += self.k[s][i] * ((DP_B5[s] - DP_B4[s]) * dt);
            }
            let scale_re = self.abs_tol + self.rel_tol * y[i].re.abs().max(self.tmp[i].re.abs());
            let scale_im = self.abs_tol + self.rel_tol * y[i].im.abs().max(self.tmp[i].im.abs());
            err_sq += (e.re / scale_re).powi(2) + (e.im / scale_im).powi(2);
        }
        let err = (err_sq / (2 * n).max(1) as f64).sqrt();
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if err <= 1.0 {
            y.copy_from_slice(&self.tmp);
            (true, dt * factor)
        } else {
            (false, dt * factor.min(1.0))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "rk4")]
    Rk4,
    #[serde(rename = "rk45")]
    Rk45Adaptive,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rk4" => Ok(Scheme::Rk4),
            "rk45" | "rk45adaptive" | "dopri5" => Ok(Scheme::Rk45Adaptive),
            other => Err(Error::InvalidParameter(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Step size, horizons and sampling for a run. Times are in units of `1/J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrationConfig {
    pub dt: f64,
    pub t_transient: f64,
    pub t_measure: f64,
    pub sample_stride: usize,
    pub scheme: Scheme,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig {
            dt: 5e-3,
            t_transient: 2e3,
            t_measure: 1e3,
            sample_stride: 20,
            scheme: Scheme::Rk4,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            seed: 0,
        }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be > 0");
        }
        if !(self.t_transient >= 0.0 && self.t_measure >= 0.0) {
            return bad("horizons must be >= 0");
        }
        if self.sample_stride == 0 {
            return bad("sample_stride must be >= 1");
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return bad("tolerances must be > 0");
        }
        Ok(())
    }

    /// Time between recorded snapshots for the fixed-step scheme.
    pub fn sample_interval(&self) -> f64 {
        self.dt * self.sample_stride as f64
    }
}

/// Time-sampled snapshots of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: ModelParams,
    pub config: IntegrationConfig,
    pub times: Vec<f64>,
    pub states: Vec<Vec<C64>>,
    pub terminal_state: LatticeState,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn snapshot(&self, i: usize) -> LatticeState {
        LatticeState::new(self.states[i].clone(), self.times[i])
    }

    /// Amplitude at time `t` by cubic Hermite interpolation between
    /// snapshots, with slopes from the equation of motion.
    pub fn interpolate(&self, t: f64) -> Option<Vec<C64>> {
        let n = self.times.len();
        if n == 0 || t < self.times[0] || t > self.times[n - 1] {
            return None;
        }
        let i = match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => return Some(self.states[i].clone()),
            Err(i) => i - 1,
        };
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (y0, y1) = (&self.states[i], &self.states[i + 1]);
        let dim = y0.len();
        let mut d0 = vec![C64::default(); dim];
        let mut d1 = vec![C64::default(); dim];
        self.params.eval(y0, &mut d0);
        self.params.eval(y1, &mut d1);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Some(
            (0..dim)
                .map(|k| y0[k] * h00 + d0[k] * (h10 * h) + y1[k] * h01 + d1[k] * (h11 * h))
                .collect(),
        )
    }
}

pub(crate) fn check_bounds(y: &[C64], bound: f64, step: u64, time: f64) -> Result<()> {
    let m = max_abs(y);
    if m.is_nan() {
        return Err(Error::NonFinite { step, time });
    }
    if m > bound {
        return Err(Error::Divergence { step, time, amplitude: m });
    }
    Ok(())
}

/// Divergence threshold `1e6 sqrt(kappa/Gamma + 1)`; infinite when `Gamma = 0`.
pub fn divergence_bound(params: &ModelParams) -> f64 {
    1e6 * params.amplitude_scale()
}

/// Advances a state in place by `duration` with fixed-step RK4, calling
/// `on_step(step_index, time, y)` after every step. Returns the end time.
pub fn advance_rk4(
    params: &ModelParams,
    y: &mut [C64],
    t0: f64,
    duration: f64,
    dt: f64,
    mut on_step: impl FnMut(u64, f64, &[C64]),
) -> Result<f64> {
    let steps = (duration / dt).round() as u64;
    let bound = divergence_bound(params);
    let mut rk = Rk4::new(y.len());
    let mut t = t0;
    for k in 1..=steps {
        rk.step(params, y, dt);
        t = t0 + k as f64 * dt;
        check_bounds(y, bound, k, t)?;
        on_step(k, t, y);
    }
    Ok(t)
}

/// Integrates `initial` for `t_transient + t_measure`, recording snapshots
/// every `sample_stride` accepted steps during the measurement window.
///
/// For RK4 the horizons are rounded to whole steps. The first snapshot is the
/// state at the start of the measurement window.
pub fn integrate(params: &ModelParams, initial: &LatticeState, config: &IntegrationConfig) -> Result<Trajectory> {
    config.validate()?;
    initial.check(params)?;
    let mut y = initial.amplitudes.clone();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let t_start = initial.time;
    let t_end = match config.scheme {
        Scheme::Rk4 => {
            let t1 = advance_rk4(params, &mut y, t_start, config.t_transient, config.dt, |_, _, _| {})?;
            times.push(t1);
            states.push(y.clone());
            let stride = config.sample_stride as u64;
            let steps_before = (config.t_transient / config.dt).round() as u64;
            advance_rk4(params, &mut y, t1, config.t_measure, config.dt, |k, t, y| {
                if k % stride == 0 {
                    times.push(t);
                    states.push(y.to_vec());
                }
            })
            .map_err(|e| match e {
                Error::Divergence { step, time, amplitude } => {
                    Error::Divergence { step: step + steps_before, time, amplitude }
                }
                Error::NonFinite { step, time } => Error::NonFinite { step: step + steps_before, time },
                other => other,
            })?
        }
        Scheme::Rk45Adaptive => integrate_adaptive(params, &mut y, t_start, config, &mut times, &mut states)?,
    };
    Ok(Trajectory {
        params: *params,
        config: *config,
        times,
        states,
        terminal_state: LatticeState::new(y, t_end),
    })
}

fn integrate_adaptive(
    params: &ModelParams,
    y: &mut [C64],
    t_start: f64,
    config: &IntegrationConfig,
    times: &mut Vec<f64>,
    states: &mut Vec<Vec<C64>>,
) -> Result<f64> {
    let bound = divergence_bound(params);
    let mut dp = Dopri45::new(y.len(), config.abs_tol, config.rel_tol);
    let t_meas = t_start + config.t_transient;
    let t_end = t_meas + config.t_measure;
    let mut t = t_start;
    let mut h = config.dt;
    let mut accepted: u64 = 0;
    let mut since_sample = 0usize;
    let mut measuring = config.t_transient == 0.0;
    if measuring {
        times.push(t);
        states.push(y.to_vec());
    }
    while t < t_end {
        let target = if measuring { t_end } else { t_meas };
        let step = h.min(target - t);
        let (ok, next) = dp.try_step(params, y, step);
        if !ok {
            if next < 1e-14 * t.abs().max(1.0) {
                return Err(Error::NotConverged(format!("step size underflow at t = {t}")));
            }
            h = next;
            continue;
        }
        accepted += 1;
        t = if step == target - t { target } else { t + step };
        h = next;
        check_bounds(y, bound, accepted, t)?;
        if !measuring && t >= t_meas {
            measuring = true;
            times.push(t);
            states.push(y.to_vec());
            continue;
        }
        if measuring {
            since_sample += 1;
            if since_sample == config.sample_stride || t >= t_end {
                since_sample = 0;
                times.push(t);
                states.push(y.to_vec());
            }
        }
    }
    Ok(t)
}

/// Deterministic complex Gaussian initial state with `E|alpha_j|^2 = scale^2`.
///
/// Layout: a ChaCha20 stream seeded via `seed_from_u64(seed)`; site `s`
/// consumes the words `2s` and `2s+1` as `u1, u2`, mapped to `(0, 1)` by
/// `((w >> 11) + 0.5) * 2^-53`, then Box-Muller:
/// `alpha_s = scale * sqrt(-ln u1) * e^{2 pi i u2}`.
pub fn random_initial(params: &ModelParams, seed: u64, scale: f64) -> Result<LatticeState> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale must be >= 0, got {scale}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let unit = |w: u64| ((w >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
    let amps = (0..params.sites())
        .map(|_| {
            let u1 = unit(rng.next_u64());
            let u2 = unit(rng.next_u64());
            let r = scale * (-u1.ln()).sqrt();
            C64::from_polar(r, TAU * u2)
        })
        .collect();
    Ok(LatticeState::new(amps, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttractorKind {
    FixedPoint,
    TimeDependent,
    Diverged,
}

/// Outcome of [`find_attractor`].
#[derive(Debug, Clone)]
pub struct AttractorRecord {
    pub kind: AttractorKind,
    /// The last measurement window.
    pub window: Trajectory,
    /// `sup_t ||d alpha/dt||_inf` over the window.
    pub residual: f64,
    /// Total integrated time including any extensions.
    pub elapsed: f64,
    /// True when the horizon was extended because of slow relaxation.
    pub extended: bool,
    pub warnings: Vec<String>,
}

impl AttractorRecord {
    pub fn terminal(&self) -> &LatticeState {
        &self.window.terminal_state
    }

    /// Fixed point with amplitudes indistinguishable from zero.
    pub fn is_vacuum(&self) -> bool {
        self.kind == AttractorKind::FixedPoint
            && self.terminal().max_abs() < 1e-6 * self.window.params.amplitude_scale().min(1e12)
    }
}

/// Fixed-point tolerance `1e-9 sqrt(kappa/Gamma + 1)`.
pub fn fixed_point_tol(params: &ModelParams) -> f64 {
    1e-9 * params.amplitude_scale().min(1e12)
}

fn window_residuals(params: &ModelParams, traj: &Trajectory) -> Vec<f64> {
    let mut d = vec![C64::default(); params.sites()];
    traj.states
        .iter()
        .map(|s| {
            params.eval(s, &mut d);
            max_abs(&d)
        })
        .collect()
}

/// Slow relaxation between the two halves of a window: the residual sup
/// drops by more than 5%, or the mean total density drifts by more than 1%
/// (a front creeping toward an edge keeps the residual nearly flat).
fn still_relaxing(res: &[f64], window: &Trajectory) -> bool {
    let half = res.len() / 2;
    let first = res[..half].iter().copied().fold(0.0, f64::max);
    let second = res[half..].iter().copied().fold(0.0, f64::max);
    let density: Vec<f64> = window.states.iter().map(|s| s.iter().map(|z| z.norm_sqr()).sum()).collect();
    let d1 = density[..half].iter().sum::<f64>() / half as f64;
    let d2 = density[half..].iter().sum::<f64>() / (density.len() - half) as f64;
    second < 0.95 * first || (d1 - d2).abs() > 1e-2 * d1.max(d2)
}

/// Integrates to the attractor and classifies it.
///
/// `FixedPoint` iff the residual over the whole measurement window stays below
/// [`fixed_point_tol`]. While the window still relaxes (see
/// `still_relaxing`) the run is continued window by window, up to ten times
/// the nominal horizon, and flagged.
pub fn find_attractor(params: &ModelParams, initial: &LatticeState, config: &IntegrationConfig) -> Result<AttractorRecord> {
    let tol = fixed_point_tol(params);
    let budget = 10.0 * (config.t_transient + config.t_measure);
    let mut window = integrate(params, initial, config)?;
    let mut elapsed = config.t_transient + config.t_measure;
    let mut extended = false;
    let mut warnings = Vec::new();
    loop {
        let res = window_residuals(params, &window);
        let sup = res.iter().copied().fold(0.0, f64::max);
        if sup < tol {
            return Ok(AttractorRecord {
                kind: AttractorKind::FixedPoint,
                window,
                residual: sup,
                elapsed,
                extended,
                warnings,
            });
        }
        let relaxing = res.len() >= 4 && still_relaxing(&res, &window);
        if !relaxing || elapsed + config.t_measure > budget {
            if relaxing {
                warnings.push(format!(
                    "still relaxing after t = {elapsed} (residual {sup:e}); classified as time dependent"
                ));
            }
            return Ok(AttractorRecord {
                kind: AttractorKind::TimeDependent,
                window,
                residual: sup,
                elapsed,
                extended,
                warnings,
            });
        }
        if !extended {
            warnings.push("slow relaxation: horizon extended".to_string());
        }
        extended = true;
        let cfg = IntegrationConfig { t_transient: 0.0, ..*config };
        window = integrate(params, &window.terminal_state, &cfg)?;
        elapsed += config.t_measure;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{traveling_wave_state, ModelParams};

    #[test]
    fn random_initial_is_deterministic() {
        let p = ModelParams::open_chain(16, 1.0, 0.2).unwrap();
        let a = random_initial(&p, 42, 0.1).unwrap();
        let b = random_initial(&p, 42, 0.1).unwrap();
        let c = random_initial(&p, 43, 0.1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let z = random_initial(&p, 42, 0.0).unwrap();
        assert!(z.amplitudes.iter().all(|x| x.norm() == 0.0));
        assert!(random_initial(&p, 1, -1.0).is_err());
    }

    #[test]
    fn random_initial_variance() {
        let p = ModelParams::open_chain(10_000, 1.0, 0.2).unwrap();
        let s = random_initial(&p, 7, 0.3).unwrap();
        let mean = s.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() / 10_000.0;
        assert!((mean / 0.09 - 1.0).abs() < 0.05, "mean |a|^2 = {mean}");
    }

    #[test]
    fn vacuum_stays_vacuum() {
        let p = ModelParams::open_chain(10, 2.0, 0.3).unwrap();
        let cfg = IntegrationConfig { t_transient: 5.0, t_measure: 5.0, ..Default::default() };
        let tr = integrate(&p, &LatticeState::vacuum(10), &cfg).unwrap();
        assert!(tr.states.iter().flatten().all(|a| a.re == 0.0 && a.im == 0.0));
    }

    #[test]
    fn traveling_wave_keeps_modulus() {
        let p = ModelParams::builder().sites(20).pump(1.0).corr_loss(0.5).periodic().build().unwrap();
        let q = std::f64::consts::FRAC_PI_2 + std::f64::consts::TAU / 20.0;
        let w = traveling_wave_state(&p, q).unwrap();
        let r = w.amplitudes[0].norm();
        let cfg = IntegrationConfig { t_transient: 0.0, t_measure: 100.0, ..Default::default() };
        let tr = integrate(&p, &w, &cfg).unwrap();
        for s in &tr.states {
            for a in s {
                assert!((a.norm() - r).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn times_strictly_increasing() {
        let p = ModelParams::open_chain(6, 1.0, 0.2).unwrap();
        let init = random_initial(&p, 3, 0.5).unwrap();
        for scheme in [Scheme::Rk4, Scheme::Rk45Adaptive] {
            let cfg = IntegrationConfig {
                t_transient: 1.0,
                t_measure: 3.0,
                scheme,
                abs_tol: 1e-9,
                rel_tol: 1e-9,
                ..Default::default()
            };
            let tr = integrate(&p, &init, &cfg).unwrap();
            assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
            assert!((tr.terminal_state.time - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn adaptive_matches_rk4() {
        let p = ModelParams::open_chain(8, 1.5, 0.3).unwrap();
        let init = random_initial(&p, 5, 0.5).unwrap();
        let fixed = IntegrationConfig { t_transient: 0.0, t_measure: 5.0, dt: 1e-3, ..Default::default() };
        let adaptive = IntegrationConfig { scheme: Scheme::Rk45Adaptive, abs_tol: 1e-11, rel_tol: 1e-11, ..fixed };
        let a = integrate(&p, &init, &fixed).unwrap().terminal_state;
        let b = integrate(&p, &init, &adaptive).unwrap().terminal_state;
        let err = a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn divergence_is_reported() {
        // Gamma = 0 with strong gain grows without bound but the bound is
        // infinite; a tiny Gamma with huge initial amplitude blows up instead.
        let p = ModelParams::builder().sites(4).pump(1.0).pair_loss(1.0).build().unwrap();
        let init = LatticeState::new(vec![C64::new(1e200, 0.0); 4], 0.0);
        let cfg = IntegrationConfig { t_transient: 0.0, t_measure: 1.0, ..Default::default() };
        match integrate(&p, &init, &cfg) {
            Err(Error::Divergence { .. }) | Err(Error::NonFinite { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn hermite_interpolation_is_accurate() {
        let p = ModelParams::open_chain(6, 1.2, 0.3).unwrap();
        let init = random_initial(&p, 9, 0.8).unwrap();
        let cfg = IntegrationConfig { t_transient: 0.0, t_measure: 2.0, dt: 1e-3, sample_stride: 50, ..Default::default() };
        let tr = integrate(&p, &init, &cfg).unwrap();
        let fine = IntegrationConfig { sample_stride: 1, ..cfg };
        let tf = integrate(&p, &init, &fine).unwrap();
        let idx = 1234;
        let exact = &tf.states[idx];
        let approx = tr.interpolate(tf.times[idx]).unwrap();
        let err = exact.iter().zip(&approx).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }
}
