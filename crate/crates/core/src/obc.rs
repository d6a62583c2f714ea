//! Open-chain analysis: Jacobians, the static condensate, its kink, order
//! parameters of time-dependent states and the critical exceptional point.
//!
//! Real 2N-dimensional vectors are interleaved as `(Re a_1, Im a_1, Re a_2, ...)`,
//! the same memory layout as a slice of complex amplitudes.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::Range;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::advance_rk4;
use crate::error::{Error, Result};
use crate::linalg::{eigen_real, solve_real};
use crate::model::{cis, max_abs, Boundary, LatticeState, ModelParams, C64};
use crate::spectral::{chain_gauge, vacuum_threshold};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Real Jacobian of the equation of motion at a base state.
#[derive(Debug, Clone)]
pub struct JacobianMatrix {
    pub matrix: Mat<f64>,
    pub base: LatticeState,
    pub params: ModelParams,
}

fn put_linear(m: &mut Mat<f64>, row: usize, col: usize, c: C64) {
    m[(2 * row, 2 * col)] += c.re;
    m[(2 * row, 2 * col + 1)] -= c.im;
    m[(2 * row + 1, 2 * col)] += c.im;
    m[(2 * row + 1, 2 * col + 1)] += c.re;
}

fn put_antilinear(m: &mut Mat<f64>, row: usize, d: C64) {
    let k = 2 * row;
    m[(k, k)] += d.re;
    m[(k, k + 1)] += d.im;
    m[(k + 1, k)] += d.im;
    m[(k + 1, k + 1)] -= d.re;
}

/// Jacobian in a frame rotating at `omega` (`alpha = e^{-i omega t} beta`);
/// `omega = 0` is the lab frame.
pub fn jacobian_rotating(params: &ModelParams, state: &LatticeState, omega: f64) -> Result<JacobianMatrix> {
    state.check(params)?;
    let n = params.sites();
    let mut m = Mat::<f64>::zeros(2 * n, 2 * n);
    let gain = params.pump() - 2.0 * params.corr_loss();
    let g = params.pair_loss();
    let right = -I * params.hop_plus();
    let left = -I * params.hop_minus();
    let periodic = params.boundary() == Boundary::Periodic;
    for s in 0..n {
        let a = state.amplitudes[s];
        put_linear(&mut m, s, s, C64::new(gain - 2.0 * g * a.norm_sqr(), omega));
        put_antilinear(&mut m, s, -g * a * a);
        if s + 1 < n {
            put_linear(&mut m, s, s + 1, right);
        } else if periodic {
            put_linear(&mut m, s, 0, right);
        }
        if s > 0 {
            put_linear(&mut m, s, s - 1, left);
        } else if periodic {
            put_linear(&mut m, s, n - 1, left);
        }
    }
    Ok(JacobianMatrix { matrix: m, base: state.clone(), params: *params })
}

/// Analytic Jacobian `d(d alpha/dt)/d(Re alpha, Im alpha)`.
pub fn jacobian(params: &ModelParams, state: &LatticeState) -> Result<JacobianMatrix> {
    jacobian_rotating(params, state, 0.0)
}

/// Jacobian-vector product in complex form:
/// `out = L v - Gamma (2 |a|^2 v + a^2 conj(v))`, with `L` the linear part.
#[inline]
pub fn jvp(params: &ModelParams, base: &[C64], v: &[C64], out: &mut [C64]) {
    let n = base.len();
    let gain = params.pump() - 2.0 * params.corr_loss();
    let g = params.pair_loss();
    let right = -I * params.hop_plus();
    let left = -I * params.hop_minus();
    let periodic = params.boundary() == Boundary::Periodic;
    for s in 0..n {
        let a = base[s];
        let x = v[s];
        let vl = if s > 0 {
            v[s - 1]
        } else if periodic {
            v[n - 1]
        } else {
            C64::default()
        };
        let vr = if s + 1 < n {
            v[s + 1]
        } else if periodic {
            v[0]
        } else {
            C64::default()
        };
        out[s] = x * (gain - 2.0 * g * a.norm_sqr()) - g * a * a * x.conj() + right * vr + left * vl;
    }
}

/// The U(1) generator `i alpha` as a real interleaved vector.
pub fn goldstone_direction(state: &LatticeState) -> Vec<f64> {
    state.amplitudes.iter().flat_map(|a| [-a.im, a.re]).collect()
}

/// Spectrum of a Jacobian with the exact Goldstone mode `J g = 0` removed.
#[derive(Debug, Clone)]
pub struct DeflatedSpectrum {
    /// The remaining `2N - 1` eigenvalues, sorted by decreasing real part.
    pub values: Vec<C64>,
    /// Matching eigenvectors lifted back to the full space (unit 2-norm).
    pub vectors: Vec<Vec<C64>>,
    /// Unit Goldstone vector.
    pub goldstone: Vec<f64>,
}

impl DeflatedSpectrum {
    /// Largest real part among non-Goldstone modes.
    pub fn leading_growth(&self) -> f64 {
        self.values.first().map(|z| z.re).unwrap_or(f64::NEG_INFINITY)
    }

    /// Index of the leading mode, taking the member of a complex-conjugate
    /// pair with nonnegative imaginary part.
    pub fn leading_index(&self) -> Option<usize> {
        let first = self.values.first()?;
        if first.im >= 0.0 {
            return Some(0);
        }
        let scale = first.norm().max(1e-300);
        self.values
            .iter()
            .position(|z| (z - first.conj()).norm() <= 1e-8 * scale.max(1.0))
            .or(Some(0))
    }

    /// Angle between the leading eigenvector and the Goldstone direction, in `[0, pi/2]`.
    pub fn goldstone_angle(&self) -> Option<f64> {
        let k = self.leading_index()?;
        let v = &self.vectors[k];
        let dot: C64 = v.iter().zip(&self.goldstone).map(|(z, g)| z * g).sum();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        Some((dot.norm() / norm).min(1.0).acos())
    }
}

/// Deflates the Goldstone mode of `jac` with a Householder reflector `H`
/// mapping `g` to the first axis (after the chain gauge similarity). `H J H` is block upper triangular with a
/// zero first column, so the trailing block carries every other eigenvalue.
pub fn deflated_spectrum(jac: &JacobianMatrix) -> Result<DeflatedSpectrum> {
    let g = goldstone_direction(&jac.base);
    let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if gnorm == 0.0 {
        return Err(Error::InvalidParameter("Goldstone deflation needs a nonzero state".into()));
    }
    let ghat: Vec<f64> = g.iter().map(|x| x / gnorm).collect();
    let dim = ghat.len();
    // Work in the chain gauge so the reflector acts on a well-conditioned matrix.
    let gauge: Vec<f64> = match chain_gauge(&jac.params) {
        Some(site) => site.iter().flat_map(|&x| [x, x]).collect(),
        None => vec![1.0; dim],
    };
    let a = Mat::from_fn(dim, dim, |i, j| jac.matrix[(i, j)] * gauge[j] / gauge[i]);
    let mut gg: Vec<f64> = ghat.iter().zip(&gauge).map(|(x, d)| x / d).collect();
    let ggn = gg.iter().map(|x| x * x).sum::<f64>().sqrt();
    gg.iter_mut().for_each(|x| *x /= ggn);
    // u = gg + sign(gg_0) e_0, H = I - beta u u^T
    let mut u = gg.clone();
    let sign = if gg[0] >= 0.0 { 1.0 } else { -1.0 };
    u[0] += sign;
    let beta = 2.0 / u.iter().map(|x| x * x).sum::<f64>();
    let au: Vec<f64> = (0..dim).map(|i| (0..dim).map(|j| a[(i, j)] * u[j]).sum()).collect();
    let ua: Vec<f64> = (0..dim).map(|j| (0..dim).map(|i| u[i] * a[(i, j)]).sum()).collect();
    let uau: f64 = u.iter().zip(&au).map(|(x, y)| x * y).sum();
    let hah = Mat::from_fn(dim, dim, |i, j| {
        a[(i, j)] - beta * u[i] * ua[j] - beta * au[i] * u[j] + beta * beta * uau * u[i] * u[j]
    });
    let block = Mat::from_fn(dim - 1, dim - 1, |i, j| hah[(i + 1, j + 1)]);
    let eig = eigen_real(&block)?;
    let mut pairs: Vec<(C64, Vec<C64>)> = eig
        .values
        .into_iter()
        .zip(eig.vectors)
        .map(|(lam, y)| {
            // w = [c; y], c = (b . y) / lambda with b the first row of the block
            let b_dot_y: C64 = (0..dim - 1).map(|j| y[j] * hah[(0, j + 1)]).sum();
            let c = if lam.norm() > 0.0 { b_dot_y / lam } else { C64::new(0.0, 0.0) };
            let mut w = Vec::with_capacity(dim);
            w.push(c);
            w.extend_from_slice(&y);
            // v = G H w
            let uw: C64 = u.iter().zip(&w).map(|(x, z)| z * x).sum();
            let mut v: Vec<C64> = w
                .iter()
                .zip(&u)
                .zip(&gauge)
                .map(|((z, x), d)| (z - uw * (beta * x)) * d)
                .collect();
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|z| *z /= norm);
            (lam, v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.re.total_cmp(&a.0.re).then(b.0.im.total_cmp(&a.0.im)));
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(DeflatedSpectrum { values, vectors, goldstone: ghat })
}

/// Knobs for [`static_condensate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticOptions {
    /// Relaxation time before the Newton polish (units `1/J`).
    pub relax_time: f64,
    pub dt: f64,
    pub max_newton: usize,
    /// Required `||d alpha/dt||_inf` of the result.
    pub tol: f64,
}

impl Default for StaticOptions {
    fn default() -> Self {
        StaticOptions { relax_time: 200.0, dt: 5e-3, max_newton: 400, tol: 1e-11 }
    }
}

/// Ordering wavevector of the static condensate, `-pi/2 - theta`
/// (`pi/2` at `theta = pi`).
pub fn static_wavevector(params: &ModelParams) -> f64 {
    let q = (-FRAC_PI_2 - params.theta()).rem_euclid(2.0 * PI);
    if q > PI {
        q - 2.0 * PI
    } else {
        q
    }
}

/// The saturated plane wave `sqrt(kappa/Gamma) e^{i q_s j}`.
pub fn uniform_guess(params: &ModelParams) -> LatticeState {
    let r = (params.pump() / params.pair_loss()).sqrt();
    let q = static_wavevector(params);
    LatticeState::new((1..=params.sites()).map(|j| r * cis(q * j as f64)).collect(), 0.0)
}

fn to_real(v: &[C64]) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn to_complex(x: &[f64]) -> Vec<C64> {
    x.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect()
}

fn residual(params: &ModelParams, amps: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::default(); amps.len()];
    params.rhs_into(amps, &mut out).expect("length checked by caller");
    out
}

/// Time-independent nonzero solution of the open chain.
///
/// Relaxes `guess` (default [`uniform_guess`]) by integration, then polishes
/// with a damped Newton iteration on the bordered system
/// `F(x) + mu G x = 0`, `<G x0, x - x0> = 0`, where `G` generates U(1). The
/// phase condition pins the global phase and `mu` absorbs the Goldstone
/// direction; a static solution has `mu = 0`.
pub fn static_condensate(params: &ModelParams, guess: Option<&LatticeState>, opts: &StaticOptions) -> Result<LatticeState> {
    if params.pair_loss() == 0.0 {
        return Err(Error::NoStaticCondensate("Gamma = 0 has no saturated state".into()));
    }
    let mut amps = match guess {
        Some(g) => {
            g.check(params)?;
            g.amplitudes.clone()
        }
        None => uniform_guess(params).amplitudes,
    };
    if opts.relax_time > 0.0 {
        advance_rk4(params, &mut amps, 0.0, opts.relax_time, opts.dt, |_, _, _| {})?;
    }
    let scale = params.amplitude_scale();
    let n = params.sites();
    let dim = 2 * n;
    let mut x = to_real(&amps);
    let x0 = x.clone();
    let gx0: Vec<f64> = goldstone_direction(&LatticeState::new(amps.clone(), 0.0));
    let gauge: Vec<f64> = match chain_gauge(params) {
        Some(site) => site.iter().flat_map(|&v| [v, v]).collect(),
        None => vec![1.0; dim],
    };
    let mut mu = 0.0;
    let fnorm = |x: &[f64], mu: f64| -> f64 {
        let a = to_complex(x);
        let f = residual(params, &a);
        f.iter()
            .zip(&a)
            .map(|(fi, ai)| (fi + I * ai * mu).norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    let mut current = fnorm(&x, mu);
    for _ in 0..opts.max_newton {
        let a = to_complex(&x);
        if current < 0.05 * opts.tol && mu.abs() < 1e-9 {
            break;
        }
        let st = LatticeState::new(a.clone(), 0.0);
        let jac = jacobian(params, &st)?.matrix;
        let gx = goldstone_direction(&st);
        let f = residual(params, &a);
        // Assemble G^-1 [[J + mu G, G x], [(G x0)^T, 0]] G in the chain gauge;
        // unscaled, the near-vacuum part of a long chain makes LU useless.
        let mut big = Mat::<f64>::zeros(dim + 1, dim + 1);
        for i in 0..dim {
            for j in 0..dim {
                big[(i, j)] = jac[(i, j)] * gauge[j] / gauge[i];
            }
        }
        for s in 0..n {
            big[(2 * s, 2 * s + 1)] -= mu;
            big[(2 * s + 1, 2 * s)] += mu;
        }
        for i in 0..dim {
            big[(i, dim)] = gx[i] / gauge[i];
            big[(dim, i)] = gx0[i] * gauge[i];
        }
        let mut rhs = vec![0.0; dim + 1];
        for s in 0..n {
            let r = f[s] + I * a[s] * mu;
            rhs[2 * s] = -r.re / gauge[2 * s];
            rhs[2 * s + 1] = -r.im / gauge[2 * s + 1];
        }
        rhs[dim] = -(0..dim).map(|i| gx0[i] * (x[i] - x0[i])).sum::<f64>();
        let mut step = solve_real(&big, &rhs)?;
        step.iter_mut().zip(&gauge).for_each(|(d, g)| *d *= g);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(xi, di)| xi + t * di).collect();
            let trial_mu = mu + t * step[dim];
            let fr = fnorm(&trial, trial_mu);
            if fr.is_finite() && (fr < current || fr < 0.05 * opts.tol) {
                x = trial;
                mu = trial_mu;
                current = fr;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let amps = to_complex(&x);
    let res = max_abs(&residual(params, &amps));
    if max_abs(&amps) < 1e-6 * scale {
        return Err(Error::NoStaticCondensate("converged to the vacuum".into()));
    }
    if mu.abs() > 1e-9 || res > opts.tol {
        return Err(Error::NoStaticCondensate(format!(
            "Newton stalled: residual {res:e}, rotation frequency {mu:e}"
        )));
    }
    Ok(LatticeState::new(amps, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KinkFlag {
    /// Every site is above half height.
    FullySaturated,
    /// No site reaches half height.
    NoCondensate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinkPosition {
    /// Site coordinate (1-based) of the half-height crossing.
    pub position: f64,
    pub flag: Option<KinkFlag>,
}

/// Position of the front where `|alpha_j|` first rises through
/// `sqrt(kappa/Gamma)/2` scanning from the left, linearly interpolated
/// between sites. Sentinels: 0 if fully saturated, `N` if nothing crosses.
pub fn kink_position(state: &LatticeState, params: &ModelParams) -> KinkPosition {
    let half = 0.5 * (params.pump() / params.pair_loss()).sqrt();
    let r: Vec<f64> = state.amplitudes.iter().map(|a| a.norm()).collect();
    if r.first().is_some_and(|&x| x >= half) {
        return KinkPosition { position: 0.0, flag: Some(KinkFlag::FullySaturated) };
    }
    for s in 0..r.len().saturating_sub(1) {
        if r[s] < half && r[s + 1] >= half {
            let frac = (half - r[s]) / (r[s + 1] - r[s]);
            return KinkPosition { position: (s + 1) as f64 + frac, flag: None };
        }
    }
    KinkPosition { position: r.len() as f64, flag: Some(KinkFlag::NoCondensate) }
}

/// Least-squares power law `y = A x^b` on log-log axes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// RMS residual in `ln y`.
    pub residual: f64,
    pub fit_range: (f64, f64),
}

pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<PowerLawFit> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidParameter("power-law fit needs two positive points".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("power-law fit needs distinct x".into()));
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let residual = (pts.iter().map(|p| (p.1 - a - b * p.0).powi(2)).sum::<f64>() / n).sqrt();
    let lo = x.iter().copied().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PowerLawFit { exponent: b, prefactor: a.exp(), residual, fit_range: (lo, hi) })
}

/// Kink-position scaling report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KinkScaling {
    pub kappa_crit: f64,
    pub kappas: Vec<f64>,
    pub positions: Vec<f64>,
    pub heights: Vec<f64>,
    pub fit: PowerLawFit,
}

/// Largest ratio between successive `kappa - kappa_crit` values when
/// [`kink_scaling`] walks down toward the threshold. The kink moves by
/// ~`ratio^(1/2)` per step, which damped Newton absorbs in a few iterations.
const KINK_CONTINUATION_RATIO: f64 = 1.122;

/// Static condensates along `kappas`, their kink positions, and a power-law
/// fit of position against `kappa - kappa_crit`.
///
/// `kappa_crit` is the large-`N` vacuum threshold, not a fit parameter: the
/// kink sits in the bulk, away from the right edge that sets the finite-`N`
/// correction. The branch is followed by natural-parameter continuation from
/// `kappa_crit + max(1, max(kappas) - kappa_crit)` down through every
/// requested value with geometric sub-steps.
pub fn kink_scaling(params: &ModelParams, kappas: &[f64], opts: &StaticOptions) -> Result<KinkScaling> {
    let kappa_crit = crate::spectral::vacuum_threshold_limit(params);
    if kappas.iter().any(|k| !(*k > kappa_crit)) {
        return Err(Error::InvalidParameter(format!("kink scaling needs every kappa above {kappa_crit}")));
    }
    let mut order: Vec<usize> = (0..kappas.len()).collect();
    order.sort_by(|&a, &b| kappas[b].total_cmp(&kappas[a]));
    let mut positions = vec![0.0; kappas.len()];
    let mut heights = vec![0.0; kappas.len()];
    let top = (kappas[order[0]] - kappa_crit).max(1.0);
    let mut dk = top;
    let mut prev = static_condensate(&params.with_pump(kappa_crit + dk)?, None, opts)?;
    let cont = StaticOptions { relax_time: 0.0, ..*opts };
    for &i in &order {
        let target = kappas[i] - kappa_crit;
        while dk > target {
            dk = (dk / KINK_CONTINUATION_RATIO).max(target);
            prev = static_condensate(&params.with_pump(kappa_crit + dk)?, Some(&prev), &cont)?;
        }
        let p = params.with_pump(kappas[i])?;
        positions[i] = kink_position(&prev, &p).position;
        heights[i] = prev.max_abs();
    }
    let dx: Vec<f64> = kappas.iter().map(|k| k - kappa_crit).collect();
    let fit = fit_power_law(&dx, &positions)?;
    Ok(KinkScaling { kappa_crit, kappas: kappas.to_vec(), positions, heights, fit })
}

/// Scalar diagnostics of a (possibly time-dependent) trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderParameters {
    /// `<r_j>_{j,t}` over the bulk window.
    pub mean_amplitude: f64,
    /// `<omega>_j` over the bulk window, `omega_j = -(total phase advance)/(elapsed time)`.
    pub mean_frequency: f64,
    /// `<omega>_j` over all sites.
    pub mean_frequency_all: f64,
    /// `<q>_j` over bulk bonds, from unwrapped bond phase differences, reduced to `(-pi, pi]`.
    pub mean_wavevector: f64,
    /// `<|d r_j^2/dt|>_{j,t}` over all sites.
    pub mean_density_rate: f64,
    /// Per-site `<|d r_j^2/dt|>_t`.
    pub edge_density_rate_profile: Vec<f64>,
    /// Slot range (0-based, half open) used for the bulk averages.
    pub bulk_window: (usize, usize),
}

/// Central half of the chain.
pub fn default_bulk_window(n: usize) -> Range<usize> {
    n / 4..(3 * n).div_ceil(4)
}

#[inline]
fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

pub fn order_parameters(traj: &crate::dynamics::Trajectory, bulk_window: Option<Range<usize>>) -> Result<OrderParameters> {
    let n = traj.params.sites();
    let window = bulk_window.unwrap_or_else(|| default_bulk_window(n));
    if window.start >= window.end || window.end > n {
        return Err(Error::InvalidParameter(format!("bulk window {window:?} outside 0..{n}")));
    }
    let samples = traj.len();
    if samples < 2 {
        return Err(Error::WindowTooShort("order parameters need at least two snapshots".into()));
    }
    let elapsed = traj.duration();
    let states = &traj.states;

    let mut freq = vec![0.0; n];
    let mut rate = vec![0.0; n];
    for s in 0..n {
        let mut total = 0.0;
        let mut acc = 0.0;
        for k in 1..samples {
            let (a0, a1) = (states[k - 1][s], states[k][s]);
            total += (a1 * a0.conj()).arg();
            let dt = traj.times[k] - traj.times[k - 1];
            acc += (a1.norm_sqr() - a0.norm_sqr()).abs() / dt;
        }
        freq[s] = -total / elapsed;
        rate[s] = acc / (samples - 1) as f64;
    }

    // Bond phases: branch chosen nearest the previous bond at the first
    // sample, then continued in time.
    let bonds = n - 1;
    let mut bond_mean = vec![0.0; bonds];
    let mut prev_start: Option<f64> = None;
    for b in 0..bonds {
        let raw0 = (states[0][b + 1] * states[0][b].conj()).arg();
        let start = match prev_start {
            Some(p) => p + wrap_angle(raw0 - p),
            None => raw0,
        };
        prev_start = Some(start);
        let mut cur = start;
        let mut sum = start;
        for st in states.iter().skip(1) {
            let raw = (st[b + 1] * st[b].conj()).arg();
            cur += wrap_angle(raw - cur);
            sum += cur;
        }
        bond_mean[b] = sum / samples as f64;
    }
    let bulk_bonds = window.start..window.end.min(bonds).max(window.start + 1);

    let mean_amp = states
        .iter()
        .map(|st| st[window.clone()].iter().map(|a| a.norm()).sum::<f64>())
        .sum::<f64>()
        / (samples * window.len()) as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(OrderParameters {
        mean_amplitude: mean_amp,
        mean_frequency: mean(&freq[window.clone()]),
        mean_frequency_all: mean(&freq),
        mean_wavevector: wrap_angle(mean(&bond_mean[bulk_bonds.start.min(bonds - 1)..bulk_bonds.end.min(bonds)])),
        mean_density_rate: mean(&rate),
        edge_density_rate_profile: rate,
        bulk_window: (window.start, window.end),
    })
}

/// Profiles whose maximum is below this (units `J kappa/Gamma`) count as
/// static; integration noise on a pure traveling wave sits near 1e-15.
pub const DENSITY_RATE_FLOOR: f64 = 1e-8;

/// Largest site index (1-based) whose time-averaged density rate exceeds 10%
/// of the profile maximum; 0 for a profile below [`DENSITY_RATE_FLOOR`].
pub fn edge_extent(profile: &[f64]) -> usize {
    let mx = profile.iter().copied().fold(0.0, f64::max);
    if mx <= DENSITY_RATE_FLOOR {
        return 0;
    }
    profile.iter().rposition(|&v| v > 0.1 * mx).map(|i| i + 1).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CepScanRow {
    pub kappa: f64,
    /// Real part of the leading non-Goldstone eigenvalue.
    pub lambda2: f64,
    /// Imaginary part of that eigenvalue.
    pub lambda2_im: f64,
    /// Angle between its eigenvector and the Goldstone mode, in `[0, pi/2]`.
    pub theta12: f64,
    pub valid: bool,
    pub message: Option<String>,
}

/// Leading non-Goldstone mode of the static condensate along `kappas`.
///
/// The grid is walked in the given order with each condensate seeding the
/// next, so it should start deep in the static phase and approach the
/// boundary.
pub fn cep_scan(params: &ModelParams, kappas: &[f64], opts: &StaticOptions) -> Vec<CepScanRow> {
    let mut prev: Option<LatticeState> = None;
    kappas
        .iter()
        .map(|&kappa| {
            let attempt = || -> Result<(LatticeState, DeflatedSpectrum)> {
                let p = params.with_pump(kappa)?;
                let local = StaticOptions { relax_time: if prev.is_some() { 0.0 } else { opts.relax_time }, ..*opts };
                let s = static_condensate(&p, prev.as_ref(), &local)?;
                let spec = deflated_spectrum(&jacobian(&p, &s)?)?;
                Ok((s, spec))
            };
            match attempt() {
                Ok((s, spec)) => {
                    let k = spec.leading_index().unwrap_or(0);
                    let row = CepScanRow {
                        kappa,
                        lambda2: spec.values[k].re,
                        lambda2_im: spec.values[k].im,
                        theta12: spec.goldstone_angle().unwrap_or(f64::NAN),
                        valid: true,
                        message: None,
                    };
                    prev = Some(s);
                    row
                }
                Err(e) => CepScanRow {
                    kappa,
                    lambda2: f64::NAN,
                    lambda2_im: f64::NAN,
                    theta12: f64::NAN,
                    valid: false,
                    message: Some(e.to_string()),
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryOptions {
    /// Start of the downward scan; must lie in the stable static phase.
    pub kappa_top: f64,
    pub kappa_step: f64,
    pub tol: f64,
    pub statics: StaticOptions,
}

impl Default for BoundaryOptions {
    fn default() -> Self {
        BoundaryOptions { kappa_top: 4.0, kappa_step: 0.05, tol: 1e-4, statics: StaticOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticBoundaryRow {
    pub gamma: f64,
    /// Pump below which the static condensate is linearly unstable.
    pub kappa_c: Option<f64>,
    pub flag: Option<String>,
}

fn static_growth(p: &ModelParams, guess: Option<&LatticeState>, opts: &StaticOptions) -> Result<(LatticeState, f64)> {
    let s = static_condensate(p, guess, opts)?;
    let g = deflated_spectrum(&jacobian(p, &s)?)?.leading_growth();
    Ok((s, g))
}

fn static_boundary_one(base: &ModelParams, gamma: f64, opts: &BoundaryOptions) -> Result<StaticBoundaryRow> {
    let p = base.with_corr_loss(gamma)?;
    let floor = vacuum_threshold(&p)?;
    let cont = StaticOptions { relax_time: 0.0, ..opts.statics };
    let (mut s_hi, g_top) = static_growth(&p.with_pump(opts.kappa_top)?, None, &opts.statics)?;
    if g_top >= 0.0 {
        return Ok(StaticBoundaryRow { gamma, kappa_c: None, flag: Some("unstable at the top of the scan".into()) });
    }
    let mut k_hi = opts.kappa_top;
    let mut k_lo = None;
    let mut k = opts.kappa_top - opts.kappa_step;
    while k > floor {
        match static_growth(&p.with_pump(k)?, Some(&s_hi), &cont) {
            Ok((s, g)) if g < 0.0 => {
                s_hi = s;
                k_hi = k;
            }
            Ok(_) => {
                k_lo = Some(k);
                break;
            }
            Err(_) => {
                k_lo = Some(k);
                break;
            }
        }
        k -= opts.kappa_step;
    }
    let Some(mut k_lo) = k_lo else {
        return Ok(StaticBoundaryRow { gamma, kappa_c: None, flag: Some("no instability above the vacuum threshold".into()) });
    };
    while k_hi - k_lo > opts.tol {
        let mid = 0.5 * (k_hi + k_lo);
        match static_growth(&p.with_pump(mid)?, Some(&s_hi), &cont) {
            Ok((s, g)) if g < 0.0 => {
                s_hi = s;
                k_hi = mid;
            }
            _ => k_lo = mid,
        }
    }
    Ok(StaticBoundaryRow { gamma, kappa_c: Some(0.5 * (k_hi + k_lo)), flag: None })
}

/// Pump at which the static condensate loses linear stability, per `gamma`.
///
/// Scans down from `kappa_top` in `kappa_step` steps by continuation until
/// the leading non-Goldstone growth rate turns nonnegative (or the condensate
/// is lost), then bisects to `tol`.
pub fn static_stability_boundary(base: &ModelParams, gammas: &[f64], opts: &BoundaryOptions) -> Vec<StaticBoundaryRow> {
    gammas
        .par_iter()
        .map(|&g| {
            static_boundary_one(base, g, opts).unwrap_or_else(|e| StaticBoundaryRow {
                gamma: g,
                kappa_c: None,
                flag: Some(e.to_string()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{random_initial, IntegrationConfig, Trajectory};
    use crate::spectral::obc_spectrum_analytic;

    fn rhs_real(p: &ModelParams, x: &[f64]) -> Vec<f64> {
        to_real(&residual(p, &to_complex(x)))
    }

    #[test]
    fn jacobian_matches_central_differences() {
        for (theta, b) in [(PI, Boundary::Open), (0.7, Boundary::Periodic), (0.0, Boundary::Open)] {
            let p = ModelParams::builder()
                .sites(7)
                .pump(1.3)
                .corr_loss(0.4)
                .pair_loss(0.8)
                .theta(theta)
                .boundary(b)
                .build()
                .unwrap();
            for seed in 0..10 {
                let s = random_initial(&p, seed, 1.0).unwrap();
                let jac = jacobian(&p, &s).unwrap().matrix;
                let x = to_real(&s.amplitudes);
                let h = 1e-6;
                for j in 0..x.len() {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[j] += h;
                    xm[j] -= h;
                    let (fp, fm) = (rhs_real(&p, &xp), rhs_real(&p, &xm));
                    for i in 0..x.len() {
                        let fd = (fp[i] - fm[i]) / (2.0 * h);
                        assert!((fd - jac[(i, j)]).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn jvp_matches_matrix() {
        let p = ModelParams::open_chain(6, 1.1, 0.3).unwrap();
        let s = random_initial(&p, 4, 1.0).unwrap();
        let v = random_initial(&p, 5, 1.0).unwrap();
        let jac = jacobian(&p, &s).unwrap().matrix;
        let mut out = vec![C64::default(); 6];
        jvp(&p, &s.amplitudes, &v.amplitudes, &mut out);
        let xv = to_real(&v.amplitudes);
        let dense: Vec<f64> = (0..12).map(|i| (0..12).map(|j| jac[(i, j)] * xv[j]).sum()).collect();
        for (a, b) in to_real(&out).iter().zip(&dense) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn vacuum_jacobian_doubles_linear_spectrum() {
        let p = ModelParams::open_chain(8, 0.3, 0.5).unwrap();
        let jac = jacobian(&p, &LatticeState::vacuum(8)).unwrap();
        let vals = crate::linalg::eigenvalues_real(&jac.matrix).unwrap();
        let lin = obc_spectrum_analytic(&p, false).unwrap().eigenvalues;
        for e in &lin {
            for target in [-I * e, (-I * e).conj()] {
                let best = vals.iter().map(|v| (v - target).norm()).fold(f64::INFINITY, f64::min);
                assert!(best < 1e-9, "{target} missing");
            }
        }
    }

    #[test]
    fn static_condensate_properties() {
        let p = ModelParams::open_chain(40, 1.0, 2.0).unwrap();
        let s = static_condensate(&p, None, &StaticOptions::default()).unwrap();
        assert!(max_abs(&residual(&p, &s.amplitudes)) < 1e-11);
        // pi/2 phase steps in the saturated region
        let half = 0.5 * p.pump().sqrt();
        for s_ in 0..39 {
            let (a, b) = (s.amplitudes[s_], s.amplitudes[s_ + 1]);
            if a.norm() > half && b.norm() > half {
                assert!((wrap_angle((b * a.conj()).arg()) - FRAC_PI_2).abs() < 1e-6);
            }
        }
        // PH symmetric up to a global phase
        let ph = crate::model::ph_map(&s.amplitudes);
        let overlap: C64 = ph.iter().zip(&s.amplitudes).map(|(x, y)| y * x.conj()).sum();
        let phase = overlap / overlap.norm();
        let err = ph.iter().zip(&s.amplitudes).map(|(x, y)| (x * phase - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "PH mismatch {err}");
        // kink height
        assert!((s.max_abs() / p.pump().sqrt() - 1.0).abs() < 0.01);
        // Goldstone zero mode of the full Jacobian, tangent to i alpha
        let jac = jacobian(&p, &s).unwrap();
        let e = eigen_real(&jac.matrix).unwrap();
        let g = goldstone_direction(&s);
        let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (k, _) = e
            .values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        assert!(e.values[k].norm() < 1e-8);
        let dot: C64 = e.vectors[k].iter().zip(&g).map(|(v, x)| v * x).sum();
        assert!((dot.norm() / gn).min(1.0).acos() < 1e-4);
        // deflation removes exactly that mode and leaves a stable rest
        let d = deflated_spectrum(&jac).unwrap();
        assert_eq!(d.values.len(), 79);
        assert!(d.leading_growth() < 0.0);
    }

    #[test]
    fn no_condensate_below_threshold() {
        let p = ModelParams::open_chain(20, 0.3, 2.0).unwrap();
        assert!(matches!(
            static_condensate(&p, None, &StaticOptions::default()),
            Err(Error::NoStaticCondensate(_))
        ));
    }

    #[test]
    fn kink_sentinels() {
        let p = ModelParams::open_chain(4, 1.0, 2.0).unwrap();
        let full = LatticeState::new(vec![C64::new(1.0, 0.0); 4], 0.0);
        assert_eq!(kink_position(&full, &p).flag, Some(KinkFlag::FullySaturated));
        let none = LatticeState::vacuum(4);
        let k = kink_position(&none, &p);
        assert_eq!((k.position, k.flag), (4.0, Some(KinkFlag::NoCondensate)));
        let front = LatticeState::new(
            vec![C64::new(0.0, 0.0), C64::new(0.25, 0.0), C64::new(0.75, 0.0), C64::new(1.0, 0.0)],
            0.0,
        );
        assert!((kink_position(&front, &p).position - 2.5).abs() < 1e-15);
    }

    #[test]
    fn power_law_fit_recovers_exponent() {
        let x: Vec<f64> = (1..10).map(|k| 0.01 * k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(-0.5)).collect();
        let f = fit_power_law(&x, &y).unwrap();
        assert!((f.exponent + 0.5).abs() < 1e-12 && (f.prefactor - 3.0).abs() < 1e-10);
    }

    fn plane_wave_traj(n: usize, r: f64, q: f64, omega: f64) -> Trajectory {
        let p = ModelParams::open_chain(n, 1.0, 0.2).unwrap();
        let times: Vec<f64> = (0..400).map(|k| 0.1 * k as f64).collect();
        let states = times
            .iter()
            .map(|t| (1..=n).map(|j| r * cis(q * j as f64 - omega * t)).collect())
            .collect::<Vec<Vec<C64>>>();
        let last = LatticeState::new(states.last().unwrap().clone(), *times.last().unwrap());
        Trajectory { params: p, config: IntegrationConfig::default(), times, states, terminal_state: last }
    }

    #[test]
    fn plane_wave_closure() {
        for (q, omega) in [(1.3, 0.7), (2.9, -1.9), (-0.4, 0.05)] {
            let op = order_parameters(&plane_wave_traj(20, 1.7, q, omega), None).unwrap();
            assert!((op.mean_amplitude - 1.7).abs() < 1e-10);
            assert!((op.mean_frequency - omega).abs() < 1e-10);
            assert!((op.mean_wavevector - q).abs() < 1e-10);
            assert!(op.mean_density_rate < 1e-10);
        }
        assert!(order_parameters(&plane_wave_traj(20, 1.0, 1.0, 1.0), Some(5..30)).is_err());
    }

    #[test]
    fn static_state_has_no_dynamics() {
        let p = ModelParams::open_chain(30, 1.0, 2.0).unwrap();
        let s = static_condensate(&p, None, &StaticOptions::default()).unwrap();
        let cfg = IntegrationConfig { t_transient: 0.0, t_measure: 50.0, ..Default::default() };
        let tr = crate::dynamics::integrate(&p, &s, &cfg).unwrap();
        let op = order_parameters(&tr, None).unwrap();
        assert!(op.mean_frequency.abs() < 1e-9);
        assert!(op.mean_density_rate < 1e-9);
        assert_eq!(edge_extent(&[0.0; 5]), 0);
        assert_eq!(edge_extent(&[1.0, 0.5, 0.2, 0.05, 0.11, 0.01]), 5);
    }
}
