//! Spectra of the linear (`Gamma = 0`) problem: periodic dispersion, the
//! Hatano-Nelson matrix, its closed-form open-chain spectrum and the pump
//! threshold at which the vacuum turns unstable.
//!
//! The open-chain eigenvalues are returned in the convention
//! `lambda_m = Delta + 2 e^{-i delta/2} J_- sqrt|J_+/J_-| cos(pi m/(N+1))`,
//! `delta = arg(J_-/J_+)`. At `theta = pi` this is the familiar
//! `Delta -/+ 2 sqrt(J^2 - gamma^2) cos q_m` with the opposite sign of the
//! cosine; both describe the same set since `q_m -> pi - q_m` maps it onto
//! itself. Eigenvalues are sorted by real part, then imaginary part.

use std::f64::consts::{PI, TAU};

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spectral_order;
use crate::model::{Boundary, ModelParams, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionPoint {
    pub q: f64,
    pub gamma_q: f64,
    pub omega_q: f64,
}

/// Decay rate and energy of periodic mode `q = 2 pi m / N`.
pub fn pbc_dispersion(params: &ModelParams, m: usize) -> Result<DispersionPoint> {
    let n = params.sites();
    if m >= n {
        return Err(Error::OutOfRange { index: m, len: n });
    }
    let q = TAU * m as f64 / n as f64;
    Ok(DispersionPoint { q, gamma_q: params.gamma_q(q), omega_q: params.omega_q(q) })
}

/// Dense single-particle Hamiltonian: `Delta` on the diagonal, `J_+` above,
/// `J_-` below, plus the two corner entries for periodic chains.
///
/// The equation of motion linearized at the vacuum is `d/dt alpha = -i H alpha`.
pub fn hatano_nelson_matrix(params: &ModelParams) -> Mat<c64> {
    let n = params.sites();
    let (d, jp, jm) = (params.onsite(), params.hop_plus(), params.hop_minus());
    let mut h = Mat::<c64>::zeros(n, n);
    for j in 0..n {
        h[(j, j)] = d;
        if j + 1 < n {
            h[(j, j + 1)] += jp;
            h[(j + 1, j)] += jm;
        }
    }
    if params.boundary() == Boundary::Periodic {
        h[(n - 1, 0)] += jp;
        h[(0, n - 1)] += jm;
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    UnderEp,
    AtEp,
    OverEp,
}

/// `|gamma - J| < 1e-9 J` is treated as the exceptional point.
pub fn regime(params: &ModelParams) -> Regime {
    let (g, j) = (params.corr_loss(), params.hopping());
    if (g - j).abs() < 1e-9 * j {
        Regime::AtEp
    } else if g < j {
        Regime::UnderEp
    } else {
        Regime::OverEp
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObcSpectrum {
    pub eigenvalues: Vec<C64>,
    /// Mode label `m` in `1..=N` of each eigenvalue.
    pub modes: Vec<usize>,
    /// Right eigenvectors normalized to unit max-norm, same order as the eigenvalues.
    pub eigenvectors: Option<Vec<Vec<C64>>>,
    pub regime: Regime,
    /// `r = sqrt|J_-/J_+|`; `> 1` means localization at the right edge.
    pub localization_ratio: f64,
    /// One of the hoppings vanishes: the matrix is a single Jordan block.
    pub degenerate: bool,
}

fn hoppings_degenerate(params: &ModelParams) -> bool {
    let scale = params.hopping() + params.corr_loss();
    params.hop_plus().norm() < 1e-14 * scale || params.hop_minus().norm() < 1e-14 * scale
}

/// `2 e^{-i delta/2} J_- sqrt|J_+/J_-|`, the coefficient of `cos(theta_m)`.
fn band_coefficient(params: &ModelParams) -> C64 {
    let (jp, jm) = (params.hop_plus(), params.hop_minus());
    let delta = (jm / jp).arg();
    C64::from_polar(1.0, -delta / 2.0) * jm * (jp.norm() / jm.norm()).sqrt() * 2.0
}

/// Closed-form spectrum of the open Hatano-Nelson chain.
///
/// When one hopping vanishes (e.g. `gamma = J` at `theta = pi`) all `N`
/// eigenvalues equal `Delta` and the matrix is defective: the spectrum is
/// returned with `degenerate = true`, and asking for eigenvectors yields
/// [`Error::DegenerateHopping`].
pub fn obc_spectrum_analytic(params: &ModelParams, with_vectors: bool) -> Result<ObcSpectrum> {
    if params.boundary() != Boundary::Open {
        return Err(Error::InvalidParameter("analytic spectrum requires open boundaries".into()));
    }
    let n = params.sites();
    let delta_onsite = params.onsite();
    if hoppings_degenerate(params) {
        if with_vectors {
            return Err(Error::DegenerateHopping);
        }
        let ratio = if params.hop_plus().norm() < params.hop_minus().norm() { f64::INFINITY } else { 0.0 };
        return Ok(ObcSpectrum {
            eigenvalues: vec![delta_onsite; n],
            modes: (1..=n).collect(),
            eigenvectors: None,
            regime: regime(params),
            localization_ratio: ratio,
            degenerate: true,
        });
    }
    let (jp, jm) = (params.hop_plus(), params.hop_minus());
    let r = (jm.norm() / jp.norm()).sqrt();
    let delta = (jm / jp).arg();
    let c = band_coefficient(params);
    let angles: Vec<f64> = (1..=n).map(|m| PI * m as f64 / (n + 1) as f64).collect();
    let values: Vec<C64> = angles.iter().map(|t| delta_onsite + c * t.cos()).collect();

    let vectors = with_vectors.then(|| {
        // Components r^j e^{i delta j/2} sin(theta_m j); the r^j growth is
        // carried in log space and shifted so the largest factor is O(1).
        let ln_r = r.ln();
        let shift = (1..=n).map(|j| j as f64 * ln_r).fold(f64::NEG_INFINITY, f64::max);
        angles
            .iter()
            .map(|t| {
                let mut v: Vec<C64> = (1..=n)
                    .map(|j| {
                        let jf = j as f64;
                        C64::from_polar((jf * ln_r - shift).exp(), delta * jf / 2.0) * (t * jf).sin()
                    })
                    .collect();
                let mx = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
                v.iter_mut().for_each(|z| *z /= mx);
                v
            })
            .collect::<Vec<_>>()
    });

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| spectral_order(&values[a], &values[b]));
    Ok(ObcSpectrum {
        eigenvalues: order.iter().map(|&i| values[i]).collect(),
        modes: order.iter().map(|&i| i + 1).collect(),
        eigenvectors: vectors.map(|v| order.iter().map(|&i| v[i].clone()).collect()),
        regime: regime(params),
        localization_ratio: r,
        degenerate: false,
    })
}

/// Site gauge `r^(s - N/2)`, `r = sqrt(|J-/J+|)`, that equalizes the hopping
/// magnitudes of an open chain. `None` for rings (already normal) and for
/// degenerate hopping.
pub fn chain_gauge(params: &ModelParams) -> Option<Vec<f64>> {
    if params.boundary() == Boundary::Periodic {
        return None;
    }
    let (jp, jm) = (params.hop_plus().norm(), params.hop_minus().norm());
    let floor = 1e-14 * (params.hopping() + params.corr_loss());
    if jp < floor || jm < floor {
        return None;
    }
    let ln_r = 0.5 * (jm / jp).ln();
    let mid = params.sites() as f64 / 2.0;
    Some((0..params.sites()).map(|s| ((s as f64 - mid) * ln_r).exp()).collect())
}

/// Dense numerical spectrum of [`hatano_nelson_matrix`], sorted like the
/// analytic one.
pub fn spectrum_numeric(params: &ModelParams) -> Result<Vec<C64>> {
    let gauge = chain_gauge(params);
    let mut v = crate::linalg::eigenvalues_complex_gauged(&hatano_nelson_matrix(params), gauge.as_deref())?;
    v.sort_by(spectral_order);
    Ok(v)
}

/// Periodic-chain eigenvalues `i kappa - i gamma_q + omega_q` on the momentum grid.
pub fn pbc_spectrum(params: &ModelParams) -> Vec<C64> {
    let mut v: Vec<C64> = (0..params.sites())
        .map(|m| {
            let q = TAU * m as f64 / params.sites() as f64;
            C64::new(params.omega_q(q), params.pump() - params.gamma_q(q))
        })
        .collect();
    v.sort_by(spectral_order);
    v
}

/// Pump at which the vacuum of this finite chain loses linear stability.
///
/// Open chains: the largest growth rate is `kappa + max_m Im(lambda_m - i kappa)`,
/// linear in `kappa`, so the threshold follows in closed form from the
/// analytic spectrum for any `theta` (`2 gamma` below the exceptional point,
/// `2 gamma - 2 sqrt(gamma^2 - J^2) cos(pi/(N+1))` above it at `theta = pi`).
/// Periodic chains: `min_m gamma_q` over the momentum grid.
pub fn vacuum_threshold(params: &ModelParams) -> Result<f64> {
    match params.boundary() {
        Boundary::Periodic => Ok((0..params.sites())
            .map(|m| params.gamma_q(TAU * m as f64 / params.sites() as f64))
            .fold(f64::INFINITY, f64::min)),
        Boundary::Open => {
            let at_zero = params.with_pump(0.0)?;
            let spec = obc_spectrum_analytic(&at_zero, false)?;
            let top = spec.eigenvalues.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max);
            Ok(-top)
        }
    }
}

/// Large-`N` limit of [`vacuum_threshold`]: `2 gamma - |Im c|` for open
/// chains (`2 gamma - 2 sqrt(gamma^2 - J^2)` above the exceptional point at
/// `theta = pi`), and `min_q gamma_q = 0` for rings.
pub fn vacuum_threshold_limit(params: &ModelParams) -> f64 {
    match params.boundary() {
        Boundary::Periodic => 0.0,
        Boundary::Open => {
            let g = params.corr_loss();
            if hoppings_degenerate(params) {
                2.0 * g
            } else {
                2.0 * g - band_coefficient(params).im.abs()
            }
        }
    }
}
