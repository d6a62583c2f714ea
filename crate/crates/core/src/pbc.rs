//! Linear stability of traveling-wave condensates on a ring.
//!
//! A fluctuation at momentum `k` couples only to the conjugate fluctuation
//! at `2q - k`, so the linearization splits into 2x2 blocks.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, C64};

/// Default threshold on the leading growth rate (units of `J`).
pub const STABILITY_TOL: f64 = 1e-9;

/// Verdict for one traveling wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveStability {
    pub q: f64,
    pub exists: bool,
    pub stable: bool,
    /// Largest real part over non-Goldstone eigenvalues; `None` if the wave does not exist.
    pub max_growth: Option<f64>,
    pub worst_k: Option<f64>,
    /// Modulus of the excluded eigenvalue at `k = q`.
    pub goldstone: Option<f64>,
}

/// Options for [`wave_stable_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PbcOptions {
    pub stability_tol: f64,
    /// Fluctuation momenta are sampled on an `N * k_refine` grid; 1 is the
    /// lattice grid, larger values approach the continuum.
    pub k_refine: usize,
}

impl Default for PbcOptions {
    fn default() -> Self {
        PbcOptions { stability_tol: STABILITY_TOL, k_refine: 1 }
    }
}

/// Squared amplitude `r_q^2 = (kappa - gamma_q)/Gamma` of an existing wave.
pub fn wave_density(params: &ModelParams, q: f64) -> Result<f64> {
    let gq = params.gamma_q(q);
    if !(params.pump() > gq) || params.pair_loss() <= 0.0 {
        return Err(Error::WaveDoesNotExist { q, kappa: params.pump(), gamma_q: gq });
    }
    Ok((params.pump() - gq) / params.pair_loss())
}

fn grid_index(q: f64, n: usize) -> Option<usize> {
    let x = q.rem_euclid(TAU) * n as f64 / TAU;
    let m = x.round();
    ((x - m).abs() < 1e-9).then_some(m as usize % n)
}

fn fluctuation_unchecked(params: &ModelParams, q: f64, k: f64, lambda: f64) -> [[C64; 2]; 2] {
    let kappa = params.pump();
    let wq = params.omega_q(q);
    let kk = (2.0 * q - k).rem_euclid(TAU);
    let beta_k = C64::new(kappa - params.gamma_q(k) - 2.0 * lambda, -(params.omega_q(k) - wq));
    let beta_kk = C64::new(kappa - params.gamma_q(kk) - 2.0 * lambda, -(params.omega_q(kk) - wq));
    let off = C64::new(-lambda, 0.0);
    [[beta_k, off], [off, beta_kk.conj()]]
}

/// Generator of `d/dt (delta alpha_k, conj(delta alpha_{2q-k}))` about the
/// momentum-`q` wave. Both momenta must lie on the lattice grid.
pub fn fluctuation_matrix(params: &ModelParams, q: f64, k: f64) -> Result<[[C64; 2]; 2]> {
    let n = params.sites();
    for (name, v) in [("q", q), ("k", k)] {
        if grid_index(v, n).is_none() {
            return Err(Error::InvalidParameter(format!("{name} = {v} is not on the {n}-point momentum grid")));
        }
    }
    let lambda = params.pair_loss() * wave_density(params, q)?;
    Ok(fluctuation_unchecked(params, q, k, lambda))
}

/// Eigenvalues `(lambda_+, lambda_-)` of a 2x2 matrix from its trace and
/// determinant; `lambda_+` has the larger real part.
pub fn eigenvalues_2x2(m: &[[C64; 2]; 2]) -> (C64, C64) {
    let half_tr = (m[0][0] + m[1][1]) * 0.5;
    let half_diff = (m[0][0] - m[1][1]) * 0.5;
    let root = (half_diff * half_diff + m[0][1] * m[1][0]).sqrt();
    let (a, b) = (half_tr + root, half_tr - root);
    if a.re >= b.re {
        (a, b)
    } else {
        (b, a)
    }
}

pub fn wave_stable(params: &ModelParams, q: f64) -> Result<WaveStability> {
    wave_stable_with(params, q, &PbcOptions::default())
}

/// Stability of the momentum-`q` wave: the wave is stable iff every
/// eigenvalue other than the Goldstone zero at `k = q` has real part below
/// `stability_tol`. A nonexistent wave yields `exists = false`.
pub fn wave_stable_with(params: &ModelParams, q: f64, opts: &PbcOptions) -> Result<WaveStability> {
    let n = params.sites();
    if grid_index(q, n).is_none() {
        return Err(Error::InvalidParameter(format!("q = {q} is not on the {n}-point momentum grid")));
    }
    if opts.k_refine == 0 {
        return Err(Error::InvalidParameter("k_refine must be at least 1".into()));
    }
    let lambda = match wave_density(params, q) {
        Ok(r2) => params.pair_loss() * r2,
        Err(Error::WaveDoesNotExist { .. }) => {
            return Ok(WaveStability { q, exists: false, stable: false, max_growth: None, worst_k: None, goldstone: None });
        }
        Err(e) => return Err(e),
    };
    let nk = n * opts.k_refine;
    let mut best = (f64::NEG_INFINITY, q);
    let mut goldstone = 0.0;
    // k = q + 2 pi p / nk, so p = 0 is the Goldstone block.
    for p in 0..nk {
        let k = (q + TAU * p as f64 / nk as f64).rem_euclid(TAU);
        let (plus, minus) = eigenvalues_2x2(&fluctuation_unchecked(params, q, k, lambda));
        let growth = if p == 0 {
            goldstone = plus.norm();
            minus.re
        } else {
            plus.re
        };
        if growth > best.0 {
            best = (growth, k);
        }
    }
    Ok(WaveStability {
        q,
        exists: true,
        stable: best.0 < opts.stability_tol,
        max_growth: Some(best.0),
        worst_k: Some(best.1),
        goldstone: Some(goldstone),
    })
}

/// One `(kappa, q)` cell of the stability diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagramCell {
    pub kappa: f64,
    pub m: usize,
    pub stability: WaveStability,
    pub gamma_q: f64,
    /// Frequency, reported for stable cells only.
    pub omega_q: Option<f64>,
    pub r_q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityDiagram {
    /// Row-major: `kappa` outer, `m` inner.
    pub cells: Vec<DiagramCell>,
    /// Existence boundary `(q, gamma_q)` on the momentum grid.
    pub overlay: Vec<(f64, f64)>,
}

/// Stability of every wave `q = 2 pi m / N` for every pump in `kappas`.
pub fn stability_diagram(base: &ModelParams, kappas: &[f64], ms: &[usize], opts: &PbcOptions) -> Result<StabilityDiagram> {
    if kappas.is_empty() || ms.is_empty() {
        return Err(Error::InvalidParameter("stability diagram needs nonempty grids".into()));
    }
    let n = base.sites();
    if let Some(&m) = ms.iter().find(|&&m| m >= n) {
        return Err(Error::OutOfRange { index: m, len: n });
    }
    let params: Vec<ModelParams> = kappas.iter().map(|&k| base.with_pump(k)).collect::<Result<_>>()?;
    let cells = (0..kappas.len() * ms.len())
        .into_par_iter()
        .map(|idx| {
            let (row, col) = (idx / ms.len(), idx % ms.len());
            let p = &params[row];
            let q = TAU * ms[col] as f64 / n as f64;
            let st = wave_stable_with(p, q, opts)?;
            Ok(DiagramCell {
                kappa: kappas[row],
                m: ms[col],
                stability: st,
                gamma_q: p.gamma_q(q),
                omega_q: st.stable.then(|| p.omega_q(q)),
                r_q: wave_density(p, q).ok().map(f64::sqrt),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let overlay = (0..n)
        .map(|m| {
            let q = TAU * m as f64 / n as f64;
            (q, base.gamma_q(q))
        })
        .collect();
    Ok(StabilityDiagram { cells, overlay })
}
