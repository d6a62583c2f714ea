//! Model parameters, lattice states and the mean-field equation of motion.
//!
//! The amplitudes obey
//!
//! ```text
//! d/dt a_j = (kappa - 2 gamma) a_j - Gamma |a_j|^2 a_j
//!            + i (J + gamma e^{i theta}) a_{j+1} + i (J - gamma e^{-i theta}) a_{j-1}
//! ```
//!
//! Sites are labelled `j = 1..=N` in every formula that carries a site-dependent
//! phase (for example the particle-hole map `a_j -> e^{i pi j} conj(a_j)`).
//! Storage is 0-based, so slot `s` holds site `j = s + 1`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "periodic" | "pbc" => Ok(Boundary::Periodic),
            "open" | "obc" => Ok(Boundary::Open),
            other => Err(Error::InvalidParameter(format!("unknown boundary '{other}'"))),
        }
    }
}

/// `e^{i theta}` with exact values at multiples of pi/2.
///
/// The particle-hole symmetry only holds at theta in {0, pi}; the generic
/// `sin(PI)` residue of 1.2e-16 would break it at the last bit.
pub fn cis(theta: f64) -> C64 {
    let t = theta.rem_euclid(TAU);
    let quarter = (t / FRAC_PI_2).round();
    if (t - quarter * FRAC_PI_2).abs() < 1e-14 {
        match quarter as i64 % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        }
    } else {
        C64::new(t.cos(), t.sin())
    }
}

/// Physical couplings, lattice size and boundary condition.
///
/// Serialized with the physics symbols as keys (`J`, `gamma`, `kappa`,
/// `Gamma`, `theta`, `N`, `boundary`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    hopping: f64,
    corr_loss: f64,
    pump: f64,
    pair_loss: f64,
    theta: f64,
    sites: usize,
    boundary: Boundary,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawParams {
    #[serde(rename = "J")]
    hopping: f64,
    gamma: f64,
    kappa: f64,
    #[serde(rename = "Gamma")]
    pair_loss: f64,
    theta: f64,
    #[serde(rename = "N")]
    sites: usize,
    boundary: Boundary,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(r: RawParams) -> Result<Self> {
        ModelParams::builder()
            .hopping(r.hopping)
            .corr_loss(r.gamma)
            .pump(r.kappa)
            .pair_loss(r.pair_loss)
            .theta(r.theta)
            .sites(r.sites)
            .boundary(r.boundary)
            .build()
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            hopping: p.hopping,
            gamma: p.corr_loss,
            kappa: p.pump,
            pair_loss: p.pair_loss,
            theta: p.theta,
            sites: p.sites,
            boundary: p.boundary,
        }
    }
}

/// Builder for [`ModelParams`]. Defaults: `J = 1`, `Gamma = 1`, `theta = pi`,
/// `gamma = kappa = 0`, `N = 100`, open boundaries.
#[derive(Debug, Clone, Copy)]
pub struct ParamsBuilder {
    p: ModelParams,
}

impl ParamsBuilder {
    pub fn hopping(mut self, j: f64) -> Self {
        self.p.hopping = j;
        self
    }
    pub fn corr_loss(mut self, gamma: f64) -> Self {
        self.p.corr_loss = gamma;
        self
    }
    pub fn pump(mut self, kappa: f64) -> Self {
        self.p.pump = kappa;
        self
    }
    pub fn pair_loss(mut self, big_gamma: f64) -> Self {
        self.p.pair_loss = big_gamma;
        self
    }
    pub fn theta(mut self, theta: f64) -> Self {
        self.p.theta = theta;
        self
    }
    pub fn sites(mut self, n: usize) -> Self {
        self.p.sites = n;
        self
    }
    pub fn boundary(mut self, b: Boundary) -> Self {
        self.p.boundary = b;
        self
    }
    pub fn open(self) -> Self {
        self.boundary(Boundary::Open)
    }
    pub fn periodic(self) -> Self {
        self.boundary(Boundary::Periodic)
    }

    pub fn build(self) -> Result<ModelParams> {
        let mut p = self.p;
        p.validate()?;
        p.theta = p.theta.rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU for tiny negative inputs
        if p.theta >= TAU {
            p.theta = 0.0;
        }
        Ok(p)
    }
}

impl ModelParams {
    pub fn builder() -> ParamsBuilder {
        ParamsBuilder {
            p: ModelParams {
                hopping: 1.0,
                corr_loss: 0.0,
                pump: 0.0,
                pair_loss: 1.0,
                theta: PI,
                sites: 100,
                boundary: Boundary::Open,
            },
        }
    }

    /// Open chain at `theta = pi`, `J = Gamma = 1`.
    pub fn open_chain(sites: usize, pump: f64, corr_loss: f64) -> Result<Self> {
        Self::builder().sites(sites).pump(pump).corr_loss(corr_loss).build()
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.hopping.is_finite() && self.hopping > 0.0) {
            return bad(format!("J must be > 0, got {}", self.hopping));
        }
        // Gamma = 0 is the linear Hatano-Nelson limit and is allowed.
        if !(self.pair_loss.is_finite() && self.pair_loss >= 0.0) {
            return bad(format!("Gamma must be >= 0, got {}", self.pair_loss));
        }
        if !(self.pump.is_finite() && self.pump >= 0.0) {
            return bad(format!("kappa must be >= 0, got {}", self.pump));
        }
        if !(self.corr_loss.is_finite() && self.corr_loss >= 0.0) {
            return bad(format!("gamma must be >= 0, got {}", self.corr_loss));
        }
        if !self.theta.is_finite() {
            return bad(format!("theta must be finite, got {}", self.theta));
        }
        if self.sites < 2 {
            return bad(format!("N must be >= 2, got {}", self.sites));
        }
        Ok(())
    }

    pub fn to_builder(self) -> ParamsBuilder {
        ParamsBuilder { p: self }
    }

    pub fn with_pump(self, kappa: f64) -> Result<Self> {
        self.to_builder().pump(kappa).build()
    }

    pub fn with_corr_loss(self, gamma: f64) -> Result<Self> {
        self.to_builder().corr_loss(gamma).build()
    }

    pub fn with_sites(self, n: usize) -> Result<Self> {
        self.to_builder().sites(n).build()
    }

    pub fn with_boundary(self, b: Boundary) -> Self {
        ModelParams { boundary: b, ..self }
    }

    pub fn with_theta(self, theta: f64) -> Result<Self> {
        self.to_builder().theta(theta).build()
    }

    pub fn with_pair_loss(self, big_gamma: f64) -> Result<Self> {
        self.to_builder().pair_loss(big_gamma).build()
    }

    /// Hopping rate `J`.
    pub fn hopping(&self) -> f64 {
        self.hopping
    }
    /// Correlated single-particle loss rate `gamma`.
    pub fn corr_loss(&self) -> f64 {
        self.corr_loss
    }
    /// Single-particle pump rate `kappa`.
    pub fn pump(&self) -> f64 {
        self.pump
    }
    /// Two-particle loss rate `Gamma`.
    pub fn pair_loss(&self) -> f64 {
        self.pair_loss
    }
    /// Dissipative phase in `[0, 2 pi)`.
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn sites(&self) -> usize {
        self.sites
    }
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// On-site term `Delta = i (kappa - 2 gamma)`.
    pub fn onsite(&self) -> C64 {
        C64::new(0.0, self.pump - 2.0 * self.corr_loss)
    }

    /// Hopping from site `j+1` to `j`: `J_+ = -(J + gamma e^{i theta})`.
    pub fn hop_plus(&self) -> C64 {
        -(self.hopping + self.corr_loss * cis(self.theta))
    }

    /// Hopping from site `j-1` to `j`: `J_- = -(J - gamma e^{-i theta})`.
    pub fn hop_minus(&self) -> C64 {
        -(self.hopping - self.corr_loss * cis(-self.theta))
    }

    /// Whether the particle-hole map is a symmetry of the flow (theta in {0, pi}).
    pub fn has_ph_symmetry(&self) -> bool {
        let c = cis(self.theta);
        c.im == 0.0
    }

    /// Amplitude scale `sqrt(kappa / Gamma + 1)` used by divergence and
    /// fixed-point tolerances. Infinite in the linear limit.
    pub fn amplitude_scale(&self) -> f64 {
        if self.pair_loss == 0.0 {
            f64::INFINITY
        } else {
            (self.pump / self.pair_loss + 1.0).sqrt()
        }
    }

    /// Writes the time derivative of `amps` into `out`.
    ///
    /// Allocation free. Open boundaries pad the chain with virtual zero
    /// neighbours; periodic boundaries wrap.
    pub fn rhs_into(&self, amps: &[C64], out: &mut [C64]) -> Result<()> {
        let n = self.sites;
        if amps.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: amps.len() });
        }
        if out.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: out.len() });
        }
        self.rhs_unchecked(amps, out);
        Ok(())
    }

    /// As [`rhs_into`](Self::rhs_into) without the length checks.
    #[inline]
    pub(crate) fn rhs_unchecked(&self, amps: &[C64], out: &mut [C64]) {
        let n = amps.len();
        let gain = self.pump - 2.0 * self.corr_loss;
        let g = self.pair_loss;
        // -i J_+ and -i J_- multiply the right and left neighbours.
        let right = -I * self.hop_plus();
        let left = -I * self.hop_minus();
        let periodic = self.boundary == Boundary::Periodic;
        for s in 0..n {
            let a = amps[s];
            let a_left = if s > 0 {
                amps[s - 1]
            } else if periodic {
                amps[n - 1]
            } else {
                ZERO
            };
            let a_right = if s + 1 < n {
                amps[s + 1]
            } else if periodic {
                amps[0]
            } else {
                ZERO
            };
            out[s] = a * (gain - g * a.norm_sqr()) + right * a_right + left * a_left;
        }
    }

    /// `d/dt alpha` for a state.
    pub fn eom_rhs(&self, state: &LatticeState) -> Result<LatticeState> {
        let mut out = vec![ZERO; self.sites];
        self.rhs_into(&state.amplitudes, &mut out)?;
        Ok(LatticeState { amplitudes: out, time: state.time })
    }

    /// Traveling-wave decay rate `gamma_q = 2 gamma (1 + sin(q + theta))`.
    pub fn gamma_q(&self, q: f64) -> f64 {
        2.0 * self.corr_loss * (1.0 + (q + self.theta).sin())
    }

    /// Traveling-wave energy `omega_q = -2 J cos q`.
    pub fn omega_q(&self, q: f64) -> f64 {
        -2.0 * self.hopping * q.cos()
    }
}

/// Complex amplitude per site at one time instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeState {
    pub amplitudes: Vec<C64>,
    pub time: f64,
}

impl LatticeState {
    pub fn new(amplitudes: Vec<C64>, time: f64) -> Self {
        LatticeState { amplitudes, time }
    }

    pub fn vacuum(n: usize) -> Self {
        LatticeState { amplitudes: vec![ZERO; n], time: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.amplitudes)
    }

    /// Checks the state against `params` (length and finiteness).
    pub fn check(&self, params: &ModelParams) -> Result<()> {
        if self.len() != params.sites() {
            return Err(Error::DimensionMismatch { expected: params.sites(), got: self.len() });
        }
        if !self.is_finite() {
            return Err(Error::InvalidParameter("state contains non-finite amplitudes".into()));
        }
        Ok(())
    }
}

/// Largest modulus; NaN if any entry is NaN.
pub fn max_abs(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm()).fold(0.0, |m, x| if x.is_nan() || m.is_nan() { f64::NAN } else { m.max(x) })
}

/// Sign `e^{i pi j}` for storage slot `s` (site `j = s + 1`).
#[inline]
fn ph_sign(s: usize) -> f64 {
    if s % 2 == 0 {
        -1.0
    } else {
        1.0
    }
}

/// Applies `a_j -> e^{i pi j} conj(a_j)` to a slice of amplitudes (or of
/// time derivatives, which transform the same way).
pub fn ph_map(amps: &[C64]) -> Vec<C64> {
    amps.iter().enumerate().map(|(s, a)| a.conj() * ph_sign(s)).collect()
}

/// Particle-hole conjugate of a state; an involution.
pub fn ph_conjugate(state: &LatticeState) -> LatticeState {
    LatticeState { amplitudes: ph_map(&state.amplitudes), time: state.time }
}

/// Global U(1) rotation by `phi`.
pub fn u1_rotate(state: &LatticeState, phi: f64) -> LatticeState {
    let z = cis(phi);
    LatticeState {
        amplitudes: state.amplitudes.iter().map(|a| a * z).collect(),
        time: state.time,
    }
}

/// The periodic traveling wave `alpha_j = r_q e^{i q j}` at `t = 0`,
/// with `r_q = sqrt((kappa - gamma_q) / Gamma)` and the phase origin at `j = 0`.
pub fn traveling_wave_state(params: &ModelParams, q: f64) -> Result<LatticeState> {
    let n = params.sites();
    let m = q * n as f64 / TAU;
    if (m - m.round()).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "q = {q} is not on the {n}-point momentum grid"
        )));
    }
    let gq = params.gamma_q(q);
    if params.pump() <= gq || params.pair_loss() == 0.0 {
        return Err(Error::WaveDoesNotExist { q, kappa: params.pump(), gamma_q: gq });
    }
    let r = ((params.pump() - gq) / params.pair_loss()).sqrt();
    let amps = (1..=n).map(|j| r * cis(q * j as f64)).collect();
    Ok(LatticeState::new(amps, 0.0))
}
