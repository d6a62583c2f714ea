use std::path::PathBuf;

use condensate_core::chaos::LyapunovConfig;
use condensate_core::dynamics::IntegrationConfig;
use condensate_core::ModelParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Result, SweepError};

/// Which analyses run on each time-dependent attractor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisToggles {
    /// Period detection on every time-dependent attractor (always done for
    /// `DynamicMixed`, which needs it for deduplication).
    pub period: bool,
    /// Lyapunov spectrum of one representative per deduplicated attractor.
    pub lyapunov: Option<LyapunovConfig>,
}

impl Default for AnalysisToggles {
    fn default() -> Self {
        AnalysisToggles { period: true, lyapunov: None }
    }
}

/// Attractor identity tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DedupTolerances {
    pub omega: f64,
    pub q: f64,
    /// Relative amplitude difference.
    pub amplitude: f64,
    /// Relative period difference (Mixed attractors).
    pub period: f64,
    /// Largest edge_extent difference, in sites.
    pub edge_extent: usize,
}

impl Default for DedupTolerances {
    fn default() -> Self {
        DedupTolerances { omega: 1e-2, q: 1e-2, amplitude: 1e-2, period: 1e-2, edge_extent: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub params_base: ModelParams,
    pub kappa_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub n_initial_conditions: usize,
    /// Initial-condition `i` uses `ic_scales[i % len]`.
    pub ic_scales: Vec<f64>,
    pub base_seed: u64,
    #[serde(default)]
    pub integration: IntegrationConfig,
    #[serde(default)]
    pub analysis: AnalysisToggles,
    /// `|<omega>|` below this is `DynamicMixed` (units `J`).
    #[serde(default = "default_omega_tol")]
    pub omega_tol: f64,
    #[serde(default)]
    pub dedup: DedupTolerances,
    /// Not part of the spec hash.
    pub output_path: PathBuf,
}

fn default_omega_tol() -> f64 {
    1e-3
}

/// Inclusive grid `start, start + step, ...` up to `stop` (rounded so the
/// endpoint is hit when it lies on the lattice), each point snapped to 12 decimals.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || stop < start {
        return vec![start];
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    // Snap to 12 decimals so 0.2 + 1 * 0.4 is stored as 0.6.
    (0..=n).map(|i| format!("{:.12}", start + i as f64 * step).parse().unwrap()).collect()
}

impl SweepSpec {
    /// Desk-scale defaults: N = 100, kappa in [0, 3] and gamma in [0, 1] at
    /// step 0.05, 8 initial conditions per cell.
    pub fn desk_scale(output_path: impl Into<PathBuf>) -> Self {
        SweepSpec {
            params_base: ModelParams::builder().sites(100).build().expect("static defaults are valid"),
            kappa_grid: linear_grid(0.0, 3.0, 0.05),
            gamma_grid: linear_grid(0.0, 1.0, 0.05),
            n_initial_conditions: 8,
            ic_scales: vec![0.1],
            base_seed: 0,
            integration: IntegrationConfig::default(),
            analysis: AnalysisToggles::default(),
            omega_tol: default_omega_tol(),
            dedup: DedupTolerances::default(),
            output_path: output_path.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SweepError::InvalidSpec(m.to_string()));
        if self.kappa_grid.is_empty() || self.gamma_grid.is_empty() {
            return bad("grids must be nonempty");
        }
        if self.kappa_grid.iter().chain(&self.gamma_grid).any(|x| !(x.is_finite() && *x >= 0.0)) {
            return bad("grid values must be finite and >= 0");
        }
        if self.n_initial_conditions == 0 {
            return bad("n_initial_conditions must be >= 1");
        }
        if self.ic_scales.is_empty() || self.ic_scales.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return bad("ic_scales must be nonempty, finite and >= 0");
        }
        if !(self.omega_tol > 0.0) {
            return bad("omega_tol must be > 0");
        }
        self.integration.validate()?;
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.kappa_grid.len() * self.gamma_grid.len()
    }

    /// Row-major cell layout: gamma is the slow index.
    pub fn cell_coords(&self, index: usize) -> (f64, f64) {
        let nk = self.kappa_grid.len();
        (self.kappa_grid[index % nk], self.gamma_grid[index / nk])
    }

    pub fn cell_params(&self, index: usize) -> Result<ModelParams> {
        let (kappa, gamma) = self.cell_coords(index);
        Ok(self.params_base.to_builder().pump(kappa).corr_loss(gamma).build()?)
    }

    pub fn ic_scale(&self, ic: usize) -> f64 {
        self.ic_scales[ic % self.ic_scales.len()]
    }

    /// SHA-256 of the canonical JSON form without `output_path`.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("spec serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("output_path");
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}

/// Initial-condition seed: the first 8 bytes (little endian) of
/// `SHA-256(base_seed || cell || ic)`, each field as u64 little endian.
pub fn derive_seed(base_seed: u64, cell: usize, ic: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(base_seed.to_le_bytes());
    h.update((cell as u64).to_le_bytes());
    h.update((ic as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_hits_endpoint() {
        let g = linear_grid(0.0, 3.0, 0.05);
        assert_eq!(g.len(), 61);
        assert!((g[60] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn hash_ignores_output_path() {
        let a = SweepSpec::desk_scale("a");
        let b = SweepSpec::desk_scale("b");
        assert_eq!(a.hash(), b.hash());
        let c = SweepSpec { base_seed: 1, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn seeds_differ_per_cell_and_ic() {
        let s = derive_seed(7, 3, 0);
        assert_eq!(s, derive_seed(7, 3, 0));
        assert_ne!(s, derive_seed(7, 3, 1));
        assert_ne!(s, derive_seed(7, 4, 0));
        assert_ne!(s, derive_seed(8, 3, 0));
    }

    #[test]
    fn cell_layout_is_row_major() {
        let mut s = SweepSpec::desk_scale("x");
        s.kappa_grid = vec![0.1, 0.2, 0.3];
        s.gamma_grid = vec![1.0, 2.0];
        assert_eq!(s.cell_coords(0), (0.1, 1.0));
        assert_eq!(s.cell_coords(2), (0.3, 1.0));
        assert_eq!(s.cell_coords(4), (0.2, 2.0));
    }
}
