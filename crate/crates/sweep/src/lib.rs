//! Parallel `(kappa, gamma)` phase-diagram sweeps over many initial
//! conditions per cell, with attractor deduplication, streamed NDJSON output,
//! atomic checkpoints and resume.
//!
//! Output directory layout:
//!
//! | file | content |
//! |---|---|
//! | `manifest.json` | resolved spec, spec hash, code version, grids |
//! | `cells.partial.ndjson` | cells in completion order (append only) |
//! | `checkpoint.json` | committed byte length and SHA-256 of the partial file |
//! | `diagram.ndjson` | final cells sorted by index |
//! | `SHA256SUMS` | checksum of `diagram.ndjson` |

mod boundary;
mod cell;
mod spec;
mod store;

use std::path::PathBuf;

pub use boundary::{extract_boundary, polylines_to_csv, Polyline};
pub use cell::{deduplicate, evaluate_cell, evaluate_cell_with_seeds, same_attractor, AttractorSummary, Label, PhaseCell};
pub use spec::{derive_seed, linear_grid, AnalysisToggles, DedupTolerances, SweepSpec};
pub use store::{load_diagram, resume_sweep, run_sweep, Manifest, PhaseDiagram, RunOptions, SweepStatus};

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Model(#[from] condensate_core::Error),
    #[error("invalid sweep spec: {0}")]
    InvalidSpec(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("integrity check failed: {0}")]
    Integrity(String),
    #[error("spec hash mismatch: checkpoint has {stored}, provided spec hashes to {provided}")]
    SpecMismatch { stored: String, provided: String },
    #[error("{0} already holds a sweep; use resume")]
    AlreadyExists(PathBuf),
}

pub type Result<T> = std::result::Result<T, SweepError>;
