use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cell::{evaluate_cell, PhaseCell};
use crate::spec::SweepSpec;
use crate::{Result, SweepError};

const MANIFEST: &str = "manifest.json";
const PARTIAL: &str = "cells.partial.ndjson";
const CHECKPOINT: &str = "checkpoint.json";
const DIAGRAM: &str = "diagram.ndjson";
const SUMS: &str = "SHA256SUMS";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub spec_hash: String,
    pub code_version: String,
    pub n_cells: usize,
    pub kappa_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    /// Fully resolved spec, defaults included.
    pub spec: SweepSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Checkpoint {
    spec_hash: String,
    cells: usize,
    bytes: u64,
    sha256: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the available parallelism.
    pub threads: Option<usize>,
    /// Stop after committing this many new cells (simulated interruption).
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct PhaseDiagram {
    pub spec: SweepSpec,
    /// Sorted by cell index.
    pub cells: Vec<PhaseCell>,
}

#[derive(Debug, Clone)]
pub enum SweepStatus {
    Complete(PhaseDiagram),
    Interrupted { completed: usize, total: usize },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> SweepError + '_ {
    move |source| SweepError::Io { path: path.to_path_buf(), source }
}

/// Write to `path.tmp`, fsync, rename over `path`.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp).map_err(io(&tmp))?;
        f.write_all(bytes).map_err(io(&tmp))?;
        f.sync_all().map_err(io(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|source| SweepError::Json { path: path.to_path_buf(), source })
}

fn to_json_pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

/// Append-only cell stream with a running digest of the committed prefix.
struct Stream {
    path: PathBuf,
    checkpoint: PathBuf,
    file: File,
    bytes: u64,
    hasher: Sha256,
    cells: usize,
    spec_hash: String,
}

impl Stream {
    fn commit(&mut self, line: &str) -> Result<()> {
        let mut buf = String::with_capacity(line.len() + 1);
        buf.push_str(line);
        buf.push('\n');
        self.file.write_all(buf.as_bytes()).map_err(io(&self.path))?;
        self.file.sync_data().map_err(io(&self.path))?;
        self.hasher.update(buf.as_bytes());
        self.bytes += buf.len() as u64;
        self.cells += 1;
        let cp = Checkpoint {
            spec_hash: self.spec_hash.clone(),
            cells: self.cells,
            bytes: self.bytes,
            sha256: hex::encode(self.hasher.clone().finalize()),
        };
        write_atomic(&self.checkpoint, &to_json_pretty(&cp))
    }
}

fn manifest_for(spec: &SweepSpec) -> Manifest {
    Manifest {
        spec_hash: spec.hash(),
        code_version: condensate_core::CODE_VERSION.to_string(),
        n_cells: spec.n_cells(),
        kappa_grid: spec.kappa_grid.clone(),
        gamma_grid: spec.gamma_grid.clone(),
        spec: spec.clone(),
    }
}

/// Starts a sweep in `spec.output_path`, which must not already hold one.
pub fn run_sweep(spec: &SweepSpec, opts: &RunOptions) -> Result<SweepStatus> {
    spec.validate()?;
    let dir = spec.output_path.clone();
    fs::create_dir_all(&dir).map_err(io(&dir))?;
    if dir.join(MANIFEST).exists() {
        return Err(SweepError::AlreadyExists(dir));
    }
    let manifest = manifest_for(spec);
    let partial = dir.join(PARTIAL);
    File::create(&partial).map_err(io(&partial))?;
    let stream = Stream {
        file: OpenOptions::new().append(true).open(&partial).map_err(io(&partial))?,
        path: partial,
        checkpoint: dir.join(CHECKPOINT),
        bytes: 0,
        hasher: Sha256::new(),
        cells: 0,
        spec_hash: manifest.spec_hash.clone(),
    };
    let cp = Checkpoint { spec_hash: manifest.spec_hash.clone(), cells: 0, bytes: 0, sha256: hex::encode(Sha256::digest(b"")) };
    write_atomic(&stream.checkpoint, &to_json_pretty(&cp))?;
    write_atomic(&dir.join(MANIFEST), &to_json_pretty(&manifest))?;
    execute(spec, &dir, BTreeMap::new(), stream, opts)
}

/// Continues the sweep stored in `dir`. With `expected`, refuses to run if
/// its hash differs from the stored one. A complete sweep is returned as is.
pub fn resume_sweep(dir: &Path, expected: Option<&SweepSpec>, opts: &RunOptions) -> Result<SweepStatus> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    let mut spec = manifest.spec.clone();
    if spec.hash() != manifest.spec_hash {
        return Err(SweepError::Integrity("manifest spec does not match its recorded hash".into()));
    }
    if let Some(e) = expected {
        let provided = e.hash();
        if provided != manifest.spec_hash {
            return Err(SweepError::SpecMismatch { stored: manifest.spec_hash, provided });
        }
    }
    spec.output_path = dir.to_path_buf();
    if dir.join(DIAGRAM).exists() {
        return load_diagram(dir).map(SweepStatus::Complete);
    }
    let cp: Checkpoint = read_json(&dir.join(CHECKPOINT))?;
    if cp.spec_hash != manifest.spec_hash {
        return Err(SweepError::SpecMismatch { stored: cp.spec_hash, provided: manifest.spec_hash });
    }
    let partial = dir.join(PARTIAL);
    let mut raw = Vec::new();
    File::open(&partial).map_err(io(&partial))?.read_to_end(&mut raw).map_err(io(&partial))?;
    if (raw.len() as u64) < cp.bytes {
        return Err(SweepError::Integrity(format!(
            "{PARTIAL} holds {} bytes, checkpoint committed {}",
            raw.len(),
            cp.bytes
        )));
    }
    let prefix = &raw[..cp.bytes as usize];
    let hasher = Sha256::new_with_prefix(prefix);
    if hex::encode(hasher.clone().finalize()) != cp.sha256 {
        return Err(SweepError::Integrity(format!("checksum mismatch in {PARTIAL}")));
    }
    let mut done = BTreeMap::new();
    for line in prefix.split(|&b| b == b'\n').filter(|l| !l.is_empty()) {
        let text = std::str::from_utf8(line).map_err(|_| SweepError::Integrity("non-UTF-8 cell line".into()))?;
        let cell: PhaseCell = serde_json::from_str(text).map_err(|source| SweepError::Json { path: partial.clone(), source })?;
        if cell.index >= spec.n_cells() || done.insert(cell.index, text.to_string()).is_some() {
            return Err(SweepError::Integrity(format!("bad or duplicate cell index {}", cell.index)));
        }
    }
    if done.len() != cp.cells {
        return Err(SweepError::Integrity("cell count does not match checkpoint".into()));
    }
    // Drop anything written after the last checkpoint; those cells rerun.
    let file = OpenOptions::new().write(true).open(&partial).map_err(io(&partial))?;
    file.set_len(cp.bytes).map_err(io(&partial))?;
    drop(file);
    let stream = Stream {
        file: OpenOptions::new().append(true).open(&partial).map_err(io(&partial))?,
        path: partial,
        checkpoint: dir.join(CHECKPOINT),
        bytes: cp.bytes,
        hasher,
        cells: cp.cells,
        spec_hash: manifest.spec_hash,
    };
    execute(&spec, dir, done, stream, opts)
}

fn execute(
    spec: &SweepSpec,
    dir: &Path,
    mut done: BTreeMap<usize, String>,
    mut stream: Stream,
    opts: &RunOptions,
) -> Result<SweepStatus> {
    let total = spec.n_cells();
    let todo: Vec<usize> = (0..total).filter(|i| !done.contains_key(i)).collect();
    let limit = opts.stop_after.unwrap_or(usize::MAX);
    let claimed = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = opts.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| SweepError::InvalidSpec(format!("thread pool: {e}")))?;
    let (tx, rx) = mpsc::channel::<(usize, String)>();
    let written = std::thread::scope(|scope| {
        let writer = scope.spawn(|| -> Result<Vec<(usize, String)>> {
            let mut out = Vec::new();
            for (i, line) in rx {
                if let Err(e) = stream.commit(&line) {
                    abort.store(true, Ordering::SeqCst);
                    return Err(e);
                }
                out.push((i, line));
            }
            Ok(out)
        });
        pool.install(|| {
            todo.par_iter().for_each_with(tx, |tx, &i| {
                if abort.load(Ordering::SeqCst) || claimed.fetch_add(1, Ordering::SeqCst) >= limit {
                    return;
                }
                let cell = evaluate_cell(spec, i).unwrap_or_else(|e| {
                    let (kappa, gamma) = spec.cell_coords(i);
                    PhaseCell {
                        index: i,
                        kappa,
                        gamma,
                        attractors: vec![],
                        multistable: false,
                        seed: vec![],
                        warnings: vec![format!("cell failed: {e}")],
                    }
                });
                let line = serde_json::to_string(&cell).expect("cells serialize");
                let _ = tx.send((i, line));
            });
        });
        writer.join().expect("writer thread panicked")
    })?;
    done.extend(written);
    if done.len() < total {
        return Ok(SweepStatus::Interrupted { completed: done.len(), total });
    }
    let mut body = String::new();
    for line in done.values() {
        body.push_str(line);
        body.push('\n');
    }
    let digest = hex::encode(Sha256::digest(body.as_bytes()));
    write_atomic(&dir.join(DIAGRAM), body.as_bytes())?;
    write_atomic(&dir.join(SUMS), format!("{digest}  {DIAGRAM}\n").as_bytes())?;
    load_diagram(dir).map(SweepStatus::Complete)
}

/// Reads a finished sweep, verifying `diagram.ndjson` against `SHA256SUMS`.
pub fn load_diagram(dir: &Path) -> Result<PhaseDiagram> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    let path = dir.join(DIAGRAM);
    let body = fs::read(&path).map_err(io(&path))?;
    let sums_path = dir.join(SUMS);
    let sums = fs::read_to_string(&sums_path).map_err(io(&sums_path))?;
    let expected = sums.split_whitespace().next().unwrap_or_default();
    if hex::encode(Sha256::digest(&body)) != expected {
        return Err(SweepError::Integrity(format!("checksum mismatch in {DIAGRAM}")));
    }
    let mut cells = Vec::with_capacity(manifest.n_cells);
    for line in BufReader::new(body.as_slice()).lines() {
        let line = line.map_err(io(&path))?;
        cells.push(serde_json::from_str(&line).map_err(|source| SweepError::Json { path: path.clone(), source })?);
    }
    let mut spec = manifest.spec;
    spec.output_path = dir.to_path_buf();
    Ok(PhaseDiagram { spec, cells })
}
