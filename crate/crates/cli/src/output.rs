use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Defaults, Echo};
use crate::error::CliError;

/// Write to a temporary sibling, fsync, rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("part");
    let mut f = File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Manifest written next to the outputs of a single-run command.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    /// Resolved configuration, identical to the echoed `config.toml`.
    pub config: serde_json::Value,
    /// Fields that were not set by a flag or the config file.
    pub defaulted: Vec<String>,
    pub outputs: Vec<OutputFile>,
    pub summary: serde_json::Value,
}

pub struct RunDir {
    path: PathBuf,
    outputs: Vec<OutputFile>,
}

impl RunDir {
    pub fn create(path: &Path) -> Result<RunDir, CliError> {
        fs::create_dir_all(path).map_err(|e| CliError::io(path, e))?;
        Ok(RunDir { path: path.to_path_buf(), outputs: vec![] })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&self.path.join(name), bytes)?;
        self.outputs.push(OutputFile { file: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    /// Echoes the config and writes `manifest.json`.
    pub fn finish(mut self, command: &str, echo: &Echo, defaults: Defaults, summary: serde_json::Value) -> Result<(), CliError> {
        self.write("config.toml", echo.to_toml().as_bytes())?;
        let m = RunManifest {
            command: command.to_string(),
            code_version: condensate_core::CODE_VERSION.to_string(),
            config: echo.to_json(),
            defaulted: defaults.fields,
            outputs: self.outputs,
            summary,
        };
        let mut s = serde_json::to_string_pretty(&m).map_err(|e| CliError::Io(e.to_string()))?;
        s.push('\n');
        write_atomic(&self.path.join("manifest.json"), s.as_bytes())
    }
}

/// Minimal CSV builder. Floats use the shortest round-trip form; `None` is
/// an empty field.
pub struct Csv {
    buf: String,
}

pub trait Field {
    fn put(&self, out: &mut String);
}

impl Field for f64 {
    fn put(&self, out: &mut String) {
        let _ = write!(out, "{self}");
    }
}
impl Field for usize {
    fn put(&self, out: &mut String) {
        let _ = write!(out, "{self}");
    }
}
impl Field for u64 {
    fn put(&self, out: &mut String) {
        let _ = write!(out, "{self}");
    }
}
impl Field for bool {
    fn put(&self, out: &mut String) {
        let _ = write!(out, "{self}");
    }
}
impl Field for &str {
    fn put(&self, out: &mut String) {
        if self.contains([',', '"', '\n']) {
            let _ = write!(out, "\"{}\"", self.replace('"', "\"\""));
        } else {
            out.push_str(self);
        }
    }
}
impl Field for String {
    fn put(&self, out: &mut String) {
        self.as_str().put(out)
    }
}
impl<T: Field> Field for Option<T> {
    fn put(&self, out: &mut String) {
        if let Some(v) = self {
            v.put(out)
        }
    }
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        Csv { buf: header.join(",") + "\n" }
    }

    pub fn row(&mut self, fields: &[&dyn Field]) {
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            f.put(&mut self.buf);
        }
        self.buf.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}
