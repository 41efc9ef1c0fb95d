use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use phi_heat_core::{PhiError, Result};

/// Header plus rows, written with `,` separators.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    /// Column by header name.
    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

pub fn fmt_f(v: f64) -> String {
    format!("{v}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Flat record of a run: config echo, timings, files, checks.
#[derive(Debug, Clone, Default)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Vec<(String, String)>,
    pub code_version: String,
    pub stages: Vec<(String, f64)>,
    /// relative path, sha256, bytes
    pub files: Vec<(PathBuf, String, usize)>,
    pub checks: Vec<(String, bool)>,
    pub failed_stage: Option<(String, String)>,
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        Self { subcommand: subcommand.to_string(), code_version: env!("CARGO_PKG_VERSION").to_string(), ..Default::default() }
    }

    pub fn passed(&self) -> bool {
        self.failed_stage.is_none() && self.checks.iter().all(|c| c.1)
    }

    /// Writes `contents` under `root/rel` and records its checksum.
    pub fn emit(&mut self, root: &Path, rel: impl Into<PathBuf>, contents: &str) -> Result<()> {
        let rel = rel.into();
        let path = root.join(&rel);
        if let Some(p) = path.parent() {
            fs::create_dir_all(p).map_err(|e| io_err(&path, e))?;
        }
        fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
        self.files.push((rel, sha256_hex(contents.as_bytes()), contents.len()));
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "subcommand = {}", self.subcommand);
        let _ = writeln!(s, "code_version = {}", self.code_version);
        for (k, v) in &self.config {
            let _ = writeln!(s, "config.{k} = {v}");
        }
        for (k, v) in &self.stages {
            let _ = writeln!(s, "stage.{k}.seconds = {v:.3}");
        }
        for (p, h, n) in &self.files {
            let _ = writeln!(s, "file.{} = sha256:{h} bytes:{n}", p.display());
        }
        for (k, v) in &self.checks {
            let _ = writeln!(s, "check.{k} = {}", if *v { "pass" } else { "fail" });
        }
        if let Some((stage, msg)) = &self.failed_stage {
            let _ = writeln!(s, "failed_stage = {stage}");
            let _ = writeln!(s, "failed_message = {}", msg.replace('\n', " "));
        }
        let _ = writeln!(s, "status = {}", if self.passed() { "pass" } else { "fail" });
        s
    }

    pub fn write(&self, root: &Path) -> Result<PathBuf> {
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        let path = root.join("manifest.txt");
        fs::write(&path, self.render()).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }
}

fn io_err(p: &Path, e: std::io::Error) -> PhiError {
    PhiError::Configuration(format!("cannot write {}: {e}", p.display()))
}
