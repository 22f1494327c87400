use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Fixed-point text for CSV cells, without a sign on values that round to zero.
pub fn fx(x: f64, digits: usize) -> String {
    let s = format!("{x:.digits$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|c| c == b'0' || c == b'.') => rest.to_string(),
        _ => s,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Everything a run writes, held in memory until the run has succeeded.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, path: PathBuf, contents: impl Into<Vec<u8>>) {
        self.files.push((path, contents.into()));
    }

    fn digests(&self) -> Vec<FileDigest> {
        self.files.iter().map(|(p, c)| FileDigest { path: p.display().to_string(), sha256: sha256_hex(c) }).collect()
    }

    pub fn write_all(&self) -> Result<()> {
        for (path, contents) in &self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Phase {
    pub name: String,
    pub seconds: f64,
}

#[derive(Default)]
pub struct Phases(Vec<Phase>);

impl Phases {
    pub fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.0.push(Phase { name: name.to_string(), seconds: t.elapsed().as_secs_f64() });
        out
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub config: gep_core::StudyConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub phases: Vec<Phase>,
}

/// Digest every regular file directly inside `data` plus the extra inputs.
pub fn input_digests(data: &Path, extra: &[&Path]) -> Result<Vec<FileDigest>> {
    let mut paths: Vec<PathBuf> = Vec::new();
    if let Ok(rd) = std::fs::read_dir(data) {
        for e in rd.flatten() {
            if e.file_type().map(|t| t.is_file()).unwrap_or(false) {
                paths.push(e.path());
            }
        }
    }
    paths.sort();
    paths.extend(extra.iter().map(|p| p.to_path_buf()));
    paths
        .into_iter()
        .map(|p| {
            let bytes = std::fs::read(&p).with_context(|| format!("reading {}", p.display()))?;
            Ok(FileDigest { path: p.display().to_string(), sha256: sha256_hex(&bytes) })
        })
        .collect()
}

pub fn finish(
    mut outputs: Outputs,
    out_dir: &Path,
    seed: u64,
    threads: Option<usize>,
    config: &gep_core::StudyConfig,
    inputs: Vec<FileDigest>,
    phases: Phases,
) -> Result<()> {
    let manifest = RunManifest {
        tool: "gep",
        version: env!("CARGO_PKG_VERSION"),
        command: std::env::args().skip(1).collect(),
        seed,
        threads,
        config: config.clone(),
        inputs,
        outputs: outputs.digests(),
        phases: phases.0,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    outputs.add(out_dir.join("manifest.json"), text);
    outputs.write_all()
}
