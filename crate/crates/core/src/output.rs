//! Output files, number formatting and the run manifest.
//!
//! Every command collects its files in memory, then [`OutputSet::commit`]
//! writes them, adds `manifest.json` with SHA-256 digests and re-checks the
//! digests. If anything fails the files written so far are removed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{QsdError, Result};
use crate::scalar::Scalar;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Formats with six significant digits, dropping trailing zeros. Uses
/// exponent notation below `1e-4` and from `1e6` up.
pub fn sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let fixed = format!("{v:.decimals$}");
        let fixed = if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        };
        if fixed == "-0" { "0".into() } else { fixed }
    } else {
        let m = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{m}e{exp}")
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// `episode,value` with 1-based episodes.
pub fn series_csv<T: Scalar>(values: &[T]) -> Vec<u8> {
    csv_bytes(
        &["episode", "value"],
        values
            .iter()
            .enumerate()
            .map(|(i, v)| vec![(i + 1).to_string(), sig6(v.as_f64())]),
    )
}

/// Generic table writer for rows of already formatted cells.
pub fn table_csv(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    csv_bytes(header, rows)
}

/// Name of the per-scale subdirectory, e.g. `scale_0.08`.
pub fn scale_dir<T: Scalar>(scale: T) -> String {
    format!("scale_{}", sig6(scale.as_f64()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started_unix: u64,
    pub finished_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    /// Only present when requested, so that repeated runs stay identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamps: Option<Timestamps>,
    pub files: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Files of one command, keyed by path relative to the output directory.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: BTreeMap<String, Vec<u8>>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, rel: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        let rel = rel.into();
        assert_ne!(rel, MANIFEST_FILE, "manifest is written by commit");
        self.files.insert(rel, bytes.into());
    }

    pub fn add_json<S: Serialize>(&mut self, rel: impl Into<String>, value: &S) {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.add(rel, text);
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    /// Writes every file plus the manifest under `out`. `out` must be absent
    /// or empty.
    pub fn commit(
        self,
        out: &Path,
        command: &str,
        seed: Option<u64>,
        config: serde_json::Value,
        timestamps: Option<Timestamps>,
    ) -> Result<RunManifest> {
        let created_root = !out.exists();
        if !created_root {
            let non_empty = fs::read_dir(out)
                .map_err(|e| QsdError::io(out, e))?
                .next()
                .is_some();
            if non_empty {
                return Err(QsdError::Input(format!(
                    "output directory {} is not empty",
                    out.display()
                )));
            }
        }
        let manifest = RunManifest {
            artifact: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config,
            timestamps,
            files: self
                .files
                .iter()
                .map(|(p, b)| FileDigest {
                    path: p.clone(),
                    sha256: sha256_hex(b),
                    bytes: b.len() as u64,
                })
                .collect(),
        };
        let mut manifest_text = serde_json::to_string_pretty(&manifest).expect("serializable");
        manifest_text.push('\n');

        let mut written: Vec<PathBuf> = Vec::new();
        let mut dirs: Vec<PathBuf> = Vec::new();
        let result = (|| -> Result<()> {
            for (rel, bytes) in self
                .files
                .iter()
                .map(|(p, b)| (p.as_str(), b.as_slice()))
                .chain(std::iter::once((MANIFEST_FILE, manifest_text.as_bytes())))
            {
                let path = out.join(rel);
                let parent = path.parent().expect("joined path has a parent");
                if !parent.exists() {
                    let mut missing = Vec::new();
                    let mut p = parent;
                    while !p.exists() {
                        missing.push(p.to_path_buf());
                        match p.parent() {
                            Some(up) => p = up,
                            None => break,
                        }
                    }
                    fs::create_dir_all(parent).map_err(|e| QsdError::io(parent, e))?;
                    dirs.extend(missing);
                }
                fs::write(&path, bytes).map_err(|e| QsdError::io(&path, e))?;
                written.push(path);
            }
            verify_manifest(out, &manifest)
        })();

        if let Err(e) = result {
            for f in &written {
                let _ = fs::remove_file(f);
            }
            // deepest first
            dirs.sort_by_key(|d| std::cmp::Reverse(d.components().count()));
            for d in &dirs {
                let _ = fs::remove_dir(d);
            }
            if created_root {
                let _ = fs::remove_dir(out);
            }
            return Err(e);
        }
        Ok(manifest)
    }
}

/// Re-reads every listed file and compares its digest.
pub fn verify_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    for f in &manifest.files {
        let path = dir.join(&f.path);
        let bytes = fs::read(&path).map_err(|e| QsdError::io(&path, e))?;
        if sha256_hex(&bytes) != f.sha256 {
            return Err(QsdError::Input(format!("digest mismatch for {}", path.display())));
        }
    }
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| QsdError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| QsdError::json(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(0.1), "0.1");
        assert_eq!(sig6(15.4523456), "15.4523");
        assert_eq!(sig6(2.0f64.sqrt() * 2.0), "2.82843");
        assert_eq!(sig6(-0.01), "-0.01");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(0.000012345678), "1.23457e-5");
        assert_eq!(sig6(0.0000012), "1.2e-6");
        assert_eq!(sig6(99.99999), "100");
        assert_eq!(sig6(-1e-12), "-1e-12");
    }

    #[test]
    fn series_layout() {
        let text = String::from_utf8(series_csv(&[0.5f64, 1.0 / 3.0])).unwrap();
        assert_eq!(text, "episode,value\n1,0.5\n2,0.333333\n");
        assert_eq!(scale_dir(0.1f64), "scale_0.1");
        assert_eq!(scale_dir(0.0f64), "scale_0");
    }

    #[test]
    fn commit_writes_manifest_and_digests() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("run");
        let mut set = OutputSet::new();
        set.add("a.csv", "x\n");
        set.add("sub/b.csv", "y\n");
        let m = set.commit(&out, "test", Some(1), serde_json::json!({}), None).unwrap();
        assert_eq!(m.files.len(), 2);
        assert_eq!(read_manifest(&out).unwrap(), m);
        verify_manifest(&out, &m).unwrap();
        let text = fs::read_to_string(out.join(MANIFEST_FILE)).unwrap();
        assert!(!text.contains("timestamps"));
    }

    #[test]
    fn refuses_non_empty_directory() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("stale"), "").unwrap();
        let mut set = OutputSet::new();
        set.add("a.csv", "x\n");
        assert!(set.commit(tmp.path(), "test", None, serde_json::json!({}), None).is_err());
        assert!(!tmp.path().join("a.csv").exists());
    }

    #[test]
    fn failure_removes_partial_output() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("run");
        let mut set = OutputSet::new();
        set.add("a.csv", "x\n");
        // a file and a directory cannot share a path
        set.add("a.csv/b.csv", "y\n");
        assert!(set.commit(&out, "test", None, serde_json::json!({}), None).is_err());
        assert!(!out.exists());
    }
}
