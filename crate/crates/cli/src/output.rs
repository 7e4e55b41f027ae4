//! Atomic file output, run manifests and session-log loading.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use teamdm::SessionLog;

use crate::error::{CliError, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Writes `bytes` to a temporary sibling of `path` and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| CliError::usage(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::write(path, e));
    }
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::write(path, e))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Serializes `rows` as CSV with a header row.
pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| CliError::write(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::write(path, e))?;
    write_atomic(path, &bytes)
}

/// Writes raw records; the first is the header.
pub fn write_csv_records(path: &Path, records: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.write_record(r).map_err(|e| CliError::write(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::write(path, e))?;
    write_atomic(path, &bytes)
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// Provenance written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    /// SHA-256 of the effective configuration as JSON.
    pub config_hash: String,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub started_at: String,
    pub finished_at: String,
}

pub fn timestamp() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn config_hash(config: &impl Serialize) -> String {
    let json = serde_json::to_vec(config).expect("configuration serializes");
    Sha256::digest(&json)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl RunManifest {
    pub fn begin(config: &impl Serialize, seed: Option<u64>) -> Self {
        Self {
            command_line: std::env::args().collect(),
            config_hash: config_hash(config),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_at: timestamp(),
            finished_at: String::new(),
        }
    }

    pub fn finish(mut self, path: &Path) -> CliResult<()> {
        self.finished_at = timestamp();
        write_json(path, &self)
    }
}

/// Loads every `*.json` session log in `dir`, in file-name order.
///
/// Surveys are normalized on ingest; a log that still fails validation is
/// a usage error listing its violations.
pub fn load_logs(dir: &Path) -> CliResult<(Vec<SessionLog>, Vec<PathBuf>)> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::read(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .filter(|p| p.file_name().is_some_and(|n| n != MANIFEST_NAME))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::usage(format!(
            "no session logs (*.json) in {}",
            dir.display()
        )));
    }
    let mut logs = Vec::with_capacity(paths.len());
    for p in &paths {
        let f = fs::File::open(p).map_err(|e| CliError::read(p, e))?;
        let mut log = SessionLog::from_reader(std::io::BufReader::new(f))
            .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
        log.normalize_surveys();
        let report = log.validate();
        if !report.is_valid() {
            return Err(CliError::usage(format!(
                "{} is not a valid session log:\n{}",
                p.display(),
                report.to_json_lines()
            )));
        }
        logs.push(log);
    }
    Ok((logs, paths))
}
