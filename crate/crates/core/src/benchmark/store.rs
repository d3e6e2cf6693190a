//! Run-directory persistence: manifest, per-report records, and emitted
//! tables live under `runs/<system>/<run-id>/`.
//!
//! Records are written atomically (temp file + rename) so an interrupted
//! run leaves only complete records behind, and a resume can trust every
//! file it finds.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use super::{BenchmarkError, ReportRecord, RunManifest};

const MANIFEST_FILE: &str = "manifest.json";
const REPORTS_DIR: &str = "reports";

fn io_err(path: &Path, source: std::io::Error) -> BenchmarkError {
    BenchmarkError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn manifest_path(run_dir: &Path) -> PathBuf {
    run_dir.join(MANIFEST_FILE)
}

pub fn reports_dir(run_dir: &Path) -> PathBuf {
    run_dir.join(REPORTS_DIR)
}

pub fn load_manifest(run_dir: &Path) -> Result<Option<RunManifest>, BenchmarkError> {
    let path = manifest_path(run_dir);
    if !path.exists() {
        return Ok(None);
    }
    let raw = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let manifest = serde_json::from_str(&raw).map_err(|source| BenchmarkError::Json {
        path: path.display().to_string(),
        source,
    })?;
    Ok(Some(manifest))
}

pub fn write_manifest(run_dir: &Path, manifest: &RunManifest) -> Result<(), BenchmarkError> {
    std::fs::create_dir_all(run_dir).map_err(|e| io_err(run_dir, e))?;
    let path = manifest_path(run_dir);
    let body = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(&path, body).map_err(|e| io_err(&path, e))
}

/// Ids with a completed record on disk.
pub fn completed_reports(run_dir: &Path) -> Result<BTreeSet<String>, BenchmarkError> {
    let dir = reports_dir(run_dir);
    let mut done = BTreeSet::new();
    if !dir.exists() {
        return Ok(done);
    }
    for entry in std::fs::read_dir(&dir).map_err(|e| io_err(&dir, e))? {
        let entry = entry.map_err(|e| io_err(&dir, e))?;
        let path = entry.path();
        if path.extension().map(|e| e == "json") == Some(true) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                done.insert(stem.to_string());
            }
        }
    }
    Ok(done)
}

pub fn write_record(run_dir: &Path, record: &ReportRecord) -> Result<(), BenchmarkError> {
    let dir = reports_dir(run_dir);
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let final_path = dir.join(format!("{}.json", record.report_id));
    let tmp_path = dir.join(format!(".{}.json.tmp", record.report_id));
    let body = serde_json::to_string_pretty(record).expect("record serializes");
    std::fs::write(&tmp_path, body).map_err(|e| io_err(&tmp_path, e))?;
    std::fs::rename(&tmp_path, &final_path).map_err(|e| io_err(&final_path, e))
}

pub fn load_record(run_dir: &Path, report_id: &str) -> Result<ReportRecord, BenchmarkError> {
    let path = reports_dir(run_dir).join(format!("{report_id}.json"));
    let raw = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    serde_json::from_str(&raw).map_err(|source| BenchmarkError::Json {
        path: path.display().to_string(),
        source,
    })
}

/// Load all records, sorted by report id.
pub fn load_records(run_dir: &Path) -> Result<Vec<ReportRecord>, BenchmarkError> {
    let ids = completed_reports(run_dir)?;
    ids.iter().map(|id| load_record(run_dir, id)).collect()
}
