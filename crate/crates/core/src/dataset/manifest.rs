use std::collections::HashSet;
use std::path::{Path, PathBuf};

use super::{AgeGroup, Label, RecordingMeta, Sex};
use crate::error::{PcgError, Result};
use crate::util::write_atomic;

pub const MANIFEST_HEADER: [&str; 7] = [
    "recording_id",
    "patient_id",
    "wav_path",
    "seg_path",
    "label",
    "age_group",
    "sex",
];

/// Reads a recording manifest. Duplicate recording ids are rejected over the
/// whole file, before any filtering.
pub fn load_manifest(path: &Path, exclude_unknown: bool) -> Result<Vec<RecordingMeta>> {
    let file = std::fs::File::open(path).map_err(|e| PcgError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);

    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| PcgError::parse(path, 1, e.to_string()))?,
        None => return Err(PcgError::parse(path, 1, "missing header row")),
    };
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != MANIFEST_HEADER {
        return Err(PcgError::parse(
            path,
            1,
            format!("header must be `{}`", MANIFEST_HEADER.join(",")),
        ));
    }

    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| PcgError::parse(path, line, e.to_string()))?;
        if rec.len() != MANIFEST_HEADER.len() {
            return Err(PcgError::parse(
                path,
                line,
                format!(
                    "expected {} columns, found {}",
                    MANIFEST_HEADER.len(),
                    rec.len()
                ),
            ));
        }
        let field = |j: usize| rec[j].trim().to_string();
        let recording_id = field(0);
        let patient_id = field(1);
        if recording_id.is_empty() {
            return Err(PcgError::parse(path, line, "empty recording_id"));
        }
        if patient_id.is_empty() {
            return Err(PcgError::parse(path, line, "empty patient_id"));
        }
        if !seen.insert(recording_id.clone()) {
            return Err(PcgError::DuplicateId(recording_id));
        }
        let label: Label = field(4)
            .parse()
            .map_err(|m| PcgError::parse(path, line, m))?;
        let age_group = AgeGroup::parse(&rec[5]).map_err(|m| PcgError::parse(path, line, m))?;
        let sex = Sex::parse(&rec[6]).map_err(|m| PcgError::parse(path, line, m))?;
        let seg = field(3);
        let meta = RecordingMeta {
            recording_id,
            patient_id,
            wav_path: field(2),
            seg_path: (!seg.is_empty()).then_some(seg),
            label,
            age_group,
            sex,
        };
        if exclude_unknown && meta.label == Label::Unknown {
            continue;
        }
        rows.push(meta);
    }
    Ok(rows)
}

pub fn write_manifest(path: &Path, rows: &[RecordingMeta]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| PcgError::Other(e.to_string());
    w.write_record(MANIFEST_HEADER).map_err(io)?;
    for r in rows {
        let age = r.age_group.map(|a| a.to_string()).unwrap_or_default();
        let sex = r.sex.map(|s| s.to_string()).unwrap_or_default();
        w.write_record([
            r.recording_id.as_str(),
            r.patient_id.as_str(),
            r.wav_path.as_str(),
            r.seg_path.as_deref().unwrap_or(""),
            &r.label.to_string(),
            &age,
            &sex,
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| PcgError::Other(e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Resolves a manifest-relative path against the manifest's directory.
pub fn resolve_path(manifest: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest.parent().unwrap_or(Path::new(".")).join(p)
    }
}
