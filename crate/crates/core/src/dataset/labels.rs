use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::error::{PcgError, Result};
use crate::util::write_atomic;

pub const LABELS_HEADER: &str = "id,label,patient_id,recording_id";

/// Binary label and grouping keys for one feature vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRecord {
    pub id: String,
    pub label: u8,
    pub patient_id: String,
    pub recording_id: String,
}

/// Reads a labels CSV with a header row. `id` and `label` columns are
/// required; missing `patient_id` / `recording_id` columns default to the id.
pub fn load_labels(path: &Path) -> Result<Vec<LabelRecord>> {
    let file = std::fs::File::open(path).map_err(|e| PcgError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| PcgError::parse(path, 1, e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (id_col, label_col) = match (col("id"), col("label")) {
        (Some(i), Some(l)) => (i, l),
        _ => {
            return Err(PcgError::parse(
                path,
                1,
                "header must contain `id` and `label`",
            ))
        }
    };
    let (patient_col, recording_col) = (col("patient_id"), col("recording_id"));

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| PcgError::parse(path, line, e.to_string()))?;
        let field = |c: usize| rec.get(c).unwrap_or("").to_string();
        let id = field(id_col);
        let label = match field(label_col).as_str() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(PcgError::parse(
                    path,
                    line,
                    format!("label must be 0 or 1, got `{other}`"),
                ))
            }
        };
        if !seen.insert(id.clone()) {
            return Err(PcgError::DuplicateId(id));
        }
        out.push(LabelRecord {
            patient_id: patient_col.map(field).unwrap_or_else(|| id.clone()),
            recording_id: recording_col.map(field).unwrap_or_else(|| id.clone()),
            label,
            id,
        });
    }
    Ok(out)
}

pub fn write_labels(path: &Path, labels: &[LabelRecord]) -> Result<()> {
    let mut out = format!("{LABELS_HEADER}\n");
    for r in labels {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.id, r.label, r.patient_id, r.recording_id
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// `id → label` lookup.
pub fn label_map(labels: &[LabelRecord]) -> HashMap<String, u8> {
    labels.iter().map(|r| (r.id.clone(), r.label)).collect()
}
