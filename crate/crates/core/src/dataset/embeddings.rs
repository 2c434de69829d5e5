use std::collections::HashSet;
use std::path::Path;

use crate::error::{PcgError, Result};
use crate::util::write_atomic;

/// An externally produced (or pooled) feature vector keyed by recording or
/// chunk id.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub id: String,
    pub vector: Vec<f64>,
}

/// Reads `id,v0,...,v{D-1}` rows. A leading header row whose first field is
/// `id` is skipped. All rows must share one dimension.
pub fn load_embeddings(path: &Path) -> Result<Vec<Embedding>> {
    let file = std::fs::File::open(path).map_err(|e| PcgError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut out: Vec<Embedding> = Vec::new();
    let mut seen = HashSet::new();
    let mut dim: Option<usize> = None;
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| PcgError::parse(path, line, e.to_string()))?;
        if rec.is_empty() || (rec.len() == 1 && rec[0].trim().is_empty()) {
            continue;
        }
        let id = rec[0].trim().to_string();
        if i == 0 && id == "id" {
            continue;
        }
        let vector = rec
            .iter()
            .skip(1)
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| PcgError::parse(path, line, format!("non-finite value `{s}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if vector.is_empty() {
            return Err(PcgError::parse(path, line, "row has no values"));
        }
        match dim {
            None => dim = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return Err(PcgError::DimensionMismatch {
                    id,
                    expected: d,
                    actual: vector.len(),
                })
            }
            _ => {}
        }
        if !seen.insert(id.clone()) {
            return Err(PcgError::DuplicateId(id));
        }
        out.push(Embedding { id, vector });
    }
    Ok(out)
}

pub fn write_embeddings(path: &Path, embeddings: &[Embedding]) -> Result<()> {
    let mut out = String::new();
    if let Some(first) = embeddings.first() {
        out.push_str("id");
        for j in 0..first.vector.len() {
            out.push_str(&format!(",v{j}"));
        }
        out.push('\n');
    }
    for e in embeddings {
        out.push_str(&e.id);
        for v in &e.vector {
            // Shortest representation that round-trips exactly.
            out.push_str(&format!(",{v:?}"));
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, d: usize, base: f64) -> String {
        let vals: Vec<String> = (0..d)
            .map(|j| format!("{}", base + j as f64 * 0.001))
            .collect();
        format!("{id},{}\n", vals.join(","))
    }

    #[test]
    fn two_rows_of_768() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        std::fs::write(&p, row("a", 768, 0.0) + &row("b", 768, 1.0)).unwrap();
        let e = load_embeddings(&p).unwrap();
        assert_eq!(e.len(), 2);
        assert!(e.iter().all(|x| x.vector.len() == 768));
    }

    #[test]
    fn empty_and_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        std::fs::write(&p, "").unwrap();
        assert!(load_embeddings(&p).unwrap().is_empty());
        std::fs::write(&p, "id,v0,v1\n").unwrap();
        assert!(load_embeddings(&p).unwrap().is_empty());
    }

    #[test]
    fn rejects_mismatch_duplicate_nonfinite() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        std::fs::write(&p, row("a", 768, 0.0) + &row("b", 767, 0.0)).unwrap();
        assert!(matches!(
            load_embeddings(&p),
            Err(PcgError::DimensionMismatch {
                expected: 768,
                actual: 767,
                ..
            })
        ));
        std::fs::write(&p, row("a", 4, 0.0) + &row("a", 4, 0.0)).unwrap();
        assert!(matches!(load_embeddings(&p), Err(PcgError::DuplicateId(_))));
        std::fs::write(&p, "a,1.0,NaN\n").unwrap();
        assert!(matches!(load_embeddings(&p), Err(PcgError::Parse { .. })));
        std::fs::write(&p, "a,1.0,inf\n").unwrap();
        assert!(load_embeddings(&p).is_err());
    }

    #[test]
    fn write_load_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        let e = vec![
            Embedding {
                id: "x".into(),
                vector: vec![0.1, -1.0 / 3.0, 1e-300],
            },
            Embedding {
                id: "y".into(),
                vector: vec![2.0, 0.0, -0.0],
            },
        ];
        write_embeddings(&p, &e).unwrap();
        assert_eq!(load_embeddings(&p).unwrap(), e);
    }
}
