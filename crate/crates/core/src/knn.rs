//! Exact k-nearest-neighbour classification over stored vectors.
//!
//! The score of a query is the fraction of positive labels among its `k`
//! nearest training points (Euclidean distance, uniform weights). Equal
//! distances are resolved by training-point insertion order.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Embedding;
use crate::error::{PcgError, Result};
use crate::util::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[default]
    Uniform,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("euclidean")
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("uniform")
    }
}

impl FromStr for Metric {
    type Err = PcgError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            _ => Err(PcgError::InvalidConfig(format!("unknown metric `{s}`"))),
        }
    }
}

impl FromStr for Weighting {
    type Err = PcgError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Weighting::Uniform),
            _ => Err(PcgError::InvalidConfig(format!("unknown weighting `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default)]
    pub weighting: Weighting,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    0.5
}

impl KnnConfig {
    pub fn new(k: usize) -> Self {
        KnnConfig {
            k,
            metric: Metric::Euclidean,
            weighting: Weighting::Uniform,
            threshold: default_threshold(),
        }
    }

    /// k = 5.
    pub fn fixed_mode() -> Self {
        Self::new(5)
    }

    /// k = 7.
    pub fn cycle_mode() -> Self {
        Self::new(7)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(PcgError::InvalidConfig("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(PcgError::InvalidConfig(format!(
                "threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Stored training set.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    ids: Vec<String>,
    points: Vec<Vec<f64>>,
    labels: Vec<u8>,
    config: KnnConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub id: String,
    pub score: f64,
    pub label: u8,
}

impl KnnModel {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn config(&self) -> &KnnConfig {
        &self.config
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Score with the model's own configuration.
    pub fn score(&self, query: &[f64]) -> Result<f64> {
        knn_score(self, query, &self.config)
    }

    pub fn predict(&self, id: &str, query: &[f64]) -> Result<Prediction> {
        knn_predict(self, id, query, &self.config)
    }
}

pub fn knn_fit(
    embeddings: &[Embedding],
    labels: &HashMap<String, u8>,
    cfg: &KnnConfig,
) -> Result<KnnModel> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(embeddings.len());
    for e in embeddings {
        let label = *labels
            .get(&e.id)
            .ok_or_else(|| PcgError::MissingLabel(e.id.clone()))?;
        rows.push((e.id.clone(), e.vector.clone(), label));
    }
    fit_rows(rows, cfg)
}

/// Builds a model from `(id, vector, label)` rows in insertion order.
pub fn fit_rows(rows: Vec<(String, Vec<f64>, u8)>, cfg: &KnnConfig) -> Result<KnnModel> {
    cfg.validate()?;
    if rows.len() < cfg.k {
        return Err(PcgError::NotEnoughPoints {
            k: cfg.k,
            available: rows.len(),
        });
    }
    let dim = rows[0].1.len();
    let mut model = KnnModel {
        ids: Vec::with_capacity(rows.len()),
        points: Vec::with_capacity(rows.len()),
        labels: Vec::with_capacity(rows.len()),
        config: *cfg,
    };
    for (id, v, label) in rows {
        if v.len() != dim {
            return Err(PcgError::DimensionMismatch {
                id,
                expected: dim,
                actual: v.len(),
            });
        }
        if label > 1 {
            return Err(PcgError::InvalidConfig(format!(
                "label for `{id}` must be 0 or 1"
            )));
        }
        model.ids.push(id);
        model.points.push(v);
        model.labels.push(label);
    }
    Ok(model)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Indices of the `k` nearest training points, nearest first.
pub fn nearest(model: &KnnModel, query: &[f64], k: usize) -> Result<Vec<usize>> {
    if query.len() != model.dim() {
        return Err(PcgError::DimensionMismatch {
            id: "<query>".into(),
            expected: model.dim(),
            actual: query.len(),
        });
    }
    if k == 0 || k > model.len() {
        return Err(PcgError::NotEnoughPoints {
            k,
            available: model.len(),
        });
    }
    let mut d: Vec<(f64, usize)> = model
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| (euclidean(p, query), i))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, cmp);
        d.truncate(k);
    }
    d.sort_by(cmp);
    Ok(d.into_iter().map(|(_, i)| i).collect())
}

pub fn knn_score(model: &KnnModel, query: &[f64], cfg: &KnnConfig) -> Result<f64> {
    cfg.validate()?;
    let idx = nearest(model, query, cfg.k)?;
    let positives = idx.iter().filter(|&&i| model.labels[i] == 1).count();
    Ok(positives as f64 / cfg.k as f64)
}

pub fn knn_predict(
    model: &KnnModel,
    id: &str,
    query: &[f64],
    cfg: &KnnConfig,
) -> Result<Prediction> {
    let score = knn_score(model, query, cfg)?;
    Ok(Prediction {
        id: id.to_string(),
        score,
        label: u8::from(score >= cfg.threshold),
    })
}

/// Writes a `# k=..,metric=..,weighting=..,threshold=..` line followed by
/// `id,label,v0,...` rows.
pub fn save_model(path: &Path, model: &KnnModel) -> Result<()> {
    let c = &model.config;
    let mut out = format!(
        "# k={},metric={},weighting={},threshold={:?}\nid,label",
        c.k, c.metric, c.weighting, c.threshold
    );
    for j in 0..model.dim() {
        out.push_str(&format!(",v{j}"));
    }
    out.push('\n');
    for ((id, v), l) in model.ids.iter().zip(&model.points).zip(&model.labels) {
        out.push_str(&format!("{id},{l}"));
        for x in v {
            out.push_str(&format!(",{x:?}"));
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn load_model(path: &Path) -> Result<KnnModel> {
    let text = std::fs::read_to_string(path).map_err(|e| PcgError::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .ok_or_else(|| PcgError::parse(path, 1, "missing `# k=...` configuration line"))?;
    let mut cfg = KnnConfig::new(0);
    for kv in header.trim().split(',') {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| PcgError::parse(path, 1, format!("expected key=value, got `{kv}`")))?;
        let bad = |_| PcgError::parse(path, 1, format!("bad value for {key}: `{value}`"));
        match key.trim() {
            "k" => {
                cfg.k = value
                    .trim()
                    .parse()
                    .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?
            }
            "metric" => {
                cfg.metric = value
                    .trim()
                    .parse()
                    .map_err(|e: PcgError| bad(e.to_string()))?
            }
            "weighting" => {
                cfg.weighting = value
                    .trim()
                    .parse()
                    .map_err(|e: PcgError| bad(e.to_string()))?
            }
            "threshold" => {
                cfg.threshold = value
                    .trim()
                    .parse()
                    .map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?
            }
            other => return Err(PcgError::parse(path, 1, format!("unknown key `{other}`"))),
        }
    }

    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.trim().is_empty() || (i == 0 && line.starts_with("id,")) {
            continue;
        }
        let mut fields = line.split(',');
        let id = fields.next().unwrap_or("").trim().to_string();
        let label: u8 = fields
            .next()
            .and_then(|s| s.trim().parse().ok())
            .filter(|&l| l <= 1)
            .ok_or_else(|| PcgError::parse(path, line_no, "label must be 0 or 1"))?;
        let v = fields
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| PcgError::parse(path, line_no, format!("bad value `{s}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((id, v, label));
    }
    fit_rows(rows, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn emb(id: &str, v: Vec<f64>) -> Embedding {
        Embedding {
            id: id.into(),
            vector: v,
        }
    }

    fn model_1d(xs: &[f64], labels: &[u8], k: usize) -> KnnModel {
        let rows = xs
            .iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (&x, &l))| (format!("p{i}"), vec![x], l))
            .collect();
        fit_rows(rows, &KnnConfig::new(k)).unwrap()
    }

    #[test]
    fn fit_preconditions() {
        let es: Vec<_> = (0..10)
            .map(|i| emb(&format!("e{i}"), vec![i as f64]))
            .collect();
        let labels: HashMap<_, _> = es.iter().map(|e| (e.id.clone(), 0u8)).collect();
        assert_eq!(knn_fit(&es, &labels, &KnnConfig::new(5)).unwrap().len(), 10);
        assert!(matches!(
            knn_fit(&es[..3], &labels, &KnnConfig::new(7)),
            Err(PcgError::NotEnoughPoints { k: 7, available: 3 })
        ));
        let mut partial = labels.clone();
        partial.remove("e4");
        match knn_fit(&es, &partial, &KnnConfig::new(5)) {
            Err(PcgError::MissingLabel(id)) => assert_eq!(id, "e4"),
            other => panic!("{other:?}"),
        }
        let mut bad = es.clone();
        bad[2].vector.push(1.0);
        assert!(matches!(
            knn_fit(&bad, &labels, &KnnConfig::new(5)),
            Err(PcgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn score_examples() {
        let m = model_1d(&[1.0, 2.0, 3.0], &[1, 1, 0], 3);
        assert!((m.score(&[0.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let one = model_1d(&[1.0, 2.0, 3.0], &[1, 0, 1], 1);
        assert_eq!(one.score(&[2.0]).unwrap(), 0.0);
        assert_eq!(one.score(&[3.0]).unwrap(), 1.0);
        let neg = model_1d(&[1.0, 2.0, 3.0, 4.0], &[0; 4], 3);
        assert_eq!(neg.score(&[2.5]).unwrap(), 0.0);
        assert!(matches!(
            m.score(&[0.0, 1.0]),
            Err(PcgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ties_prefer_earlier_points() {
        // Query at 0: points at -1 and +1 are equidistant.
        let m = model_1d(&[1.0, -1.0], &[1, 0], 1);
        assert_eq!(m.score(&[0.0]).unwrap(), 1.0);
        let m = model_1d(&[-1.0, 1.0], &[0, 1], 1);
        assert_eq!(m.score(&[0.0]).unwrap(), 0.0);
        let m = model_1d(&[5.0, 5.0, 5.0, 5.0], &[0, 1, 1, 1], 2);
        assert_eq!(nearest(&m, &[5.0], 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn threshold_rule() {
        let m = model_1d(&[0.0, 0.1, 0.2, 0.3, 0.4, 9.0], &[1, 1, 1, 0, 0, 0], 5);
        let p = m.predict("q", &[0.0]).unwrap();
        assert!((p.score - 0.6).abs() < 1e-12);
        assert_eq!(p.label, 1);
        let m = model_1d(&[0.0, 0.1, 0.2, 0.3, 0.4, 9.0], &[1, 1, 0, 0, 0, 0], 5);
        let p = m.predict("q", &[0.0]).unwrap();
        assert_eq!(p.label, 0);
    }

    #[test]
    fn odd_k_never_hits_half() {
        for k in [5usize, 7] {
            assert!((0..=k).all(|m| m as f64 / k as f64 != 0.5));
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.csv");
        let rows = vec![
            ("a".to_string(), vec![0.1, -2.5], 1u8),
            ("b".to_string(), vec![1.0 / 3.0, 7.0], 0),
            ("c".to_string(), vec![1e-200, 0.0], 1),
        ];
        let cfg = KnnConfig {
            threshold: 0.25,
            ..KnnConfig::new(3)
        };
        let m = fit_rows(rows, &cfg).unwrap();
        save_model(&p, &m).unwrap();
        assert_eq!(load_model(&p).unwrap(), m);
        std::fs::write(&p, "id,label,v0\na,1,0.0\n").unwrap();
        assert!(matches!(
            load_model(&p),
            Err(PcgError::Parse { line: 1, .. })
        ));
    }

    fn brute_force(points: &[Vec<f64>], labels: &[u8], q: &[f64], k: usize) -> f64 {
        let mut d: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let s: f64 = p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum();
                (s.sqrt(), i)
            })
            .collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        d[..k].iter().filter(|(_, i)| labels[*i] == 1).count() as f64 / k as f64
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matches_exhaustive_sort(
            dim in 1usize..8,
            n in 1usize..60,
            k in 1usize..10,
            seed in any::<u64>(),
        ) {
            prop_assume!(k <= n);
            // Small integer grid so duplicate distances are common.
            let mut s = seed;
            let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (s >> 33) % 5 };
            let points: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| next() as f64).collect()).collect();
            let labels: Vec<u8> = (0..n).map(|_| (next() % 2) as u8).collect();
            let q: Vec<f64> = (0..dim).map(|_| next() as f64 + 0.5 * (next() % 2) as f64).collect();
            let rows = points.iter().cloned().zip(&labels).enumerate()
                .map(|(i, (p, &l))| (i.to_string(), p, l)).collect();
            let m = fit_rows(rows, &KnnConfig::new(k)).unwrap();
            prop_assert_eq!(m.score(&q).unwrap(), brute_force(&points, &labels, &q, k));
        }

        #[test]
        fn translation_invariant(
            pts in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3), 7..30),
            shift in proptest::collection::vec(-100.0f64..100.0, 3),
            q in proptest::collection::vec(-10.0f64..10.0, 3),
        ) {
            let labels: Vec<u8> = (0..pts.len()).map(|i| (i % 3 == 0) as u8).collect();
            let rows = |off: &[f64]| -> Vec<(String, Vec<f64>, u8)> {
                pts.iter().zip(&labels).enumerate()
                    .map(|(i, (p, &l))| (i.to_string(), p.iter().zip(off).map(|(a, b)| a + b).collect(), l))
                    .collect()
            };
            let zero = vec![0.0; 3];
            let a = fit_rows(rows(&zero), &KnnConfig::new(5)).unwrap();
            let b = fit_rows(rows(&shift), &KnnConfig::new(5)).unwrap();
            let qs: Vec<f64> = q.iter().zip(&shift).map(|(a, b)| a + b).collect();
            // Continuous coordinates: distance ties have probability zero,
            // but rounding can reorder near-ties, so compare neighbour sets
            // only when the k-th and (k+1)-th distances are well separated.
            let mut d: Vec<f64> = pts.iter().map(|p| euclidean(p, &q)).collect();
            d.sort_by(f64::total_cmp);
            prop_assume!(d[5] - d[4] > 1e-9);
            prop_assert_eq!(a.score(&q).unwrap(), b.score(&qs).unwrap());
        }
    }
}
